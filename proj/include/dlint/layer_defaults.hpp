#ifndef DLINT_LAYER_DEFAULTS_HPP
#define DLINT_LAYER_DEFAULTS_HPP

// Library default values assumed when a script omits an argument. Kept in
// one place so the assumed API surface is easy to audit against the library
// documentation.

namespace dlint::defaults {

inline constexpr const char* kPadding = "valid";
inline constexpr const char* kActivation = "none";
inline constexpr bool kUseBias = true;
inline constexpr const char* kKernelInitializer = "glorot_uniform";
inline constexpr const char* kBiasInitializer = "zeros";
inline constexpr int kConvStride = 1;
inline constexpr int kPoolSize = 2;     // keras MaxPooling2D/AveragePooling2D
inline constexpr double kTfDropoutRate = 0.5;  // tf.layers.dropout

}  // namespace dlint::defaults

#endif
