#ifndef DLINT_ATTR_VALUE_HPP
#define DLINT_ATTR_VALUE_HPP

#include <cstdint>
#include <map>
#include <string>
#include <variant>
#include <vector>

namespace dlint {

// Attribute value carried by graph nodes. Tagged union over the scalar and
// list types the frontend can extract from source literals.
class AttrValue {
 public:
  using IntList = std::vector<std::int64_t>;

  static AttrValue of_int(std::int64_t x) { return AttrValue(x); }
  static AttrValue of_float(double x) { return AttrValue(x); }
  static AttrValue of_bool(bool x) { return AttrValue(x); }
  static AttrValue of_text(std::string x) { return AttrValue(std::move(x)); }
  static AttrValue of_ints(IntList x) { return AttrValue(std::move(x)); }

  bool is_int() const { return std::holds_alternative<std::int64_t>(v_); }
  bool is_float() const { return std::holds_alternative<double>(v_); }
  bool is_bool() const { return std::holds_alternative<bool>(v_); }
  bool is_text() const { return std::holds_alternative<std::string>(v_); }
  bool is_ints() const { return std::holds_alternative<IntList>(v_); }

  std::int64_t as_int() const { return std::get<std::int64_t>(v_); }
  double as_float() const { return std::get<double>(v_); }
  bool as_bool() const { return std::get<bool>(v_); }
  const std::string& as_text() const { return std::get<std::string>(v_); }
  const IntList& as_ints() const { return std::get<IntList>(v_); }

  // Numeric view used by rule predicates; lists are not numeric.
  bool numeric() const { return is_int() || is_float(); }
  double as_number() const { return is_int() ? double(as_int()) : as_float(); }

  bool operator==(const AttrValue& o) const { return v_ == o.v_; }
  bool operator!=(const AttrValue& o) const { return !(*this == o); }

  // Deterministic textual form, used by the graph debug dump.
  std::string to_string() const;

 private:
  template <typename T>
  explicit AttrValue(T x) : v_(std::move(x)) {}

  std::variant<std::int64_t, double, bool, std::string, IntList> v_;
};

using AttrMap = std::map<std::string, AttrValue>;

}  // namespace dlint

#endif
