# Graph-mode model whose optimizer is created but never minimizes the loss.
import tensorflow as tf

x = tf.placeholder(tf.float32, [None, 784])
y_ = tf.placeholder(tf.float32, [None, 10])

hidden = tf.layers.dense(x, 128, activation=tf.nn.relu)
logits = tf.layers.dense(hidden, 10)

loss = tf.losses.softmax_cross_entropy(onehot_labels=y_, logits=logits)
optimizer = tf.train.GradientDescentOptimizer(0.5)

init = tf.global_variables_initializer()
with tf.Session() as sess:
    sess.run(init)
    for step in range(1000):
        sess.run(loss)
