# Graph-mode model that hard-codes the batch size inside a reshape.
import tensorflow as tf

x = tf.placeholder(tf.float32, [None, 784])
y_ = tf.placeholder(tf.float32, [None, 10])

fixed = tf.reshape(x, [50, 784])
hidden = tf.layers.dense(fixed, 128, activation=tf.nn.relu)
logits = tf.layers.dense(hidden, 10)

loss = tf.losses.softmax_cross_entropy(onehot_labels=y_, logits=logits)
train_op = tf.train.GradientDescentOptimizer(0.5).minimize(loss)

init = tf.global_variables_initializer()
with tf.Session() as sess:
    sess.run(init)
    for step in range(1000):
        sess.run(train_op)
