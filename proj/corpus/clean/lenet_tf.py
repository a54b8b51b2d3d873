# LeNet-style MNIST classifier, graph-mode TensorFlow.
import tensorflow as tf
from tensorflow.examples.tutorials.mnist import input_data

mnist = input_data.read_data_sets("MNIST_data", one_hot=True)

x = tf.placeholder(tf.float32, [None, 784])
y_ = tf.placeholder(tf.float32, [None, 10])

x_image = tf.reshape(x, [-1, 28, 28, 1])
conv1 = tf.layers.conv2d(x_image, 32, [5, 5], padding='same', activation=tf.nn.relu)
pool1 = tf.layers.max_pooling2d(conv1, [2, 2], 2)
conv2 = tf.layers.conv2d(pool1, 64, [5, 5], padding='same', activation=tf.nn.relu)
pool2 = tf.layers.max_pooling2d(conv2, [2, 2], 2)
flat = tf.layers.flatten(pool2)
dense = tf.layers.dense(flat, 1024, activation=tf.nn.relu)
dropped = tf.layers.dropout(dense, rate=0.4)
logits = tf.layers.dense(dropped, 10)

loss = tf.losses.softmax_cross_entropy(onehot_labels=y_, logits=logits)
train_op = tf.train.GradientDescentOptimizer(0.5).minimize(loss)

init = tf.global_variables_initializer()
with tf.Session() as sess:
    sess.run(init)
    for step in range(2000):
        batch = mnist.train.next_batch(50)
        sess.run(train_op, feed_dict={x: batch[0], y_: batch[1]})
