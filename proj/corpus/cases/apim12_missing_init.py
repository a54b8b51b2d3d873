# Graph-mode training without a global variable initialization.
import tensorflow as tf

x = tf.placeholder(tf.float32, [None, 784])
y_ = tf.placeholder(tf.float32, [None, 10])

x_image = tf.reshape(x, [-1, 28, 28, 1])
conv1 = tf.layers.conv2d(x_image, 32, [5, 5], padding='same', activation=tf.nn.relu)
pool1 = tf.layers.max_pooling2d(conv1, [2, 2], 2)
conv2 = tf.layers.conv2d(pool1, 64, [5, 5], padding='same', activation=tf.nn.relu)
pool2 = tf.layers.max_pooling2d(conv2, [2, 2], 2)
flat = tf.layers.flatten(pool2)
dense = tf.layers.dense(flat, 1024, activation=tf.nn.relu)
logits = tf.layers.dense(dense, 10)

loss = tf.losses.softmax_cross_entropy(onehot_labels=y_, logits=logits)
train_op = tf.train.GradientDescentOptimizer(0.5).minimize(loss)

with tf.Session() as sess:
    for step in range(1000):
        sess.run(train_op)
