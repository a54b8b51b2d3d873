# Hidden dense widths grow with depth.
from keras.models import Sequential
from keras.layers import Dense

(x_train, y_train), (x_test, y_test) = load_tabular()

model = Sequential()
model.add(Dense(128, activation='relu', input_shape=(100,)))
model.add(Dense(512, activation='relu'))
model.add(Dense(10, activation='softmax'))
model.compile(loss='categorical_crossentropy', optimizer='adam', metrics=['accuracy'])
model.fit(x_train, y_train, epochs=20, batch_size=64)
