/**
 * 3x3 same-padding convolution with a hand-written gradient.
 *
 * The pure-JS tfjs-cpu backend implements Conv2DBackpropFilter/Input with
 * naive loops that are ~50x slower than its im2col forward kernel, which
 * makes training unusable. Both backward passes are classic convolution
 * identities, so they are expressed here as tf.conv2d forwards:
 *
 *   dX = conv2d(dY, flip(W) with in/out channels swapped, 'same')
 *   dW = conv2d(X^T padded, dY^T, 'valid')   (batch and channel axes traded)
 *
 * The spatial kernel flip uses a constant 9x9 permutation matmul because
 * tf.reverse is another pathologically slow cpu kernel.
 */

import * as tf from "@tensorflow/tfjs";

let flipPermutation: tf.Tensor2D | undefined;

function flipMatrix(): tf.Tensor2D {
  if (!flipPermutation) {
    const buf = new Float32Array(81);
    for (let i = 0; i < 9; i++) buf[i * 9 + (8 - i)] = 1;
    flipPermutation = tf.keep(tf.tensor2d(buf, [9, 9]));
  }
  return flipPermutation;
}

function flipKernel(w: tf.Tensor4D): tf.Tensor4D {
  const [kh, kw, cin, cout] = w.shape;
  const flat = tf.reshape(w, [kh * kw, cin * cout]);
  return tf.reshape(tf.matMul(flipMatrix(), flat), [kh, kw, cin, cout]);
}

export const conv3x3 = tf.customGrad((...args: unknown[]) => {
  const [x, w, save] = args as [tf.Tensor4D, tf.Tensor4D, tf.GradSaveFunc];
  const value = tf.conv2d(x, w, 1, "same");
  save([x, w]);
  return {
    value,
    gradFunc: (dy: tf.Tensor4D, saved: tf.Tensor[]) => {
      const [xs, ws] = saved as [tf.Tensor4D, tf.Tensor4D];
      const wT = tf.transpose(flipKernel(ws), [0, 1, 3, 2]);
      const dx = tf.conv2d(dy, wT as tf.Tensor4D, 1, "same");
      const xPad = tf.pad(xs, [[0, 0], [1, 1], [1, 1], [0, 0]]);
      const xT = tf.transpose(xPad, [3, 1, 2, 0]);
      const dyT = tf.transpose(dy, [1, 2, 0, 3]);
      const dw = tf.transpose(
        tf.conv2d(xT as tf.Tensor4D, dyT as tf.Tensor4D, 1, "valid"),
        [1, 2, 0, 3]
      );
      return [dx, dw];
    },
  };
}) as (x: tf.Tensor4D, w: tf.Tensor4D) => tf.Tensor4D;
