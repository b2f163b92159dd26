/**
 * Pure-JS image decoding (PNG via pngjs, JPEG via jpeg-js) into float
 * tensors in [0, 1], resized to the model's input size.
 */

import * as fs from 'fs';
import * as path from 'path';
import * as tf from '@tensorflow/tfjs';
import * as jpeg from 'jpeg-js';
import { PNG } from 'pngjs';

export const IMAGE_EXTENSIONS = new Set(['.png', '.jpg', '.jpeg']);

/** RGBA bytes to a [height, width, 3] float tensor scaled to [0, 1]. */
function rgbaToTensor(data: Uint8Array, width: number, height: number): tf.Tensor3D {
  const rgb = new Float32Array(width * height * 3);
  for (let i = 0, j = 0; i < data.length; i += 4, j += 3) {
    rgb[j] = data[i] / 255;
    rgb[j + 1] = data[i + 1] / 255;
    rgb[j + 2] = data[i + 2] / 255;
  }
  return tf.tensor3d(rgb, [height, width, 3]);
}

/** Decode a PNG or JPEG file; throws on anything undecodable. */
export function decodeImage(filePath: string): tf.Tensor3D {
  const ext = path.extname(filePath).toLowerCase();
  const bytes = fs.readFileSync(filePath);
  if (ext === '.png') {
    const png = PNG.sync.read(bytes);
    return rgbaToTensor(png.data, png.width, png.height);
  }
  if (ext === '.jpg' || ext === '.jpeg') {
    const img = jpeg.decode(bytes, { useTArray: true, maxMemoryUsageInMB: 64 });
    return rgbaToTensor(img.data, img.width, img.height);
  }
  throw new Error(`unsupported image extension: ${filePath}`);
}

/** Decode and bilinearly resize to the model's expected input size. */
export function loadImageForModel(filePath: string, height: number, width: number): tf.Tensor3D {
  return tf.tidy(() => {
    const img = decodeImage(filePath);
    if (img.shape[0] === height && img.shape[1] === width) return img;
    return tf.image.resizeBilinear(img, [height, width]);
  });
}
