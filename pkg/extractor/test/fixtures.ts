/**
 * Test fixtures: a small deterministic pretrained-style classifier whose
 * deepest convolutional layer is 256 channels wide, and seeded PNG/JPEG
 * generation for class-per-subdirectory image trees.
 */

import * as fs from 'fs';
import * as path from 'path';
import * as tf from '@tensorflow/tfjs';
import * as jpeg from 'jpeg-js';
import { PNG } from 'pngjs';

import { saveModelDir } from '../src/model-io';

export const FEATURE_LAYER = 'top_conv';
export const INPUT_SIZE = 24;

/** Deterministic float PRNG in [0, 1). */
export function mulberry32(seed: number): () => number {
  let state = seed >>> 0;
  return () => {
    state = (state + 0x6d2b79f5) >>> 0;
    let t = state;
    t = Math.imul(t ^ (t >>> 15), t | 1);
    t ^= t + Math.imul(t ^ (t >>> 7), t | 61);
    return ((t ^ (t >>> 14)) >>> 0) / 4294967296;
  };
}

export function buildClassifier(
  labels: string[],
  featureChannels = 256,
  seed = 7,
): tf.LayersModel {
  const model = tf.sequential();
  model.add(
    tf.layers.conv2d({
      inputShape: [INPUT_SIZE, INPUT_SIZE, 3],
      filters: 8,
      kernelSize: 3,
      strides: 2,
      padding: 'same',
      activation: 'relu',
      name: 'entry_conv',
      kernelInitializer: tf.initializers.glorotUniform({ seed }),
      biasInitializer: 'zeros',
    }),
  );
  model.add(
    tf.layers.conv2d({
      filters: featureChannels,
      kernelSize: 3,
      padding: 'same',
      activation: 'relu',
      name: FEATURE_LAYER,
      kernelInitializer: tf.initializers.glorotUniform({ seed: seed + 1 }),
      biasInitializer: 'zeros',
    }),
  );
  model.add(tf.layers.globalMaxPooling2d({ name: 'pool' }));
  model.add(
    tf.layers.dense({
      units: labels.length,
      activation: 'softmax',
      name: 'predictions',
      kernelInitializer: tf.initializers.glorotUniform({ seed: seed + 2 }),
      biasInitializer: 'zeros',
    }),
  );
  return model;
}

/** A variant whose capture layer has no activation, so outputs go negative. */
export function buildLinearFeatureClassifier(labels: string[], seed = 11): tf.LayersModel {
  const model = tf.sequential();
  model.add(
    tf.layers.conv2d({
      inputShape: [INPUT_SIZE, INPUT_SIZE, 3],
      filters: 8,
      kernelSize: 3,
      padding: 'same',
      name: 'raw_conv',
      kernelInitializer: tf.initializers.glorotUniform({ seed }),
      biasInitializer: 'zeros',
    }),
  );
  model.add(tf.layers.globalMaxPooling2d({ name: 'pool' }));
  model.add(tf.layers.dense({ units: labels.length, activation: 'softmax', name: 'predictions' }));
  return model;
}

export async function writePretrainedModel(
  dir: string,
  labels: string[],
  options: { featureChannels?: number; linearFeatures?: boolean } = {},
): Promise<void> {
  const model = options.linearFeatures
    ? buildLinearFeatureClassifier(labels)
    : buildClassifier(labels, options.featureChannels ?? 256);
  await saveModelDir(model, dir, labels);
  model.dispose();
}

function randomPixels(rand: () => number, size: number, bias: [number, number, number]): Buffer {
  const data = Buffer.alloc(size * size * 4);
  for (let i = 0; i < size * size; i++) {
    data[i * 4] = Math.floor(255 * Math.min(1, rand() * bias[0]));
    data[i * 4 + 1] = Math.floor(255 * Math.min(1, rand() * bias[1]));
    data[i * 4 + 2] = Math.floor(255 * Math.min(1, rand() * bias[2]));
    data[i * 4 + 3] = 255;
  }
  return data;
}

export function writePng(
  filePath: string,
  rand: () => number,
  bias: [number, number, number],
  size = INPUT_SIZE,
): void {
  const png = new PNG({ width: size, height: size });
  randomPixels(rand, size, bias).copy(png.data);
  fs.writeFileSync(filePath, PNG.sync.write(png));
}

export function writeJpeg(
  filePath: string,
  rand: () => number,
  bias: [number, number, number],
  size = INPUT_SIZE,
): void {
  const encoded = jpeg.encode(
    { data: randomPixels(rand, size, bias), width: size, height: size },
    90,
  );
  fs.writeFileSync(filePath, encoded.data);
}

/** Class-per-subdirectory tree with deterministic per-class color biases. */
export function writeImageTree(
  imagesDir: string,
  labels: string[],
  perClass: number,
  seed = 100,
): void {
  const biases: [number, number, number][] = [
    [1.6, 0.6, 0.6],
    [0.6, 1.6, 0.6],
    [0.6, 0.6, 1.6],
    [1.2, 1.2, 0.4],
  ];
  labels.forEach((label, classIndex) => {
    const dir = path.join(imagesDir, label);
    fs.mkdirSync(dir, { recursive: true });
    const rand = mulberry32(seed + classIndex);
    for (let i = 0; i < perClass; i++) {
      const file = path.join(dir, `img_${String(i).padStart(2, '0')}`);
      const bias = biases[classIndex % biases.length];
      if (i % 3 === 2) {
        writeJpeg(`${file}.jpg`, rand, bias);
      } else {
        writePng(`${file}.png`, rand, bias);
      }
    }
  });
}
