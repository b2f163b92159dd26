/**
 * Load and save tfjs layers models from a plain directory (model.json +
 * weights.bin + labels.json) without the native node bindings, so the
 * extractor runs anywhere Node runs.
 *
 * labels.json is an array of class names aligned with the model's softmax
 * output indices; the extractor needs it to score ground-truth classes.
 */

import * as fs from 'fs';
import * as path from 'path';
import * as tf from '@tensorflow/tfjs';

const WEIGHTS_FILE = 'weights.bin';
const MODEL_FILE = 'model.json';
const LABELS_FILE = 'labels.json';

function toArrayBuffer(buf: Buffer): ArrayBuffer {
  const out = new ArrayBuffer(buf.byteLength);
  new Uint8Array(out).set(buf);
  return out;
}

export async function saveModelDir(
  model: tf.LayersModel,
  dir: string,
  labels: string[],
): Promise<void> {
  fs.mkdirSync(dir, { recursive: true });
  await model.save(
    tf.io.withSaveHandler(async artifacts => {
      const weightData = artifacts.weightData as ArrayBuffer;
      fs.writeFileSync(path.join(dir, WEIGHTS_FILE), Buffer.from(weightData));
      const manifest = {
        modelTopology: artifacts.modelTopology,
        format: 'layers-model',
        weightsManifest: [{ paths: [WEIGHTS_FILE], weights: artifacts.weightSpecs }],
      };
      fs.writeFileSync(path.join(dir, MODEL_FILE), JSON.stringify(manifest));
      return {
        modelArtifactsInfo: {
          dateSaved: new Date(),
          modelTopologyType: 'JSON',
        },
      };
    }),
  );
  fs.writeFileSync(path.join(dir, LABELS_FILE), JSON.stringify(labels));
}

export async function loadModelDir(dir: string): Promise<tf.LayersModel> {
  const manifestPath = path.join(dir, MODEL_FILE);
  if (!fs.existsSync(manifestPath)) {
    throw new Error(`no ${MODEL_FILE} in ${dir}`);
  }
  const manifest = JSON.parse(fs.readFileSync(manifestPath, 'utf-8'));
  const weightSpecs = manifest.weightsManifest.flatMap(
    (group: { weights: tf.io.WeightsManifestEntry[] }) => group.weights,
  );
  const buffers = manifest.weightsManifest.flatMap((group: { paths: string[] }) =>
    group.paths.map((p: string) => fs.readFileSync(path.join(dir, p))),
  );
  const weightData = toArrayBuffer(Buffer.concat(buffers));
  return tf.loadLayersModel(
    tf.io.fromMemory({
      modelTopology: manifest.modelTopology,
      weightSpecs,
      weightData,
    }),
  );
}

export function loadLabels(dir: string): string[] {
  const labels = JSON.parse(fs.readFileSync(path.join(dir, LABELS_FILE), 'utf-8'));
  if (!Array.isArray(labels) || !labels.every(x => typeof x === 'string')) {
    throw new Error(`${LABELS_FILE} must be a JSON array of class names`);
  }
  return labels;
}
