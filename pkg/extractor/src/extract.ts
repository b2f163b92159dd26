/**
 * Run a pretrained image classifier over a class-per-subdirectory image
 * tree, capture one intermediate layer's activations, and emit exchange
 * format feature files plus a manifest.
 *
 * The captured layer defaults to the model's last convolutional output
 * (the deepest layer with a [batch, H, W, C] shape). Features are written
 * spatial-last [H, W, C], which is tfjs's native layout, and are expected
 * to be post-activation: negative captured values abort the run, since the
 * downstream statistics assume non-negative activations.
 */

import * as fs from 'fs';
import * as path from 'path';
import * as tf from '@tensorflow/tfjs';

import { loadImageForModel, IMAGE_EXTENSIONS } from './images';
import { manifestToJsonl, ManifestRecord } from './manifest';
import { loadLabels, loadModelDir } from './model-io';
import { encodeNpy } from './npy';

export interface ExtractionSpec {
  /** Directory holding model.json, weights.bin, labels.json. */
  modelDir: string;
  /** Layer to capture; defaults to the last layer with a 4-D output. */
  layerName?: string;
  /** Image tree: one subdirectory per class. */
  imagesDir: string;
  /** Output directory; receives features/ and manifest.jsonl. */
  outDir: string;
  split: 'train' | 'test';
}

export interface ExtractionResult {
  records: ManifestRecord[];
  channels: number;
  featureHeight: number;
  featureWidth: number;
  skipped: string[];
  manifestPath: string;
}

function findFeatureLayer(model: tf.LayersModel, layerName?: string): tf.layers.Layer {
  if (layerName) {
    try {
      return model.getLayer(layerName);
    } catch {
      throw new Error(
        `layer '${layerName}' not found; model layers: ${model.layers.map(l => l.name).join(', ')}`,
      );
    }
  }
  const spatial = model.layers.filter(layer => {
    const shape = layer.outputShape;
    return Array.isArray(shape) && shape.length === 4 && !Array.isArray(shape[0]);
  });
  if (spatial.length === 0) {
    throw new Error('model has no layer with a [batch, H, W, C] output to capture');
  }
  return spatial[spatial.length - 1];
}

function listClassDirs(imagesDir: string): string[] {
  return fs
    .readdirSync(imagesDir, { withFileTypes: true })
    .filter(entry => entry.isDirectory())
    .map(entry => entry.name)
    .sort();
}

function listImages(dir: string): string[] {
  return fs
    .readdirSync(dir)
    .filter(name => IMAGE_EXTENSIONS.has(path.extname(name).toLowerCase()))
    .sort();
}

export async function extract(spec: ExtractionSpec): Promise<ExtractionResult> {
  const model = await loadModelDir(spec.modelDir);
  const labels = loadLabels(spec.modelDir);
  const layer = findFeatureLayer(model, spec.layerName);

  const probe = tf.model({
    inputs: model.inputs,
    outputs: [layer.output as tf.SymbolicTensor, model.outputs[0]],
  });
  const inputShape = model.inputs[0].shape;
  const [inH, inW] = [inputShape[1], inputShape[2]];
  if (!inH || !inW) {
    throw new Error(`model input height/width must be static, got ${JSON.stringify(inputShape)}`);
  }

  const featuresDir = path.join(spec.outDir, 'features');
  fs.mkdirSync(featuresDir, { recursive: true });

  const records: ManifestRecord[] = [];
  const skipped: string[] = [];
  let channels = -1;
  let featureHeight = -1;
  let featureWidth = -1;

  for (const classDir of listClassDirs(spec.imagesDir)) {
    const gtIndex = labels.indexOf(classDir);
    if (gtIndex < 0) {
      throw new Error(`class directory '${classDir}' is not in the model's labels.json`);
    }
    for (const fileName of listImages(path.join(spec.imagesDir, classDir))) {
      const imagePath = path.join(spec.imagesDir, classDir, fileName);
      let image: tf.Tensor3D;
      try {
        image = loadImageForModel(imagePath, inH, inW);
      } catch (err) {
        console.warn(`warning: skipping undecodable image ${imagePath}: ${err}`);
        skipped.push(imagePath);
        continue;
      }

      const { featureData, featureShape, probs } = tf.tidy(() => {
        const batch = image.expandDims(0);
        const [feature, output] = probe.predict(batch) as tf.Tensor[];
        const squeezed = feature.squeeze([0]);
        return {
          featureData: squeezed.dataSync() as Float32Array,
          featureShape: squeezed.shape as number[],
          probs: (output.squeeze([0]).dataSync() as Float32Array),
        };
      });
      image.dispose();

      if (featureShape.length !== 3) {
        throw new Error(`captured layer output is not [H, W, C]: got [${featureShape}]`);
      }
      const [h, w, c] = featureShape;
      if (channels === -1) {
        [featureHeight, featureWidth, channels] = [h, w, c];
      } else if (c !== channels) {
        throw new Error(`channel count changed between images: ${channels} then ${c}`);
      }
      for (let i = 0; i < featureData.length; i++) {
        if (featureData[i] < 0) {
          throw new Error(
            `captured layer '${layer.name}' emitted a negative value; ` +
              'capture a post-activation layer instead',
          );
        }
      }

      let predIndex = 0;
      for (let i = 1; i < probs.length; i++) {
        if (probs[i] > probs[predIndex]) predIndex = i;
      }

      const stem = fileName.replace(/\.[^.]+$/, '');
      const featureFile = `features/${classDir}__${stem}.npy`;
      fs.writeFileSync(
        path.join(spec.outDir, featureFile),
        encodeNpy(featureData, [h, w, c], 'f4'),
      );
      const record: ManifestRecord = {
        id: `${classDir}/${stem}`,
        class: classDir,
        feature: featureFile,
        prob: probs[gtIndex],
        split: spec.split,
      };
      if (spec.split === 'test') {
        record.pred = labels[predIndex];
      }
      records.push(record);
    }
  }

  // The probe shares its layers with the source model; disposing the model
  // frees the weights for both.
  model.dispose();

  const manifestPath = path.join(spec.outDir, 'manifest.jsonl');
  fs.writeFileSync(manifestPath, manifestToJsonl(records), 'utf-8');
  return { records, channels, featureHeight, featureWidth, skipped, manifestPath };
}
