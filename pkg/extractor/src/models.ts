/**
 * Local TF.js model loading and image embedding.
 *
 * Models are plain TF.js layers artifacts on disk, one directory per tag
 * under a common root: `<modelsDir>/<tag>/model.json` plus weight shards.
 * Nothing is downloaded; a missing directory is reported with instructions
 * instead of a bare ENOENT.
 */

import { existsSync, readFileSync } from 'node:fs';
import { dirname, join, resolve } from 'node:path';

import * as tf from '@tensorflow/tfjs';

import type { RgbImage } from './ppm.js';

export const MODEL_TAGS = ['clip', 'blip2', 'sd'] as const;
export type ModelTag = (typeof MODEL_TAGS)[number];

export const POOLINGS = ['cls_token', 'mean_pool'] as const;
export type Pooling = (typeof POOLINGS)[number];

export interface ExtractorSpec {
  modelTag: ModelTag;
  /** applied only when the model's features are not natively 1D */
  pooling: Pooling;
}

export function validateSpec(spec: ExtractorSpec): void {
  if (!MODEL_TAGS.includes(spec.modelTag)) {
    throw new Error(`unknown model tag ${JSON.stringify(spec.modelTag)}, expected one of ${MODEL_TAGS.join(', ')}`);
  }
  if (!POOLINGS.includes(spec.pooling)) {
    throw new Error(`unknown pooling ${JSON.stringify(spec.pooling)}, expected one of ${POOLINGS.join(', ')}`);
  }
}

/** IO handler that serves layers-model artifacts from a local directory. */
function diskLoader(modelJsonPath: string): tf.io.IOHandler {
  return {
    async load(): Promise<tf.io.ModelArtifacts> {
      const dir = dirname(modelJsonPath);
      const manifest = JSON.parse(readFileSync(modelJsonPath, 'utf8'));
      const weightSpecs: tf.io.WeightsManifestEntry[] = [];
      const shards: Buffer[] = [];
      for (const group of manifest.weightsManifest ?? []) {
        weightSpecs.push(...group.weights);
        for (const path of group.paths) {
          shards.push(readFileSync(join(dir, path)));
        }
      }
      const weightData = Buffer.concat(shards);
      return {
        modelTopology: manifest.modelTopology,
        format: manifest.format,
        generatedBy: manifest.generatedBy,
        convertedBy: manifest.convertedBy,
        weightSpecs,
        weightData: weightData.buffer.slice(
          weightData.byteOffset, weightData.byteOffset + weightData.byteLength),
      };
    },
  };
}

export async function loadLocalModel(modelsDir: string, tag: ModelTag): Promise<tf.LayersModel> {
  const path = resolve(modelsDir, tag, 'model.json');
  if (!existsSync(path)) {
    throw new Error(
      `model "${tag}" is not available: expected a TF.js layers model at ${path}. ` +
      `Convert the pre-trained network with tensorflowjs_converter (or save one from ` +
      `tfjs) and place model.json plus its weight shards in that directory.`);
  }
  return tf.loadLayersModel(diskLoader(path));
}

export interface Embedding {
  values: Float32Array;
  /** provenance: the model tag, plus the pooling when one was applied */
  sourceTag: string;
}

/**
 * Run one image through the model and reduce the features to 1D.
 *
 * The image is bilinearly resized to the model's fixed input size when it
 * has one. Rank-2 outputs are treated as (tokens, dim) and support both
 * poolings; rank-3 outputs are spatial latents where only mean_pool makes
 * sense; rank-1 outputs are used as-is.
 */
export function embedImage(model: tf.LayersModel, image: RgbImage, spec: ExtractorSpec): Embedding {
  validateSpec(spec);
  const out = tf.tidy(() => {
    let x: tf.Tensor3D = tf.tensor3d(image.data, [image.height, image.width, 3]);
    const want = model.inputs[0].shape; // [batch, h, w, c]
    if (want.length === 4 && want[1] != null && want[2] != null) {
      if (want[1] !== image.height || want[2] !== image.width) {
        x = tf.image.resizeBilinear(x, [want[1], want[2]]);
      }
    }
    const y = model.predict(x.expandDims(0)) as tf.Tensor;
    return y.squeeze([0]);
  });
  try {
    let pooled: tf.Tensor;
    let tagged: string;
    if (out.rank === 1) {
      pooled = out;
      tagged = spec.modelTag;
    } else if (out.rank === 2) {
      pooled = spec.pooling === 'cls_token'
        ? tf.tidy(() => out.slice([0, 0], [1, out.shape[1]!]).squeeze([0]))
        : tf.tidy(() => out.mean(0));
      tagged = `${spec.modelTag}:${spec.pooling}`;
    } else if (out.rank === 3) {
      if (spec.pooling === 'cls_token') {
        throw new Error(`cls_token pooling needs token-shaped features, ` +
          `but "${spec.modelTag}" produced a ${out.shape.join('x')} spatial map; use mean_pool`);
      }
      pooled = tf.tidy(() => out.mean([0, 1]));
      tagged = `${spec.modelTag}:${spec.pooling}`;
    } else {
      throw new Error(`cannot reduce rank-${out.rank} model output to a 1D prior`);
    }
    try {
      return { values: pooled.dataSync() as Float32Array, sourceTag: tagged };
    } finally {
      if (pooled !== out) pooled.dispose();
    }
  } finally {
    out.dispose();
  }
}

/** The width of the 1D feature this model + pooling combination produces. */
export function embeddingWidth(model: tf.LayersModel, spec: ExtractorSpec): number {
  const shape = model.outputs[0].shape; // leading batch dim is null
  if (shape.length === 2) return shape[1]!;
  if (shape.length === 3) return spec.pooling === 'cls_token' ? shape[2]! : shape[2]!;
  if (shape.length === 4) return shape[3]!;
  throw new Error(`unsupported model output shape [${shape.join(', ')}]`);
}
