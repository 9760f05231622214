/**
 * Deterministic toy models for tests and offline smoke runs.
 *
 * Real CLIP/BLIP2/SD weights are far too large to ship here; these models
 * have the same on-disk layout (TF.js layers artifacts) and exercise every
 * output rank the extractor has to reduce: a native 1D embedding, a
 * (tokens, dim) matrix, and a spatial latent map.
 */

import { mkdirSync, writeFileSync } from 'node:fs';
import { join } from 'node:path';

import * as tf from '@tensorflow/tfjs';

export type FixtureKind = 'embed' | 'tokens' | 'latent';

/** Small deterministic PRNG so fixture weights never depend on tf's seeding. */
function mulberry32(seed: number): () => number {
  let a = seed >>> 0;
  return () => {
    a = (a + 0x6d2b79f5) >>> 0;
    let t = a;
    t = Math.imul(t ^ (t >>> 15), t | 1);
    t ^= t + Math.imul(t ^ (t >>> 7), t | 61);
    return ((t ^ (t >>> 14)) >>> 0) / 4294967296;
  };
}

export function makeFixtureModel(kind: FixtureKind, dim: number, seed = 7): tf.LayersModel {
  const model = tf.sequential();
  if (kind === 'embed') {
    model.add(tf.layers.flatten({ inputShape: [8, 8, 3] }));
    model.add(tf.layers.dense({ units: dim, activation: 'tanh' }));
  } else if (kind === 'tokens') {
    model.add(tf.layers.flatten({ inputShape: [8, 8, 3] }));
    model.add(tf.layers.dense({ units: 4 * dim, activation: 'tanh' }));
    model.add(tf.layers.reshape({ targetShape: [4, dim] }));
  } else {
    model.add(tf.layers.conv2d({
      inputShape: [8, 8, 3], filters: dim, kernelSize: 3,
      padding: 'same', activation: 'tanh',
    }));
  }
  const rand = mulberry32(seed);
  model.setWeights(model.getWeights().map((w) => {
    const flat = new Float32Array(w.size);
    for (let i = 0; i < flat.length; i++) flat[i] = (rand() - 0.5) * 0.4;
    return tf.tensor(flat, w.shape);
  }));
  return model;
}

/** Write layers-model artifacts the way tensorflowjs_converter lays them out. */
export async function saveModelDir(model: tf.LayersModel, dir: string): Promise<void> {
  mkdirSync(dir, { recursive: true });
  await model.save(tf.io.withSaveHandler(async (artifacts) => {
    const weightData = artifacts.weightData as ArrayBuffer;
    writeFileSync(join(dir, 'weights.bin'), Buffer.from(weightData));
    writeFileSync(join(dir, 'model.json'), JSON.stringify({
      modelTopology: artifacts.modelTopology,
      format: 'layers-model',
      generatedBy: 'osf-extractor fixture',
      convertedBy: null,
      weightsManifest: [{ paths: ['weights.bin'], weights: artifacts.weightSpecs }],
    }));
    return { modelArtifactsInfo: { dateSaved: new Date(), modelTopologyType: 'JSON' } };
  }));
}
