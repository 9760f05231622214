/**
 * One-shot feature extraction: every PPM in a directory becomes one OSF1
 * prior file, plus a manifest mapping each image to its prior. Each image
 * is independent; a corrupt one is skipped with a log line instead of
 * aborting the batch.
 */

import { mkdirSync, readdirSync, renameSync, rmSync, writeFileSync } from 'node:fs';
import { basename, join, relative } from 'node:path';
import { randomBytes } from 'node:crypto';

import { loadLocalModel, embedImage, type ExtractorSpec } from './models.js';
import { writeOsf1 } from './osf1.js';
import { readPpm } from './ppm.js';

export interface ExtractResult {
  written: string[];          // emitted .osf1 paths
  skipped: string[];          // images that failed to parse
  dim: number;                // shared width of every emitted prior
  manifestPath: string;
}

export interface ExtractOptions {
  imageDir: string;
  modelsDir: string;
  outDir: string;
  log?: (line: string) => void;
}

export async function extract(spec: ExtractorSpec, opts: ExtractOptions): Promise<ExtractResult> {
  const log = opts.log ?? ((line: string) => console.error(line));
  const model = await loadLocalModel(opts.modelsDir, spec.modelTag);
  mkdirSync(opts.outDir, { recursive: true });

  const images = readdirSync(opts.imageDir)
    .filter((name) => name.toLowerCase().endsWith('.ppm'))
    .sort();
  if (images.length === 0) {
    throw new Error(`no .ppm images in ${opts.imageDir}`);
  }

  const written: string[] = [];
  const skipped: string[] = [];
  const rows: string[] = [];
  let dim = 0;
  for (const name of images) {
    const imagePath = join(opts.imageDir, name);
    let image;
    try {
      image = readPpm(imagePath);
    } catch (err) {
      // a corrupt image is the image's problem; model errors still abort
      skipped.push(name);
      log(`skipping ${name}: ${(err as Error).message}`);
      continue;
    }
    const embedding = embedImage(model, image, spec);
    if (dim === 0) {
      dim = embedding.values.length;
    } else if (embedding.values.length !== dim) {
      throw new Error(`inconsistent embedding width for ${name}: ${embedding.values.length} vs ${dim}`);
    }
    const priorPath = join(opts.outDir, basename(name, '.ppm') + '.osf1');
    writeOsf1(priorPath, { values: embedding.values, sourceTag: embedding.sourceTag });
    written.push(priorPath);
    rows.push(`${relative(opts.outDir, imagePath)} ${basename(priorPath)}`);
  }
  if (written.length === 0) {
    throw new Error(`every image in ${opts.imageDir} was unreadable`);
  }

  const manifestPath = join(opts.outDir, 'manifest.txt');
  const tmp = join(opts.outDir, `.${randomBytes(6).toString('hex')}.tmp`);
  writeFileSync(tmp, rows.join('\n') + '\n');
  try {
    renameSync(tmp, manifestPath);
  } catch (err) {
    rmSync(tmp, { force: true });
    throw err;
  }
  return { written, skipped, dim, manifestPath };
}
