#!/usr/bin/env node
/**
 * osf-extract: turn a directory of PPM images into OSF1 prior files.
 *
 *   osf-extract --images DIR --models-dir DIR --model clip \
 *               [--pooling mean_pool] --out DIR
 *   osf-extract fixture --out DIR --model clip --kind embed --dim 16
 *
 * The `fixture` form writes a small deterministic stand-in model so the
 * pipeline can run where the real pre-trained weights are not installed.
 */

import { mkdirSync } from 'node:fs';
import { join } from 'node:path';
import { parseArgs } from 'node:util';

import { extract } from './extract.js';
import { makeFixtureModel, saveModelDir, type FixtureKind } from './fixture.js';
import { MODEL_TAGS, POOLINGS, type ExtractorSpec, type ModelTag, type Pooling } from './models.js';

function usage(): string {
  return 'usage: osf-extract --images DIR --models-dir DIR --model ' +
    `{${MODEL_TAGS.join('|')}} [--pooling {${POOLINGS.join('|')}}] --out DIR\n` +
    '       osf-extract fixture --out DIR --model TAG [--kind embed|tokens|latent] [--dim N]';
}

function requireChoice<T extends string>(value: string | undefined, choices: readonly T[],
                                         flag: string): T {
  if (!value || !choices.includes(value as T)) {
    throw new Error(`${flag} must be one of ${choices.join(', ')} (got ${value ?? 'nothing'})`);
  }
  return value as T;
}

async function runFixture(argv: string[]): Promise<number> {
  const { values } = parseArgs({
    args: argv,
    options: {
      out: { type: 'string' },
      model: { type: 'string' },
      kind: { type: 'string', default: 'embed' },
      dim: { type: 'string', default: '16' },
    },
  });
  if (!values.out) throw new Error('fixture: --out is required');
  const tag = requireChoice<ModelTag>(values.model, MODEL_TAGS, '--model');
  const kind = requireChoice<FixtureKind>(values.kind, ['embed', 'tokens', 'latent'], '--kind');
  const dim = parseInt(values.dim!, 10);
  if (!Number.isInteger(dim) || dim < 1) throw new Error(`--dim must be a positive integer`);
  const dir = join(values.out, tag);
  await saveModelDir(makeFixtureModel(kind, dim), dir);
  console.log(`wrote ${kind} fixture model (dim ${dim}) to ${dir}`);
  return 0;
}

async function runExtract(argv: string[]): Promise<number> {
  const { values } = parseArgs({
    args: argv,
    options: {
      images: { type: 'string' },
      'models-dir': { type: 'string' },
      model: { type: 'string' },
      pooling: { type: 'string', default: 'mean_pool' },
      out: { type: 'string' },
    },
  });
  for (const flag of ['images', 'models-dir', 'out'] as const) {
    if (!values[flag]) throw new Error(`--${flag} is required\n${usage()}`);
  }
  const spec: ExtractorSpec = {
    modelTag: requireChoice<ModelTag>(values.model, MODEL_TAGS, '--model'),
    pooling: requireChoice<Pooling>(values.pooling, POOLINGS, '--pooling'),
  };
  mkdirSync(values.out!, { recursive: true });
  const result = await extract(spec, {
    imageDir: values.images!,
    modelsDir: values['models-dir']!,
    outDir: values.out!,
  });
  console.log(`wrote ${result.written.length} priors (dim ${result.dim}), ` +
    `skipped ${result.skipped.length}; manifest: ${result.manifestPath}`);
  return 0;
}

async function main(): Promise<number> {
  const argv = process.argv.slice(2);
  try {
    if (argv[0] === 'fixture') return await runFixture(argv.slice(1));
    return await runExtract(argv);
  } catch (err) {
    console.error(`error: ${(err as Error).message}`);
    return 1;
  }
}

main().then((code) => { process.exitCode = code; });
