/**
 * OSF1 prior-vector files.
 *
 * Layout: "OSF1" magic, u32 LE dimension, u8 tag length, UTF-8 tag, then
 * `dim` float32 LE values. Writes go through a temp file plus rename so a
 * crashed run never leaves a half-written prior behind.
 */

import { randomBytes } from 'node:crypto';
import { readFileSync, renameSync, rmSync, writeFileSync } from 'node:fs';
import { dirname, join } from 'node:path';

const MAGIC = Buffer.from('OSF1', 'ascii');

export interface PriorVector {
  values: Float32Array;
  sourceTag: string;
}

export function encodeOsf1(prior: PriorVector): Buffer {
  const dim = prior.values.length;
  if (dim < 1) {
    throw new Error('prior vector is empty');
  }
  for (const v of prior.values) {
    if (!Number.isFinite(v)) {
      throw new Error('prior vector holds non-finite values');
    }
  }
  const tag = Buffer.from(prior.sourceTag, 'utf8');
  if (tag.length > 255) {
    throw new Error(`source tag is ${tag.length} bytes, limit is 255`);
  }
  const out = Buffer.alloc(4 + 4 + 1 + tag.length + 4 * dim);
  MAGIC.copy(out, 0);
  out.writeUInt32LE(dim, 4);
  out.writeUInt8(tag.length, 8);
  tag.copy(out, 9);
  for (let i = 0; i < dim; i++) {
    out.writeFloatLE(prior.values[i], 9 + tag.length + 4 * i);
  }
  return out;
}

export function decodeOsf1(data: Buffer): PriorVector {
  if (data.length < 9 || !data.subarray(0, 4).equals(MAGIC)) {
    throw new Error('bad magic at offset 0, not an OSF1 file');
  }
  const dim = data.readUInt32LE(4);
  if (dim < 1) {
    throw new Error('header dimension is zero');
  }
  const tagLen = data.readUInt8(8);
  const payload = 9 + tagLen;
  if (data.length !== payload + 4 * dim) {
    throw new Error(`expected ${payload + 4 * dim} bytes, file has ${data.length}`);
  }
  const tag = data.subarray(9, payload).toString('utf8');
  const values = new Float32Array(dim);
  for (let i = 0; i < dim; i++) {
    values[i] = data.readFloatLE(payload + 4 * i);
  }
  return { values, sourceTag: tag };
}

export function writeOsf1(path: string, prior: PriorVector): void {
  const tmp = join(dirname(path), `.${randomBytes(6).toString('hex')}.tmp`);
  writeFileSync(tmp, encodeOsf1(prior));
  try {
    renameSync(tmp, path);
  } catch (err) {
    rmSync(tmp, { force: true });
    throw err;
  }
}

export function readOsf1(path: string): PriorVector {
  return decodeOsf1(readFileSync(path));
}
