/**
 * Binary PPM (P6, maxval 255) reader. Matches the trainer's image format:
 * header tokens may be separated by any whitespace and '#' comments, pixel
 * bytes follow the single whitespace after maxval, values map to [0, 1].
 */

import { readFileSync } from 'node:fs';

export interface RgbImage {
  width: number;
  height: number;
  /** row-major RGB triples in [0, 1], length = width * height * 3 */
  data: Float32Array;
}

function nextToken(buf: Buffer, pos: number): [string, number] {
  while (pos < buf.length) {
    const c = buf[pos];
    if (c === 0x23) { // '#' comment runs to end of line
      while (pos < buf.length && buf[pos] !== 0x0a) pos++;
    } else if (c === 0x20 || c === 0x09 || c === 0x0a || c === 0x0d) {
      pos++;
    } else {
      break;
    }
  }
  const start = pos;
  while (pos < buf.length && ![0x20, 0x09, 0x0a, 0x0d, 0x23].includes(buf[pos])) pos++;
  if (start === pos) {
    throw new Error('truncated header');
  }
  return [buf.subarray(start, pos).toString('ascii'), pos];
}

export function decodePpm(buf: Buffer): RgbImage {
  let pos = 0;
  let magic: string;
  [magic, pos] = nextToken(buf, pos);
  if (magic !== 'P6') {
    throw new Error(`unsupported PPM type ${magic}, only binary P6 is handled`);
  }
  const fields: number[] = [];
  for (let i = 0; i < 3; i++) {
    let tok: string;
    [tok, pos] = nextToken(buf, pos);
    if (!/^\d+$/.test(tok)) {
      throw new Error(`non-numeric header field ${JSON.stringify(tok)}`);
    }
    fields.push(parseInt(tok, 10));
  }
  const [width, height, maxval] = fields;
  if (width < 1 || height < 1) {
    throw new Error(`degenerate image size ${width}x${height}`);
  }
  if (maxval !== 255) {
    throw new Error(`maxval ${maxval} unsupported, expected 255`);
  }
  pos++; // single whitespace byte after maxval
  const need = width * height * 3;
  if (buf.length - pos < need) {
    throw new Error(`expected ${need} pixel bytes, found ${buf.length - pos}`);
  }
  const data = new Float32Array(need);
  for (let i = 0; i < need; i++) {
    data[i] = buf[pos + i] / 255;
  }
  return { width, height, data };
}

export function readPpm(path: string): RgbImage {
  return decodePpm(readFileSync(path));
}
