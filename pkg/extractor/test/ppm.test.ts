import { describe, expect, it } from 'vitest';

import { decodePpm } from '../src/ppm.js';

function p6(header: string, pixels: number[]): Buffer {
  return Buffer.concat([Buffer.from(header, 'ascii'), Buffer.from(pixels)]);
}

describe('ppm decoding', () => {
  it('reads a 2x1 image and scales bytes to [0, 1]', () => {
    const img = decodePpm(p6('P6\n2 1\n255\n', [0, 128, 255, 51, 102, 204]));
    expect(img.width).toBe(2);
    expect(img.height).toBe(1);
    expect(img.data[0]).toBe(0);
    expect(img.data[1]).toBeCloseTo(128 / 255, 7);
    expect(img.data[2]).toBe(1);
    expect(img.data[5]).toBeCloseTo(0.8, 7);
  });

  it('handles comments and loose whitespace in the header', () => {
    const img = decodePpm(p6('P6 # toy\n# another\n 1\t1 # sneaky\n255 ', [7, 8, 9]));
    expect(img.width).toBe(1);
    expect(img.data.length).toBe(3);
  });

  it('rejects other formats, wrong maxval, junk fields', () => {
    expect(() => decodePpm(p6('P5\n1 1\n255\n', [1, 2, 3]))).toThrow(/P6/);
    expect(() => decodePpm(p6('P6\n1 1\n65535\n', [1, 2, 3]))).toThrow(/maxval/);
    expect(() => decodePpm(p6('P6\n1 x\n255\n', [1, 2, 3]))).toThrow(/non-numeric/);
    expect(() => decodePpm(p6('P6\n0 4\n255\n', []))).toThrow(/degenerate/);
  });

  it('reports missing pixel bytes with the expected count', () => {
    expect(() => decodePpm(p6('P6\n2 2\n255\n', [1, 2, 3]))).toThrow(/expected 12/);
  });
});
