/**
 * Turns a slice set into the classifier's input: one two-channel image per
 * high-b repetition (the repetition itself plus the mean low-b image), both
 * normalized by the 98th percentile of the mean high-b image. The
 * percentile is deliberately computed on the mean image so the scale is
 * shared by all repetitions of a set.
 *
 * Augmentation (dihedral transforms) applies to the unpadded image;
 * `padInput` then replicate-pads bottom/right to a multiple of 2^levels and
 * records the valid extent so padded pixels can be excluded from global
 * average pooling.
 */

import type { SliceSet, Stack } from "./container.js";

export interface SetInput {
  /** (K, rows, cols, 2) row-major values */
  values: Float32Array;
  k: number;
  rows: number;
  cols: number;
  /** un-padded extent; equal to rows/cols until padInput is applied */
  validRows: number;
  validCols: number;
  labels?: number[];
}

export function percentile98(values: Float32Array | number[]): number {
  const sorted = Float32Array.from(values).sort();
  if (sorted.length === 0) throw new Error("empty percentile input");
  const rank = 0.98 * (sorted.length - 1);
  const lo = Math.floor(rank);
  const hi = Math.min(lo + 1, sorted.length - 1);
  return sorted[lo] + (rank - lo) * (sorted[hi] - sorted[lo]);
}

function meanImage(stack: Stack): Float32Array {
  const { nReps, rows, cols, data } = stack;
  const out = new Float32Array(rows * cols);
  for (let n = 0; n < nReps; n++) {
    const off = n * rows * cols;
    for (let i = 0; i < out.length; i++) out[i] += data[off + i];
  }
  for (let i = 0; i < out.length; i++) out[i] /= nReps;
  return out;
}

export function preprocess(slice: SliceSet): SetInput {
  if (slice.low.rows !== slice.high.rows || slice.low.cols !== slice.high.cols) {
    throw new Error(`${slice.name}: low/high image dimensions differ`);
  }
  const { nReps: k, rows, cols, data } = slice.high;
  const lowMean = meanImage(slice.low);
  const highMean = meanImage(slice.high);
  const scale = percentile98(highMean);
  if (!(scale > 0)) throw new Error(`${slice.name}: non-positive normalization percentile`);

  const values = new Float32Array(k * rows * cols * 2);
  for (let n = 0; n < k; n++) {
    const src = n * rows * cols;
    const dst = n * rows * cols * 2;
    for (let i = 0; i < rows * cols; i++) {
      values[dst + i * 2] = data[src + i] / scale;
      values[dst + i * 2 + 1] = lowMean[i] / scale;
    }
  }

  let labels: number[] | undefined;
  if (slice.high.labels) {
    labels = slice.high.labels.map((lab) => {
      if (lab === "corrupt") return 1;
      if (lab === "clean") return 0;
      throw new Error(`${slice.name}: unusable label '${lab}'`);
    });
  }
  return { values, k, rows, cols, validRows: rows, validCols: cols, labels };
}

/**
 * One of the 8 dihedral transforms (quarter-turn rotations x optional
 * horizontal flip), applied identically to every repetition and channel.
 * Only valid before padding (the transform would move the padded border).
 */
export function dihedral(input: SetInput, quarterTurns: number, flip: boolean): SetInput {
  if (input.validRows !== input.rows || input.validCols !== input.cols) {
    throw new Error("augment before padding, not after");
  }
  let { values, rows, cols } = input;
  const { k } = input;
  const channels = 2;
  for (let t = 0; t < ((quarterTurns % 4) + 4) % 4; t++) {
    const out = new Float32Array(values.length);
    const [nr, nc] = [cols, rows];
    for (let n = 0; n < k; n++) {
      const src = n * rows * cols * channels;
      const dst = n * nr * nc * channels;
      for (let r = 0; r < nr; r++)
        for (let c = 0; c < nc; c++)
          for (let ch = 0; ch < channels; ch++)
            out[dst + (r * nc + c) * channels + ch] =
              values[src + (c * cols + (cols - 1 - r)) * channels + ch];
    }
    values = out;
    [rows, cols] = [nr, nc];
  }
  if (flip) {
    const out = new Float32Array(values.length);
    for (let n = 0; n < k; n++) {
      const base = n * rows * cols * channels;
      for (let r = 0; r < rows; r++)
        for (let c = 0; c < cols; c++)
          for (let ch = 0; ch < channels; ch++)
            out[base + (r * cols + c) * channels + ch] =
              values[base + (r * cols + (cols - 1 - c)) * channels + ch];
    }
    values = out;
  }
  return { ...input, values, rows, cols, validRows: rows, validCols: cols };
}

export function padTo(extent: number, divisor: number): number {
  return Math.ceil(extent / divisor) * divisor;
}

/** Replicate-pad bottom/right so both spatial extents divide `divisor`. */
export function padInput(input: SetInput, divisor: number): SetInput {
  const { values, k, rows, cols } = input;
  const outRows = padTo(rows, divisor);
  const outCols = padTo(cols, divisor);
  if (outRows === rows && outCols === cols) {
    return { ...input, validRows: rows, validCols: cols };
  }
  const channels = 2;
  const out = new Float32Array(k * outRows * outCols * channels);
  for (let n = 0; n < k; n++) {
    const src = n * rows * cols * channels;
    const dst = n * outRows * outCols * channels;
    for (let r = 0; r < outRows; r++) {
      const sr = Math.min(r, rows - 1);
      for (let c = 0; c < outCols; c++) {
        const sc = Math.min(c, cols - 1);
        for (let ch = 0; ch < channels; ch++)
          out[dst + (r * outCols + c) * channels + ch] =
            values[src + (sr * cols + sc) * channels + ch];
      }
    }
  }
  return { ...input, values: out, rows: outRows, cols: outCols, validRows: rows, validCols: cols };
}
