import * as fs from "node:fs";
import * as os from "node:os";
import * as path from "node:path";

import type { SetInput } from "../src/preprocess.js";
import { mulberry32 } from "../src/train.js";

export function tempDir(prefix: string): string {
  return fs.mkdtempSync(path.join(os.tmpdir(), prefix));
}

/** Write one stack as <base>.json + <base>.f32 (little-endian float32). */
export function writeStackFixture(
  base: string,
  options: {
    nReps: number;
    rows: number;
    cols: number;
    bValue: number;
    labels?: string[];
    data: Float32Array;
  }
): void {
  fs.mkdirSync(path.dirname(base), { recursive: true });
  const header: Record<string, unknown> = {
    format_version: 1,
    rows: options.rows,
    cols: options.cols,
    n_reps: options.nReps,
    b_value: options.bValue,
  };
  if (options.labels) header.labels = options.labels;
  fs.writeFileSync(`${base}.json`, JSON.stringify(header));
  const buf = Buffer.alloc(options.data.length * 4);
  for (let i = 0; i < options.data.length; i++) buf.writeFloatLE(options.data[i], i * 4);
  fs.writeFileSync(`${base}.f32`, buf);
}

export function writeSliceSetFixture(
  dir: string,
  options: {
    rows: number;
    cols: number;
    nLow: number;
    nHigh: number;
    labels?: string[];
    fill?: (rep: number, row: number, col: number, highB: boolean) => number;
    roi?: { row0: number; col0: number; height: number; width: number };
  }
): void {
  const { rows, cols, nLow, nHigh } = options;
  const fill = options.fill ?? ((rep, r, c) => 1 + rep + r + c);
  const make = (n: number, highB: boolean) => {
    const data = new Float32Array(n * rows * cols);
    for (let rep = 0; rep < n; rep++)
      for (let r = 0; r < rows; r++)
        for (let c = 0; c < cols; c++)
          data[rep * rows * cols + r * cols + c] = fill(rep, r, c, highB);
    return data;
  };
  writeStackFixture(path.join(dir, "low", "stack"), {
    nReps: nLow,
    rows,
    cols,
    bValue: 50,
    data: make(nLow, false),
  });
  writeStackFixture(path.join(dir, "high", "stack"), {
    nReps: nHigh,
    rows,
    cols,
    bValue: 800,
    labels: options.labels,
    data: make(nHigh, true),
  });
  if (options.roi) {
    fs.writeFileSync(path.join(dir, "roi.json"), JSON.stringify(options.roi));
  }
}

/** Random normalized-looking set input for direct model tests. */
export function randomSetInput(
  seed: number,
  k: number,
  rows: number,
  cols: number,
  scale = 1.0
): SetInput {
  const rng = mulberry32(seed);
  const values = new Float32Array(k * rows * cols * 2);
  for (let i = 0; i < values.length; i++) values[i] = scale * rng();
  return { values, k, rows, cols, validRows: rows, validCols: cols };
}

export function permuteSet(input: SetInput, perm: number[]): SetInput {
  const frame = input.rows * input.cols * 2;
  const values = new Float32Array(input.values.length);
  for (let n = 0; n < input.k; n++) {
    values.set(input.values.subarray(perm[n] * frame, (perm[n] + 1) * frame), n * frame);
  }
  const labels = input.labels ? perm.map((p) => input.labels![p]) : undefined;
  return { ...input, values, labels };
}
