/**
 * Readers for the slice-set container format produced by the imaging
 * toolkit (JSON sidecar + raw little-endian float32 payload) and the
 * prediction-interchange JSON this trainer exports back to it.
 */

import * as fs from "node:fs";
import * as os from "node:os";
import * as path from "node:path";

export interface Stack {
  nReps: number;
  rows: number;
  cols: number;
  bValue: number;
  labels?: string[];
  /** repetition-major, row-major pixel data, length nReps*rows*cols */
  data: Float32Array;
}

export interface Roi {
  row0: number;
  col0: number;
  height: number;
  width: number;
}

export interface SliceSet {
  name: string;
  dir: string;
  low: Stack;
  high: Stack;
  roi?: Roi;
}

function floatsLE(buf: Buffer): Float32Array {
  if (os.endianness() === "LE") {
    return new Float32Array(buf.buffer, buf.byteOffset, buf.byteLength / 4);
  }
  const view = new DataView(buf.buffer, buf.byteOffset, buf.byteLength);
  const out = new Float32Array(buf.byteLength / 4);
  for (let i = 0; i < out.length; i++) out[i] = view.getFloat32(i * 4, true);
  return out;
}

export function readStack(base: string): Stack {
  const header = JSON.parse(fs.readFileSync(`${base}.json`, "utf8"));
  if (header.format_version !== 1) {
    throw new Error(`${base}.json: unsupported format_version ${header.format_version}`);
  }
  const { rows, cols, n_reps: nReps, b_value: bValue, labels } = header;
  const payload = fs.readFileSync(`${base}.f32`);
  if (payload.byteLength !== nReps * rows * cols * 4) {
    throw new Error(
      `${base}.f32: ${payload.byteLength} bytes, header implies ${nReps * rows * cols * 4}`
    );
  }
  const data = floatsLE(payload);
  for (let i = 0; i < data.length; i++) {
    if (!Number.isFinite(data[i])) throw new Error(`${base}.f32: non-finite pixel at ${i}`);
  }
  return { nReps, rows, cols, bValue, labels, data };
}

export function readSliceSet(dir: string): SliceSet {
  const low = readStack(path.join(dir, "low", "stack"));
  const high = readStack(path.join(dir, "high", "stack"));
  let roi: Roi | undefined;
  const roiPath = path.join(dir, "roi.json");
  if (fs.existsSync(roiPath)) {
    const r = JSON.parse(fs.readFileSync(roiPath, "utf8"));
    roi = { row0: r.row0, col0: r.col0, height: r.height, width: r.width };
  }
  return { name: path.basename(dir), dir, low, high, roi };
}

export function scanDataset(dir: string): string[] {
  return fs
    .readdirSync(dir)
    .map((name) => path.join(dir, name))
    .filter((p) => fs.existsSync(path.join(p, "high", "stack.json")))
    .sort();
}

export interface PredictionFile {
  format_version: 1;
  n_reps: number;
  probs: number[];
  threshold: number;
}

export function writePredictions(file: string, probs: number[], threshold: number): void {
  for (const p of probs) {
    if (!Number.isFinite(p) || p < 0 || p > 1) throw new Error(`probability ${p} outside [0, 1]`);
  }
  const payload: PredictionFile = {
    format_version: 1,
    n_reps: probs.length,
    probs,
    threshold,
  };
  fs.mkdirSync(path.dirname(file), { recursive: true });
  fs.writeFileSync(file, JSON.stringify(payload, null, 2) + "\n");
}

export function readPredictions(file: string): PredictionFile {
  const payload = JSON.parse(fs.readFileSync(file, "utf8"));
  if (payload.format_version !== 1) {
    throw new Error(`${file}: unsupported format_version ${payload.format_version}`);
  }
  if (!Array.isArray(payload.probs) || payload.probs.length !== payload.n_reps) {
    throw new Error(`${file}: probs length disagrees with n_reps`);
  }
  return payload as PredictionFile;
}
