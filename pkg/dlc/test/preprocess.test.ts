import * as path from "node:path";

import { describe, expect, it } from "vitest";

import { readSliceSet } from "../src/container.js";
import { dihedral, padInput, padTo, percentile98, preprocess } from "../src/preprocess.js";
import { tempDir, writeSliceSetFixture } from "./helpers.js";

function fixtureSlice(scale = 1, rows = 6, cols = 7) {
  const dir = tempDir("dlc-pre-");
  writeSliceSetFixture(path.join(dir, "s"), {
    rows,
    cols,
    nLow: 2,
    nHigh: 3,
    labels: ["clean", "corrupt", "clean"],
    fill: (rep, r, c, highB) => scale * (1 + rep * 0.5 + r * 0.1 + c * 0.2 + (highB ? 0 : 3)),
  });
  return readSliceSet(path.join(dir, "s"));
}

describe("percentile98", () => {
  it("interpolates like a linear quantile", () => {
    const values = Array.from({ length: 101 }, (_, i) => i);
    expect(percentile98(values)).toBeCloseTo(98, 12);
    expect(percentile98([5])).toBe(5);
  });
});

describe("preprocess", () => {
  it("builds two channels: the repetition and the mean low-b image", () => {
    const slice = fixtureSlice();
    const input = preprocess(slice);
    expect(input.k).toBe(3);
    expect(input.labels).toEqual([0, 1, 0]);
    // channel 1 at repetition 1, pixel (0,0)
    const { rows, cols } = input;
    const highValue = slice.high.data[1 * rows * cols];
    const lowMean = (slice.low.data[0] + slice.low.data[rows * cols]) / 2;
    const scale = input.values[1 * rows * cols * 2] !== 0
      ? highValue / input.values[1 * rows * cols * 2]
      : NaN;
    expect(input.values[1 * rows * cols * 2 + 1]).toBeCloseTo(lowMean / scale, 5);
  });

  it("cancels global intensity scaling exactly for binary factors", () => {
    const base = preprocess(fixtureSlice(1));
    const scaled = preprocess(fixtureSlice(4));
    expect(Array.from(scaled.values)).toEqual(Array.from(base.values));
  });

  it("cancels arbitrary scaling to float precision", () => {
    const base = preprocess(fixtureSlice(1));
    const scaled = preprocess(fixtureSlice(3.7));
    for (let i = 0; i < base.values.length; i++) {
      expect(scaled.values[i]).toBeCloseTo(base.values[i], 5);
    }
  });

  it("rejects unlabeled 'unknown' repetitions", () => {
    const dir = tempDir("dlc-pre-");
    writeSliceSetFixture(path.join(dir, "s"), {
      rows: 4,
      cols: 4,
      nLow: 1,
      nHigh: 2,
      labels: ["clean", "unknown"],
    });
    expect(() => preprocess(readSliceSet(path.join(dir, "s")))).toThrow(/unusable label/);
  });
});

describe("padInput", () => {
  it("pads the acquisition matrix to the pooling divisor", () => {
    expect(padTo(108, 16)).toBe(112);
    expect(padTo(134, 16)).toBe(144);
    expect(padTo(32, 16)).toBe(32);
    const input = padInput(preprocess(fixtureSlice(1, 6, 7)), 16);
    expect([input.rows, input.cols]).toEqual([16, 16]);
    expect([input.validRows, input.validCols]).toEqual([6, 7]);
  });

  it("replicates the edge values into the padding", () => {
    const input = padInput(preprocess(fixtureSlice(1, 6, 7)), 8);
    const { rows, cols, validRows, validCols } = input;
    const at = (r: number, c: number, ch: number) => input.values[(r * cols + c) * 2 + ch];
    for (let ch = 0; ch < 2; ch++) {
      expect(at(rows - 1, 0, ch)).toBe(at(validRows - 1, 0, ch));
      expect(at(0, cols - 1, ch)).toBe(at(0, validCols - 1, ch));
      expect(at(rows - 1, cols - 1, ch)).toBe(at(validRows - 1, validCols - 1, ch));
    }
  });
});

describe("dihedral", () => {
  it("four quarter turns recover the input", () => {
    const input = preprocess(fixtureSlice());
    const spun = dihedral(input, 4, false);
    expect(Array.from(spun.values)).toEqual(Array.from(input.values));
  });

  it("double flip recovers the input", () => {
    const input = preprocess(fixtureSlice());
    const flipped = dihedral(dihedral(input, 0, true), 0, true);
    expect(Array.from(flipped.values)).toEqual(Array.from(input.values));
  });

  it("a quarter turn transposes the extents", () => {
    const input = preprocess(fixtureSlice(1, 6, 7));
    const turned = dihedral(input, 1, false);
    expect([turned.rows, turned.cols]).toEqual([7, 6]);
  });

  it("refuses to run after padding", () => {
    const input = padInput(preprocess(fixtureSlice(1, 6, 7)), 16);
    expect(() => dihedral(input, 1, false)).toThrow(/before padding/);
  });
});
