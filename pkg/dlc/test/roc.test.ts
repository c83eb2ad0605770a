import { describe, expect, it } from "vitest";

import { auc, rocCurve, selectThreshold } from "../src/roc.js";
import { mulberry32 } from "../src/train.js";

function countingAuc(probs: number[], labels: number[]): number {
  // Mann-Whitney form: P(positive scores above negative), ties count half
  const pos = probs.filter((_, i) => labels[i] === 1);
  const neg = probs.filter((_, i) => labels[i] !== 1);
  let wins = 0;
  for (const p of pos) for (const n of neg) wins += p > n ? 1 : p === n ? 0.5 : 0;
  return wins / (pos.length * neg.length);
}

describe("rocCurve", () => {
  it("runs from (0,0) to (1,1) monotonically", () => {
    const rng = mulberry32(7);
    const probs = Array.from({ length: 50 }, () => rng());
    const labels = Array.from({ length: 50 }, () => (rng() < 0.4 ? 1 : 0));
    const points = rocCurve(probs, labels);
    expect(points[0]).toEqual({ fpr: 0, tpr: 0, threshold: Infinity });
    expect(points.at(-1)!.fpr).toBe(1);
    expect(points.at(-1)!.tpr).toBe(1);
    for (let i = 1; i < points.length; i++) {
      expect(points[i].fpr).toBeGreaterThanOrEqual(points[i - 1].fpr);
      expect(points[i].tpr).toBeGreaterThanOrEqual(points[i - 1].tpr);
    }
  });

  it("yields AUC 1 for perfect separation", () => {
    expect(auc([0.9, 0.8, 0.2, 0.1], [1, 1, 0, 0])).toBe(1);
  });

  it("matches the counting oracle on random data", () => {
    const rng = mulberry32(11);
    const probs = Array.from({ length: 300 }, () => Math.round(rng() * 20) / 20);
    const labels = Array.from({ length: 300 }, () => (rng() < 0.5 ? 1 : 0));
    expect(auc(probs, labels)).toBeCloseTo(countingAuc(probs, labels), 12);
  });

  it("is invariant under monotone transforms", () => {
    const rng = mulberry32(13);
    const probs = Array.from({ length: 100 }, () => 0.05 + 0.9 * rng());
    const labels = Array.from({ length: 100 }, () => (rng() < 0.5 ? 1 : 0));
    const base = auc(probs, labels);
    expect(auc(probs.map(Math.sqrt), labels)).toBeCloseTo(base, 12);
    expect(auc(probs.map((p) => p ** 3), labels)).toBeCloseTo(base, 12);
  });

  it("rejects single-class AUC but still produces the curve", () => {
    expect(rocCurve([0.2, 0.6], [0, 0]).length).toBe(3);
    expect(() => auc([0.2, 0.6], [0, 0])).toThrow(/single class/);
  });
});

describe("selectThreshold", () => {
  it("lands inside a separating gap", () => {
    const points = rocCurve([0.9, 0.85, 0.25, 0.1], [1, 1, 0, 0]);
    const t = selectThreshold(points);
    expect(t).toBeGreaterThan(0.25);
    expect(t).toBeLessThanOrEqual(0.85);
  });

  it("returns the observed value for degenerate constant scores", () => {
    expect(selectThreshold(rocCurve([0.4, 0.4, 0.4], [1, 0, 1]))).toBe(0.4);
  });

  it("breaks ties toward the higher threshold", () => {
    expect(selectThreshold(rocCurve([0.8, 0.6, 0.4, 0.2], [1, 0, 1, 0]))).toBe(0.8);
  });
});
