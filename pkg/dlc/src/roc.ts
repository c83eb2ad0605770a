/** ROC analysis for threshold selection on the validation split. */

export interface RocPoint {
  fpr: number;
  tpr: number;
  threshold: number;
}

/**
 * ROC over all distinct scores, corrupt (label 1) positive, a score >=
 * threshold called positive. Starts with a (0, 0) sentinel at +Infinity.
 */
export function rocCurve(probs: number[], labels: number[]): RocPoint[] {
  if (probs.length !== labels.length || probs.length === 0) {
    throw new Error("probs and labels must be equally sized and non-empty");
  }
  const nPos = labels.filter((y) => y === 1).length;
  const nNeg = labels.length - nPos;
  const thresholds = [...new Set(probs)].sort((a, b) => b - a);
  const points: RocPoint[] = [{ fpr: 0, tpr: 0, threshold: Infinity }];
  for (const threshold of thresholds) {
    let tp = 0;
    let fp = 0;
    for (let i = 0; i < probs.length; i++) {
      if (probs[i] >= threshold) {
        if (labels[i] === 1) tp += 1;
        else fp += 1;
      }
    }
    points.push({
      fpr: nNeg ? fp / nNeg : 0,
      tpr: nPos ? tp / nPos : 0,
      threshold,
    });
  }
  return points;
}

export function auc(probs: number[], labels: number[]): number {
  const nPos = labels.filter((y) => y === 1).length;
  if (nPos === 0 || nPos === labels.length) {
    throw new Error("AUC is undefined with a single class");
  }
  const points = rocCurve(probs, labels);
  let area = 0;
  for (let i = 1; i < points.length; i++) {
    area += ((points[i].fpr - points[i - 1].fpr) * (points[i].tpr + points[i - 1].tpr)) / 2;
  }
  return area;
}

/** Threshold maximizing TPR - FPR; ties resolve to the higher threshold. */
export function selectThreshold(points: RocPoint[]): number {
  let best = -Infinity;
  let threshold = 0;
  for (const p of points) {
    if (!Number.isFinite(p.threshold)) continue;
    const j = p.tpr - p.fpr;
    if (j > best || (j === best && p.threshold > threshold)) {
      best = j;
      threshold = p.threshold;
    }
  }
  return threshold;
}

export function rocCsv(points: RocPoint[]): string {
  const lines = ["fpr,tpr,threshold"];
  for (const p of points) lines.push(`${p.fpr},${p.tpr},${p.threshold}`);
  return lines.join("\n") + "\n";
}
