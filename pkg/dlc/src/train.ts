/**
 * Training loop: one slice's repetition set per optimization step,
 * class-weighted binary cross entropy on the logits, plain SGD whose
 * learning rate is halved on a fixed epoch schedule, early stopping on the
 * validation loss with best-weights restore, and ROC-based threshold
 * selection on the validation split afterwards.
 */

import * as fs from "node:fs";
import * as path from "node:path";

import * as tf from "@tensorflow/tfjs";

import { readSliceSet, scanDataset } from "./container.js";
import {
  Checkpoint,
  ClassifierConfig,
  DEFAULT_CONFIG,
  DeepSetClassifier,
  checkpointFromModel,
} from "./model.js";
import { SetInput, dihedral, padInput, preprocess } from "./preprocess.js";
import { auc, rocCsv, rocCurve, selectThreshold } from "./roc.js";

export interface TrainOptions {
  trainDir: string;
  valDir: string;
  outDir: string;
  learningRate?: number;
  halveEvery?: number;
  patience?: number;
  posWeight?: number;
  maxEpochs?: number;
  augment?: boolean;
  seed?: number;
  model?: Partial<ClassifierConfig>;
  quiet?: boolean;
}

export interface EpochStats {
  epoch: number;
  learningRate: number;
  trainLoss: number;
  valLoss: number;
}

export interface TrainResult {
  checkpointPath: string;
  threshold: number;
  valAuc: number;
  epochs: number;
  bestEpoch: number;
  history: EpochStats[];
}

/** Deterministic 32-bit PRNG so runs are reproducible for a seed. */
export function mulberry32(seed: number): () => number {
  let a = seed >>> 0;
  return () => {
    a = (a + 0x6d2b79f5) >>> 0;
    let t = Math.imul(a ^ (a >>> 15), 1 | a);
    t = (t + Math.imul(t ^ (t >>> 7), 61 | t)) ^ t;
    return ((t ^ (t >>> 14)) >>> 0) / 4294967296;
  };
}

function loadInputs(dir: string): SetInput[] {
  const dirs = scanDataset(dir);
  if (dirs.length === 0) throw new Error(`${dir}: no slice set containers found`);
  return dirs.map((d) => {
    const input = preprocess(readSliceSet(d));
    if (!input.labels) throw new Error(`${d}: training data must be labeled`);
    return input;
  });
}

function weightedLoss(logits: tf.Tensor1D, labels: number[], posWeight: number): tf.Scalar {
  const y = tf.tensor1d(labels, "float32");
  const weights = tf.tensor1d(labels.map((v) => (v === 1 ? posWeight : 1)), "float32");
  // softplus(z) - z*y is the numerically stable cross entropy on logits
  const perItem = tf.sub(tf.softplus(logits), tf.mul(logits, y));
  return tf.div(tf.sum(tf.mul(perItem, weights)), tf.sum(weights)) as tf.Scalar;
}

function evaluate(
  model: DeepSetClassifier,
  inputs: SetInput[],
  divisor: number,
  posWeight: number
): { loss: number; probs: number[]; labels: number[] } {
  let lossSum = 0;
  const probs: number[] = [];
  const labels: number[] = [];
  for (const raw of inputs) {
    const input = padInput(raw, divisor);
    const { lossValue, probValues } = tf.tidy(() => {
      const logits = model.logits(input, { training: false });
      const loss = weightedLoss(logits, input.labels!, posWeight);
      const p = tf.clipByValue(tf.sigmoid(logits), 1e-7, 1 - 1e-7);
      return {
        lossValue: loss.dataSync()[0],
        probValues: Array.from(p.dataSync()),
      };
    });
    lossSum += lossValue;
    probs.push(...probValues);
    labels.push(...input.labels!);
  }
  return { loss: lossSum / inputs.length, probs, labels };
}

export async function trainClassifier(options: TrainOptions): Promise<TrainResult> {
  const {
    trainDir,
    valDir,
    outDir,
    learningRate = 1e-4,
    halveEvery = 20,
    patience = 20,
    posWeight = 3,
    maxEpochs = 200,
    augment = true,
    seed = 0,
    quiet = false,
  } = options;

  const config = { ...DEFAULT_CONFIG, seed, ...options.model };
  const divisor = 2 ** config.levels;
  const train = loadInputs(trainDir);
  const val = loadInputs(valDir);

  const trainLabels = train.flatMap((s) => s.labels!);
  if (!trainLabels.includes(0) || !trainLabels.includes(1)) {
    throw new Error("training data contains a single class; cannot train a classifier");
  }

  const model = new DeepSetClassifier(config);
  const rng = mulberry32(seed ^ 0x5eed);
  const order = train.map((_, i) => i);

  const history: EpochStats[] = [];
  let bestLoss = Infinity;
  let bestEpoch = -1;
  let bestWeights = model.snapshot();
  let sinceBest = 0;

  for (let epoch = 0; epoch < maxEpochs; epoch++) {
    const lr = learningRate * 0.5 ** Math.floor(epoch / halveEvery);
    const optimizer = tf.train.sgd(lr);
    // Fisher-Yates reshuffle per epoch
    for (let i = order.length - 1; i > 0; i--) {
      const j = Math.floor(rng() * (i + 1));
      [order[i], order[j]] = [order[j], order[i]];
    }

    let lossSum = 0;
    for (const index of order) {
      let input = train[index];
      if (augment) {
        input = dihedral(input, Math.floor(rng() * 4), rng() < 0.5);
      }
      const padded = padInput(input, divisor);
      const cost = optimizer.minimize(
        () => weightedLoss(model.logits(padded, { training: true }), padded.labels!, posWeight),
        true,
        model.trainableVariables()
      );
      lossSum += cost!.dataSync()[0];
      cost!.dispose();
    }
    optimizer.dispose();

    const { loss: valLoss } = evaluate(model, val, divisor, posWeight);
    const stats: EpochStats = {
      epoch,
      learningRate: lr,
      trainLoss: lossSum / train.length,
      valLoss,
    };
    history.push(stats);
    if (!quiet) {
      console.log(
        `epoch ${epoch}: lr ${lr.toExponential(2)} train ${stats.trainLoss.toFixed(4)} ` +
          `val ${valLoss.toFixed(4)}`
      );
    }

    if (valLoss < bestLoss - 1e-6) {
      bestLoss = valLoss;
      bestEpoch = epoch;
      bestWeights = model.snapshot();
      sinceBest = 0;
    } else {
      sinceBest += 1;
      if (sinceBest >= patience) break;
    }
  }

  model.restore(bestWeights);
  const { probs, labels } = evaluate(model, val, divisor, posWeight);
  if (!labels.includes(0) || !labels.includes(1)) {
    throw new Error("validation data contains a single class; cannot pick a threshold");
  }
  const curve = rocCurve(probs, labels);
  const threshold = selectThreshold(curve);
  const valAuc = auc(probs, labels);

  fs.mkdirSync(outDir, { recursive: true });
  const checkpointPath = path.join(outDir, "checkpoint.json");
  const checkpoint: Checkpoint = checkpointFromModel(model, threshold);
  fs.writeFileSync(checkpointPath, JSON.stringify(checkpoint) + "\n");
  fs.writeFileSync(path.join(outDir, "roc_val.csv"), rocCsv(curve));
  fs.writeFileSync(
    path.join(outDir, "history.json"),
    JSON.stringify({ bestEpoch, valAuc, threshold, history }, null, 2) + "\n"
  );

  model.dispose();
  return {
    checkpointPath,
    threshold,
    valAuc,
    epochs: history.length,
    bestEpoch,
    history,
  };
}
