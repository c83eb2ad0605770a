/** Inference on slice sets and export of prediction-interchange files. */

import * as fs from "node:fs";

import { SliceSet, readSliceSet, writePredictions } from "./container.js";
import { Checkpoint, DeepSetClassifier, modelFromCheckpoint } from "./model.js";
import { padInput, preprocess } from "./preprocess.js";

export function loadCheckpoint(file: string): { model: DeepSetClassifier; threshold: number } {
  const checkpoint = JSON.parse(fs.readFileSync(file, "utf8")) as Checkpoint;
  return { model: modelFromCheckpoint(checkpoint), threshold: checkpoint.threshold };
}

export async function predictSlice(
  model: DeepSetClassifier,
  slice: SliceSet
): Promise<number[]> {
  const input = padInput(preprocess(slice), 2 ** model.config.levels);
  return model.predict(input);
}

export async function predictToFile(
  checkpointFile: string,
  sliceDir: string,
  outFile: string
): Promise<number[]> {
  const { model, threshold } = loadCheckpoint(checkpointFile);
  try {
    const probs = await predictSlice(model, readSliceSet(sliceDir));
    writePredictions(outFile, probs, threshold);
    return probs;
  } finally {
    model.dispose();
  }
}
