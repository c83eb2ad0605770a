/**
 * Command line for the repetition classifier.
 *
 *   node dist/cli.js train --train DIR --val DIR --out DIR [options]
 *   node dist/cli.js predict --checkpoint FILE --in SLICE_DIR --out FILE
 */

import { parseArgs } from "node:util";

import { predictToFile } from "./predict.js";
import { trainClassifier } from "./train.js";

function usage(code: number): never {
  console.error(
    [
      "usage:",
      "  cli train --train DIR --val DIR --out DIR [--lr X] [--max-epochs N]",
      "            [--patience N] [--halve-every N] [--pos-weight X]",
      "            [--feature-channels N] [--seed N] [--no-augment]",
      "  cli predict --checkpoint FILE --in SLICE_DIR --out FILE.json",
    ].join("\n")
  );
  process.exit(code);
}

async function main(): Promise<void> {
  const [command, ...rest] = process.argv.slice(2);
  if (command === "train") {
    const { values } = parseArgs({
      args: rest,
      options: {
        train: { type: "string" },
        val: { type: "string" },
        out: { type: "string" },
        lr: { type: "string" },
        "max-epochs": { type: "string" },
        patience: { type: "string" },
        "halve-every": { type: "string" },
        "pos-weight": { type: "string" },
        "feature-channels": { type: "string" },
        seed: { type: "string" },
        "no-augment": { type: "boolean" },
      },
    });
    if (!values.train || !values.val || !values.out) usage(1);
    const result = await trainClassifier({
      trainDir: values.train,
      valDir: values.val,
      outDir: values.out,
      learningRate: values.lr ? Number(values.lr) : undefined,
      maxEpochs: values["max-epochs"] ? Number(values["max-epochs"]) : undefined,
      patience: values.patience ? Number(values.patience) : undefined,
      halveEvery: values["halve-every"] ? Number(values["halve-every"]) : undefined,
      posWeight: values["pos-weight"] ? Number(values["pos-weight"]) : undefined,
      seed: values.seed ? Number(values.seed) : undefined,
      augment: values["no-augment"] ? false : undefined,
      model: values["feature-channels"]
        ? { featureChannels: Number(values["feature-channels"]) }
        : undefined,
    });
    console.log(
      `trained ${result.epochs} epochs (best ${result.bestEpoch}); ` +
        `val AUC ${result.valAuc.toFixed(3)}, threshold ${result.threshold.toFixed(3)}`
    );
    console.log(`checkpoint: ${result.checkpointPath}`);
  } else if (command === "predict") {
    const { values } = parseArgs({
      args: rest,
      options: {
        checkpoint: { type: "string" },
        in: { type: "string" },
        out: { type: "string" },
      },
    });
    if (!values.checkpoint || !values.in || !values.out) usage(1);
    const probs = await predictToFile(values.checkpoint, values.in, values.out);
    console.log(`wrote ${values.out} (${probs.length} repetitions)`);
  } else {
    usage(command ? 1 : 0);
  }
}

main().catch((err) => {
  console.error(err instanceof Error ? err.message : err);
  process.exit(1);
});
