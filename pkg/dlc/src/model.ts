/**
 * Permutation-equivariant repetition classifier.
 *
 * A convolutional encoder (per level: two [conv 3x3 -> batch norm -> ReLU]
 * modules, then 2x2 max pooling) runs on every repetition of a set. After
 * each level's pooling, the feature maps are averaged across the set and
 * the mean is subtracted from every element, so each repetition sees what
 * the others look like while the whole mapping stays equivariant under
 * permutations and accepts any set size. Masked global average pooling
 * (ignoring padded pixels) feeds two fully-connected layers and a sigmoid,
 * giving one corruption probability per repetition.
 */

import * as tf from "@tensorflow/tfjs";

import { conv3x3 } from "./conv.js";
import type { SetInput } from "./preprocess.js";

const BN_EPSILON = 1e-3;
const BN_MOMENTUM = 0.99;

export interface ClassifierConfig {
  featureChannels: number;
  levels: number;
  hiddenUnits: number;
  seed: number;
}

export const DEFAULT_CONFIG: ClassifierConfig = {
  featureChannels: 16,
  levels: 4,
  hiddenUnits: 64,
  seed: 0,
};

export interface ForwardOptions {
  training?: boolean;
  /** set to false to bypass the cross-set mean subtraction (ablation hook) */
  aggregate?: boolean;
}

interface NamedVariable {
  name: string;
  variable: tf.Variable;
  trainable: boolean;
}

let instanceCounter = 0;

export class DeepSetClassifier {
  readonly config: ClassifierConfig;
  private readonly instanceId = instanceCounter++;
  private readonly registry: NamedVariable[] = [];
  private readonly convKernels: tf.Variable[] = [];
  private readonly bnGamma: tf.Variable[] = [];
  private readonly bnBeta: tf.Variable[] = [];
  private readonly bnMean: tf.Variable[] = [];
  private readonly bnVariance: tf.Variable[] = [];
  private headW1!: tf.Variable;
  private headB1!: tf.Variable;
  private headW2!: tf.Variable;
  private headB2!: tf.Variable;

  constructor(config: Partial<ClassifierConfig> = {}) {
    this.config = { ...DEFAULT_CONFIG, ...config };
    const { featureChannels, levels, hiddenUnits, seed } = this.config;
    let channelsIn = 2;
    let block = 0;
    for (let level = 0; level < levels; level++) {
      const channelsOut = featureChannels * 2 ** level;
      for (const cin of [channelsIn, channelsOut]) {
        const init = tf.initializers.heNormal({ seed: seed + block });
        this.convKernels.push(
          this.track(`conv_${block}`, init.apply([3, 3, cin, channelsOut]) as tf.Tensor, true)
        );
        this.bnGamma.push(this.track(`bn_gamma_${block}`, tf.ones([channelsOut]), true));
        this.bnBeta.push(this.track(`bn_beta_${block}`, tf.zeros([channelsOut]), true));
        this.bnMean.push(this.track(`bn_mean_${block}`, tf.zeros([channelsOut]), false));
        this.bnVariance.push(this.track(`bn_var_${block}`, tf.ones([channelsOut]), false));
        block += 1;
      }
      channelsIn = channelsOut;
    }
    const glorot = (s: number) => tf.initializers.glorotUniform({ seed: seed + 1000 + s });
    this.headW1 = this.track("head_w1", glorot(0).apply([channelsIn, hiddenUnits]) as tf.Tensor, true);
    this.headB1 = this.track("head_b1", tf.zeros([hiddenUnits]), true);
    this.headW2 = this.track("head_w2", glorot(1).apply([hiddenUnits, 1]) as tf.Tensor, true);
    this.headB2 = this.track("head_b2", tf.zeros([1]), true);
  }

  private track(name: string, initial: tf.Tensor, trainable: boolean): tf.Variable {
    // engine variable names must be globally unique; checkpoints use `name`
    const variable = tf.variable(initial, trainable, `m${this.instanceId}/${name}`);
    this.registry.push({ name, variable, trainable });
    initial.dispose();
    return variable;
  }

  trainableVariables(): tf.Variable[] {
    return this.registry.filter((r) => r.trainable).map((r) => r.variable);
  }

  private batchNorm(h: tf.Tensor4D, block: number, training: boolean): tf.Tensor4D {
    if (training) {
      const mean = tf.mean(h, [0, 1, 2]);
      const variance = tf.mean(tf.square(tf.sub(h, mean)), [0, 1, 2]);
      this.bnMean[block].assign(
        tf.add(tf.mul(this.bnMean[block], BN_MOMENTUM), tf.mul(mean, 1 - BN_MOMENTUM))
      );
      this.bnVariance[block].assign(
        tf.add(tf.mul(this.bnVariance[block], BN_MOMENTUM), tf.mul(variance, 1 - BN_MOMENTUM))
      );
      const normalized = tf.div(tf.sub(h, mean), tf.sqrt(tf.add(variance, BN_EPSILON)));
      return tf.add(tf.mul(normalized, this.bnGamma[block]), this.bnBeta[block]) as tf.Tensor4D;
    }
    const normalized = tf.div(
      tf.sub(h, this.bnMean[block]),
      tf.sqrt(tf.add(this.bnVariance[block], BN_EPSILON))
    );
    return tf.add(tf.mul(normalized, this.bnGamma[block]), this.bnBeta[block]) as tf.Tensor4D;
  }

  /** Validity of each cell of the final feature grid (padding excluded). */
  private finalMask(input: SetInput): tf.Tensor3D {
    const factor = 2 ** this.config.levels;
    const rows = input.rows / factor;
    const cols = input.cols / factor;
    const mask = new Float32Array(rows * cols);
    for (let r = 0; r < rows; r++)
      for (let c = 0; c < cols; c++)
        mask[r * cols + c] =
          r * factor < input.validRows && c * factor < input.validCols ? 1 : 0;
    return tf.tensor3d(mask, [rows, cols, 1]);
  }

  logits(input: SetInput, opts: ForwardOptions = {}): tf.Tensor1D {
    const { training = false, aggregate = true } = opts;
    const factor = 2 ** this.config.levels;
    if (input.rows % factor !== 0 || input.cols % factor !== 0) {
      throw new Error(
        `input ${input.rows}x${input.cols} not divisible by ${factor}; pad it first`
      );
    }
    return tf.tidy(() => {
      let h = tf.tensor4d(input.values, [input.k, input.rows, input.cols, 2]);
      let block = 0;
      for (let level = 0; level < this.config.levels; level++) {
        for (let j = 0; j < 2; j++) {
          h = conv3x3(h, this.convKernels[block] as unknown as tf.Tensor4D);
          h = this.batchNorm(h, block, training);
          h = tf.relu(h);
          block += 1;
        }
        h = tf.maxPool(h, 2, 2, "same");
        if (aggregate) {
          h = tf.sub(h, tf.mean(h, 0, true));
        }
      }
      const mask = this.finalMask(input);
      const pooled = tf.div(
        tf.sum(tf.mul(h, mask), [1, 2]),
        tf.sum(mask)
      );
      const hidden = tf.relu(tf.add(tf.matMul(pooled, this.headW1), this.headB1));
      const out = tf.add(tf.matMul(hidden, this.headW2), this.headB2);
      return tf.reshape(out, [input.k]);
    });
  }

  /** Corruption probability per repetition, strictly inside (0, 1). */
  probabilities(input: SetInput, opts: ForwardOptions = {}): tf.Tensor1D {
    return tf.tidy(() =>
      tf.clipByValue(tf.sigmoid(this.logits(input, opts)), 1e-7, 1 - 1e-7)
    );
  }

  async predict(input: SetInput): Promise<number[]> {
    const probs = this.probabilities(input, { training: false });
    const values = Array.from(await probs.data());
    probs.dispose();
    return values;
  }

  /** Copies of all weights, for checkpointing and best-epoch restore. */
  snapshot(): Map<string, { shape: number[]; values: Float32Array }> {
    const state = new Map<string, { shape: number[]; values: Float32Array }>();
    for (const { name, variable } of this.registry) {
      state.set(name, {
        shape: [...variable.shape],
        values: new Float32Array(variable.dataSync() as Float32Array),
      });
    }
    return state;
  }

  restore(state: Map<string, { shape: number[]; values: Float32Array }>): void {
    for (const { name, variable } of this.registry) {
      const entry = state.get(name);
      if (!entry) throw new Error(`snapshot is missing weights for ${name}`);
      if (entry.shape.join(",") !== variable.shape.join(",")) {
        throw new Error(
          `weights for ${name} have shape [${entry.shape}], expected [${variable.shape}]`
        );
      }
      const next = tf.tensor(entry.values, entry.shape as number[]);
      variable.assign(next);
      next.dispose();
    }
  }

  dispose(): void {
    for (const { variable } of this.registry) variable.dispose();
  }
}

export interface Checkpoint {
  format_version: 1;
  config: ClassifierConfig;
  threshold: number;
  weights: { name: string; shape: number[]; data: string }[];
}

export function checkpointFromModel(model: DeepSetClassifier, threshold: number): Checkpoint {
  const weights = [] as Checkpoint["weights"];
  for (const [name, { shape, values }] of model.snapshot()) {
    weights.push({
      name,
      shape,
      data: Buffer.from(values.buffer, values.byteOffset, values.byteLength).toString("base64"),
    });
  }
  return { format_version: 1, config: model.config, threshold, weights };
}

export function modelFromCheckpoint(checkpoint: Checkpoint): DeepSetClassifier {
  if (checkpoint.format_version !== 1) {
    throw new Error(`unsupported checkpoint format_version ${checkpoint.format_version}`);
  }
  const model = new DeepSetClassifier(checkpoint.config);
  const state = new Map<string, { shape: number[]; values: Float32Array }>();
  for (const { name, shape, data } of checkpoint.weights) {
    const buf = Buffer.from(data, "base64");
    state.set(name, {
      shape,
      values: new Float32Array(buf.buffer, buf.byteOffset, buf.byteLength / 4),
    });
  }
  model.restore(state);
  return model;
}
