/**
 * Actor-critic policy.
 *
 * Image observations use the experiment's vision trunk: convolutions of
 * [out, kernel, stride] = [16, 8, 4], [32, 4, 2], [256, 11, 1] followed by
 * two fully-connected layers; the final 11x11 convolution is valid-padded so
 * an 84x84 input collapses to a 256-feature column. Vector observations use
 * a two-layer MLP. The policy head is a diagonal Gaussian with a learned,
 * state-independent log standard deviation.
 */
import * as tf from '@tensorflow/tfjs';

import { BoxSpace } from './adapter.js';

export interface PolicyConfig {
  observationShape: number[]; // [stack, 84, 84] for images, [n] for vectors
  actionSlots: number;
  actionLow: number;
  actionHigh: number;
  hiddenUnits?: number;
  seed?: number;
}

export interface ActResult {
  /** Clipped actions ready for the environment. */
  actions: Float32Array;
  /** The unclipped Gaussian sample the log probability refers to. */
  rawActions: Float32Array;
  logProb: number;
  value: number;
}

export class ActorCritic {
  readonly config: PolicyConfig;
  readonly trunk: tf.LayersModel;
  readonly logStd: tf.Variable;
  private sampleSeed: number;

  constructor(config: PolicyConfig) {
    this.config = { hiddenUnits: 256, ...config };
    this.trunk = this.isImage ? this.buildVision() : this.buildMlp();
    this.logStd = tf.variable(tf.fill([config.actionSlots], -0.5), true);
    this.sampleSeed = (config.seed ?? 0) + 1;
  }

  get isImage(): boolean {
    return this.config.observationShape.length === 3;
  }

  /** trainable variables of trunk + heads + logStd */
  get trainableVariables(): tf.Variable[] {
    const vars = this.trunk.trainableWeights.map(
      (w) => (w as unknown as { val: tf.Variable }).val,
    );
    return [...vars, this.logStd];
  }

  private buildVision(): tf.LayersModel {
    const [stack, h, w] = this.config.observationShape;
    const seed = this.config.seed;
    const input = tf.input({ shape: [h, w, stack] });
    let x = tf.layers
      .conv2d({
        filters: 16, kernelSize: 8, strides: 4, padding: 'same', activation: 'relu',
        kernelInitializer: tf.initializers.glorotUniform({ seed }),
      })
      .apply(input) as tf.SymbolicTensor;
    x = tf.layers
      .conv2d({
        filters: 32, kernelSize: 4, strides: 2, padding: 'same', activation: 'relu',
        kernelInitializer: tf.initializers.glorotUniform({ seed: seed && seed + 1 }),
      })
      .apply(x) as tf.SymbolicTensor;
    x = tf.layers
      .conv2d({
        filters: 256, kernelSize: 11, strides: 1, padding: 'valid', activation: 'relu',
        kernelInitializer: tf.initializers.glorotUniform({ seed: seed && seed + 2 }),
      })
      .apply(x) as tf.SymbolicTensor;
    x = tf.layers.flatten().apply(x) as tf.SymbolicTensor;
    return this.withHeads(input, x, seed && seed + 3);
  }

  private buildMlp(): tf.LayersModel {
    const seed = this.config.seed;
    const input = tf.input({ shape: [this.config.observationShape[0]] });
    let x = tf.layers
      .dense({
        units: this.config.hiddenUnits!, activation: 'tanh',
        kernelInitializer: tf.initializers.glorotUniform({ seed }),
      })
      .apply(input) as tf.SymbolicTensor;
    return this.withHeads(input, x, seed && seed + 1);
  }

  private withHeads(
    input: tf.SymbolicTensor, trunk: tf.SymbolicTensor, seed: number | undefined,
  ): tf.LayersModel {
    let x = trunk;
    for (let i = 0; i < 2; i++) {
      x = tf.layers
        .dense({
          units: this.config.hiddenUnits!, activation: 'tanh',
          kernelInitializer: tf.initializers.glorotUniform({
            seed: seed === undefined ? undefined : seed + i,
          }),
        })
        .apply(x) as tf.SymbolicTensor;
    }
    const mean = tf.layers
      .dense({
        units: this.config.actionSlots, name: 'policy_mean',
        kernelInitializer: tf.initializers.glorotUniform({
          seed: seed === undefined ? undefined : seed + 2,
        }),
      })
      .apply(x) as tf.SymbolicTensor;
    const value = tf.layers
      .dense({
        units: 1, name: 'value',
        kernelInitializer: tf.initializers.glorotUniform({
          seed: seed === undefined ? undefined : seed + 3,
        }),
      })
      .apply(x) as tf.SymbolicTensor;
    return tf.model({ inputs: input, outputs: [mean, value] });
  }

  /** Observation batch [B, ...shape] as channels-last tensors. */
  obsToTensor(batch: Float32Array, batchSize: number): tf.Tensor {
    const shape = this.config.observationShape;
    if (this.isImage) {
      const [stack, h, w] = shape;
      // stored slot-major; the network wants channels last
      return tf.tidy(() =>
        tf.tensor4d(batch, [batchSize, stack, h, w]).transpose([0, 2, 3, 1]),
      );
    }
    return tf.tensor2d(batch, [batchSize, shape[0]]);
  }

  forward(obs: tf.Tensor): { mean: tf.Tensor; value: tf.Tensor } {
    const [mean, value] = this.trunk.apply(obs) as tf.Tensor[];
    return { mean, value: value.squeeze([-1]) };
  }

  /** Gaussian log density of actions under (mean, logStd), summed per row. */
  logProb(actions: tf.Tensor, mean: tf.Tensor): tf.Tensor {
    return tf.tidy(() => {
      const logStd = this.logStd;
      const z = actions.sub(mean).div(logStd.exp());
      const perDim = z
        .square()
        .add(Math.log(2 * Math.PI))
        .mul(-0.5)
        .sub(logStd);
      return perDim.sum(-1);
    });
  }

  /** Sample one action vector (stochastic) or take the mean. */
  act(observation: Float32Array, deterministic = false): ActResult {
    return tf.tidy(() => {
      const obs = this.obsToTensor(observation, 1);
      const { mean, value } = this.forward(obs);
      let sample = mean;
      if (!deterministic) {
        const noise = tf.randomNormal(
          [1, this.config.actionSlots], 0, 1, 'float32', this.sampleSeed++,
        );
        sample = mean.add(noise.mul(this.logStd.exp()));
      }
      const logProb = this.logProb(sample, mean).dataSync()[0];
      const raw = new Float32Array(sample.dataSync() as Float32Array);
      const actions = new Float32Array(raw.length);
      for (let i = 0; i < raw.length; i++) {
        actions[i] = Math.min(
          Math.max(raw[i], this.config.actionLow), this.config.actionHigh,
        );
      }
      return {
        actions,
        rawActions: raw,
        logProb,
        value: value.dataSync()[0],
      };
    });
  }

  static forSpaces(
    observationSpace: BoxSpace, actionSpace: BoxSpace,
    opts: { low: number; high: number; seed?: number },
  ): ActorCritic {
    return new ActorCritic({
      observationShape: observationSpace.shape,
      actionSlots: actionSpace.shape[0],
      actionLow: opts.low,
      actionHigh: opts.high,
      seed: opts.seed,
    });
  }
}
