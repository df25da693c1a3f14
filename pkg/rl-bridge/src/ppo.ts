/**
 * Proximal policy optimization with clipped surrogate objective and GAE.
 *
 * Hyperparameter defaults follow the published PPO defaults of the
 * distributed-RL library the experiments reference: gamma 0.99, lambda 1.0,
 * clip 0.3, lr 5e-5, 30 SGD epochs, minibatch 128, value coefficient 1.0,
 * no entropy bonus. All overridable.
 */
import * as tf from '@tensorflow/tfjs';

import { ActorCritic } from './policy.js';

export interface PpoParams {
  gamma: number;
  lam: number;
  clip: number;
  lr: number;
  epochs: number;
  minibatch: number;
  valueCoef: number;
  entropyCoef: number;
}

export const PPO_DEFAULTS: PpoParams = {
  gamma: 0.99,
  lam: 1.0,
  clip: 0.3,
  lr: 5e-5,
  epochs: 30,
  minibatch: 128,
  valueCoef: 1.0,
  entropyCoef: 0.0,
};

export interface Transition {
  observation: Float32Array;
  rawActions: Float32Array;
  logProb: number;
  value: number;
  reward: number;
  done: boolean;
}

/**
 * Generalized advantage estimation over one trajectory segment.
 * `lastValue` bootstraps the value beyond the final transition (0 when the
 * segment ends in a terminal state).
 */
export function computeGae(
  rewards: number[], values: number[], dones: boolean[],
  lastValue: number, gamma: number, lam: number,
): { advantages: Float32Array; returns: Float32Array } {
  const n = rewards.length;
  const advantages = new Float32Array(n);
  let adv = 0;
  for (let t = n - 1; t >= 0; t--) {
    const nextValue = t === n - 1 ? lastValue : values[t + 1];
    const nonTerminal = dones[t] ? 0 : 1;
    const delta = rewards[t] + gamma * nextValue * nonTerminal - values[t];
    adv = delta + gamma * lam * nonTerminal * adv;
    advantages[t] = adv;
  }
  const returns = new Float32Array(n);
  for (let t = 0; t < n; t++) returns[t] = advantages[t] + values[t];
  return { advantages, returns };
}

export interface UpdateStats {
  policyLoss: number;
  valueLoss: number;
  approxKl: number;
}

export class PpoTrainer {
  readonly policy: ActorCritic;
  readonly params: PpoParams;
  private optimizer: tf.Optimizer;

  constructor(policy: ActorCritic, params: Partial<PpoParams> = {}) {
    this.policy = policy;
    this.params = { ...PPO_DEFAULTS, ...params };
    this.optimizer = tf.train.adam(this.params.lr);
  }

  /** One PPO update over a collected batch of transitions. */
  update(batch: Transition[], lastValue: number): UpdateStats {
    const p = this.params;
    const n = batch.length;
    const { advantages, returns } = computeGae(
      batch.map((t) => t.reward),
      batch.map((t) => t.value),
      batch.map((t) => t.done),
      lastValue,
      p.gamma,
      p.lam,
    );
    // advantage normalization stabilizes small batches
    const mean = advantages.reduce((a, b) => a + b, 0) / n;
    const variance =
      advantages.reduce((a, b) => a + (b - mean) * (b - mean), 0) / n;
    const std = Math.sqrt(variance) + 1e-8;
    const normAdv = Float32Array.from(advantages, (a) => (a - mean) / std);

    const obsSize = batch[0].observation.length;
    const slotCount = batch[0].rawActions.length;
    const obsFlat = new Float32Array(n * obsSize);
    const actFlat = new Float32Array(n * slotCount);
    for (let i = 0; i < n; i++) {
      obsFlat.set(batch[i].observation, i * obsSize);
      actFlat.set(batch[i].rawActions, i * slotCount);
    }
    const oldLogProb = Float32Array.from(batch, (t) => t.logProb);

    let policyLoss = 0;
    let valueLoss = 0;
    let approxKl = 0;
    const indices = Array.from({ length: n }, (_, i) => i);
    for (let epoch = 0; epoch < p.epochs; epoch++) {
      for (let start = 0; start < n; start += p.minibatch) {
        const mb = indices.slice(start, start + p.minibatch);
        const stats = this.minibatchStep(
          mb, obsFlat, actFlat, oldLogProb, normAdv, returns, obsSize, slotCount,
        );
        policyLoss = stats.policyLoss;
        valueLoss = stats.valueLoss;
        approxKl = stats.approxKl;
      }
    }
    return { policyLoss, valueLoss, approxKl };
  }

  private minibatchStep(
    mb: number[], obsFlat: Float32Array, actFlat: Float32Array,
    oldLogProb: Float32Array, advantages: Float32Array, returns: Float32Array,
    obsSize: number, slotCount: number,
  ): UpdateStats {
    const p = this.params;
    const m = mb.length;
    const obsMb = new Float32Array(m * obsSize);
    const actMb = new Float32Array(m * slotCount);
    const oldMb = new Float32Array(m);
    const advMb = new Float32Array(m);
    const retMb = new Float32Array(m);
    mb.forEach((src, row) => {
      obsMb.set(obsFlat.subarray(src * obsSize, (src + 1) * obsSize), row * obsSize);
      actMb.set(actFlat.subarray(src * slotCount, (src + 1) * slotCount), row * slotCount);
      oldMb[row] = oldLogProb[src];
      advMb[row] = advantages[src];
      retMb[row] = returns[src];
    });

    let stats: UpdateStats = { policyLoss: 0, valueLoss: 0, approxKl: 0 };
    this.optimizer.minimize(
      () =>
        tf.tidy(() => {
          const obs = this.policy.obsToTensor(obsMb, m);
          const { mean, value } = this.policy.forward(obs);
          const actions = tf.tensor2d(actMb, [m, slotCount]);
          const logProb = this.policy.logProb(actions, mean);
          const old = tf.tensor1d(oldMb);
          const adv = tf.tensor1d(advMb);
          const ratio = logProb.sub(old).exp();
          const clipped = ratio.clipByValue(1 - p.clip, 1 + p.clip);
          const surrogate = tf
            .minimum(ratio.mul(adv), clipped.mul(adv))
            .mean()
            .neg();
          const vLoss = value.sub(tf.tensor1d(retMb)).square().mean();
          const entropy = this.policy.logStd
            .add(0.5 * Math.log(2 * Math.PI * Math.E))
            .sum();
          const loss = surrogate
            .add(vLoss.mul(p.valueCoef))
            .sub(entropy.mul(p.entropyCoef)) as tf.Scalar;
          stats = {
            policyLoss: surrogate.dataSync()[0],
            valueLoss: vLoss.dataSync()[0],
            approxKl: old.sub(logProb).mean().dataSync()[0],
          };
          return loss;
        }),
      false,
      this.policy.trainableVariables,
    );
    if (!Number.isFinite(stats.policyLoss) || !Number.isFinite(stats.valueLoss)) {
      throw new Error(
        `optimization diverged: policy loss ${stats.policyLoss}, value loss ${stats.valueLoss}`,
      );
    }
    return stats;
  }
}
