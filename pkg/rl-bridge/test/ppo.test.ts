import { describe, expect, it } from 'vitest';

import { ActorCritic } from '../src/policy.js';
import { PPO_DEFAULTS, PpoTrainer, Transition, computeGae } from '../src/ppo.js';
import { loadCheckpoint, saveCheckpoint } from '../src/checkpoint.js';
import * as fs from 'node:fs';
import * as os from 'node:os';
import * as path from 'node:path';

describe('computeGae', () => {
  it('matches the hand-unrolled recursion on a short segment', () => {
    // delta_t = r_t + gamma*V_{t+1}*(1-d) - V_t; adv_t = delta_t + gamma*lam*(1-d)*adv_{t+1}
    const rewards = [1.0, 0.0, 2.0];
    const values = [0.5, 0.4, 0.3];
    const dones = [false, false, true];
    const gamma = 0.9;
    const lam = 0.8;
    const d2 = 2.0 + 0 - 0.3; // terminal: no bootstrap
    const d1 = 0.0 + gamma * 0.3 - 0.4;
    const d0 = 1.0 + gamma * 0.4 - 0.5;
    const a2 = d2;
    const a1 = d1 + gamma * lam * a2;
    const a0 = d0 + gamma * lam * a1;
    const { advantages, returns } = computeGae(rewards, values, dones, 99.0, gamma, lam);
    expect(advantages[2]).toBeCloseTo(a2, 6);
    expect(advantages[1]).toBeCloseTo(a1, 6);
    expect(advantages[0]).toBeCloseTo(a0, 6);
    expect(returns[0]).toBeCloseTo(a0 + 0.5, 6);
  });

  it('bootstraps with lastValue when the segment is truncated', () => {
    const { advantages } = computeGae([0.0], [1.0], [false], 2.0, 0.5, 1.0);
    expect(advantages[0]).toBeCloseTo(0.0 + 0.5 * 2.0 - 1.0, 9);
  });

  it('monte-carlo limit at lam=1, gamma=1 with zero values', () => {
    const { advantages } = computeGae(
      [1, 1, 1], [0, 0, 0], [false, false, true], 0, 1.0, 1.0,
    );
    expect(Array.from(advantages)).toEqual([3, 2, 1]);
  });
});

describe('ActorCritic', () => {
  it('vector policy emits one action per slot and a scalar value', () => {
    const policy = new ActorCritic({
      observationShape: [3], actionSlots: 2, actionLow: -1, actionHigh: 1, seed: 0,
    });
    const act = policy.act(new Float32Array([0.1, 0.2, 0.3]));
    expect(act.actions.length).toBe(2);
    expect(Number.isFinite(act.logProb)).toBe(true);
    expect(Number.isFinite(act.value)).toBe(true);
    for (const a of act.actions) {
      expect(a).toBeGreaterThanOrEqual(-1);
      expect(a).toBeLessThanOrEqual(1);
    }
  });

  it('vision trunk accepts a stacked 84x84 image and collapses to features', () => {
    const policy = new ActorCritic({
      observationShape: [5, 84, 84], actionSlots: 5,
      actionLow: -1.5, actionHigh: 1.5, seed: 0,
    });
    const obs = new Float32Array(5 * 84 * 84);
    const act = policy.act(obs, true);
    expect(act.actions.length).toBe(5);
  });

  it('deterministic action is the clipped mean', () => {
    const policy = new ActorCritic({
      observationShape: [3], actionSlots: 1, actionLow: -1, actionHigh: 1, seed: 3,
    });
    const obs = new Float32Array([1, 2, 3]);
    const a = policy.act(obs, true).actions[0];
    const b = policy.act(obs, true).actions[0];
    expect(a).toBe(b);
  });
});

describe('PpoTrainer', () => {
  function syntheticBatch(policy: ActorCritic, n: number): Transition[] {
    const batch: Transition[] = [];
    for (let i = 0; i < n; i++) {
      const obs = new Float32Array([Math.cos(i), Math.sin(i), i / n]);
      const act = policy.act(obs);
      batch.push({
        observation: obs,
        rawActions: act.rawActions,
        logProb: act.logProb,
        value: act.value,
        // reward favors positive first action component
        reward: act.actions[0],
        done: i === n - 1,
      });
    }
    return batch;
  }

  it('improves a trivially learnable objective', () => {
    const policy = new ActorCritic({
      observationShape: [3], actionSlots: 1, actionLow: -1, actionHigh: 1, seed: 1,
    });
    const trainer = new PpoTrainer(policy, {
      lr: 3e-3, epochs: 5, minibatch: 32, lam: 0.95,
    });
    const before =
      syntheticBatch(policy, 64).reduce((a, t) => a + t.reward, 0) / 64;
    for (let iter = 0; iter < 10; iter++) {
      const stats = trainer.update(syntheticBatch(policy, 64), 0);
      expect(Number.isFinite(stats.policyLoss)).toBe(true);
    }
    const after =
      syntheticBatch(policy, 64).reduce((a, t) => a + t.reward, 0) / 64;
    expect(after).toBeGreaterThan(before);
  });

  it('pins the documented defaults', () => {
    expect(PPO_DEFAULTS).toEqual({
      gamma: 0.99, lam: 1.0, clip: 0.3, lr: 5e-5,
      epochs: 30, minibatch: 128, valueCoef: 1.0, entropyCoef: 0.0,
    });
  });
});

describe('checkpoints', () => {
  it('round-trips weights exactly', () => {
    const policy = new ActorCritic({
      observationShape: [4], actionSlots: 2, actionLow: -2, actionHigh: 2, seed: 5,
    });
    const obs = new Float32Array([0.5, -0.5, 1.0, 0.0]);
    const before = policy.act(obs, true);
    const dir = fs.mkdtempSync(path.join(os.tmpdir(), 'ckpt-'));
    const file = path.join(dir, 'policy.json');
    saveCheckpoint(file, policy, { note: 'test' });
    const { policy: restored, meta } = loadCheckpoint(file);
    expect(meta.note).toBe('test');
    const after = restored.act(obs, true);
    expect(Array.from(after.actions)).toEqual(Array.from(before.actions));
    expect(after.value).toBeCloseTo(before.value, 6);
  });
});
