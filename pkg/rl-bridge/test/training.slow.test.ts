/**
 * Hours-scale training reproductions, gated behind RUN_SLOW=1:
 *
 *   RUN_SLOW=1 npx vitest run test/training.slow.test.ts --testTimeout 0
 *
 * 1. A ring policy trained on image observations (200 episodes) must reach
 *    at least the all-human mean velocity at 250 m circumference in 7/10
 *    evaluation seeds.
 * 2. A position-only ring policy must fire the stop-and-go detector less
 *    often than the all-human baseline over 10 evaluation seeds.
 */
import { execFileSync } from 'node:child_process';
import * as fs from 'node:fs';
import * as os from 'node:os';
import * as path from 'node:path';
import { describe, expect, it } from 'vitest';

import { evaluate } from '../src/evaluate.js';
import { train } from '../src/train.js';

const slow = process.env.RUN_SLOW ? describe : describe.skip;

const EVAL_CONFIG = {
  env: 'ring',
  network: { circumference: 250.0 },
};

function pythonBaseline(seeds: number): { meanV: number[]; waveRate: number } {
  const code = [
    'import json, numpy as np, mixedtraffic as mt',
    'from mixedtraffic.metrics import metric_avg_velocity, detect_wave',
    'rows, fired = [], 0',
    `for seed in range(${seeds}):`,
    '    cfg = mt.default_config("ring", seed=seed, rv_as_hv=True, network={"circumference": 250.0})',
    '    rec = mt.run_episode(cfg, record_states=False)',
    '    a = rec.arrays',
    '    rows.append(metric_avg_velocity(a["mean_v"], a["phase"], a["n_veh"]))',
    '    w = detect_wave(a["time"], a["min_v"], a["argmin_s"], 250.0)',
    '    fired += int(w.fired)',
    `print(json.dumps({"meanV": rows, "waveRate": fired / ${seeds}}))`,
  ].join('\n');
  return JSON.parse(
    execFileSync(process.env.MIXEDTRAFFIC_PYTHON ?? 'python3', ['-c', code], {
      encoding: 'utf-8',
    }).trim(),
  );
}

slow('trained ring policies (hours-scale)', () => {
  it('image policy beats the all-human baseline at 250 m in 7/10 seeds', async () => {
    const out = fs.mkdtempSync(path.join(os.tmpdir(), 'ring-image-'));
    await train({
      config: 'ring', episodes: 200, out, seed: 0,
    });
    const rows = await evaluate({
      checkpoint: path.join(out, 'policy.json'),
      config: EVAL_CONFIG,
      seeds: 10,
      out: path.join(out, 'eval'),
    });
    const baseline = pythonBaseline(10);
    let wins = 0;
    rows.forEach((row, k) => {
      if (row.mean_velocity >= baseline.meanV[k]) wins += 1;
    });
    expect(wins).toBeGreaterThanOrEqual(7);
  });

  it('position-only policy reduces the wave-detector firing rate', async () => {
    const out = fs.mkdtempSync(path.join(os.tmpdir(), 'ring-pos-'));
    const config = {
      env: 'ring',
      observation: { mode: 'position_only' },
    };
    await train({ config, episodes: 200, out, seed: 0 });
    const rows = await evaluate({
      checkpoint: path.join(out, 'policy.json'),
      config: { ...EVAL_CONFIG, observation: { mode: 'position_only' } },
      seeds: 10,
      out: path.join(out, 'eval'),
    });
    const baseline = pythonBaseline(10);
    const policyRate = rows.filter((r) => r.wave_fired).length / rows.length;
    expect(policyRate).toBeLessThan(baseline.waveRate);
  });

  it('seed-fixed short run reproduces returns on the same machine', async () => {
    const runOnce = async () => {
      const out = fs.mkdtempSync(path.join(os.tmpdir(), 'ring-repro-'));
      const curve = await train({
        config: {
          env: 'ring', warmup: 50, horizon: 60,
          network: { circumference: 230.0 },
        },
        episodes: 5,
        out,
        seed: 4,
        ppo: { epochs: 3, minibatch: 32 },
      });
      return curve.map((row) => row.return);
    };
    expect(await runOnce()).toEqual(await runOnce());
  });
});
