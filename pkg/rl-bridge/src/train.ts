/**
 * Training entry point: PPO over the control protocol.
 *
 *   node dist/train.js --config ring --episodes 200 --out runs/ring
 *
 * One training iteration consumes one full episode. The training curve
 * (episode, return, mean velocity) lands in <out>/training_curve.csv and
 * the policy checkpoint in <out>/policy.json.
 */
import * as fs from 'node:fs';
import * as path from 'node:path';

import yargs from 'yargs';
import { hideBin } from 'yargs/helpers';

import { AdapterConfig, EnvAdapter, connectAdapter } from './adapter.js';
import { saveCheckpoint } from './checkpoint.js';
import { writeCsv } from './csv.js';
import { ActorCritic } from './policy.js';
import { PpoTrainer, Transition } from './ppo.js';
import { startServer } from './server.js';

export interface TrainOptions {
  config: string | Record<string, unknown>;
  episodes: number;
  out: string;
  seed: number;
  host?: string;
  port?: number;
  obsMode?: string;
  maxEpisodeSteps?: number;
  ppo?: Partial<import('./ppo.js').PpoParams>;
}

export interface EpisodeLog {
  episode: number;
  return: number;
  mean_velocity: number;
  steps: number;
}

export async function collectEpisode(
  adapter: EnvAdapter, policy: ActorCritic, cfg: AdapterConfig,
  maxSteps: number | undefined, deterministic: boolean,
): Promise<{ transitions: Transition[]; log: { ret: number; meanV: number; minV: number[] } }> {
  let obs = await adapter.reset(cfg);
  const transitions: Transition[] = [];
  let ret = 0;
  let vSum = 0;
  let vSteps = 0;
  const minV: number[] = [];
  for (let step = 0; maxSteps === undefined || step < maxSteps; step++) {
    const act = policy.act(obs, deterministic);
    const result = await adapter.step(act.actions);
    transitions.push({
      observation: obs,
      rawActions: act.rawActions,
      logProb: act.logProb,
      value: act.value,
      reward: result.reward,
      done: result.done,
    });
    ret += result.reward;
    const info = result.info as { mean_velocity?: number; min_velocity?: number; n_vehicles?: number };
    if ((info.n_vehicles ?? 0) > 0 && info.mean_velocity !== undefined) {
      vSum += info.mean_velocity;
      vSteps += 1;
    }
    if (info.min_velocity !== undefined) minV.push(info.min_velocity);
    obs = result.observation;
    if (result.done) break;
  }
  return {
    transitions,
    log: { ret, meanV: vSteps ? vSum / vSteps : NaN, minV },
  };
}

export async function train(options: TrainOptions): Promise<EpisodeLog[]> {
  fs.mkdirSync(options.out, { recursive: true });
  const ownServer = options.port === undefined;
  const server = ownServer ? await startServer() : undefined;
  const port = options.port ?? server!.port;
  const host = options.host ?? '127.0.0.1';
  const adapter = await connectAdapter(host, port);
  try {
    const cfg = (seed: number): AdapterConfig => ({
      config: options.config,
      seed,
    });
    // one probe reset declares the spaces the policy must mirror
    await adapter.reset(cfg(options.seed));
    const policy = ActorCritic.forSpaces(adapter.observationSpace!, adapter.actionSpace!, {
      low: adapter.actionSpace!.low,
      high: adapter.actionSpace!.high,
      seed: options.seed,
    });
    const trainer = new PpoTrainer(policy, options.ppo);
    const curve: EpisodeLog[] = [];
    for (let episode = 0; episode < options.episodes; episode++) {
      const { transitions, log } = await collectEpisode(
        adapter, policy, cfg(options.seed + episode), options.maxEpisodeSteps, false,
      );
      const lastDone = transitions[transitions.length - 1].done;
      const lastValue = lastDone
        ? 0
        : policy.act(transitions[transitions.length - 1].observation, true).value;
      trainer.update(transitions, lastValue);
      curve.push({
        episode,
        return: log.ret,
        mean_velocity: log.meanV,
        steps: transitions.length,
      });
      writeCsv(
        path.join(options.out, 'training_curve.csv'),
        ['episode', 'return', 'mean_velocity', 'steps'],
        curve as unknown as Array<Record<string, unknown>>,
      );
      saveCheckpoint(path.join(options.out, 'policy.json'), policy, {
        config: options.config,
        episodesTrained: episode + 1,
      });
      console.log(
        `episode ${episode}: return ${log.ret.toFixed(2)}, ` +
          `mean velocity ${log.meanV.toFixed(3)} m/s, steps ${transitions.length}`,
      );
    }
    return curve;
  } finally {
    await adapter.close();
    server?.stop();
  }
}

const isMain = process.argv[1] && import.meta.url.endsWith(path.basename(process.argv[1]));
if (isMain) {
  const argv = yargs(hideBin(process.argv))
    .option('config', { type: 'string', demandOption: true })
    .option('episodes', { type: 'number', default: 200 })
    .option('out', { type: 'string', demandOption: true })
    .option('seed', { type: 'number', default: 0 })
    .option('port', { type: 'number' })
    .option('max-episode-steps', { type: 'number' })
    .parseSync();
  train({
    config: argv.config,
    episodes: argv.episodes,
    out: argv.out,
    seed: argv.seed,
    port: argv.port,
    maxEpisodeSteps: argv['max-episode-steps'],
  }).catch((err) => {
    console.error(err);
    process.exit(1);
  });
}
