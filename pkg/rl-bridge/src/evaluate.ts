/**
 * Policy evaluation: deterministic rollouts over several seeds, one summary
 * row per seed plus an aggregate, mirroring the simulator CLI's reporting.
 *
 *   node dist/evaluate.js --checkpoint runs/ring/policy.json --config ring \
 *        --seeds 10 --out runs/ring/eval
 */
import * as fs from 'node:fs';
import * as path from 'node:path';

import yargs from 'yargs';
import { hideBin } from 'yargs/helpers';

import { connectAdapter } from './adapter.js';
import { loadCheckpoint } from './checkpoint.js';
import { writeCsv } from './csv.js';
import { collectEpisode } from './train.js';
import { startServer } from './server.js';

/**
 * Stop-and-go detector over the per-step minimum velocity, matching the
 * simulator's semantics: flow must first establish (every vehicle above
 * 2.5 m/s), after which any dip below 2 m/s fires.
 */
export function waveFired(
  minVelocity: number[], threshold = 2.0, established = 2.5,
): boolean {
  const start = minVelocity.findIndex((v) => v >= established);
  if (start < 0) return false;
  return minVelocity.slice(start).some((v) => v < threshold);
}

export interface EvalRow {
  seed: number;
  return: number;
  mean_velocity: number;
  wave_fired: boolean;
  steps: number;
}

export interface EvaluateOptions {
  checkpoint: string;
  config: string | Record<string, unknown>;
  seeds: number;
  firstSeed?: number;
  out: string;
  port?: number;
  host?: string;
  maxEpisodeSteps?: number;
}

export async function evaluate(options: EvaluateOptions): Promise<EvalRow[]> {
  fs.mkdirSync(options.out, { recursive: true });
  const { policy } = loadCheckpoint(options.checkpoint);
  const ownServer = options.port === undefined;
  const server = ownServer ? await startServer() : undefined;
  const port = options.port ?? server!.port;
  const adapter = await connectAdapter(options.host ?? '127.0.0.1', port);
  try {
    const rows: EvalRow[] = [];
    const first = options.firstSeed ?? 0;
    for (let k = 0; k < options.seeds; k++) {
      const { transitions, log } = await collectEpisode(
        adapter, policy,
        { config: options.config, seed: first + k },
        options.maxEpisodeSteps, true,
      );
      rows.push({
        seed: first + k,
        return: log.ret,
        mean_velocity: log.meanV,
        wave_fired: waveFired(log.minV),
        steps: transitions.length,
      });
    }
    writeCsv(
      path.join(options.out, 'evaluation.csv'),
      ['seed', 'return', 'mean_velocity', 'wave_fired', 'steps'],
      rows as unknown as Array<Record<string, unknown>>,
    );
    const meanV = rows.reduce((a, r) => a + r.mean_velocity, 0) / rows.length;
    const stdV = Math.sqrt(
      rows.reduce((a, r) => a + (r.mean_velocity - meanV) ** 2, 0) / rows.length,
    );
    fs.writeFileSync(
      path.join(options.out, 'evaluation_agg.json'),
      JSON.stringify(
        {
          n_seeds: rows.length,
          mean_velocity: `${meanV.toFixed(4)} ± ${stdV.toFixed(4)}`,
          wave_rate: rows.filter((r) => r.wave_fired).length / rows.length,
        },
        null,
        2,
      ),
    );
    return rows;
  } finally {
    await adapter.close();
    server?.stop();
  }
}

const isMain = process.argv[1] && import.meta.url.endsWith(path.basename(process.argv[1]));
if (isMain) {
  const argv = yargs(hideBin(process.argv))
    .option('checkpoint', { type: 'string', demandOption: true })
    .option('config', { type: 'string', demandOption: true })
    .option('seeds', { type: 'number', default: 10 })
    .option('first-seed', { type: 'number', default: 0 })
    .option('out', { type: 'string', demandOption: true })
    .option('port', { type: 'number' })
    .option('max-episode-steps', { type: 'number' })
    .parseSync();
  evaluate({
    checkpoint: argv.checkpoint,
    config: argv.config,
    seeds: argv.seeds,
    firstSeed: argv['first-seed'],
    out: argv.out,
    port: argv.port,
    maxEpisodeSteps: argv['max-episode-steps'],
  }).catch((err) => {
    console.error(err);
    process.exit(1);
  });
}
