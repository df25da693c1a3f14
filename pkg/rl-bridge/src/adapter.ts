/**
 * Standard RL-environment adapter over the control protocol.
 *
 * The adapter is a pure transport: image bytes are scaled to [0, 1] and
 * nothing else is transformed. Observation and action spaces mirror the
 * shapes the simulator declares at reset.
 */
import { ObservationPayload, ProtocolClient, SpacesPayload } from './client.js';

export interface BoxSpace {
  low: number;
  high: number;
  shape: number[];
}

export interface StepResult {
  observation: Float32Array;
  reward: number;
  done: boolean;
  info: Record<string, unknown>;
}

export interface AdapterConfig {
  /** Builtin config name, YAML path, or an inline config mapping. */
  config: string | Record<string, unknown>;
  seed?: number;
}

function decodeObservation(payload: ObservationPayload): Float32Array {
  if (payload.kind === 'image') {
    const raw = Buffer.from(payload.data_b64!, 'base64');
    const out = new Float32Array(raw.length);
    for (let i = 0; i < raw.length; i++) out[i] = raw[i] / 255.0;
    return out;
  }
  return Float32Array.from(payload.data!);
}

export class EnvAdapter {
  private client: ProtocolClient;
  private stepsTaken = 0;
  observationSpace: BoxSpace | null = null;
  actionSpace: BoxSpace | null = null;
  spaces: SpacesPayload | null = null;

  constructor(client: ProtocolClient) {
    this.client = client;
  }

  get actionSlots(): number {
    if (!this.spaces) throw new Error('reset() before reading spaces');
    return this.spaces.action.slots;
  }

  async reset(cfg: AdapterConfig): Promise<Float32Array> {
    const response = await this.client.request({
      cmd: 'reset',
      config: cfg.config,
      seed: cfg.seed,
    });
    if (!response.ok) throw new Error(`reset failed: ${response.error}`);
    this.spaces = response.spaces!;
    const obsShape = this.spaces.observation.shape;
    this.observationSpace = {
      low: 0,
      high: 1,
      shape: obsShape,
    };
    this.actionSpace = {
      low: this.spaces.action.low,
      high: this.spaces.action.high,
      shape: [this.spaces.action.slots],
    };
    this.stepsTaken = 0;
    return decodeObservation(response.obs!);
  }

  async step(actions: ArrayLike<number>): Promise<StepResult> {
    if (!this.spaces) throw new Error('step() before reset()');
    if (actions.length !== this.spaces.action.slots) {
      throw new Error(
        `expected ${this.spaces.action.slots} actions, got ${actions.length}`,
      );
    }
    const response = await this.client.request({
      cmd: 'step',
      actions: Array.from(actions),
    });
    if (!response.ok) {
      throw new Error(`step ${this.stepsTaken} failed: ${response.error}`);
    }
    this.stepsTaken += 1;
    return {
      observation: decodeObservation(response.obs!),
      reward: response.reward!,
      done: response.done!,
      info: (response.info ?? {}) as Record<string, unknown>,
    };
  }

  async close(): Promise<void> {
    await this.client.close();
  }
}

export async function connectAdapter(host: string, port: number): Promise<EnvAdapter> {
  return new EnvAdapter(await ProtocolClient.connect(host, port));
}
