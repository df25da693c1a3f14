export { FrameDecoder, encodeFrame } from './framing.js';
export { ProtocolClient } from './client.js';
export type { ObservationPayload, ProtocolResponse, SpacesPayload } from './client.js';
export { EnvAdapter, connectAdapter } from './adapter.js';
export type { AdapterConfig, BoxSpace, StepResult } from './adapter.js';
export { startServer } from './server.js';
export type { ServerHandle } from './server.js';
export { ActorCritic } from './policy.js';
export type { ActResult, PolicyConfig } from './policy.js';
export { PPO_DEFAULTS, PpoTrainer, computeGae } from './ppo.js';
export type { PpoParams, Transition, UpdateStats } from './ppo.js';
export { loadCheckpoint, saveCheckpoint } from './checkpoint.js';
export { collectEpisode, train } from './train.js';
export { evaluate, waveFired } from './evaluate.js';
