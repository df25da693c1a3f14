/**
 * Self-contained policy checkpoints: one JSON file holding the policy
 * configuration plus base64-encoded float32 weights (the pure-JS tensor
 * backend has no filesystem handler, so weights are serialized by hand).
 */
import * as fs from 'node:fs';

import * as tf from '@tensorflow/tfjs';

import { ActorCritic, PolicyConfig } from './policy.js';

interface StoredWeight {
  shape: number[];
  data_b64: string;
}

interface CheckpointFile {
  format: 'mixedtraffic-policy-v1';
  policy: PolicyConfig;
  meta: Record<string, unknown>;
  trunk: StoredWeight[];
  logStd: StoredWeight;
}

function encode(tensor: tf.Tensor): StoredWeight {
  const data = tensor.dataSync() as Float32Array;
  return {
    shape: tensor.shape.slice(),
    data_b64: Buffer.from(data.buffer, data.byteOffset, data.byteLength).toString('base64'),
  };
}

function decode(stored: StoredWeight): tf.Tensor {
  const buf = Buffer.from(stored.data_b64, 'base64');
  const data = new Float32Array(buf.buffer, buf.byteOffset, buf.byteLength / 4);
  return tf.tensor(Array.from(data), stored.shape);
}

export function saveCheckpoint(
  path: string, policy: ActorCritic, meta: Record<string, unknown> = {},
): void {
  const file: CheckpointFile = {
    format: 'mixedtraffic-policy-v1',
    policy: policy.config,
    meta,
    trunk: policy.trunk.getWeights().map(encode),
    logStd: encode(policy.logStd),
  };
  fs.writeFileSync(path, JSON.stringify(file));
}

export function loadCheckpoint(path: string): {
  policy: ActorCritic;
  meta: Record<string, unknown>;
} {
  const file = JSON.parse(fs.readFileSync(path, 'utf-8')) as CheckpointFile;
  if (file.format !== 'mixedtraffic-policy-v1') {
    throw new Error(`${path}: unknown checkpoint format ${file.format}`);
  }
  const policy = new ActorCritic(file.policy);
  policy.trunk.setWeights(file.trunk.map(decode));
  policy.logStd.assign(decode(file.logStd) as tf.Tensor1D);
  return { policy, meta: file.meta };
}
