/**
 * Async request/response client for the framed control protocol. The
 * protocol is strictly one response per request on a single connection,
 * so requests are queued and resolved in order.
 */
import * as net from 'node:net';

import { FrameDecoder, encodeFrame } from './framing.js';

export interface ProtocolResponse {
  ok: boolean;
  error?: string;
  expected_arity?: number;
  obs?: ObservationPayload;
  reward?: number;
  done?: boolean;
  info?: Record<string, unknown>;
  spaces?: SpacesPayload;
}

export interface ObservationPayload {
  kind: 'image' | 'vector';
  shape?: number[];
  dtype?: string;
  data_b64?: string;
  data?: number[];
}

export interface SpacesPayload {
  action: { kind: 'acceleration' | 'velocity'; low: number; high: number; slots: number };
  observation: { mode: string; shape: number[] };
}

export class ProtocolClient {
  private socket: net.Socket;
  private decoder = new FrameDecoder();
  private pending: Array<{
    resolve: (response: ProtocolResponse) => void;
    reject: (err: Error) => void;
  }> = [];

  private constructor(socket: net.Socket) {
    this.socket = socket;
    socket.on('data', (chunk) => {
      for (const frame of this.decoder.push(chunk)) {
        const waiter = this.pending.shift();
        if (waiter) waiter.resolve(frame as ProtocolResponse);
      }
    });
    socket.on('error', (err) => this.failAll(err));
    socket.on('close', () => this.failAll(new Error('connection closed')));
  }

  static connect(host: string, port: number): Promise<ProtocolClient> {
    return new Promise((resolve, reject) => {
      const socket = net.createConnection({ host, port }, () =>
        resolve(new ProtocolClient(socket)),
      );
      socket.once('error', reject);
    });
  }

  private failAll(err: Error): void {
    while (this.pending.length) this.pending.shift()!.reject(err);
  }

  request(message: unknown): Promise<ProtocolResponse> {
    return new Promise((resolve, reject) => {
      this.pending.push({ resolve, reject });
      this.socket.write(encodeFrame(message));
    });
  }

  async close(): Promise<void> {
    try {
      await this.request({ cmd: 'close' });
    } catch {
      // the server may already have gone away
    }
    this.socket.destroy();
  }
}
