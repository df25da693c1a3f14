/**
 * Helper that launches the simulator's protocol server as a subprocess
 * (`mixedtraffic serve --transport tcp`) and reports the bound port.
 */
import { ChildProcess, spawn } from 'node:child_process';

export interface ServerHandle {
  port: number;
  process: ChildProcess;
  stop(): void;
}

const PORT_PATTERN = /listening on [^:]+:(\d+)/;

export function startServer(
  options: { python?: string; maxConnections?: number } = {},
): Promise<ServerHandle> {
  const python = options.python ?? process.env.MIXEDTRAFFIC_PYTHON ?? 'python3';
  const args = ['-m', 'mixedtraffic.cli', 'serve', '--transport', 'tcp', '--port', '0'];
  if (options.maxConnections !== undefined) {
    args.push('--max-connections', String(options.maxConnections));
  }
  const child = spawn(python, args, { stdio: ['ignore', 'pipe', 'inherit'] });
  return new Promise((resolve, reject) => {
    let buffered = '';
    const onData = (chunk: Buffer) => {
      buffered += chunk.toString();
      const match = PORT_PATTERN.exec(buffered);
      if (match) {
        child.stdout!.off('data', onData);
        resolve({
          port: Number(match[1]),
          process: child,
          stop: () => child.kill('SIGTERM'),
        });
      }
    };
    child.stdout!.on('data', onData);
    child.once('error', reject);
    child.once('exit', (code) => {
      if (!PORT_PATTERN.test(buffered)) {
        reject(new Error(`server exited with code ${code} before binding`));
      }
    });
  });
}
