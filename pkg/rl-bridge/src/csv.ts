import * as fs from 'node:fs';

export function writeCsv(
  path: string, columns: string[], rows: Array<Record<string, unknown>>,
): void {
  const lines = [columns.join(',')];
  for (const row of rows) {
    lines.push(columns.map((c) => String(row[c] ?? '')).join(','));
  }
  fs.writeFileSync(path, lines.join('\n') + '\n');
}
