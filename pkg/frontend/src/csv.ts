/**
 * Minimal reader for the solver's CSV outputs: UTF-8, one header row,
 * numeric fields in %.12e format ("nan" for unavailable values).
 */

import { readFileSync } from 'fs';

export interface Table {
  columns: string[];
  rows: number[][];
}

export class SchemaMismatchError extends Error {
  constructor(path: string, expected: string[], found: string[]) {
    const missing = expected.filter((c) => !found.includes(c));
    const extra = found.filter((c) => !expected.includes(c));
    super(
      `${path}: column mismatch\n  expected: ${expected.join(', ')}\n` +
      `  found:    ${found.join(', ')}\n` +
      `  missing:  ${missing.join(', ') || '(none)'}\n` +
      `  extra:    ${extra.join(', ') || '(none)'}`,
    );
    this.name = 'SchemaMismatchError';
  }
}

export function readCsv(path: string, expectedColumns: string[]): Table {
  const text = readFileSync(path, 'utf-8');
  const lines = text.split('\n').filter((l) => l.length > 0);
  const columns = lines[0].split(',');
  if (
    columns.length !== expectedColumns.length ||
    expectedColumns.some((c, i) => columns[i] !== c)
  ) {
    throw new SchemaMismatchError(path, expectedColumns, columns);
  }
  const rows = lines.slice(1).map((line) => line.split(',').map(Number));
  return { columns, rows };
}

export function column(table: Table, name: string): number[] {
  const idx = table.columns.indexOf(name);
  if (idx < 0) throw new Error(`no column ${name}`);
  return table.rows.map((r) => r[idx]);
}

export function readJson(path: string): any {
  return JSON.parse(readFileSync(path, 'utf-8'));
}
