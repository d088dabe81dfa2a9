/** Reader for the etcbandit results CSV schema.
 *
 * Layout: leading `#` comment lines (timestamp, schema version), then a
 * header row naming the columns, then data rows. Consumers address
 * columns by name, never by position.
 */

import { readFileSync } from 'node:fs';

export type Row = Record<string, string | number>;

export interface ResultsTable {
  columns: string[];
  rows: Row[];
  schema: string;
}

export class SchemaError extends Error {}

export function parseResults(text: string): ResultsTable {
  const lines = text.split(/\r?\n/);
  let schema = '';
  let header: string[] | null = null;
  const rows: Row[] = [];
  for (const line of lines) {
    if (line.trim() === '') continue;
    if (line.startsWith('#')) {
      const m = line.match(/^#\s*schema:\s*(.*)$/);
      if (m) schema = m[1].trim();
      continue;
    }
    const cells = line.split(',');
    if (header === null) {
      header = cells.map((c) => c.trim());
      continue;
    }
    if (cells.length !== header.length) {
      throw new SchemaError(
        `row has ${cells.length} cells, header has ${header.length}`,
      );
    }
    const row: Row = {};
    for (let i = 0; i < header.length; i++) {
      const raw = cells[i];
      const num = Number(raw);
      row[header[i]] = raw !== '' && Number.isFinite(num) ? num : raw;
    }
    rows.push(row);
  }
  if (header === null) {
    throw new SchemaError('no header row found');
  }
  return { columns: header, rows, schema };
}

export function readResults(path: string): ResultsTable {
  return parseResults(readFileSync(path, 'utf8'));
}

/** Fail loudly, naming the first missing column. */
export function requireColumns(table: ResultsTable, names: string[]): void {
  for (const name of names) {
    if (!table.columns.includes(name)) {
      throw new SchemaError(`missing column: ${name}`);
    }
  }
}

export function numeric(row: Row, name: string): number {
  const v = row[name];
  if (typeof v !== 'number') {
    throw new SchemaError(`column ${name} is not numeric in row`);
  }
  return v;
}
