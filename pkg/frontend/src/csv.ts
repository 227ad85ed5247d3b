/** Minimal CSV reading for the simulator's result files.
 *
 * The files are plain comma-separated text with a single header line and
 * no quoting, so a straight split is exact. Every accessor reports the
 * file, line, and column it was looking at when something is off.
 */

import { FigureError } from "./types.js";

export interface Table {
  path: string;
  header: string[];
  rows: string[][];
}

export function parseCsv(text: string, path: string): Table {
  const lines = text.split(/\r?\n/).filter((line) => line.length > 0);
  if (lines.length === 0) {
    throw new FigureError(`${path}: empty file`);
  }
  const header = lines[0]!.split(",").map((name) => name.trim());
  const rows = lines.slice(1).map((line) => line.split(","));
  rows.forEach((row, i) => {
    if (row.length !== header.length) {
      throw new FigureError(
        `${path}: line ${i + 2} has ${row.length} fields, expected ${header.length}`,
      );
    }
  });
  if (rows.length === 0) {
    throw new FigureError(`${path}: no data rows`);
  }
  return { path, header, rows };
}

/** Indices of the named columns, in order; the first missing name is the
 * one reported. */
export function columnIndices(table: Table, names: string[]): number[] {
  return names.map((name) => {
    const at = table.header.indexOf(name);
    if (at < 0) {
      throw new FigureError(
        `${table.path}: missing column '${name}' (found: ${table.header.join(", ")})`,
      );
    }
    return at;
  });
}

export function numberAt(table: Table, row: number, col: number): number {
  const raw = table.rows[row]![col]!;
  const value = Number(raw);
  if (raw.trim() === "" || Number.isNaN(value)) {
    throw new FigureError(
      `${table.path}: line ${row + 2}, column '${table.header[col]}': '${raw}' is not a number`,
    );
  }
  return value;
}
