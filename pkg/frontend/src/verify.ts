/** Independent checksum derivation straight from CSV text.
 *
 * This module maps rows to data coordinates with its own plain code, on
 * purpose: comparing its result against the checksum embedded in a
 * rendered image proves the renderer plotted the CSV values untouched,
 * with nothing smoothed, resampled, or dropped.
 *
 * Canonical order, mirrored by the builders:
 *  - fig4: variants sorted by name, rows in file order, (epoch, loss)
 *  - fig5: files sorted by algorithm name, rows in file order,
 *    (snr_db, rate)
 *  - fig6: users ascending, codeword indices ascending, rows in file
 *    order, (re, im)
 *  - fig7: algorithms sorted by name, rows in file order, (k, rate)
 *  - fig8: algorithm/detection-or-total pairs sorted by label, rows in
 *    file order, (n_k, seconds); each coordinate counted once even
 *    though it appears on both panels
 *  - fig9: files sorted by algorithm then perturbation level ascending,
 *    rows in file order, (snr_db, rate)
 *
 * A rate is the ber column value, except that rows with zero errors use
 * the one-sided 95% upper bound for their bit count.
 */

import { basename } from "node:path";

import { FigureError } from "./types.js";
import type { FigureId } from "./types.js";
import { columnIndices, numberAt, parseCsv } from "./csv.js";
import type { Table } from "./csv.js";
import { pointChecksum, zeroRateUpperBound } from "./checksum.js";
import type { PlottedPoint } from "./checksum.js";

export interface NamedText {
  path: string;
  text: string;
}

function rate(table: Table, row: number, berAt: number, bitsAt: number, errAt: number): number {
  if (numberAt(table, row, errAt) === 0) {
    return zeroRateUpperBound(numberAt(table, row, bitsAt));
  }
  return numberAt(table, row, berAt);
}

function ratePoints(table: Table, xCol: string): PlottedPoint[] {
  const [xAt, berAt, bitsAt, errAt] = columnIndices(table, [xCol, "ber", "bits", "errors"]);
  return table.rows.map((_, i) => ({
    x: numberAt(table, i, xAt!),
    y: rate(table, i, berAt!, bitsAt!, errAt!),
  }));
}

function lossPoints(table: Table): PlottedPoint[] {
  const [epochAt, lossAt, variantAt] = columnIndices(table, ["epoch", "loss", "variant"]);
  const variants = [...new Set(table.rows.map((row) => row[variantAt!]!))].sort();
  const points: PlottedPoint[] = [];
  for (const variant of variants) {
    table.rows.forEach((row, i) => {
      if (row[variantAt!] === variant) {
        points.push({ x: numberAt(table, i, epochAt!), y: numberAt(table, i, lossAt!) });
      }
    });
  }
  return points;
}

function constellationPoints(table: Table): PlottedPoint[] {
  const [userAt, cwAt, , reAt, imAt] = columnIndices(table, [
    "user",
    "codeword_index",
    "dim",
    "re",
    "im",
  ]);
  const users = [...new Set(table.rows.map((_, i) => numberAt(table, i, userAt!)))].sort(
    (a, b) => a - b,
  );
  const points: PlottedPoint[] = [];
  for (const user of users) {
    const rowIdx = table.rows.map((_, i) => i).filter((i) => numberAt(table, i, userAt!) === user);
    const codewords = [...new Set(rowIdx.map((i) => numberAt(table, i, cwAt!)))].sort(
      (a, b) => a - b,
    );
    for (const cw of codewords) {
      for (const i of rowIdx) {
        if (numberAt(table, i, cwAt!) === cw) {
          points.push({ x: numberAt(table, i, reAt!), y: numberAt(table, i, imAt!) });
        }
      }
    }
  }
  return points;
}

function userPoints(table: Table): PlottedPoint[] {
  const [kAt, algAt, berAt, bitsAt, errAt] = columnIndices(table, [
    "k",
    "algorithm",
    "ber",
    "bits",
    "errors",
  ]);
  const algorithms = [...new Set(table.rows.map((row) => row[algAt!]!))].sort();
  const points: PlottedPoint[] = [];
  for (const alg of algorithms) {
    table.rows.forEach((row, i) => {
      if (row[algAt!] === alg) {
        points.push({ x: numberAt(table, i, kAt!), y: rate(table, i, berAt!, bitsAt!, errAt!) });
      }
    });
  }
  return points;
}

function timingPoints(table: Table): PlottedPoint[] {
  const [nkAt, totalAt, detectAt, algAt] = columnIndices(table, [
    "n_k",
    "t_o_s",
    "t_d_s",
    "algorithm",
  ]);
  const algorithms = [...new Set(table.rows.map((row) => row[algAt!]!))].sort();
  const entries = algorithms.flatMap((alg) => [
    { alg, label: `${alg} detection`, col: detectAt! },
    { alg, label: `${alg} total`, col: totalAt! },
  ]);
  entries.sort((a, b) => (a.label < b.label ? -1 : a.label > b.label ? 1 : 0));
  const points: PlottedPoint[] = [];
  for (const entry of entries) {
    table.rows.forEach((row, i) => {
      if (row[algAt!] === entry.alg) {
        points.push({ x: numberAt(table, i, nkAt!), y: numberAt(table, i, entry.col) });
      }
    });
  }
  return points;
}

function single(figure: FigureId, tables: Table[]): Table {
  if (tables.length !== 1) {
    throw new FigureError(`${figure}: expected exactly one input file, got ${tables.length}`);
  }
  return tables[0]!;
}

/** Checksum of the coordinates a faithful rendering of these CSV files
 * must plot. */
export function csvChecksum(figure: FigureId, inputs: NamedText[]): string {
  const tables = inputs.map((input) => parseCsv(input.text, input.path));
  let points: PlottedPoint[];
  switch (figure) {
    case "fig4":
      points = lossPoints(single(figure, tables));
      break;
    case "fig5": {
      const named = tables.map((table) => {
        const match = /^ber_([a-z0-9]+)\.csv$/.exec(basename(table.path));
        if (!match) {
          throw new FigureError(`${table.path}: expected a name like ber_<algorithm>.csv`);
        }
        return { label: match[1]!, table };
      });
      named.sort((a, b) => (a.label < b.label ? -1 : a.label > b.label ? 1 : 0));
      points = named.flatMap((entry) => ratePoints(entry.table, "snr_db"));
      break;
    }
    case "fig6":
      points = constellationPoints(single(figure, tables));
      break;
    case "fig7":
      points = userPoints(single(figure, tables));
      break;
    case "fig8":
      points = timingPoints(single(figure, tables));
      break;
    case "fig9": {
      const named = tables.map((table) => {
        const match = /^ber_([a-z0-9]+)_icsi_([0-9eE+.-]+)\.csv$/.exec(basename(table.path));
        if (!match) {
          throw new FigureError(
            `${table.path}: expected a name like ber_<algorithm>_icsi_<sigma>.csv`,
          );
        }
        return { alg: match[1]!, sigma: Number(match[2]!), table };
      });
      named.sort((a, b) => (a.alg < b.alg ? -1 : a.alg > b.alg ? 1 : a.sigma - b.sigma));
      points = named.flatMap((entry) => ratePoints(entry.table, "snr_db"));
      break;
    }
  }
  return pointChecksum(points);
}
