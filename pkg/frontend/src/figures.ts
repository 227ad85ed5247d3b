/** Figure construction and rendering.
 *
 * Each builder turns parsed CSV tables into a panel layout plus the flat
 * list of data coordinates it will plot, in a canonical order: panels
 * left to right, series in sorted label order, rows in file order. The
 * checksum of that list is embedded in the SVG root, so any consumer can
 * verify the image against the data it came from.
 *
 * A measured error rate of zero cannot sit on a log axis, so those rows
 * are drawn at the one-sided 95% upper confidence bound for their bit
 * count and marked with an open triangle instead of a filled circle.
 */

import { readFileSync, writeFileSync } from "node:fs";
import { basename } from "node:path";

import { FigureError } from "./types.js";
import type { FigureId, FigureJob, RenderResult, StyleOptions } from "./types.js";
import { columnIndices, numberAt, parseCsv } from "./csv.js";
import type { Table } from "./csv.js";
import { pointChecksum, zeroRateUpperBound } from "./checksum.js";
import type { PlottedPoint } from "./checksum.js";
import { linearScale, logScale, padRange } from "./scale.js";
import type { Scale, ScaleKind } from "./scale.js";
import { circle, el, line, polyline, text, triangleDown } from "./svg.js";

export const PALETTE = [
  "#0072b2",
  "#d55e00",
  "#009e73",
  "#cc79a7",
  "#e69f00",
  "#56b4e9",
  "#8a5cc4",
  "#5c5c5c",
] as const;

const DASHES = ["", "7,4", "2,3", "8,3,2,3"] as const;

export interface SeriesPoint {
  x: number;
  y: number;
  /** True when y is an upper bound standing in for a measured zero. */
  bound: boolean;
}

export interface Series {
  label: string;
  color: string;
  dash: string;
  drawLine: boolean;
  drawMarkers: boolean;
  points: SeriesPoint[];
}

export interface Panel {
  subtitle?: string;
  xLabel: string;
  yLabel: string;
  xKind: ScaleKind;
  yKind: ScaleKind;
  xDomain: [number, number];
  yDomain: [number, number];
  xTicks?: number[];
  series: Series[];
  square?: boolean;
}

export interface FigureData {
  title: string;
  panels: Panel[];
  /** Every logical data coordinate, canonical order, counted once even
   * when mirrored across panels. */
  points: PlottedPoint[];
}

function fail(message: string): never {
  throw new FigureError(message);
}

function requireSingle(figure: FigureId, tables: Table[]): Table {
  if (tables.length !== 1) {
    fail(`${figure}: expected exactly one input file, got ${tables.length}`);
  }
  return tables[0]!;
}

/** Measured rate, or its 95% upper bound when no errors were seen. */
function rateOrBound(ber: number, errors: number, bits: number): SeriesPoint {
  if (errors === 0) {
    return { x: 0, y: zeroRateUpperBound(bits), bound: true };
  }
  return { x: 0, y: ber, bound: false };
}

function collectPoints(series: Series[], into: PlottedPoint[]): void {
  for (const s of series) {
    for (const p of s.points) {
      into.push({ x: p.x, y: p.y });
    }
  }
}

function spanOf(series: Series[], pick: (p: SeriesPoint) => number): [number, number] {
  let lo = Infinity;
  let hi = -Infinity;
  for (const s of series) {
    for (const p of s.points) {
      const v = pick(p);
      if (v < lo) lo = v;
      if (v > hi) hi = v;
    }
  }
  if (lo > hi) {
    fail("no data points to plot");
  }
  return [lo, hi];
}

function uniqueSorted(values: number[]): number[] {
  return [...new Set(values)].sort((a, b) => a - b);
}

/** One error-rate curve from a table with snr_db/ber/bits/errors rows. */
function berSeries(table: Table, xCol: string, label: string, color: string, dash: string): Series {
  const [xAt, berAt, bitsAt, errAt] = columnIndices(table, [xCol, "ber", "bits", "errors"]);
  const points: SeriesPoint[] = table.rows.map((_, i) => {
    const p = rateOrBound(
      numberAt(table, i, berAt!),
      numberAt(table, i, errAt!),
      numberAt(table, i, bitsAt!),
    );
    p.x = numberAt(table, i, xAt!);
    return p;
  });
  return { label, color, dash, drawLine: true, drawMarkers: true, points };
}

function berPanel(series: Series[], xLabel: string, xTicks?: number[]): Panel {
  return {
    xLabel,
    yLabel: "bit error rate",
    xKind: "linear",
    yKind: "log",
    xDomain: padRange(...spanOf(series, (p) => p.x), 0.03),
    yDomain: spanOf(series, (p) => p.y),
    xTicks,
    series,
  };
}

/** Training loss per epoch, one line per variant column value. */
function buildLoss(tables: Table[]): FigureData {
  const table = requireSingle("fig4", tables);
  const [epochAt, lossAt, variantAt] = columnIndices(table, ["epoch", "loss", "variant"]);
  const variants = [...new Set(table.rows.map((row) => row[variantAt!]!))].sort();
  const series: Series[] = variants.map((variant, vi) => {
    const points: SeriesPoint[] = [];
    table.rows.forEach((row, i) => {
      if (row[variantAt!] === variant) {
        points.push({ x: numberAt(table, i, epochAt!), y: numberAt(table, i, lossAt!), bound: false });
      }
    });
    return { label: variant, color: PALETTE[vi % PALETTE.length]!, dash: "", drawLine: true, drawMarkers: false, points };
  });
  const points: PlottedPoint[] = [];
  collectPoints(series, points);
  const [, yHi] = spanOf(series, (p) => p.y);
  return {
    title: "training loss per epoch",
    panels: [
      {
        xLabel: "epoch",
        yLabel: "loss",
        xKind: "linear",
        yKind: "linear",
        xDomain: padRange(...spanOf(series, (p) => p.x), 0.02),
        yDomain: [0, yHi * 1.05],
        series,
      },
    ],
    points,
  };
}

/** Error rate against SNR, one curve per algorithm file. */
function buildBerVsSnr(tables: Table[]): FigureData {
  const named = tables.map((table) => {
    const match = /^ber_([a-z0-9]+)\.csv$/.exec(basename(table.path));
    if (!match) {
      fail(`${table.path}: expected a name like ber_<algorithm>.csv`);
    }
    return { label: match[1]!, table };
  });
  named.sort((a, b) => (a.label < b.label ? -1 : a.label > b.label ? 1 : 0));
  const series = named.map((entry, i) =>
    berSeries(entry.table, "snr_db", entry.label, PALETTE[i % PALETTE.length]!, ""),
  );
  const points: PlottedPoint[] = [];
  collectPoints(series, points);
  return {
    title: "bit error rate vs snr",
    panels: [berPanel(series, "snr (dB)")],
    points,
  };
}

/** Received-signal scatter, one panel per user, colored by codeword. */
function buildConstellation(tables: Table[]): FigureData {
  const table = requireSingle("fig6", tables);
  const [userAt, cwAt, , reAt, imAt] = columnIndices(table, [
    "user",
    "codeword_index",
    "dim",
    "re",
    "im",
  ]);
  const users = uniqueSorted(table.rows.map((_, i) => numberAt(table, i, userAt!)));
  const points: PlottedPoint[] = [];
  const panels: Panel[] = users.map((user) => {
    const rowIdx = table.rows.map((_, i) => i).filter((i) => numberAt(table, i, userAt!) === user);
    const codewords = uniqueSorted(rowIdx.map((i) => numberAt(table, i, cwAt!)));
    const series: Series[] = codewords.map((cw) => ({
      label: `codeword ${cw}`,
      color: PALETTE[cw % PALETTE.length]!,
      dash: "",
      drawLine: false,
      drawMarkers: true,
      points: rowIdx
        .filter((i) => numberAt(table, i, cwAt!) === cw)
        .map((i) => ({ x: numberAt(table, i, reAt!), y: numberAt(table, i, imAt!), bound: false })),
    }));
    collectPoints(series, points);
    const [xLo, xHi] = spanOf(series, (p) => p.x);
    const [yLo, yHi] = spanOf(series, (p) => p.y);
    const m = Math.max(Math.abs(xLo), Math.abs(xHi), Math.abs(yLo), Math.abs(yHi)) * 1.08 || 1;
    return {
      subtitle: `user ${user}`,
      xLabel: "in-phase",
      yLabel: "quadrature",
      xKind: "linear" as const,
      yKind: "linear" as const,
      xDomain: [-m, m] as [number, number],
      yDomain: [-m, m] as [number, number],
      series,
      square: true,
    };
  });
  return { title: "received codeword constellations", panels, points };
}

/** Error rate against the number of active users, per algorithm. */
function buildUsers(tables: Table[]): FigureData {
  const table = requireSingle("fig7", tables);
  const [kAt, algAt, berAt, bitsAt, errAt] = columnIndices(table, [
    "k",
    "algorithm",
    "ber",
    "bits",
    "errors",
  ]);
  const algorithms = [...new Set(table.rows.map((row) => row[algAt!]!))].sort();
  const series: Series[] = algorithms.map((alg, ai) => {
    const points: SeriesPoint[] = [];
    table.rows.forEach((row, i) => {
      if (row[algAt!] === alg) {
        const p = rateOrBound(
          numberAt(table, i, berAt!),
          numberAt(table, i, errAt!),
          numberAt(table, i, bitsAt!),
        );
        p.x = numberAt(table, i, kAt!);
        points.push(p);
      }
    });
    return { label: alg, color: PALETTE[ai % PALETTE.length]!, dash: "", drawLine: true, drawMarkers: true, points };
  });
  const points: PlottedPoint[] = [];
  collectPoints(series, points);
  const kTicks = uniqueSorted(series.flatMap((s) => s.points.map((p) => p.x)));
  const panel = berPanel(series, "active users", kTicks);
  return { title: "bit error rate vs active users", panels: [panel], points };
}

/** Per-frame timing against streams per user, log and linear panels. */
function buildTiming(tables: Table[]): FigureData {
  const table = requireSingle("fig8", tables);
  const [nkAt, totalAt, detectAt, algAt] = columnIndices(table, [
    "n_k",
    "t_o_s",
    "t_d_s",
    "algorithm",
  ]);
  const algorithms = [...new Set(table.rows.map((row) => row[algAt!]!))].sort();
  const entries = algorithms.flatMap((alg, ai) => [
    { alg, label: `${alg} detection`, col: detectAt!, color: PALETTE[ai % PALETTE.length]!, dash: DASHES[1]! },
    { alg, label: `${alg} total`, col: totalAt!, color: PALETTE[ai % PALETTE.length]!, dash: "" },
  ]);
  entries.sort((a, b) => (a.label < b.label ? -1 : a.label > b.label ? 1 : 0));
  const series: Series[] = entries.map((entry) => {
    const points: SeriesPoint[] = [];
    table.rows.forEach((row, i) => {
      if (row[algAt!] === entry.alg) {
        points.push({ x: numberAt(table, i, nkAt!), y: numberAt(table, i, entry.col), bound: false });
      }
    });
    return { label: entry.label, color: entry.color, dash: entry.dash, drawLine: true, drawMarkers: true, points };
  });
  const points: PlottedPoint[] = [];
  collectPoints(series, points);
  const nkTicks = uniqueSorted(series.flatMap((s) => s.points.map((p) => p.x)));
  const xDomain = padRange(...spanOf(series, (p) => p.x), 0.04);
  const ySpan = spanOf(series, (p) => p.y);
  const base = {
    xLabel: "streams per user",
    xKind: "linear" as const,
    xDomain,
    xTicks: nkTicks,
    series,
  };
  return {
    title: "per-frame latency vs streams per user",
    panels: [
      { ...base, subtitle: "log time scale", yLabel: "seconds per frame", yKind: "log", yDomain: ySpan },
      {
        ...base,
        subtitle: "linear time scale",
        yLabel: "seconds per frame",
        yKind: "linear",
        yDomain: [0, ySpan[1] * 1.05],
      },
    ],
    points,
  };
}

/** Error rate under channel estimation error, curves per algorithm and
 * perturbation level. */
function buildIcsi(tables: Table[]): FigureData {
  const named = tables.map((table) => {
    const match = /^ber_([a-z0-9]+)_icsi_([0-9eE+.-]+)\.csv$/.exec(basename(table.path));
    if (!match) {
      fail(`${table.path}: expected a name like ber_<algorithm>_icsi_<sigma>.csv`);
    }
    const sigma = Number(match[2]!);
    if (Number.isNaN(sigma)) {
      fail(`${table.path}: perturbation level '${match[2]}' is not a number`);
    }
    return { alg: match[1]!, sigmaText: match[2]!, sigma, table };
  });
  named.sort((a, b) => (a.alg < b.alg ? -1 : a.alg > b.alg ? 1 : a.sigma - b.sigma));
  const algorithms = [...new Set(named.map((entry) => entry.alg))];
  const sigmas = uniqueSorted(named.map((entry) => entry.sigma));
  const series = named.map((entry) =>
    berSeries(
      entry.table,
      "snr_db",
      `${entry.alg} sigma ${entry.sigmaText}`,
      PALETTE[algorithms.indexOf(entry.alg) % PALETTE.length]!,
      DASHES[sigmas.indexOf(entry.sigma) % DASHES.length]!,
    ),
  );
  const points: PlottedPoint[] = [];
  collectPoints(series, points);
  return {
    title: "bit error rate vs snr under channel estimation error",
    panels: [berPanel(series, "snr (dB)")],
    points,
  };
}

export function buildFigure(figure: FigureId, tables: Table[]): FigureData {
  switch (figure) {
    case "fig4":
      return buildLoss(tables);
    case "fig5":
      return buildBerVsSnr(tables);
    case "fig6":
      return buildConstellation(tables);
    case "fig7":
      return buildUsers(tables);
    case "fig8":
      return buildTiming(tables);
    case "fig9":
      return buildIcsi(tables);
  }
}

const AXIS_LEFT = 66;
const AXIS_BOTTOM = 52;
const TOP = 54;
const GAP = 30;
const LEGEND_W = 196;
const EDGE = 12;
const PLOT_H = 330;

function drawSeriesInto(parts: string[], panel: Panel, xScale: Scale, yScale: Scale): void {
  for (const s of panel.series) {
    if (s.drawLine) {
      const coords = s.points
        .filter((p) => !p.bound)
        .map((p): [number, number] => [xScale.toPx(p.x), yScale.toPx(p.y)]);
      if (coords.length > 1) {
        parts.push(
          polyline(coords, {
            stroke: s.color,
            "stroke-width": 1.8,
            ...(s.dash === "" ? {} : { "stroke-dasharray": s.dash }),
          }),
        );
      }
    }
    if (s.drawMarkers) {
      for (const p of s.points) {
        const cx = xScale.toPx(p.x);
        const cy = yScale.toPx(p.y);
        if (p.bound) {
          parts.push(triangleDown(cx, cy, 4.4, { stroke: s.color, "stroke-width": 1.6 }));
        } else {
          parts.push(circle(cx, cy, 3.2, { fill: s.color }));
        }
      }
    }
  }
}

function drawPanel(parts: string[], panel: Panel, x0: number, plotW: number): void {
  const y0 = TOP;
  const y1 = TOP + PLOT_H;
  const xScale =
    panel.xKind === "log"
      ? logScale(panel.xDomain[0], panel.xDomain[1], x0, x0 + plotW)
      : linearScale(panel.xDomain[0], panel.xDomain[1], x0, x0 + plotW);
  const yScale =
    panel.yKind === "log"
      ? logScale(panel.yDomain[0], panel.yDomain[1], y1, y0)
      : linearScale(panel.yDomain[0], panel.yDomain[1], y1, y0);
  const xTicks = panel.xTicks ?? xScale.ticks;

  for (const v of xTicks) {
    const px = xScale.toPx(v);
    parts.push(line(px, y0, px, y1, { stroke: "#e4e4e4", "stroke-width": 1 }));
  }
  for (const v of yScale.ticks) {
    const py = yScale.toPx(v);
    parts.push(line(x0, py, x0 + plotW, py, { stroke: "#e4e4e4", "stroke-width": 1 }));
  }
  parts.push(
    el("rect", {
      x: x0,
      y: y0,
      width: plotW,
      height: PLOT_H,
      fill: "none",
      stroke: "#444444",
      "stroke-width": 1,
    }),
  );
  for (const v of xTicks) {
    const px = xScale.toPx(v);
    parts.push(line(px, y1, px, y1 + 5, { stroke: "#444444", "stroke-width": 1 }));
    parts.push(
      text(px, y1 + 19, xScale.tickLabel(v), { "text-anchor": "middle", "font-size": 12 }),
    );
  }
  for (const v of yScale.ticks) {
    const py = yScale.toPx(v);
    parts.push(line(x0 - 5, py, x0, py, { stroke: "#444444", "stroke-width": 1 }));
    parts.push(
      text(x0 - 8, py + 4, yScale.tickLabel(v), { "text-anchor": "end", "font-size": 12 }),
    );
  }
  parts.push(
    text(x0 + plotW / 2, y1 + 40, panel.xLabel, { "text-anchor": "middle", "font-size": 13 }),
  );
  parts.push(
    text(x0 - 48, y0 + PLOT_H / 2, panel.yLabel, {
      "text-anchor": "middle",
      "font-size": 13,
      transform: `rotate(-90 ${x0 - 48} ${y0 + PLOT_H / 2})`,
    }),
  );
  if (panel.subtitle !== undefined) {
    parts.push(
      text(x0 + plotW / 2, y0 - 10, panel.subtitle, {
        "text-anchor": "middle",
        "font-size": 13,
        "font-weight": "600",
      }),
    );
  }
  drawSeriesInto(parts, panel, xScale, yScale);
}

interface LegendEntry {
  label: string;
  color: string;
  dash: string;
  drawLine: boolean;
  drawMarkers: boolean;
}

function legendEntries(panels: Panel[]): LegendEntry[] {
  const seen = new Map<string, LegendEntry>();
  for (const panel of panels) {
    for (const s of panel.series) {
      if (!seen.has(s.label)) {
        seen.set(s.label, {
          label: s.label,
          color: s.color,
          dash: s.dash,
          drawLine: s.drawLine,
          drawMarkers: s.drawMarkers,
        });
      }
    }
  }
  return [...seen.values()];
}

function hasBoundPoints(panels: Panel[]): boolean {
  return panels.some((panel) => panel.series.some((s) => s.points.some((p) => p.bound)));
}

/** Lay the panels out left to right and return the full SVG document. */
export function draw(data: FigureData, checksum: string, style: StyleOptions): string {
  const plotW = data.panels[0]?.square ? PLOT_H : 430;
  const n = data.panels.length;
  const slot = AXIS_LEFT + plotW + GAP;
  const panelsW = n * slot - GAP;
  const width = EDGE + panelsW + LEGEND_W + EDGE;
  const height = TOP + PLOT_H + AXIS_BOTTOM;
  const parts: string[] = [];
  parts.push(el("rect", { x: 0, y: 0, width, height, fill: "#ffffff" }));
  parts.push(
    text(EDGE + panelsW / 2, 24, style.title ?? data.title, {
      "text-anchor": "middle",
      "font-size": 15,
      "font-weight": "600",
    }),
  );
  data.panels.forEach((panel, i) => {
    drawPanel(parts, panel, EDGE + i * slot + AXIS_LEFT, plotW);
  });

  const legendX = EDGE + panelsW + 18;
  let legendY = TOP + 8;
  const entries = legendEntries(data.panels);
  if (entries.length <= 12) {
    for (const entry of entries) {
      if (entry.drawLine) {
        parts.push(
          line(legendX, legendY, legendX + 26, legendY, {
            stroke: entry.color,
            "stroke-width": 1.8,
            ...(entry.dash === "" ? {} : { "stroke-dasharray": entry.dash }),
          }),
        );
      }
      if (entry.drawMarkers) {
        parts.push(circle(legendX + 13, legendY, 3.2, { fill: entry.color }));
      }
      parts.push(text(legendX + 34, legendY + 4, entry.label, { "font-size": 12 }));
      legendY += 20;
    }
  } else {
    parts.push(text(legendX, legendY + 4, "color = codeword index", { "font-size": 12 }));
    legendY += 20;
  }
  if (hasBoundPoints(data.panels)) {
    parts.push(triangleDown(legendX + 13, legendY, 4.4, { stroke: "#444444", "stroke-width": 1.6 }));
    parts.push(text(legendX + 34, legendY + 4, "zero errors, 95% bound", { "font-size": 12 }));
  }

  const body = parts.join("\n  ");
  return (
    `<svg xmlns="http://www.w3.org/2000/svg" width="${width}" height="${height}" ` +
    `viewBox="0 0 ${width} ${height}" font-family="Helvetica, Arial, sans-serif" ` +
    `fill="#1a1a1a" data-checksum="${checksum}">\n  ${body}\n</svg>\n`
  );
}

/** Read the inputs, build the figure, and write the SVG. The file is
 * written only after the whole document has been assembled, so a bad
 * input never leaves a partial image behind. */
export function render(job: FigureJob): RenderResult {
  if (job.inputs.length === 0) {
    fail(`${job.figure}: no input files given`);
  }
  const tables = job.inputs.map((path) => {
    let content: string;
    try {
      content = readFileSync(path, "utf8");
    } catch (err) {
      fail(`${path}: cannot read (${(err as Error).message})`);
    }
    return parseCsv(content, path);
  });
  const data = buildFigure(job.figure, tables);
  const checksum = pointChecksum(data.points);
  const svg = draw(data, checksum, job.style ?? {});
  writeFileSync(job.output, svg);
  return { svg, checksum, pointCount: data.points.length };
}
