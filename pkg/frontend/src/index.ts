export { FIGURE_IDS, FigureError, isFigureId } from "./types.js";
export type { FigureId, FigureJob, RenderResult, StyleOptions } from "./types.js";
export { render, buildFigure, draw, PALETTE } from "./figures.js";
export type { FigureData, Panel, Series, SeriesPoint } from "./figures.js";
export { csvChecksum } from "./verify.js";
export type { NamedText } from "./verify.js";
export { pointChecksum, zeroRateUpperBound } from "./checksum.js";
export type { PlottedPoint } from "./checksum.js";
export { parseCsv, columnIndices, numberAt } from "./csv.js";
export type { Table } from "./csv.js";
export { discoverInputs, run } from "./main.js";
