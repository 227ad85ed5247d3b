/** Checksums over plotted data, used to prove a figure shows exactly
 * what the CSV says.
 */

import { createHash } from "node:crypto";

/** A data-space coordinate the renderer places on some panel. */
export interface PlottedPoint {
  x: number;
  y: number;
}

/** Hash of the plotted coordinates in canonical order. Coordinates are
 * serialized with JavaScript's shortest round-trip number formatting, so
 * equal values always hash the same regardless of how they were
 * computed. */
export function pointChecksum(points: readonly PlottedPoint[]): string {
  const body = points.map((p) => `${p.x},${p.y}`).join("\n");
  return createHash("sha256").update(body).digest("hex");
}

/** One-sided 95% upper confidence bound on an error rate when zero
 * errors were observed over `trials` independent bits. This is where a
 * measured rate of exactly zero gets drawn on a log axis.
 *
 * Equal to 1 - 0.05^(1/trials), written through expm1 because the
 * direct form cancels catastrophically for large trial counts. */
export function zeroRateUpperBound(trials: number): number {
  return -Math.expm1(Math.log(0.05) / trials);
}
