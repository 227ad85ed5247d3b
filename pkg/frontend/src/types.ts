/** Shared types for the figure renderer. */

export const FIGURE_IDS = ["fig4", "fig5", "fig6", "fig7", "fig8", "fig9"] as const;

export type FigureId = (typeof FIGURE_IDS)[number];

/** Cosmetic knobs; anything omitted falls back to per-figure defaults. */
export interface StyleOptions {
  title?: string;
}

/** One rendering request: which figure, which CSV files, where to write. */
export interface FigureJob {
  figure: FigureId;
  inputs: string[];
  output: string;
  style?: StyleOptions;
}

export interface RenderResult {
  svg: string;
  checksum: string;
  pointCount: number;
}

/** Anything wrong with inputs or their contents. The command line maps
 * these to a message and a nonzero exit; other errors are bugs. */
export class FigureError extends Error {}

export function isFigureId(value: string): value is FigureId {
  return (FIGURE_IDS as readonly string[]).includes(value);
}
