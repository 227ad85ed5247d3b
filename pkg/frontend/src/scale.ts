/** Axis scales mapping data coordinates to pixel coordinates.
 *
 * Pixel ranges may run in either direction, which is how the y axis gets
 * inverted: pass the bottom pixel first and the top pixel second.
 */

export type ScaleKind = "linear" | "log";

export interface Scale {
  kind: ScaleKind;
  lo: number;
  hi: number;
  toPx(value: number): number;
  ticks: number[];
  tickLabel(value: number): string;
}

function trimmed(value: number): string {
  return String(Number(value.toPrecision(10)));
}

/** Ticks at 1/2/5 multiples of a power of ten inside [lo, hi]. */
function niceTicks(lo: number, hi: number, count = 5): number[] {
  const span = hi - lo;
  if (span <= 0) {
    return [lo];
  }
  const rawStep = span / Math.max(1, count);
  const mag = Math.pow(10, Math.floor(Math.log10(rawStep)));
  const norm = rawStep / mag;
  const step = (norm <= 1 ? 1 : norm <= 2 ? 2 : norm <= 5 ? 5 : 10) * mag;
  const ticks: number[] = [];
  for (let v = Math.ceil(lo / step) * step; v <= hi + step * 1e-9; v += step) {
    ticks.push(Number(v.toPrecision(12)));
  }
  return ticks;
}

export function linearScale(lo: number, hi: number, pxLo: number, pxHi: number): Scale {
  let a = lo;
  let b = hi;
  if (a === b) {
    const pad = a === 0 ? 1 : Math.abs(a) * 0.1;
    a -= pad;
    b += pad;
  }
  const span = b - a;
  return {
    kind: "linear",
    lo: a,
    hi: b,
    toPx: (value) => pxLo + ((value - a) / span) * (pxHi - pxLo),
    ticks: niceTicks(a, b),
    tickLabel: trimmed,
  };
}

/** The double closest to 10^d, via the numeric literal rather than
 * Math.pow, which can land one ulp off for negative exponents. */
function decade(d: number): number {
  return Number(`1e${d}`);
}

/** Log scale snapped outward to whole decades, ticks one per decade. */
export function logScale(lo: number, hi: number, pxLo: number, pxHi: number): Scale {
  if (lo <= 0 || hi <= 0) {
    throw new Error(`log scale needs positive bounds, got [${lo}, ${hi}]`);
  }
  let dLo = Math.floor(Math.log10(lo) + 1e-12);
  let dHi = Math.ceil(Math.log10(hi) - 1e-12);
  if (dLo === dHi) {
    dLo -= 1;
    dHi += 1;
  }
  const span = dHi - dLo;
  const ticks: number[] = [];
  const every = span > 9 ? 2 : 1;
  for (let d = dLo; d <= dHi; d += every) {
    ticks.push(decade(d));
  }
  return {
    kind: "log",
    lo: decade(dLo),
    hi: decade(dHi),
    toPx: (value) => pxLo + ((Math.log10(value) - dLo) / span) * (pxHi - pxLo),
    ticks,
    tickLabel: (value) => {
      const d = Math.round(Math.log10(value));
      if (d === 0) {
        return "1";
      }
      return `1e${d}`;
    },
  };
}

/** Widen a data range slightly so markers near the edge are not clipped.
 * A boundary exactly at zero stays at zero. */
export function padRange(lo: number, hi: number, frac = 0.05): [number, number] {
  const span = hi - lo;
  if (span === 0) {
    return [lo, hi];
  }
  const pad = span * frac;
  const a = lo === 0 ? 0 : lo - pad;
  const b = hi === 0 ? 0 : hi + pad;
  return [a, b];
}
