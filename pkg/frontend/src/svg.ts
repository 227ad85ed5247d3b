/** Tiny deterministic SVG builder. Elements are plain strings, attributes
 * are emitted in the order given, and all numbers go through the same
 * two-decimal rounding, so identical input always yields identical
 * bytes. */

export function esc(text: string): string {
  return text
    .replace(/&/g, "&amp;")
    .replace(/</g, "&lt;")
    .replace(/>/g, "&gt;")
    .replace(/"/g, "&quot;");
}

/** Pixel coordinate formatting: fixed two decimals with trailing zeros
 * trimmed. */
export function px(value: number): string {
  return String(Number(value.toFixed(2)));
}

export type Attrs = Record<string, string | number>;

export function el(tag: string, attrs: Attrs, content = ""): string {
  const parts = Object.entries(attrs).map(
    ([key, value]) => `${key}="${typeof value === "number" ? px(value) : esc(value)}"`,
  );
  const open = parts.length > 0 ? `<${tag} ${parts.join(" ")}` : `<${tag}`;
  if (content === "") {
    return `${open}/>`;
  }
  return `${open}>${content}</${tag}>`;
}

export function text(x: number, y: number, content: string, attrs: Attrs = {}): string {
  return el("text", { x, y, ...attrs }, esc(content));
}

export function line(x1: number, y1: number, x2: number, y2: number, attrs: Attrs): string {
  return el("line", { x1, y1, x2, y2, ...attrs });
}

export function polyline(points: Array<[number, number]>, attrs: Attrs): string {
  const joined = points.map(([x, y]) => `${px(x)},${px(y)}`).join(" ");
  return el("polyline", { points: joined, fill: "none", ...attrs });
}

export function circle(cx: number, cy: number, r: number, attrs: Attrs): string {
  return el("circle", { cx, cy, r, ...attrs });
}

/** Open downward-pointing triangle, the marker for values that are upper
 * bounds rather than measurements. */
export function triangleDown(cx: number, cy: number, size: number, attrs: Attrs): string {
  const half = size;
  const top = cy - size * 0.85;
  const tip = cy + size * 1.1;
  const d = `M ${px(cx - half)} ${px(top)} L ${px(cx + half)} ${px(top)} L ${px(cx)} ${px(tip)} Z`;
  return el("path", { d, fill: "none", ...attrs });
}
