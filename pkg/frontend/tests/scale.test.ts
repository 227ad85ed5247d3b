import { describe, expect, it } from "vitest";

import { linearScale, logScale, padRange } from "../src/scale.js";

describe("linearScale", () => {
  it("maps the domain endpoints to the pixel endpoints", () => {
    const scale = linearScale(0, 10, 100, 500);
    expect(scale.toPx(0)).toBeCloseTo(100, 9);
    expect(scale.toPx(10)).toBeCloseTo(500, 9);
    expect(scale.toPx(5)).toBeCloseTo(300, 9);
  });

  it("supports inverted pixel ranges for y axes", () => {
    const scale = linearScale(0, 1, 400, 40);
    expect(scale.toPx(0)).toBeCloseTo(400, 9);
    expect(scale.toPx(1)).toBeCloseTo(40, 9);
    expect(scale.toPx(0.25)).toBeCloseTo(310, 9);
  });

  it("keeps ticks inside the domain at round steps", () => {
    const scale = linearScale(0, 15, 0, 100);
    expect(scale.ticks.length).toBeGreaterThanOrEqual(3);
    for (const t of scale.ticks) {
      expect(t).toBeGreaterThanOrEqual(0);
      expect(t).toBeLessThanOrEqual(15);
    }
    const steps = scale.ticks.slice(1).map((t, i) => t - scale.ticks[i]!);
    for (const s of steps) {
      expect(s).toBeCloseTo(steps[0]!, 9);
    }
  });

  it("widens a degenerate domain instead of dividing by zero", () => {
    const scale = linearScale(4, 4, 0, 100);
    expect(scale.lo).toBeLessThan(4);
    expect(scale.hi).toBeGreaterThan(4);
    expect(Number.isFinite(scale.toPx(4))).toBe(true);
  });

  it("formats tick labels without float noise", () => {
    const scale = linearScale(0, 0.3, 0, 100);
    for (const t of scale.ticks) {
      expect(scale.tickLabel(t)).not.toMatch(/000000|999999/);
    }
  });
});

describe("logScale", () => {
  it("snaps the domain outward to whole decades", () => {
    const scale = logScale(3e-4, 0.02, 300, 0);
    expect(scale.lo).toBeCloseTo(1e-4, 12);
    expect(scale.hi).toBeCloseTo(1e-1, 12);
  });

  it("places one tick per decade with 1eN labels", () => {
    const scale = logScale(1e-4, 1e-1, 300, 0);
    expect(scale.ticks).toEqual([1e-4, 1e-3, 1e-2, 1e-1]);
    expect(scale.tickLabel(1e-3)).toBe("1e-3");
    expect(scale.tickLabel(1)).toBe("1");
  });

  it("maps decades evenly in pixels", () => {
    const scale = logScale(1e-4, 1e-2, 0, 200);
    expect(scale.toPx(1e-4)).toBeCloseTo(0, 9);
    expect(scale.toPx(1e-3)).toBeCloseTo(100, 9);
    expect(scale.toPx(1e-2)).toBeCloseTo(200, 9);
  });

  it("expands a single-decade domain", () => {
    const scale = logScale(0.005, 0.005, 0, 100);
    expect(scale.lo).toBeLessThan(0.005);
    expect(scale.hi).toBeGreaterThan(0.005);
  });

  it("rejects nonpositive bounds", () => {
    expect(() => logScale(0, 1, 0, 100)).toThrowError(/positive/);
  });
});

describe("padRange", () => {
  it("widens both ends by the fraction", () => {
    const [lo, hi] = padRange(10, 20, 0.1);
    expect(lo).toBeCloseTo(9, 9);
    expect(hi).toBeCloseTo(21, 9);
  });

  it("leaves a zero boundary at zero", () => {
    const [lo, hi] = padRange(0, 50, 0.1);
    expect(lo).toBe(0);
    expect(hi).toBeCloseTo(55, 9);
  });

  it("returns a degenerate range unchanged", () => {
    expect(padRange(3, 3)).toEqual([3, 3]);
  });
});
