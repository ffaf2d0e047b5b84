import { describe, expect, it } from "vitest";

import { GridIndex } from "../src/spatial.js";

function bruteNearest(
  xs: Float64Array, ys: Float64Array, x: number, y: number, r: number,
): number | null {
  let best: number | null = null;
  let bestD2 = r * r;
  for (let i = 0; i < xs.length; i++) {
    const dx = xs[i] - x;
    const dy = ys[i] - y;
    const d2 = dx * dx + dy * dy;
    if (d2 < bestD2) {
      bestD2 = d2;
      best = i;
    }
  }
  return best;
}

function randomPoints(n: number, seed = 1234): [Float64Array, Float64Array] {
  // deterministic LCG so the test needs no RNG dependency
  let state = seed >>> 0;
  const next = () => {
    state = (1664525 * state + 1013904223) >>> 0;
    return state / 2 ** 32;
  };
  const xs = new Float64Array(n);
  const ys = new Float64Array(n);
  for (let i = 0; i < n; i++) {
    xs[i] = next() * 10 - 5;
    ys[i] = next() * 6 - 3;
  }
  return [xs, ys];
}

describe("GridIndex", () => {
  it("agrees with brute force on random queries", () => {
    const [xs, ys] = randomPoints(500);
    const index = new GridIndex(xs, ys);
    const [qx, qy] = randomPoints(200, 999);
    for (let i = 0; i < qx.length; i++) {
      const got = index.nearest(qx[i], qy[i], 0.7);
      const want = bruteNearest(xs, ys, qx[i], qy[i], 0.7);
      if (want === null) {
        expect(got).toBeNull();
      } else {
        // equal-distance ties may pick either index; compare distances
        const d = (i2: number) =>
          Math.hypot(xs[i2] - qx[i], ys[i2] - qy[i]);
        expect(got).not.toBeNull();
        expect(d(got!)).toBeCloseTo(d(want), 12);
      }
    }
  });

  it("returns null when nothing is in range", () => {
    const xs = new Float64Array([0, 1]);
    const ys = new Float64Array([0, 0]);
    const index = new GridIndex(xs, ys);
    expect(index.nearest(50, 50, 0.5)).toBeNull();
  });

  it("handles 1000 hover queries on 50k points fast", () => {
    const [xs, ys] = randomPoints(50_000);
    const index = new GridIndex(xs, ys);
    const [qx, qy] = randomPoints(1000, 7);
    const start = performance.now();
    let hits = 0;
    for (let i = 0; i < qx.length; i++) {
      if (index.nearest(qx[i], qy[i], 0.05) !== null) hits++;
    }
    const elapsed = performance.now() - start;
    expect(hits).toBeGreaterThan(0);
    // 1000 queries well inside a 30 fps frame budget each (33 ms)
    expect(elapsed).toBeLessThan(1000);
  });
});
