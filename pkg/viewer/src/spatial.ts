/** Uniform grid over data coordinates for hover hit-testing: nearest-point
 * queries stay fast on 50k+ points by expanding ring search over cells. */

export class GridIndex {
  private cells = new Map<string, number[]>();
  private cell: number;
  private minX = Infinity;
  private minY = Infinity;

  constructor(private xs: Float64Array, private ys: Float64Array) {
    const n = xs.length;
    let maxX = -Infinity;
    let maxY = -Infinity;
    for (let i = 0; i < n; i++) {
      if (xs[i] < this.minX) this.minX = xs[i];
      if (xs[i] > maxX) maxX = xs[i];
      if (ys[i] < this.minY) this.minY = ys[i];
      if (ys[i] > maxY) maxY = ys[i];
    }
    const span = Math.max(maxX - this.minX, maxY - this.minY, 1e-12);
    this.cell = span / Math.max(1, Math.ceil(Math.sqrt(n)));
    for (let i = 0; i < n; i++) {
      const key = this.key(xs[i], ys[i]);
      const bucket = this.cells.get(key);
      if (bucket) bucket.push(i);
      else this.cells.set(key, [i]);
    }
  }

  private key(x: number, y: number): string {
    const gx = Math.floor((x - this.minX) / this.cell);
    const gy = Math.floor((y - this.minY) / this.cell);
    return `${gx},${gy}`;
  }

  /** Index of the nearest point within maxRadius of (x, y), or null.
   * Distance ties break toward the lower index. */
  nearest(x: number, y: number, maxRadius: number): number | null {
    const gx = Math.floor((x - this.minX) / this.cell);
    const gy = Math.floor((y - this.minY) / this.cell);
    const maxRing = Math.ceil(maxRadius / this.cell) + 1;
    let best: number | null = null;
    let bestD2 = maxRadius * maxRadius;
    for (let ring = 0; ring <= maxRing; ring++) {
      // once a hit exists, closer points can only live within ring-1 cells
      if (best !== null && (ring - 1) * this.cell > Math.sqrt(bestD2)) break;
      for (let dx = -ring; dx <= ring; dx++) {
        for (let dy = -ring; dy <= ring; dy++) {
          if (Math.max(Math.abs(dx), Math.abs(dy)) !== ring) continue;
          const bucket = this.cells.get(`${gx + dx},${gy + dy}`);
          if (!bucket) continue;
          for (const i of bucket) {
            const ddx = this.xs[i] - x;
            const ddy = this.ys[i] - y;
            const d2 = ddx * ddx + ddy * ddy;
            if (d2 < bestD2 || (d2 === bestD2 && best !== null && i < best)) {
              bestD2 = d2;
              best = i;
            }
          }
        }
      }
    }
    return best;
  }
}
