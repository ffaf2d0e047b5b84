/** Client-side density clustering, contract-identical to the pipeline's
 * implementation: a point is core when at least minSamples points (itself
 * included) lie within eps; clusters are connected components of core
 * points numbered by their first core index; border points join the lowest
 * cluster id among in-range cores; everything else is noise (-1).
 *
 * A uniform grid with eps-sized cells keeps neighborhood queries local, so
 * reclustering stays interactive on tens of thousands of points.
 */

export const NOISE = -1;

type Points = ReadonlyArray<readonly [number, number]> | number[][];

class EpsGrid {
  private cells = new Map<string, number[]>();

  constructor(
    private xs: Float64Array,
    private ys: Float64Array,
    private eps: number,
  ) {
    for (let i = 0; i < xs.length; i++) {
      const key = this.key(xs[i], ys[i]);
      const bucket = this.cells.get(key);
      if (bucket) bucket.push(i);
      else this.cells.set(key, [i]);
    }
  }

  private key(x: number, y: number): string {
    return `${Math.floor(x / this.eps)},${Math.floor(y / this.eps)}`;
  }

  /** Indices within eps of point i (including i), ascending. */
  neighbors(i: number): number[] {
    const cx = Math.floor(this.xs[i] / this.eps);
    const cy = Math.floor(this.ys[i] / this.eps);
    const out: number[] = [];
    const eps2 = this.eps * this.eps;
    for (let gx = cx - 1; gx <= cx + 1; gx++) {
      for (let gy = cy - 1; gy <= cy + 1; gy++) {
        const bucket = this.cells.get(`${gx},${gy}`);
        if (!bucket) continue;
        for (const j of bucket) {
          const dx = this.xs[i] - this.xs[j];
          const dy = this.ys[i] - this.ys[j];
          if (dx * dx + dy * dy <= eps2) out.push(j);
        }
      }
    }
    out.sort((a, b) => a - b);
    return out;
  }
}

export interface DbscanOptions {
  /** Called periodically with (processed, total) for progress reporting. */
  onProgress?: (done: number, total: number) => void;
}

export function dbscan(
  points: Points,
  eps: number,
  minSamples: number,
  options: DbscanOptions = {},
): Int32Array {
  if (!(eps > 0)) throw new RangeError("eps must be positive");
  if (!(minSamples >= 1)) throw new RangeError("minSamples must be >= 1");
  const n = points.length;
  const xs = new Float64Array(n);
  const ys = new Float64Array(n);
  for (let i = 0; i < n; i++) {
    xs[i] = points[i][0];
    ys[i] = points[i][1];
  }
  const grid = new EpsGrid(xs, ys, eps);

  const neighborhoods: number[][] = new Array(n);
  const core = new Uint8Array(n);
  for (let i = 0; i < n; i++) {
    const nbrs = grid.neighbors(i);
    neighborhoods[i] = nbrs;
    core[i] = nbrs.length >= minSamples ? 1 : 0;
    if (options.onProgress && i % 2048 === 0) options.onProgress(i, 2 * n);
  }

  const labels = new Int32Array(n).fill(NOISE);
  let cluster = 0;
  for (let start = 0; start < n; start++) {
    if (!core[start] || labels[start] !== NOISE) continue;
    labels[start] = cluster;
    const frontier = [start];
    while (frontier.length) {
      const u = frontier.pop()!;
      for (const v of neighborhoods[u]) {
        if (core[v] && labels[v] === NOISE) {
          labels[v] = cluster;
          frontier.push(v);
        }
      }
    }
    cluster++;
  }

  for (let i = 0; i < n; i++) {
    if (core[i]) continue;
    let best = NOISE;
    for (const j of neighborhoods[i]) {
      if (core[j] && (best === NOISE || labels[j] < best)) best = labels[j];
    }
    labels[i] = best;
    if (options.onProgress && i % 2048 === 0) options.onProgress(n + i, 2 * n);
  }
  options.onProgress?.(2 * n, 2 * n);
  return labels;
}

/** Suggested eps from the sorted k-th-neighbor distance curve: the point of
 * maximum perpendicular distance to the first-to-last chord, middle value on
 * a degenerate (straight) curve. Advisory either way. */
export function elbowEps(points: Points, k = 4): number {
  const n = points.length;
  if (n <= k) throw new RangeError(`need more than k=${k} points`);
  const kdist = new Float64Array(n);
  const d = new Float64Array(n);
  for (let i = 0; i < n; i++) {
    for (let j = 0; j < n; j++) {
      const dx = points[i][0] - points[j][0];
      const dy = points[i][1] - points[j][1];
      d[j] = Math.sqrt(dx * dx + dy * dy);
    }
    const sorted = Array.from(d).sort((a, b) => a - b);
    kdist[i] = sorted[k]; // position 0 is the point itself
  }
  const curve = Array.from(kdist).sort((a, b) => a - b);
  const dx = n - 1;
  const dy = curve[n - 1] - curve[0];
  const norm = Math.hypot(dx, dy);
  if (norm === 0) return curve[Math.floor(n / 2)];
  let bestIdx = 0;
  let bestDist = -1;
  for (let i = 0; i < n; i++) {
    const dist = Math.abs(dy * i - dx * (curve[i] - curve[0])) / norm;
    if (dist > bestDist) {
      bestDist = dist;
      bestIdx = i;
    }
  }
  if (bestDist <= 1e-12 * Math.max(1, Math.abs(dy))) {
    return curve[Math.floor(n / 2)];
  }
  return curve[bestIdx];
}
