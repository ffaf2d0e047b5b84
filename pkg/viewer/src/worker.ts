/** Background clustering worker: receives the bundle's coordinates and the
 * active parameters, posts progress, returns full-length labels. */

import { dbscan, NOISE } from "./dbscan.js";

export interface ClusterRequest {
  xs: Float64Array;
  ys: Float64Array;
  cumulativeTimes: Float64Array;
  eps: number;
  minSamples: number;
  threshold: number;
}

export interface ProgressMessage {
  type: "progress";
  done: number;
  total: number;
}

export interface ResultMessage {
  type: "result";
  labels: Int32Array;
}

export function runClusterRequest(
  req: ClusterRequest,
  post: (msg: ProgressMessage | ResultMessage) => void,
): void {
  const kept: number[] = [];
  for (let i = 0; i < req.xs.length; i++) {
    if (req.cumulativeTimes[i] >= req.threshold) kept.push(i);
  }
  const points = kept.map((i): [number, number] => [req.xs[i], req.ys[i]]);
  const subset = dbscan(points, req.eps, req.minSamples, {
    onProgress: (done, total) => post({ type: "progress", done, total }),
  });
  const labels = new Int32Array(req.xs.length).fill(NOISE);
  kept.forEach((stateId, j) => {
    labels[stateId] = subset[j];
  });
  post({ type: "result", labels });
}

// In the browser this module runs inside a Worker; under tests it is
// imported directly and runClusterRequest is driven synchronously.
interface WorkerScope {
  onmessage: ((event: MessageEvent<ClusterRequest>) => void) | null;
  postMessage(message: unknown): void;
  document?: unknown;
}

const scope = globalThis as unknown as WorkerScope;
if (typeof scope.postMessage === "function" && scope.document === undefined) {
  scope.onmessage = (event) => {
    runClusterRequest(event.data, (msg) => scope.postMessage(msg));
  };
}
