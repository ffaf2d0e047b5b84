/** Scene state over a loaded bundle.
 *
 * The bundle is frozen at load time and never mutated; every interaction
 * (color mode, trajectory visibility, time filtering, reclustering,
 * pan/zoom) produces a new view object, so reloading the same bundle always
 * reproduces the initial scene.
 */

import { dbscan, NOISE } from "./dbscan.js";
import { deepFreeze, parseBundle, ViewerBundle } from "./types.js";

export type ColorBy = "energy" | "cumulative_time" | "cluster";

export interface Transform {
  scale: number;
  tx: number;
  ty: number;
}

export interface ViewState {
  colorBy: ColorBy;
  /** Trajectory ids drawn as overlays; empty on load (hidden by default). */
  visibleTrajectories: ReadonlySet<number>;
  /** States below this cumulative time render gray and are not clustered. */
  timeThreshold: number;
  /** eps of the active client-side clustering, or null while the bundle's
   * own labels are displayed. */
  eps: number | null;
  minSamples: number;
  /** Active cluster label per state; NOISE covers noise and filtered. */
  labels: ReadonlyArray<number>;
  /** Minimum-free-energy member of each active cluster. */
  mfeByCluster: ReadonlyMap<number, number>;
  transform: Transform;
}

export interface Scene {
  readonly bundle: ViewerBundle;
  readonly view: ViewState;
}

export interface Tooltip {
  dp: string;
  energy: number;
  cumulative_time: number;
  p: number;
  cluster: number;
}

function mfeMap(bundle: ViewerBundle, labels: ReadonlyArray<number>): Map<number, number> {
  const best = new Map<number, number>();
  for (let i = 0; i < labels.length; i++) {
    const c = labels[i];
    if (c === NOISE) continue;
    const incumbent = best.get(c);
    if (
      incumbent === undefined ||
      bundle.states[i].energy < bundle.states[incumbent].energy
    ) {
      best.set(c, i);
    }
  }
  return best;
}

function maskedBundleLabels(bundle: ViewerBundle, threshold: number): number[] {
  const base = bundle.clusters?.labels;
  return bundle.states.map((s, i) => {
    if (s.cumulative_time < threshold) return NOISE;
    return base ? base[i] : NOISE;
  });
}

function withView(scene: Scene, patch: Partial<ViewState>): Scene {
  return { bundle: scene.bundle, view: { ...scene.view, ...patch } };
}

export function createScene(bundle: ViewerBundle): Scene {
  deepFreeze(bundle);
  const threshold = bundle.clusters?.time_threshold ?? 0;
  const labels = maskedBundleLabels(bundle, 0); // bundle labels as exported
  return {
    bundle,
    view: {
      colorBy: "energy",
      visibleTrajectories: new Set(),
      timeThreshold: threshold,
      eps: null,
      minSamples: bundle.clusters?.min_samples ?? 4,
      labels,
      mfeByCluster: mfeMap(bundle, labels),
      transform: { scale: 1, tx: 0, ty: 0 },
    },
  };
}

export function loadBundle(text: string): Scene {
  return createScene(parseBundle(text));
}

/** Tooltip values come straight from the bundle; only the cluster column
 * reflects the active (possibly reclustered) labels. */
export function tooltip(scene: Scene, stateId: number): Tooltip {
  const s = scene.bundle.states[stateId];
  if (!s) throw new RangeError(`no state ${stateId}`);
  return {
    dp: s.dp,
    energy: s.energy,
    cumulative_time: s.cumulative_time,
    p: s.p,
    cluster: scene.view.labels[stateId],
  };
}

/** Indices of states that pass the active cumulative-time threshold. */
export function keptStates(bundle: ViewerBundle, threshold: number): number[] {
  const kept: number[] = [];
  bundle.states.forEach((s, i) => {
    if (s.cumulative_time >= threshold) kept.push(i);
  });
  return kept;
}

/** Cluster the states passing the threshold; same tie rules as the
 * pipeline (clusters numbered by first core in ascending-id order, border
 * points joining their lowest in-range cluster). Filtered states get NOISE. */
export function clusterStates(
  bundle: ViewerBundle,
  eps: number,
  minSamples: number,
  threshold: number,
  onProgress?: (done: number, total: number) => void,
): number[] {
  const kept = keptStates(bundle, threshold);
  const points = kept.map((i): [number, number] => [
    bundle.states[i].x,
    bundle.states[i].y,
  ]);
  const subsetLabels = dbscan(points, eps, minSamples, { onProgress });
  const labels = new Array<number>(bundle.states.length).fill(NOISE);
  kept.forEach((stateId, j) => {
    labels[stateId] = subsetLabels[j];
  });
  return labels;
}

export function recluster(scene: Scene, eps: number, minSamples: number): Scene {
  const labels = clusterStates(
    scene.bundle, eps, minSamples, scene.view.timeThreshold,
  );
  return installClustering(scene, eps, minSamples, labels);
}

/** Adopt labels computed elsewhere (the background worker) as the active
 * clustering. */
export function installClustering(
  scene: Scene,
  eps: number,
  minSamples: number,
  labels: ArrayLike<number>,
): Scene {
  const copy = Array.from(labels);
  return withView(scene, {
    eps,
    minSamples,
    labels: copy,
    mfeByCluster: mfeMap(scene.bundle, copy),
  });
}

export function refilter(scene: Scene, threshold: number): Scene {
  if (scene.view.eps !== null) {
    const labels = clusterStates(
      scene.bundle, scene.view.eps, scene.view.minSamples, threshold,
    );
    return withView(scene, {
      timeThreshold: threshold,
      labels,
      mfeByCluster: mfeMap(scene.bundle, labels),
    });
  }
  const labels = maskedBundleLabels(scene.bundle, threshold);
  return withView(scene, {
    timeThreshold: threshold,
    labels,
    mfeByCluster: mfeMap(scene.bundle, labels),
  });
}

export function setColorBy(scene: Scene, colorBy: ColorBy): Scene {
  return withView(scene, { colorBy });
}

export function toggleTrajectory(scene: Scene, id: number): Scene {
  const visible = new Set(scene.view.visibleTrajectories);
  if (visible.has(id)) visible.delete(id);
  else visible.add(id);
  return withView(scene, { visibleTrajectories: visible });
}

export function setTransform(scene: Scene, transform: Transform): Scene {
  return withView(scene, { transform });
}

/** Color scale domain: the data min/max of the active scalar. */
export function colorDomain(scene: Scene): [number, number] {
  const { bundle, view } = scene;
  if (view.colorBy === "cluster") {
    let max = 0;
    for (const c of view.labels) if (c > max) max = c;
    return [0, max];
  }
  const key: "energy" | "cumulative_time" = view.colorBy;
  const values = bundle.states.map((s) => s[key]);
  return [Math.min(...values), Math.max(...values)];
}

const CLUSTER_PALETTE = [
  "#00b3b3", "#e03131", "#f7b32b", "#7048e8", "#2f9e44",
  "#e64980", "#1971c2", "#a87900", "#5f3dc4", "#087f5b",
];

export const GRAY = "#b0b0b0";

function rampColor(t: number): string {
  // dark blue -> cyan -> yellow, clamped
  const u = Math.max(0, Math.min(1, t));
  const r = Math.round(255 * Math.min(1, Math.max(0, 2 * u - 0.8)));
  const g = Math.round(255 * Math.min(1, 1.2 * u + 0.05));
  const b = Math.round(255 * Math.min(1, Math.max(0.25, 1.2 - 1.4 * u)));
  return `rgb(${r},${g},${b})`;
}

/** Point color under the active mode; gray for noise and filtered states. */
export function colorOf(scene: Scene, stateId: number): string {
  const { bundle, view } = scene;
  const state = bundle.states[stateId];
  if (state.cumulative_time < view.timeThreshold) return GRAY;
  if (view.colorBy === "cluster") {
    const c = view.labels[stateId];
    if (c === NOISE) return GRAY;
    return CLUSTER_PALETTE[c % CLUSTER_PALETTE.length];
  }
  const key: "energy" | "cumulative_time" = view.colorBy;
  const [lo, hi] = colorDomain(scene);
  const value = state[key];
  const t = hi > lo ? (value - lo) / (hi - lo) : 0.5;
  return rampColor(t);
}
