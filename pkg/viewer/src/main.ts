/** DOM wiring for the landscape explorer page. */

import { elbowEps } from "./dbscan.js";
import { draw, Projection } from "./render.js";
import {
  ColorBy,
  installClustering,
  keptStates,
  loadBundle,
  refilter,
  Scene,
  setColorBy,
  setTransform,
  toggleTrajectory,
  tooltip,
} from "./scene.js";
import { GridIndex } from "./spatial.js";
import { SchemaMismatch } from "./types.js";
import type { ProgressMessage, ResultMessage } from "./worker.js";

const $ = <T extends HTMLElement>(id: string): T => {
  const el = document.getElementById(id);
  if (!el) throw new Error(`missing #${id}`);
  return el as T;
};

let scene: Scene | null = null;
let projection: Projection | null = null;
let index: GridIndex | null = null;
let worker: Worker | null = null;

function banner(message: string | null): void {
  const el = $("banner");
  el.textContent = message ?? "";
  el.style.display = message ? "block" : "none";
}

function canvas(): HTMLCanvasElement {
  return $("plot") as unknown as HTMLCanvasElement;
}

function redraw(): void {
  if (!scene) return;
  projection = draw(scene, canvas());
}

function rebuildIndex(): void {
  if (!scene) return;
  const n = scene.bundle.states.length;
  const xs = new Float64Array(n);
  const ys = new Float64Array(n);
  scene.bundle.states.forEach((s, i) => {
    xs[i] = s.x;
    ys[i] = s.y;
  });
  index = new GridIndex(xs, ys);
}

function update(next: Scene): void {
  scene = next;
  redraw();
}

function renderTrajectoryToggles(): void {
  if (!scene) return;
  const host = $("trajectories");
  host.innerHTML = "";
  if (scene.bundle.trajectories.length === 0) {
    host.textContent = "no trajectories in this bundle";
    return;
  }
  for (const traj of scene.bundle.trajectories.slice(0, 80)) {
    const label = document.createElement("label");
    const box = document.createElement("input");
    box.type = "checkbox";
    box.addEventListener("change", () => {
      if (scene) update(toggleTrajectory(scene, traj.id));
    });
    label.append(box, ` #${traj.id} (${traj.outcome}, ${traj.state_ids.length} steps)`);
    host.append(label, document.createElement("br"));
  }
}

function showScene(text: string): void {
  try {
    scene = loadBundle(text);
  } catch (err) {
    if (err instanceof SchemaMismatch) {
      banner(`cannot load bundle: ${err.message}`);
      return;
    }
    throw err;
  }
  banner(null);
  $("reaction").textContent = scene.bundle.meta.reaction;
  ($("threshold") as HTMLInputElement).value = String(scene.view.timeThreshold);
  ($("minsamples") as HTMLInputElement).value = String(scene.view.minSamples);
  if (scene.bundle.clusters) {
    ($("eps") as HTMLInputElement).value = String(scene.bundle.clusters.eps);
  }
  renderTrajectoryToggles();
  rebuildIndex();
  redraw();
}

function hover(event: MouseEvent): void {
  const tip = $("tooltip");
  if (!scene || !projection || !index) {
    tip.style.display = "none";
    return;
  }
  const rect = canvas().getBoundingClientRect();
  const px = event.clientX - rect.left;
  const py = event.clientY - rect.top;
  const [dx, dy] = projection.toData(px, py);
  const radius = 8 / projection.pixelsPerUnit;
  const hit = index.nearest(dx, dy, radius);
  if (hit === null) {
    tip.style.display = "none";
    return;
  }
  const t = tooltip(scene, hit);
  tip.style.display = "block";
  tip.style.left = `${event.clientX + 14}px`;
  tip.style.top = `${event.clientY + 14}px`;
  tip.innerHTML = [
    `<code>${t.dp}</code>`,
    `energy: ${t.energy} kcal/mol`,
    `cumulative time: ${t.cumulative_time} s`,
    `p: ${t.p}`,
    `cluster: ${t.cluster < 0 ? "noise" : t.cluster}`,
  ].join("<br>");
}

function reclusterInWorker(eps: number, minSamples: number): void {
  if (!scene) return;
  const n = scene.bundle.states.length;
  const xs = new Float64Array(n);
  const ys = new Float64Array(n);
  const ct = new Float64Array(n);
  scene.bundle.states.forEach((s, i) => {
    xs[i] = s.x;
    ys[i] = s.y;
    ct[i] = s.cumulative_time;
  });
  worker?.terminate();
  worker = new Worker(new URL("./worker.js", import.meta.url), { type: "module" });
  const progress = $("progress") as HTMLProgressElement;
  progress.style.display = "inline-block";
  worker.onmessage = (event: MessageEvent<ProgressMessage | ResultMessage>) => {
    if (event.data.type === "progress") {
      progress.max = event.data.total;
      progress.value = event.data.done;
      return;
    }
    progress.style.display = "none";
    if (scene) update(installClustering(scene, eps, minSamples, event.data.labels));
  };
  worker.postMessage({
    xs, ys, cumulativeTimes: ct, eps, minSamples,
    threshold: scene.view.timeThreshold,
  });
}

function wire(): void {
  ($("file") as HTMLInputElement).addEventListener("change", async (event) => {
    const input = event.target as HTMLInputElement;
    const file = input.files?.[0];
    if (file) showScene(await file.text());
  });

  $("colorby").addEventListener("change", (event) => {
    if (!scene) return;
    update(setColorBy(scene, (event.target as HTMLSelectElement).value as ColorBy));
  });

  $("apply-threshold").addEventListener("click", () => {
    if (!scene) return;
    const value = Number(($("threshold") as HTMLInputElement).value);
    if (Number.isFinite(value) && value >= 0) update(refilter(scene, value));
  });

  $("recluster").addEventListener("click", () => {
    if (!scene) return;
    const eps = Number(($("eps") as HTMLInputElement).value);
    const minSamples = Number(($("minsamples") as HTMLInputElement).value);
    if (eps > 0 && minSamples >= 1) reclusterInWorker(eps, minSamples);
  });

  $("suggest-eps").addEventListener("click", () => {
    if (!scene) return;
    const kept = keptStates(scene.bundle, scene.view.timeThreshold);
    if (kept.length <= 4) return;
    const pts = kept.map((i): [number, number] => [
      scene!.bundle.states[i].x,
      scene!.bundle.states[i].y,
    ]);
    ($("eps") as HTMLInputElement).value = elbowEps(pts, 4).toPrecision(4);
  });

  const surface = canvas();
  surface.addEventListener("mousemove", hover);
  surface.addEventListener("mouseleave", () => {
    $("tooltip").style.display = "none";
  });
  surface.addEventListener("wheel", (event) => {
    if (!scene) return;
    event.preventDefault();
    const factor = event.deltaY < 0 ? 1.15 : 1 / 1.15;
    const t = scene.view.transform;
    update(setTransform(scene, { ...t, scale: t.scale * factor }));
  }, { passive: false });
  let dragging: { x: number; y: number } | null = null;
  surface.addEventListener("mousedown", (event) => {
    dragging = { x: event.clientX, y: event.clientY };
  });
  window.addEventListener("mouseup", () => {
    dragging = null;
  });
  surface.addEventListener("mousemove", (event) => {
    if (!dragging || !scene) return;
    const t = scene.view.transform;
    update(setTransform(scene, {
      ...t,
      tx: t.tx + event.clientX - dragging.x,
      ty: t.ty + event.clientY - dragging.y,
    }));
    dragging = { x: event.clientX, y: event.clientY };
  });

  const params = new URLSearchParams(window.location.search);
  const url = params.get("bundle");
  if (url) {
    fetch(url)
      .then((resp) => resp.text())
      .then(showScene)
      .catch((err) => banner(`cannot fetch ${url}: ${err}`));
  }
}

wire();
