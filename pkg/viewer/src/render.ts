/** Canvas rendering: all states as points, visible trajectories as
 * polylines underneath, per-cluster MFE states marked with a ring. */

import { NOISE } from "./dbscan.js";
import { colorOf, Scene } from "./scene.js";

export interface Projection {
  toScreen(x: number, y: number): [number, number];
  toData(px: number, py: number): [number, number];
  pixelsPerUnit: number;
}

const PADDING = 24;

export function makeProjection(
  scene: Scene,
  width: number,
  height: number,
): Projection {
  const states = scene.bundle.states;
  let minX = Infinity, maxX = -Infinity, minY = Infinity, maxY = -Infinity;
  for (const s of states) {
    if (s.x < minX) minX = s.x;
    if (s.x > maxX) maxX = s.x;
    if (s.y < minY) minY = s.y;
    if (s.y > maxY) maxY = s.y;
  }
  const spanX = Math.max(maxX - minX, 1e-12);
  const spanY = Math.max(maxY - minY, 1e-12);
  const base = Math.min(
    (width - 2 * PADDING) / spanX,
    (height - 2 * PADDING) / spanY,
  );
  const { scale, tx, ty } = scene.view.transform;
  const k = base * scale;
  const cx = (minX + maxX) / 2;
  const cy = (minY + maxY) / 2;
  return {
    toScreen(x, y) {
      return [
        width / 2 + (x - cx) * k + tx,
        height / 2 - (y - cy) * k + ty,
      ];
    },
    toData(px, py) {
      return [
        (px - width / 2 - tx) / k + cx,
        -(py - height / 2 - ty) / k + cy,
      ];
    },
    pixelsPerUnit: k,
  };
}

export function draw(scene: Scene, canvas: HTMLCanvasElement): Projection {
  const ctx = canvas.getContext("2d");
  if (!ctx) throw new Error("canvas has no 2d context");
  const { width, height } = canvas;
  const proj = makeProjection(scene, width, height);
  ctx.clearRect(0, 0, width, height);

  const { bundle, view } = scene;
  ctx.lineWidth = 1.5;
  for (const traj of bundle.trajectories) {
    if (!view.visibleTrajectories.has(traj.id)) continue;
    ctx.strokeStyle = "rgba(40,40,40,0.55)";
    ctx.beginPath();
    traj.state_ids.forEach((sid, k) => {
      const [px, py] = proj.toScreen(bundle.states[sid].x, bundle.states[sid].y);
      if (k === 0) ctx.moveTo(px, py);
      else ctx.lineTo(px, py);
    });
    ctx.stroke();
  }

  const r = bundle.states.length > 20000 ? 1.5 : 3;
  for (const s of bundle.states) {
    const [px, py] = proj.toScreen(s.x, s.y);
    ctx.fillStyle = colorOf(scene, s.id);
    ctx.beginPath();
    ctx.arc(px, py, r, 0, 2 * Math.PI);
    ctx.fill();
  }

  // ring the minimum-free-energy state of each active cluster
  ctx.strokeStyle = "#111";
  ctx.lineWidth = 2;
  for (const [cluster, sid] of scene.view.mfeByCluster) {
    if (cluster === NOISE) continue;
    const [px, py] = proj.toScreen(bundle.states[sid].x, bundle.states[sid].y);
    ctx.beginPath();
    ctx.arc(px, py, r + 3.5, 0, 2 * Math.PI);
    ctx.stroke();
  }
  return proj;
}
