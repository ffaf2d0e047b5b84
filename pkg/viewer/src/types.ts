/** ViewerBundle schema (version "1") and its validation. */

export interface StrandRecord {
  id: string;
  sequence: string;
}

export interface StateRecord {
  id: number;
  dp: string;
  energy: number;
  p: number;
  cumulative_time: number;
  x: number;
  y: number;
}

export interface TrajectoryRecord {
  id: number;
  outcome: string;
  state_ids: number[];
  times: number[];
}

export interface TrapRecord {
  cluster: number;
  state_id: number;
  dp: string;
  energy: number;
  cumulative_time: number;
}

export interface ClusterBlock {
  eps: number;
  min_samples: number;
  time_threshold: number;
  labels: number[];
  traps: TrapRecord[];
}

export interface ViewerBundle {
  schema_version: string;
  meta: {
    reaction: string;
    strands: StrandRecord[];
    units: Record<string, string>;
  };
  states: StateRecord[];
  trajectories: TrajectoryRecord[];
  clusters?: ClusterBlock;
}

export const SCHEMA_VERSION = "1";

/** Raised when a document is not a well-formed version-1 bundle. */
export class SchemaMismatch extends Error {
  constructor(message: string) {
    super(message);
    this.name = "SchemaMismatch";
  }
}

function fail(message: string): never {
  throw new SchemaMismatch(message);
}

function isObject(value: unknown): value is Record<string, unknown> {
  return typeof value === "object" && value !== null && !Array.isArray(value);
}

export function validateBundle(data: unknown): ViewerBundle {
  if (!isObject(data)) fail("bundle must be a JSON object");
  const version = data["schema_version"];
  if (version !== SCHEMA_VERSION) {
    fail(`schema_version is ${JSON.stringify(version)}, this viewer reads "1"`);
  }
  for (const key of ["meta", "states", "trajectories"]) {
    if (!(key in data)) fail(`bundle is missing '${key}'`);
  }
  const meta = data["meta"];
  if (!isObject(meta) || !("reaction" in meta) || !("strands" in meta)) {
    fail("meta needs 'reaction' and 'strands'");
  }
  const states = data["states"];
  if (!Array.isArray(states)) fail("'states' must be an array");
  states.forEach((s, i) => {
    if (!isObject(s) || s["id"] !== i) {
      fail(`state ${i} has a bad or out-of-order id; ids must be 0..n-1`);
    }
    for (const key of ["dp", "energy", "p", "cumulative_time", "x", "y"]) {
      if (!(key in s)) fail(`state ${i} is missing '${key}'`);
    }
    if (!Number.isFinite(s["x"]) || !Number.isFinite(s["y"])) {
      fail(`state ${i} has non-finite coordinates`);
    }
  });
  const n = states.length;
  const trajectories = data["trajectories"];
  if (!Array.isArray(trajectories)) fail("'trajectories' must be an array");
  for (const t of trajectories) {
    if (!isObject(t)) fail("trajectory records must be objects");
    const ids = t["state_ids"];
    const times = t["times"];
    if (!Array.isArray(ids) || !Array.isArray(times) || ids.length !== times.length) {
      fail(`trajectory ${t["id"]} lengths disagree`);
    }
    for (const sid of ids) {
      if (!Number.isInteger(sid) || sid < 0 || sid >= n) {
        fail(`trajectory ${t["id"]} references unknown state ${sid}`);
      }
    }
  }
  if ("clusters" in data && data["clusters"] !== undefined) {
    const clusters = data["clusters"];
    if (!isObject(clusters)) fail("'clusters' must be an object");
    const labels = clusters["labels"];
    if (!Array.isArray(labels) || labels.length !== n) {
      fail("cluster labels must cover every state");
    }
    const traps = clusters["traps"];
    if (!Array.isArray(traps)) fail("'clusters.traps' must be an array");
    for (const trap of traps) {
      if (!isObject(trap)) fail("trap records must be objects");
      const sid = trap["state_id"];
      if (!Number.isInteger(sid) || (sid as number) < 0 || (sid as number) >= n) {
        fail("trap references an unknown state");
      }
    }
  }
  return data as unknown as ViewerBundle;
}

/** Parse text into a validated bundle; malformed JSON is a SchemaMismatch
 * too, so callers show one kind of banner. */
export function parseBundle(text: string): ViewerBundle {
  let data: unknown;
  try {
    data = JSON.parse(text);
  } catch (err) {
    fail(`bundle is not valid JSON: ${(err as Error).message}`);
  }
  return validateBundle(data);
}

/** Recursively freeze the loaded document so nothing can mutate it. */
export function deepFreeze<T>(value: T): T {
  if (value !== null && typeof value === "object") {
    for (const key of Object.getOwnPropertyNames(value)) {
      deepFreeze((value as Record<string, unknown>)[key]);
    }
    Object.freeze(value);
  }
  return value;
}
