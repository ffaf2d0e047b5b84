"""ViewerBundle: the self-contained JSON artifact the landscape viewer loads.

Schema version "1". The bundle holds everything the interactive viewer needs
offline: reaction metadata, per-state records (dp, energy, probability,
cumulative time, 2D coordinates), trajectories as state-id paths with times,
and optional cluster labels with kinetic-trap records. Serialization is
canonical (sorted keys, stable float repr) so identical inputs produce
byte-identical files.
"""

from __future__ import annotations

import json
import math

from .embedding import Embedding
from .errors import SchemaMismatch
from .metrics import ClusterResult, TrapRecord
from .trajlog import ParsedLog

SCHEMA_VERSION = "1"


def build_bundle(
    reaction: str,
    parsed: ParsedLog,
    emb: Embedding,
    clusters: ClusterResult | None = None,
    traps: list[TrapRecord] | None = None,
    time_threshold: float | None = None,
) -> dict:
    space = parsed.space
    n = len(space)
    if emb.n != n:
        raise ValueError(f"embedding has {emb.n} rows for {n} states")
    coords = emb.coords
    states = [
        {
            "id": i,
            "dp": space.states[i].dp,
            "energy": space.energies[i],
            "p": space.probabilities[i],
            "cumulative_time": space.cumulative_holding_times[i],
            "x": float(coords[i, 0]),
            "y": float(coords[i, 1]) if coords.shape[1] > 1 else 0.0,
        }
        for i in range(n)
    ]
    bundle = {
        "schema_version": SCHEMA_VERSION,
        "meta": {
            "reaction": reaction,
            "strands": [
                {"id": sid, "sequence": seq} for sid, seq in parsed.strands.strands
            ],
            "units": {"time": "s", "energy": "kcal/mol"},
        },
        "states": states,
        "trajectories": [
            {
                "id": k,
                "outcome": traj.outcome.value,
                "state_ids": [s.state_id for s in traj.steps],
                "times": [s.time for s in traj.steps],
            }
            for k, traj in enumerate(parsed.trajectories)
        ],
    }
    if clusters is not None:
        labels = [-1] * n
        for label, sid in zip(clusters.labels, clusters.state_ids):
            labels[sid] = label
        bundle["clusters"] = {
            "eps": clusters.eps,
            "min_samples": clusters.min_samples,
            "time_threshold": time_threshold if time_threshold is not None else 0.0,
            "labels": labels,
            "traps": [t.to_dict() for t in (traps or [])],
        }
    return bundle


def validate_bundle(data: dict) -> None:
    """Raise SchemaMismatch unless the dict is a well-formed version-1 bundle."""
    if not isinstance(data, dict):
        raise SchemaMismatch("bundle must be a JSON object")
    version = data.get("schema_version")
    if version != SCHEMA_VERSION:
        raise SchemaMismatch(
            f"schema_version is {version!r}, this toolkit writes {SCHEMA_VERSION!r}"
        )
    for key in ("meta", "states", "trajectories"):
        if key not in data:
            raise SchemaMismatch(f"bundle is missing {key!r}")
    meta = data["meta"]
    if "reaction" not in meta or "strands" not in meta:
        raise SchemaMismatch("meta needs 'reaction' and 'strands'")
    states = data["states"]
    for i, s in enumerate(states):
        if s.get("id") != i:
            raise SchemaMismatch(f"state {i} has id {s.get('id')!r}; ids must be 0..n-1")
        for key in ("dp", "energy", "p", "cumulative_time", "x", "y"):
            if key not in s:
                raise SchemaMismatch(f"state {i} is missing {key!r}")
        for key in ("x", "y"):
            value = s[key]
            if not isinstance(value, (int, float)) or isinstance(value, bool) \
                    or not math.isfinite(value):
                raise SchemaMismatch(f"state {i} has non-finite coordinates")
    n = len(states)
    for traj in data["trajectories"]:
        ids = traj.get("state_ids", [])
        times = traj.get("times", [])
        if len(ids) != len(times):
            raise SchemaMismatch(f"trajectory {traj.get('id')} lengths disagree")
        for sid in ids:
            if not 0 <= sid < n:
                raise SchemaMismatch(
                    f"trajectory {traj.get('id')} references unknown state {sid}"
                )
    if "clusters" in data:
        clusters = data["clusters"]
        labels = clusters.get("labels", [])
        if len(labels) != n:
            raise SchemaMismatch("cluster labels must cover every state")
        for trap in clusters.get("traps", []):
            if not 0 <= trap.get("state_id", -1) < n:
                raise SchemaMismatch("trap references an unknown state")


def dumps_bundle(data: dict) -> str:
    """Canonical serialization; validates first."""
    validate_bundle(data)
    return json.dumps(data, sort_keys=True, indent=2) + "\n"


def loads_bundle(text: str) -> dict:
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise SchemaMismatch(f"bundle is not valid JSON: {exc}") from exc
    validate_bundle(data)
    return data
