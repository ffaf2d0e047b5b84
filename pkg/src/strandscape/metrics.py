"""Quantitative evaluation of embeddings and landscape analysis.

Distortion measures trajectory smoothness: the frequency-weighted mean
embedded length of consecutive trajectory steps, normalized by the embedding
diameter. Local preservation measures whether embedding neighborhoods keep
similar energies and similar structures. Density clustering (with the
k-distance elbow heuristic for eps) plus cumulative-time filtering yield the
kinetic-trap tables.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .dp import SecondaryStructure, adjacency_vector
from .embedding import Embedding, pairwise_euclidean
from .errors import ZeroDiameter
from .trajlog import StateSpace, Trajectory

NOISE = -1


def embedding_diameter(points: np.ndarray, exact_limit: int = 20000) -> float:
    """Largest pairwise distance; exact up to exact_limit points, convex-hull
    based beyond (rotating calipers in 2D, hull-vertex pairs otherwise)."""
    points = np.asarray(points, dtype=float)
    n = points.shape[0]
    if n < 2:
        return 0.0
    if n <= exact_limit:
        best = 0.0
        for start in range(0, n, 1024):
            chunk = points[start:start + 1024]
            d2 = ((chunk[:, None, :] - points[None, :, :]) ** 2).sum(axis=2)
            best = max(best, float(d2.max()))
        return float(np.sqrt(best))

    from scipy.spatial import ConvexHull

    hull = points[ConvexHull(points).vertices]
    if points.shape[1] == 2:
        return _calipers_diameter(hull)
    d2 = ((hull[:, None, :] - hull[None, :, :]) ** 2).sum(axis=2)
    return float(np.sqrt(d2.max()))


def _calipers_diameter(hull: np.ndarray) -> float:
    """Antipodal-pair scan over counter-clockwise 2D hull vertices."""
    m = hull.shape[0]
    if m <= 3:
        d2 = ((hull[:, None, :] - hull[None, :, :]) ** 2).sum(axis=2)
        return float(np.sqrt(d2.max()))

    def area2(a, b, c):
        return (b[0] - a[0]) * (c[1] - a[1]) - (b[1] - a[1]) * (c[0] - a[0])

    best = 0.0
    k = 1
    for i in range(m):
        ni = (i + 1) % m
        while area2(hull[i], hull[ni], hull[(k + 1) % m]) > area2(
            hull[i], hull[ni], hull[k]
        ):
            k = (k + 1) % m
        best = max(
            best,
            float(np.linalg.norm(hull[i] - hull[k])),
            float(np.linalg.norm(hull[ni] - hull[k])),
        )
    return best


def avg_distortion(
    emb: Embedding,
    trajectories: tuple[Trajectory, ...],
    unique_transitions: bool = False,
) -> float:
    """Mean embedded step length over consecutive trajectory pairs, divided by
    the embedding diameter over all states.

    Pairs count with multiplicity across the dataset by default;
    unique_transitions=True collapses repeated (i, j) transitions first.
    """
    coords = emb.coords
    pairs: list[tuple[int, int]] = []
    for traj in trajectories:
        ids = [s.state_id for s in traj.steps]
        pairs.extend(zip(ids, ids[1:]))
    if unique_transitions:
        pairs = sorted(set(pairs))
    if not pairs:
        return 0.0
    if max(max(i, j) for i, j in pairs) >= coords.shape[0]:
        raise ValueError("trajectory references a state without coordinates")
    diameter = embedding_diameter(coords)
    if diameter == 0:
        raise ZeroDiameter("all states coincide but transitions exist")
    arr = np.array(pairs)
    lengths = np.linalg.norm(coords[arr[:, 0]] - coords[arr[:, 1]], axis=1)
    return float(lengths.mean() / diameter)


def _embedding_neighbor_order(coords: np.ndarray) -> np.ndarray:
    """Per state, all other states sorted by (distance, id)."""
    D = pairwise_euclidean(coords)
    n = coords.shape[0]
    ids = np.arange(n)
    order = np.empty((n, n - 1), dtype=int)
    for i in range(n):
        mask = ids != i
        cand = ids[mask]
        srt = np.lexsort((cand, D[i][mask]))
        order[i] = cand[srt]
    return order


def local_preservation(
    emb: Embedding,
    energies: np.ndarray,
    structures: list[SecondaryStructure],
    K_list: list[int],
) -> dict[int, tuple[float, float]]:
    """Average energy and edit-distance differences to the K nearest
    embedding neighbors (Euclidean, ties by id), for each requested K.

    Returns {K: (mean |dG_i - dG_j|, mean ged(i, j))}.
    """
    energies = np.asarray(energies, dtype=float)
    n = emb.n
    if any(K >= n or K < 1 for K in K_list):
        raise ValueError("each K must satisfy 1 <= K < n")
    order = _embedding_neighbor_order(emb.coords)
    X = np.stack([adjacency_vector(s) for s in structures]).astype(np.float32)
    sums = X.sum(axis=1)

    tables: dict[int, tuple[float, float]] = {}
    for K in K_list:
        nbrs = order[:, :K]
        ediff = np.abs(energies[:, None] - energies[nbrs]).mean(axis=1)
        gdiff = np.empty(n)
        for i in range(n):
            js = nbrs[i]
            gdiff[i] = (sums[js] + sums[i] - 2.0 * (X[js] @ X[i])).mean()
        tables[K] = (float(ediff.mean()), float(gdiff.mean()))
    return tables


@dataclass(frozen=True)
class MetricsReport:
    avg_distortion: float
    energy_diff: dict[int, float]
    ged_diff: dict[int, float]
    config: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.avg_distortion < 0:
            raise ValueError("distortion is non-negative")
        if set(self.energy_diff) != set(self.ged_diff):
            raise ValueError("tables must cover the same K values")

    def to_dict(self) -> dict:
        ks = sorted(self.energy_diff)
        return {
            "avg_distortion": self.avg_distortion,
            "K": ks,
            "energy_diff": [self.energy_diff[k] for k in ks],
            "ged_diff": [self.ged_diff[k] for k in ks],
            "config": self.config,
        }

    def to_csv(self) -> str:
        lines = ["metric,K,value"]
        lines.append(f"avg_distortion,,{self.avg_distortion!r}")
        for k in sorted(self.energy_diff):
            lines.append(f"energy_diff,{k},{self.energy_diff[k]!r}")
        for k in sorted(self.ged_diff):
            lines.append(f"ged_diff,{k},{self.ged_diff[k]!r}")
        return "\n".join(lines) + "\n"


@dataclass(frozen=True)
class ClusterResult:
    """DBSCAN labels (NOISE = -1) over the clustered points, with the state
    ids those points correspond to (an identity mapping unless the state
    space was filtered first)."""

    labels: tuple[int, ...]
    state_ids: tuple[int, ...]
    eps: float
    min_samples: int

    @property
    def n_clusters(self) -> int:
        return len({c for c in self.labels if c != NOISE})


def dbscan(
    points: np.ndarray,
    eps: float,
    min_samples: int,
    state_ids: list[int] | None = None,
) -> ClusterResult:
    """Density clustering with deterministic tie handling.

    A point is core when at least min_samples points (itself included) lie
    within eps. Clusters are connected components of core points, numbered in
    order of their first core point; border points join the lowest cluster id
    among their in-range cores.
    """
    if eps <= 0:
        raise ValueError("eps must be positive")
    if min_samples < 1:
        raise ValueError("min_samples must be >= 1")
    points = np.asarray(points, dtype=float)
    n = points.shape[0]
    D = pairwise_euclidean(points)
    within = D <= eps
    core = within.sum(axis=1) >= min_samples

    labels = np.full(n, NOISE, dtype=int)
    cluster = 0
    for start in range(n):
        if not core[start] or labels[start] != NOISE:
            continue
        frontier = [start]
        labels[start] = cluster
        while frontier:
            u = frontier.pop()
            for v in np.flatnonzero(within[u] & core):
                if labels[v] == NOISE:
                    labels[v] = cluster
                    frontier.append(int(v))
        cluster += 1

    for i in range(n):
        if core[i] or not within[i][core].any():
            continue
        labels[i] = int(labels[core & within[i]].min())

    ids = tuple(state_ids) if state_ids is not None else tuple(range(n))
    if len(ids) != n:
        raise ValueError("state_ids must match the point count")
    return ClusterResult(
        labels=tuple(int(c) for c in labels),
        state_ids=ids,
        eps=eps,
        min_samples=min_samples,
    )


def elbow_eps(points: np.ndarray, k: int = 4) -> float:
    """Suggested DBSCAN eps from the sorted k-th-neighbor distance curve.

    The knee is the curve point farthest from the chord between the first and
    last points. On a degenerate (straight) curve the middle value is
    returned; treat the suggestion as advisory either way.
    """
    points = np.asarray(points, dtype=float)
    n = points.shape[0]
    if n <= k:
        raise ValueError(f"need more than k={k} points")
    D = pairwise_euclidean(points)
    kdist = np.sort(D, axis=1)[:, k]  # row position 0 is the point itself
    curve = np.sort(kdist)
    x = np.arange(n, dtype=float)
    dx, dy = x[-1] - x[0], curve[-1] - curve[0]
    norm = np.hypot(dx, dy)
    if norm == 0:
        return float(curve[n // 2])
    dist = np.abs(dy * (x - x[0]) - dx * (curve - curve[0])) / norm
    if dist.max() <= 1e-12 * max(1.0, abs(dy)):
        return float(curve[n // 2])
    return float(curve[int(np.argmax(dist))])


def filter_by_cumulative_time(space: StateSpace, threshold: float) -> list[int]:
    """State ids whose cumulative holding time reaches the threshold (s)."""
    if threshold < 0:
        raise ValueError("threshold must be non-negative")
    return [
        i for i, t in enumerate(space.cumulative_holding_times) if t >= threshold
    ]


@dataclass(frozen=True)
class TrapRecord:
    cluster: int
    state_id: int
    dp: str
    energy: float
    cumulative_time: float

    def to_dict(self) -> dict:
        return {
            "cluster": self.cluster,
            "state_id": self.state_id,
            "dp": self.dp,
            "energy": self.energy,
            "cumulative_time": self.cumulative_time,
        }


def kinetic_traps(cr: ClusterResult, space: StateSpace) -> list[TrapRecord]:
    """Per-cluster minimum-free-energy members, sorted by cumulative time
    descending (the long-dwell, low-energy states that slow the reaction)."""
    if cr.n_clusters == 0:
        raise ValueError("no non-noise clusters to report")
    members: dict[int, list[int]] = {}
    for label, sid in zip(cr.labels, cr.state_ids):
        if label != NOISE:
            members.setdefault(label, []).append(sid)
    records = []
    for label, sids in members.items():
        mfe = min(sids, key=lambda s: (space.energies[s], s))
        records.append(
            TrapRecord(
                cluster=label,
                state_id=mfe,
                dp=space.states[mfe].dp,
                energy=space.energies[mfe],
                cumulative_time=space.cumulative_holding_times[mfe],
            )
        )
    records.sort(key=lambda r: -r.cumulative_time)
    return records
