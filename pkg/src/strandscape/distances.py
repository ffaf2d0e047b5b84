"""Biophysical distance structures used as embedding supervision.

Two neighborhood systems are built over the deduplicated states: minimum
passage times (shortest paths on the observed transition graph, with every
out-edge of a state weighted by that state's mean sampled holding time) and
structure edit distances (L1 between flattened adjacency matrices). Both are
truncated to the k nearest neighbors per state, k = 100 by default.
"""

from __future__ import annotations

import heapq
import struct
from dataclasses import dataclass

import numpy as np

from .dp import SecondaryStructure, adjacency_vector
from .errors import DimensionMismatch
from .trajlog import StateSpace, TransitionGraph

DEFAULT_K = 100


@dataclass(frozen=True)
class NeighborTable:
    """Per-state neighbor lists, each sorted ascending by (distance, id).

    Self-pairs are never stored and unreachable targets are omitted, so every
    stored distance is finite. ``metric`` tags the units: "mpt" distances are
    seconds, "ged" distances are edit counts.
    """

    metric: str
    k: int
    neighbors: tuple[tuple[tuple[int, float], ...], ...]

    def __post_init__(self):
        for i, entries in enumerate(self.neighbors):
            if len(entries) > self.k:
                raise ValueError(f"state {i} has more than k={self.k} neighbors")
            last = -np.inf
            for j, d in entries:
                if j == i:
                    raise ValueError(f"state {i} lists itself as a neighbor")
                if not np.isfinite(d) or d < last:
                    raise ValueError(f"state {i} has a non-monotone or infinite list")
                last = d

    @property
    def n(self) -> int:
        return len(self.neighbors)

    def pairs(self):
        """Iterate stored (i, j, distance) triples."""
        for i, entries in enumerate(self.neighbors):
            for j, d in entries:
                yield i, j, d

    def to_dict(self) -> dict:
        return {
            "metric": self.metric,
            "k": self.k,
            "neighbors": [
                [[j, d] for j, d in entries] for entries in self.neighbors
            ],
        }

    @classmethod
    def from_dict(cls, data: dict) -> "NeighborTable":
        return cls(
            metric=data["metric"],
            k=int(data["k"]),
            neighbors=tuple(
                tuple((int(j), float(d)) for j, d in entries)
                for entries in data["neighbors"]
            ),
        )

    def to_bytes(self) -> bytes:
        """Compact binary form: u32 state count, then per state a u32 entry
        count followed by (u32 id, f64 distance) pairs, little-endian."""
        out = [struct.pack("<I", self.n)]
        for entries in self.neighbors:
            out.append(struct.pack("<I", len(entries)))
            for j, d in entries:
                out.append(struct.pack("<Id", j, d))
        return b"".join(out)

    @classmethod
    def from_bytes(cls, blob: bytes, metric: str, k: int) -> "NeighborTable":
        off = 0
        (n,) = struct.unpack_from("<I", blob, off)
        off += 4
        neighbors = []
        for _ in range(n):
            (count,) = struct.unpack_from("<I", blob, off)
            off += 4
            entries = []
            for _ in range(count):
                j, d = struct.unpack_from("<Id", blob, off)
                off += 12
                entries.append((j, d))
            neighbors.append(tuple(entries))
        return cls(metric=metric, k=k, neighbors=tuple(neighbors))


@dataclass(frozen=True)
class WeightTable:
    """Importance weights w_ij = p_i * p_j from empirical state probabilities."""

    p: tuple[float, ...]

    def __post_init__(self):
        if any(x < 0 or x > 1 for x in self.p):
            raise ValueError("probabilities must lie in [0, 1]")

    def weight(self, i: int, j: int) -> float:
        return self.p[i] * self.p[j]

    def to_dict(self) -> dict:
        return {"p": list(self.p)}

    @classmethod
    def from_dict(cls, data: dict) -> "WeightTable":
        return cls(p=tuple(float(x) for x in data["p"]))

    @classmethod
    def from_space(cls, space: StateSpace) -> "WeightTable":
        return cls(p=space.probabilities)


@dataclass(frozen=True)
class MptGraph:
    """Observed-transition digraph with source-holding-time edge weights."""

    n: int
    edges: dict[int, tuple[tuple[int, float], ...]]

    def out_edges(self, i: int) -> tuple[tuple[int, float], ...]:
        return self.edges.get(i, ())


def mpt_graph(tg: TransitionGraph, space: StateSpace) -> MptGraph:
    """Weight each observed edge i -> j by state i's mean holding time (s)."""
    if tg.n != len(space):
        raise DimensionMismatch("transition graph and state space disagree on n")
    edges: dict[int, list[tuple[int, float]]] = {}
    for (i, j) in tg.edge_counts:
        edges.setdefault(i, []).append((j, space.mean_holding_times[i]))
    return MptGraph(
        n=tg.n, edges={i: tuple(sorted(out)) for i, out in edges.items()}
    )


def _dijkstra(graph: MptGraph, source: int, settle_limit: int | None) -> dict[int, float]:
    """Distances from source; stops after settle_limit settled targets."""
    dist: dict[int, float] = {}
    heap = [(0.0, source)]
    settled = 0
    while heap:
        d, u = heapq.heappop(heap)
        if u in dist:
            continue
        dist[u] = d
        if u != source:
            settled += 1
            if settle_limit is not None and settled >= settle_limit:
                break
        for v, w in graph.out_edges(u):
            if v not in dist:
                heapq.heappush(heap, (d + w, v))
    dist.pop(source, None)
    return dist


def mpt_knn(
    graph: MptGraph,
    sources: list[int] | None = None,
    k: int = DEFAULT_K,
    symmetrize: bool = False,
) -> NeighborTable:
    """k nearest states by minimum passage time from each source.

    Directed passage times are used as-is; with symmetrize=True the distance
    becomes min(t_ij, t_ji), which disables early termination.
    """
    if sources is None:
        sources = list(range(graph.n))
    reverse = None
    if symmetrize:
        redges: dict[int, list[tuple[int, float]]] = {}
        for i, out in graph.edges.items():
            for j, w in out:
                redges.setdefault(j, []).append((i, w))
        reverse = MptGraph(
            n=graph.n, edges={i: tuple(sorted(out)) for i, out in redges.items()}
        )

    neighbors: list[tuple[tuple[int, float], ...]] = []
    table: dict[int, tuple[tuple[int, float], ...]] = {}
    for src in sources:
        forward = _dijkstra(graph, src, None if symmetrize else k)
        if reverse is not None:
            backward = _dijkstra(reverse, src, None)
            merged = {
                v: min(forward.get(v, np.inf), backward.get(v, np.inf))
                for v in set(forward) | set(backward)
            }
            forward = merged
        best = sorted(forward.items(), key=lambda item: (item[1], item[0]))[:k]
        table[src] = tuple(best)
    for i in range(graph.n):
        neighbors.append(table.get(i, ()))
    # Sources not asked for stay empty; the table still spans every state id.
    return NeighborTable(metric="mpt", k=k, neighbors=tuple(neighbors))


def _structure_matrix(structures: list[SecondaryStructure]) -> np.ndarray:
    if not structures:
        raise ValueError("no structures")
    rows = [adjacency_vector(s) for s in structures]
    dim = rows[0].size
    if any(r.size != dim for r in rows):
        raise DimensionMismatch("structures come from different strand systems")
    return np.stack(rows).astype(np.float32)


def _l1_block(X: np.ndarray, rows: np.ndarray, sums: np.ndarray) -> np.ndarray:
    # For 0/1 vectors, |a - b|_1 = |a| + |b| - 2 a.b; exact in float32 here
    # because entries stay far below 2^24.
    dots = X[rows] @ X.T
    return sums[rows][:, None] + sums[None, :] - 2.0 * dots


def _k_smallest(dist_row: np.ndarray, self_index: int, k: int) -> tuple[tuple[int, float], ...]:
    ids = np.arange(dist_row.size)
    mask = ids != self_index
    ids = ids[mask]
    d = dist_row[mask]
    order = np.lexsort((ids, d))[:k]
    return tuple((int(ids[o]), float(d[o])) for o in order)


class RandomProjectionForest:
    """Annoy-style forest of random two-point hyperplane trees.

    Each split draws two distinct data points and separates the subset by the
    perpendicular bisector of the pair; queries run a best-first search over
    all trees ordered by worst plane margin along the path, and candidates
    are re-ranked exactly by the caller.
    """

    def __init__(self, X: np.ndarray, n_trees: int = 16, leaf_size: int = 32,
                 seed: int = 0):
        self.X = X
        self.leaf_size = leaf_size
        rng = np.random.default_rng(seed)
        self._trees = [
            self._build(np.arange(X.shape[0]), rng) for _ in range(n_trees)
        ]

    def _build(self, indices: np.ndarray, rng) -> dict:
        if indices.size <= self.leaf_size:
            return {"leaf": indices}
        for _ in range(8):
            p, q = rng.choice(indices, size=2, replace=False)
            w = self.X[p] - self.X[q]
            norm = np.linalg.norm(w)
            if norm == 0:
                continue
            w = w / norm
            threshold = float(w @ (self.X[p] + self.X[q]) / 2.0)
            side = self.X[indices] @ w < threshold
            if side.any() and not side.all():
                return {
                    "w": w,
                    "threshold": threshold,
                    "left": self._build(indices[side], rng),
                    "right": self._build(indices[~side], rng),
                }
        # Duplicated points defeat hyperplane splits; fall back to halving.
        half = indices.size // 2
        shuffled = rng.permutation(indices)
        return {
            "w": None,
            "left": self._build(shuffled[:half], rng),
            "right": self._build(shuffled[half:], rng),
        }

    def candidates(self, query: np.ndarray, n_candidates: int) -> np.ndarray:
        heap = [(-np.inf, i, tree) for i, tree in enumerate(self._trees)]
        heapq.heapify(heap)
        found: list[np.ndarray] = []
        total = 0
        counter = len(self._trees)
        while heap and total < n_candidates:
            neg_margin, _, node = heapq.heappop(heap)
            while "leaf" not in node:
                if node["w"] is None:
                    near, far = node["left"], node["right"]
                    margin = -neg_margin
                else:
                    m = float(query @ node["w"] - node["threshold"])
                    near, far = (node["left"], node["right"]) if m < 0 else (
                        node["right"], node["left"])
                    margin = min(-neg_margin, abs(m))
                heapq.heappush(heap, (-margin, counter, far))
                counter += 1
                node = near
            found.append(node["leaf"])
            total += node["leaf"].size
        return np.unique(np.concatenate(found)) if found else np.array([], dtype=int)


EXACT_MODE_LIMIT = 5000


def ged_knn(
    structures: list[SecondaryStructure],
    k: int = DEFAULT_K,
    mode: str = "auto",
    n_trees: int = 16,
    leaf_size: int = 32,
    seed: int = 0,
    n_candidates: int | None = None,
) -> NeighborTable:
    """k nearest structures under L1 adjacency distance.

    mode "exact" scans all pairs; "random_projection" collects candidates
    from a hyperplane forest and re-ranks them by exact L1, trading a little
    recall for sublinear candidate generation. "auto" stays exact up to
    EXACT_MODE_LIMIT states.
    """
    X = _structure_matrix(structures)
    n = X.shape[0]
    sums = X.sum(axis=1)
    kk = min(k, n - 1)
    if mode == "auto":
        mode = "exact" if n < EXACT_MODE_LIMIT else "random_projection"

    if mode == "exact":
        neighbors = []
        block = 256
        for start in range(0, n, block):
            rows = np.arange(start, min(start + block, n))
            D = _l1_block(X, rows, sums)
            for local, i in enumerate(rows):
                neighbors.append(_k_smallest(D[local], int(i), kk))
        return NeighborTable(metric="ged", k=k, neighbors=tuple(neighbors))

    if mode != "random_projection":
        raise ValueError(f"unknown mode {mode!r}")

    forest = RandomProjectionForest(X, n_trees=n_trees, leaf_size=leaf_size, seed=seed)
    budget = n_candidates if n_candidates is not None else 2 * n_trees * max(k, 1)
    neighbors = []
    for i in range(n):
        cand = forest.candidates(X[i], budget)
        cand = cand[cand != i]
        if cand.size == 0:
            neighbors.append(())
            continue
        d = sums[cand] + sums[i] - 2.0 * (X[cand] @ X[i])
        order = np.lexsort((cand, d))[:kk]
        neighbors.append(tuple((int(cand[o]), float(d[o])) for o in order))
    return NeighborTable(metric="ged", k=k, neighbors=tuple(neighbors))
