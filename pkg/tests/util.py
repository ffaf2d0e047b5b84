"""Shared generators and independent oracles for the test suite.

Everything here is deliberately written as a second, simpler implementation
of whatever it checks (brute force, direct enumeration, textbook algorithms)
so tests never compare a function against itself.
"""

from __future__ import annotations

import numpy as np

from strandscape.dp import SecondaryStructure, parse_dp


def _with_separators(flat: str, strand_lengths: list[int]) -> str:
    out, pos = [], 0
    for k, n in enumerate(strand_lengths):
        if k:
            out.append("+")
        out.append(flat[pos:pos + n])
        pos += n
    return "".join(out)


def random_dp(rng: np.random.Generator, strand_lengths: list[int],
              p_pair: float = 0.3) -> str:
    """A random valid dp string over the given strands."""
    total = sum(strand_lengths)
    base_weight = {"(": p_pair, ")": p_pair, ".": 1.0 - 2.0 * p_pair}
    chars = []
    open_count = 0
    for i in range(total):
        remaining = total - i
        legal = []
        if remaining - 1 >= open_count + 1:
            legal.append("(")
        if open_count > 0:
            legal.append(")")
        if remaining - 1 >= open_count:
            legal.append(".")
        weights = np.array([base_weight[c] for c in legal])
        ch = legal[rng.choice(len(legal), p=weights / weights.sum())]
        chars.append(ch)
        if ch == "(":
            open_count += 1
        elif ch == ")":
            open_count -= 1
    return _with_separators("".join(chars), strand_lengths)


def _legal_pair_additions(s: SecondaryStructure,
                          min_loop: int = 3) -> list[tuple[int, int]]:
    """Unpaired (i, j) whose addition keeps the structure non-crossing.

    Same-strand pairs must enclose at least min_loop bases, like structures
    from a real simulator; without that, a pair between backbone-adjacent
    bases would be invisible in the 0/1 adjacency matrix.
    """
    pairs = sorted(s.pairs())
    unpaired = [i for i, p in enumerate(s.pair_table) if p == -1]
    legal = []
    for ai, i in enumerate(unpaired):
        for j in unpaired[ai + 1:]:
            if s.strand_of(i) == s.strand_of(j) and j - i - 1 < min_loop:
                continue
            ok = True
            for a, b in pairs:
                inside_i = a < i < b
                inside_j = a < j < b
                if inside_i != inside_j:
                    ok = False
                    break
            if ok:
                legal.append((i, j))
    return legal


def random_structure(rng: np.random.Generator, strand_lengths: list[int],
                     n_moves: int | None = None) -> SecondaryStructure:
    """A realistic random structure built from single-pair moves."""
    total = sum(strand_lengths)
    if n_moves is None:
        n_moves = int(rng.integers(0, max(2, total)))
    current = parse_dp("+".join("." * n for n in strand_lengths), strand_lengths)
    for _ in range(n_moves):
        current = _random_move(rng, current, strand_lengths)
    return current


def _is_legal_addition(s: SecondaryStructure, i: int, j: int,
                       min_loop: int = 3) -> bool:
    if s.pair_table[i] != -1 or s.pair_table[j] != -1:
        return False
    if s.strand_of(i) == s.strand_of(j) and j - i - 1 < min_loop:
        return False
    for a, b in s.pairs():
        if (a < i < b) != (a < j < b):
            return False
    return True


def _random_move(rng, current: SecondaryStructure,
                 strand_lengths: list[int]) -> SecondaryStructure:
    pairs = sorted(current.pairs())
    move = None
    if pairs and rng.random() < 0.45:
        move = ("remove", pairs[rng.integers(len(pairs))])
    else:
        # rejection sampling is much cheaper than enumerating all additions
        total = sum(strand_lengths)
        for _ in range(40):
            i, j = sorted(rng.integers(0, total, size=2))
            if i != j and _is_legal_addition(current, int(i), int(j)):
                move = ("add", (int(i), int(j)))
                break
        if move is None:
            add = _legal_pair_additions(current)
            if add:
                move = ("add", add[rng.integers(len(add))])
            elif pairs:
                move = ("remove", pairs[rng.integers(len(pairs))])
            else:
                return current
    kind, (i, j) = move
    table = list(current.pair_table)
    if kind == "add":
        table[i], table[j] = j, i
    else:
        table[i] = table[j] = -1
    chars = [
        "." if p == -1 else ("(" if p > a else ")")
        for a, p in enumerate(table)
    ]
    return parse_dp(_with_separators("".join(chars), strand_lengths),
                    strand_lengths)


def structure_walk(rng: np.random.Generator, strand_lengths: list[int],
                   n_states: int) -> list[SecondaryStructure]:
    """Distinct structures produced by a random walk of single-pair moves.

    Mimics trajectory data: consecutive states differ by one base pair, so
    the set has manifold structure rather than being uniform noise.
    """
    current = parse_dp(
        "+".join("." * n for n in strand_lengths), strand_lengths
    )
    seen = {current.dp}
    states = [current]
    budget = 500 * n_states
    while len(states) < n_states:
        budget -= 1
        if budget < 0:
            raise RuntimeError("walk failed to find enough distinct structures")
        current = _random_move(rng, current, strand_lengths)
        if current.dp not in seen:
            seen.add(current.dp)
            states.append(current)
    return states


def pair_set_ged(a: SecondaryStructure, b: SecondaryStructure) -> int:
    """Edit distance oracle: twice the symmetric difference of pair sets."""
    return 2 * len(a.pairs() ^ b.pairs())


def reaction_states(rng: np.random.Generator, L: int,
                    n_states: int) -> list[SecondaryStructure]:
    """Distinct states from simulated duplex-formation trajectories.

    Two complementary strands of length L zipper toward the full duplex
    (mirror pairs i <-> 2L-1-i) with occasional off-pathway pairs and
    unbindings, mimicking the state sets real hybridization trajectories
    visit: strong structure along the reaction coordinate, local jitter off
    it.
    """
    lengths = [L, L]
    empty = parse_dp("+".join("." * L for _ in range(2)), lengths)
    seen: dict[str, SecondaryStructure] = {}
    out: list[SecondaryStructure] = []
    total = 2 * L

    def record(s):
        if s.dp not in seen:
            seen[s.dp] = s
            out.append(s)

    record(empty)
    while len(out) < n_states:
        current = empty
        for _ in range(8 * L):
            pt = current.pair_table
            mirror_free = [
                i for i in range(L)
                if pt[i] == -1 and pt[total - 1 - i] == -1
                and _is_legal_addition(current, i, total - 1 - i)
            ]
            pairs = sorted(current.pairs())
            r = rng.random()
            table = list(pt)
            if r < 0.7 and mirror_free:
                i = int(mirror_free[rng.integers(len(mirror_free))])
                table[i], table[total - 1 - i] = total - 1 - i, i
            elif r < 0.85:
                done = False
                for _ in range(20):
                    i, j = sorted(rng.integers(0, total, size=2))
                    if i != j and _is_legal_addition(current, int(i), int(j)):
                        table[int(i)], table[int(j)] = int(j), int(i)
                        done = True
                        break
                if not done and pairs:
                    i, j = pairs[rng.integers(len(pairs))]
                    table[i] = table[j] = -1
            elif pairs:
                i, j = pairs[rng.integers(len(pairs))]
                table[i] = table[j] = -1
            chars = [
                "." if p == -1 else ("(" if p > a else ")")
                for a, p in enumerate(table)
            ]
            current = parse_dp(_with_separators("".join(chars), lengths), lengths)
            record(current)
            if len(out) >= n_states:
                break
            if all(pt_i != -1 for pt_i in current.pair_table):
                break
    return out[:n_states]


def bellman_ford(n: int, edges: list[tuple[int, int, float]],
                 source: int) -> np.ndarray:
    """Single-source shortest paths by edge relaxation with early exit."""
    dist = np.full(n, np.inf)
    dist[source] = 0.0
    for _ in range(n - 1):
        changed = False
        for u, v, w in edges:
            if dist[u] + w < dist[v]:
                dist[v] = dist[u] + w
                changed = True
        if not changed:
            break
    return dist


def bellman_ford_all(n: int, edges: list[tuple[int, int, float]]) -> np.ndarray:
    """All-sources Bellman-Ford, vectorized over sources: D[v, s]."""
    src = np.array([u for u, _, _ in edges], dtype=int)
    dst = np.array([v for _, v, _ in edges], dtype=int)
    w = np.array([wt for _, _, wt in edges])
    D = np.full((n, n), np.inf)
    D[np.arange(n), np.arange(n)] = 0.0
    for _ in range(n - 1):
        before = D.copy()
        candidate = D[src] + w[:, None]
        np.minimum.at(D, dst, candidate)
        if np.array_equal(before, D):
            break
    return D


def dbscan_reference(points: np.ndarray, eps: float,
                     min_samples: int) -> np.ndarray:
    """Direct-from-definition density clustering with the same tie rules."""
    n = points.shape[0]
    D = np.sqrt(((points[:, None, :] - points[None, :, :]) ** 2).sum(axis=2))
    within = D <= eps
    core = within.sum(axis=1) >= min_samples
    labels = np.full(n, -1, dtype=int)
    cluster = 0
    for i in range(n):
        if not core[i] or labels[i] != -1:
            continue
        stack = [i]
        labels[i] = cluster
        while stack:
            u = stack.pop()
            for v in range(n):
                if core[v] and within[u, v] and labels[v] == -1:
                    labels[v] = cluster
                    stack.append(v)
        cluster += 1
    for i in range(n):
        if core[i]:
            continue
        candidates = [labels[j] for j in range(n) if core[j] and within[i, j]]
        if candidates:
            labels[i] = min(candidates)
    return labels


def canonical_labels(labels) -> list[int]:
    """Renumber cluster ids by first appearance; noise (-1) is preserved."""
    mapping: dict[int, int] = {}
    out = []
    for c in labels:
        if c == -1:
            out.append(-1)
            continue
        if c not in mapping:
            mapping[c] = len(mapping)
        out.append(mapping[c])
    return out


def random_rotation(rng: np.random.Generator, dim: int) -> np.ndarray:
    """Haar-ish random orthogonal matrix with determinant +1."""
    A = rng.standard_normal((dim, dim))
    Q, R = np.linalg.qr(A)
    Q = Q * np.sign(np.diag(R))
    if np.linalg.det(Q) < 0:
        Q[:, 0] = -Q[:, 0]
    return Q


def procrustes_residual(A: np.ndarray, B: np.ndarray) -> float:
    """Residual of the best rigid alignment (rotation/reflection +
    translation) of B onto A, relative to the scale of A."""
    A = A - A.mean(axis=0)
    B = B - B.mean(axis=0)
    U, _, Vt = np.linalg.svd(B.T @ A)
    R = U @ Vt
    resid = np.linalg.norm(B @ R - A)
    scale = np.linalg.norm(A)
    return resid / scale if scale > 0 else resid
