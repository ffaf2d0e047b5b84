"""Low-dimensional state embeddings and their loss functions.

Three routes produce coordinates:

* :func:`phate` runs the full diffusion-potential pipeline: alpha-decay
  kernel, row-normalized Markov operator powered to a step count chosen at
  the knee of the von Neumann entropy curve, log-potential distances, and
  metric MDS by SMACOF. Above ``n_landmarks`` points the operator is
  compressed through k-means cluster memberships and the embedding is
  extended back to all points.
* :func:`smacof_mds` is the stress-majorization MDS used by PHATE, exposed
  directly for distance-matrix input.
* :func:`stress_embed` minimizes the weighted passage-time stress plus the
  edit-distance stress over coordinates directly, by gradient descent with a
  backtracking line search.

A linear probe (:func:`energy_probe`) measures how well coordinates predict
per-state free energy.
"""

from __future__ import annotations

import hashlib
import json
import math
import warnings
from dataclasses import dataclass, field

import numpy as np

from .distances import NeighborTable, WeightTable
from .errors import DegenerateKernel, MissingState, RankDeficient


@dataclass(frozen=True)
class PhateConfig:
    n_neighbors: int = 5
    decay: float = 40.0
    n_landmarks: int = 2000
    t: int | str = "auto"  # "auto" selects the entropy knee
    t_max: int = 100
    out_dim: int = 2
    mds_max_iter: int = 300
    mds_tol: float = 1e-9
    log_floor: float = 1e-7
    seed: int = 0

    def __post_init__(self):
        if self.n_neighbors < 1:
            raise ValueError("n_neighbors must be >= 1")
        if self.decay <= 0:
            raise ValueError("decay must be positive")
        if isinstance(self.t, str) and self.t != "auto":
            raise ValueError("t must be an integer or 'auto'")


@dataclass(frozen=True)
class StressConfig:
    """Weights and optimizer settings for direct stress minimization.

    delta scales the passage-time term, epsilon the edit-distance term; they
    cannot both be zero. init_coords carries an explicit starting layout
    (typically a PHATE embedding); None starts from seeded Gaussian noise.
    """

    delta: float = 0.0004
    epsilon: float = 0.00004
    learning_rate: float = 0.1
    max_iter: int = 500
    tol: float = 1e-10
    out_dim: int = 2
    seed: int = 0
    scale_targets: bool = False  # min-max targets to [0, 1] per metric
    init_coords: np.ndarray | None = None

    def __post_init__(self):
        if self.delta < 0 or self.epsilon < 0 or (self.delta == 0 and self.epsilon == 0):
            raise ValueError("delta and epsilon must be >= 0 and not both zero")


@dataclass(frozen=True)
class Embedding:
    """Per-state coordinates; row i is state i."""

    coords: np.ndarray
    provenance: dict = field(default_factory=dict)
    diagnostics: dict = field(default_factory=dict)

    def __post_init__(self):
        coords = np.asarray(self.coords, dtype=float)
        if not np.all(np.isfinite(coords)):
            raise ValueError("embedding coordinates must be finite")
        coords.setflags(write=False)
        object.__setattr__(self, "coords", coords)

    @property
    def n(self) -> int:
        return self.coords.shape[0]

    @property
    def out_dim(self) -> int:
        return self.coords.shape[1]


def _config_hash(config) -> str:
    payload = {
        k: (v.tolist() if isinstance(v, np.ndarray) else v)
        for k, v in vars(config).items()
    }
    blob = json.dumps(payload, sort_keys=True, default=str).encode()
    return hashlib.sha256(blob).hexdigest()[:16]


def _input_hash(arr: np.ndarray) -> str:
    h = hashlib.sha256()
    h.update(str(arr.shape).encode())
    h.update(np.ascontiguousarray(arr).tobytes())
    return h.hexdigest()[:16]


def pairwise_euclidean(X: np.ndarray) -> np.ndarray:
    G = X @ X.T
    sq = np.diag(G)
    D2 = np.maximum(sq[:, None] + sq[None, :] - 2.0 * G, 0.0)
    np.fill_diagonal(D2, 0.0)
    return np.sqrt(D2)


def classical_mds(D: np.ndarray, dim: int) -> np.ndarray | None:
    """Torgerson double-centering solution, or None when the top ``dim``
    eigenvalues are not all positive."""
    n = D.shape[0]
    J = np.eye(n) - np.full((n, n), 1.0 / n)
    B = -0.5 * J @ (D ** 2) @ J
    vals, vecs = np.linalg.eigh(B)
    order = np.argsort(vals)[::-1][:dim]
    top = vals[order]
    if np.any(top <= 0):
        return None
    return vecs[:, order] * np.sqrt(top)[None, :]


def _smacof(
    D: np.ndarray,
    dim: int,
    max_iter: int,
    tol: float,
    init: np.ndarray,
) -> tuple[np.ndarray, list[float], bool]:
    n = D.shape[0]
    iu = np.triu_indices(n, 1)

    def stress_of(X):
        dis = pairwise_euclidean(X)
        return float(((D[iu] - dis[iu]) ** 2).sum()), dis

    X = init.copy()
    stress, dis = stress_of(X)
    trace = [stress]
    converged = False
    for _ in range(max_iter):
        ratio = np.where(dis > 0, D / np.where(dis > 0, dis, 1.0), 0.0)
        B = -ratio
        np.fill_diagonal(B, 0.0)
        np.fill_diagonal(B, -B.sum(axis=1))
        X = (B @ X) / n
        stress, dis = stress_of(X)
        trace.append(stress)
        prev = trace[-2]
        if prev - stress < tol * max(prev, 1e-300):
            converged = True
            break
    return X, trace, converged


def smacof_mds(
    D: np.ndarray,
    dim: int = 2,
    max_iter: int = 300,
    tol: float = 1e-9,
    seed: int = 0,
    init: np.ndarray | None = None,
) -> Embedding:
    """Metric MDS by Guttman-transform iterations; stress never increases."""
    D = np.asarray(D, dtype=float)
    n = D.shape[0]
    if D.shape != (n, n) or not np.allclose(D, D.T) or np.any(np.diag(D) != 0):
        raise ValueError("D must be symmetric with a zero diagonal")
    if D.min() < 0:
        raise ValueError("D must be non-negative")
    if init is None:
        rng = np.random.default_rng(seed)
        scale = D.max() if D.max() > 0 else 1.0
        init = rng.standard_normal((n, dim)) * scale / math.sqrt(n)
    elif init.shape != (n, dim):
        raise ValueError(f"init must have shape ({n}, {dim})")
    X, trace, converged = _smacof(D, dim, max_iter, tol, init)
    return Embedding(
        coords=X,
        provenance={"input_hash": _input_hash(D), "method": "smacof"},
        diagnostics={
            "stress_trace": trace,
            "final_stress": trace[-1] if trace else 0.0,
            "iterations": len(trace),
            "converged": converged,
        },
    )


def _von_neumann_entropy(eigenvalues: np.ndarray, t: int) -> float:
    lam = np.clip(eigenvalues, 0.0, None) ** t
    total = lam.sum()
    if total <= 0:
        return 0.0
    eta = lam / total
    eta = eta[eta > 0]
    return float(-(eta * np.log(eta)).sum())


def _entropy_knee(entropies: np.ndarray) -> int:
    """Index (0-based) of the point farthest from the first-to-last chord."""
    n = entropies.size
    if n == 1:
        return 0
    x = np.arange(n, dtype=float)
    y = entropies
    dx, dy = x[-1] - x[0], y[-1] - y[0]
    norm = math.hypot(dx, dy)
    if norm == 0:
        return 0
    dist = np.abs(dy * (x - x[0]) - dx * (y - y[0])) / norm
    if dist.max() <= 1e-12:
        return 0
    return int(np.argmax(dist))


def select_diffusion_time(eigenvalues: np.ndarray, t_max: int) -> int:
    """Knee of the von Neumann entropy curve H(t), t = 1..t_max."""
    entropies = np.array(
        [_von_neumann_entropy(eigenvalues, t) for t in range(1, t_max + 1)]
    )
    return 1 + _entropy_knee(entropies)


def _alpha_kernel(D: np.ndarray, n_neighbors: int, decay: float) -> np.ndarray:
    n = D.shape[0]
    k = min(n_neighbors, n - 1)
    sigma = np.sort(D, axis=1)[:, k]
    if np.any(sigma <= 0):
        positive = D[D > 0]
        if positive.size == 0:
            raise DegenerateKernel("all pairwise distances are zero")
        sigma = np.where(sigma > 0, sigma, positive.min())
    with np.errstate(over="ignore"):
        K = np.exp(-((D / sigma[:, None]) ** decay))
    K = 0.5 * (K + K.T)
    off = K - np.diag(np.diag(K))
    if off.max() <= 0:
        raise DegenerateKernel("affinities vanished everywhere off the diagonal")
    return K


def _kmeans(X: np.ndarray, n_clusters: int, seed: int, max_iter: int = 100) -> np.ndarray:
    rng = np.random.default_rng(seed)
    n = X.shape[0]
    centers = X[rng.choice(n, size=n_clusters, replace=False)].copy()
    labels = np.full(n, -1, dtype=int)
    for _ in range(max_iter):
        d2 = ((X[:, None, :] - centers[None, :, :]) ** 2).sum(axis=2)
        new_labels = d2.argmin(axis=1)
        if np.array_equal(new_labels, labels):
            break
        labels = new_labels
        for c in range(n_clusters):
            members = X[labels == c]
            if members.size:
                centers[c] = members.mean(axis=0)
            else:
                centers[c] = X[rng.integers(n)]
    return labels


def phate(
    features: np.ndarray | None = None,
    distances: np.ndarray | None = None,
    config: PhateConfig | None = None,
) -> Embedding:
    """Diffusion-potential embedding of feature rows or a distance matrix."""
    cfg = config or PhateConfig()
    if (features is None) == (distances is None):
        raise ValueError("pass exactly one of features or distances")
    if distances is None:
        features = np.asarray(features, dtype=float)
        D = pairwise_euclidean(features)
        source = features
    else:
        D = np.asarray(distances, dtype=float)
        source = D
    n = D.shape[0]
    if n < cfg.out_dim + 1:
        raise ValueError(f"need at least {cfg.out_dim + 1} points")

    K = _alpha_kernel(D, cfg.n_neighbors, cfg.decay)
    row_sums = K.sum(axis=1)
    P = K / row_sums[:, None]

    diagnostics: dict = {}
    if n > cfg.n_landmarks:
        landmark_labels = _kmeans(P, cfg.n_landmarks, cfg.seed)
        # drop clusters k-means left empty so the compressed operator has no
        # zero rows
        used = np.unique(landmark_labels)
        remap = {int(c): i for i, c in enumerate(used)}
        m = used.size
        M = np.zeros((n, m))
        M[np.arange(n), [remap[int(c)] for c in landmark_labels]] = 1.0
        A_nm = K @ M
        P_nm = A_nm / A_nm.sum(axis=1, keepdims=True)
        A_mn = M.T @ K
        P_mn = A_mn / A_mn.sum(axis=1, keepdims=True)
        P_op = P_mn @ P_nm
        eigenvalues = np.real(np.linalg.eigvals(P_op))
        diagnostics["landmarks"] = m
    else:
        P_op = P
        # P is similar to this symmetric conjugate, so eigenvalues are real.
        inv_sqrt = 1.0 / np.sqrt(row_sums)
        A_sym = inv_sqrt[:, None] * K * inv_sqrt[None, :]
        eigenvalues = np.linalg.eigvalsh(A_sym)

    if cfg.t == "auto":
        t = select_diffusion_time(eigenvalues, cfg.t_max)
    else:
        t = int(cfg.t)
        if t < 1:
            raise ValueError("t must be >= 1")
    diagnostics["t"] = t

    P_t = np.linalg.matrix_power(P_op, t)
    potential = -np.log(P_t + cfg.log_floor)
    D_pot = pairwise_euclidean(potential)

    init = classical_mds(D_pot, cfg.out_dim)
    if init is None:
        rng = np.random.default_rng(cfg.seed)
        init = rng.standard_normal((D_pot.shape[0], cfg.out_dim))
    coords, trace, converged = _smacof(
        D_pot, cfg.out_dim, cfg.mds_max_iter, cfg.mds_tol, init
    )
    if not converged:
        warnings.warn(
            f"MDS stopped after {len(trace)} iterations at stress {trace[-1]:.3e}",
            RuntimeWarning,
            stacklevel=2,
        )
    diagnostics.update(
        {
            "mds_stress": trace[-1] if trace else 0.0,
            "mds_iterations": len(trace),
            "mds_converged": converged,
        }
    )

    if n > cfg.n_landmarks:
        coords = P_nm @ coords

    return Embedding(
        coords=coords,
        provenance={
            "method": "phate",
            "config_hash": _config_hash(cfg),
            "input_hash": _input_hash(source),
        },
        diagnostics=diagnostics,
    )


def _gather_pairs(nbrs: NeighborTable) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    I, J, T = [], [], []
    for i, j, d in nbrs.pairs():
        I.append(i)
        J.append(j)
        T.append(d)
    return (
        np.array(I, dtype=int),
        np.array(J, dtype=int),
        np.array(T, dtype=float),
    )


def _check_coverage(Z: np.ndarray, nbrs: NeighborTable):
    if nbrs.n > Z.shape[0]:
        raise MissingState(
            f"neighbor table spans {nbrs.n} states, embedding has {Z.shape[0]}"
        )


def eval_l_mpt(Z: np.ndarray, nbrs: NeighborTable, weights: WeightTable) -> float:
    """Weighted passage-time stress of an embedding over stored pairs."""
    Z = np.asarray(Z, dtype=float)
    _check_coverage(Z, nbrs)
    I, J, T = _gather_pairs(nbrs)
    if I.size == 0:
        return 0.0
    p = np.asarray(weights.p)
    w = p[I] * p[J]
    d = np.linalg.norm(Z[I] - Z[J], axis=1)
    return float((w * (d - T) ** 2).sum())


def eval_l_ged(Z: np.ndarray, nbrs: NeighborTable) -> float:
    """Unweighted edit-distance stress of an embedding over stored pairs."""
    Z = np.asarray(Z, dtype=float)
    _check_coverage(Z, nbrs)
    I, J, E = _gather_pairs(nbrs)
    if I.size == 0:
        return 0.0
    d = np.linalg.norm(Z[I] - Z[J], axis=1)
    return float(((d - E) ** 2).sum())


def _pair_term_grad(Z, I, J, targets, w):
    """Loss and coordinate gradient of sum w (||z_i - z_j|| - target)^2."""
    diff = Z[I] - Z[J]
    d = np.linalg.norm(diff, axis=1)
    resid = d - targets
    loss = float((w * resid ** 2).sum())
    # Subgradient 0 at coincident points keeps the update finite.
    safe = np.where(d > 0, d, 1.0)
    coef = np.where(d > 0, 2.0 * w * resid / safe, 0.0)
    contrib = coef[:, None] * diff
    grad = np.zeros_like(Z)
    np.add.at(grad, I, contrib)
    np.add.at(grad, J, -contrib)
    return loss, grad


def stress_embed(
    n: int,
    nbrs_mpt: NeighborTable | None,
    weights: WeightTable | None,
    nbrs_ged: NeighborTable | None,
    config: StressConfig | None = None,
) -> Embedding:
    """Minimize delta * L_mpt + epsilon * L_ged over coordinates directly.

    Gradient descent with a backtracking line search; the recorded loss trace
    is non-increasing by construction. Non-convergence is reported through
    the diagnostics, never raised.
    """
    cfg = config or StressConfig()
    if cfg.delta > 0 and (nbrs_mpt is None or weights is None):
        raise ValueError("delta > 0 needs a passage-time table and weights")
    if cfg.epsilon > 0 and nbrs_ged is None:
        raise ValueError("epsilon > 0 needs an edit-distance table")

    terms = []
    if cfg.delta > 0:
        I, J, T = _gather_pairs(nbrs_mpt)
        p = np.asarray(weights.p)
        w = cfg.delta * p[I] * p[J]
        if cfg.scale_targets and T.size and T.max() > T.min():
            T = (T - T.min()) / (T.max() - T.min())
        terms.append((I, J, T, w))
    if cfg.epsilon > 0:
        I, J, E = _gather_pairs(nbrs_ged)
        if cfg.scale_targets and E.size and E.max() > E.min():
            E = (E - E.min()) / (E.max() - E.min())
        terms.append((I, J, E, np.full(I.shape, cfg.epsilon)))

    for I, J, _, _ in terms:
        if I.size and max(I.max(), J.max()) >= n:
            raise MissingState("neighbor table references a state beyond n")

    if cfg.init_coords is not None:
        Z = np.array(cfg.init_coords, dtype=float)
        if Z.shape != (n, cfg.out_dim):
            raise ValueError(f"init_coords must have shape ({n}, {cfg.out_dim})")
    else:
        rng = np.random.default_rng(cfg.seed)
        Z = rng.standard_normal((n, cfg.out_dim))

    def evaluate(Zc):
        total = 0.0
        grad = np.zeros_like(Zc)
        for I, J, targets, w in terms:
            if I.size == 0:
                continue
            loss, g = _pair_term_grad(Zc, I, J, targets, w)
            total += loss
            grad += g
        return total, grad

    loss, grad = evaluate(Z)
    trace = [loss]
    step = cfg.learning_rate
    converged = False
    for _ in range(cfg.max_iter):
        gnorm2 = float((grad ** 2).sum())
        if gnorm2 == 0:
            converged = True
            break
        accepted = False
        while step > 1e-18:
            candidate = Z - step * grad
            cand_loss, cand_grad = evaluate(candidate)
            if cand_loss <= loss - 1e-4 * step * gnorm2:
                Z, loss, grad = candidate, cand_loss, cand_grad
                trace.append(loss)
                step *= 2.0
                accepted = True
                break
            step *= 0.5
        if not accepted:
            converged = True
            break
        if len(trace) > 1 and trace[-2] - trace[-1] < cfg.tol * max(trace[-2], 1e-300):
            converged = True
            break

    return Embedding(
        coords=Z,
        provenance={"method": "stress", "config_hash": _config_hash(cfg)},
        diagnostics={
            "loss_trace": trace,
            "final_loss": trace[-1],
            "iterations": len(trace) - 1,
            "converged": converged,
        },
    )


def stress_gradient(
    Z: np.ndarray,
    nbrs: NeighborTable,
    weights: WeightTable | None = None,
    coefficient: float = 1.0,
) -> np.ndarray:
    """Analytic gradient of one stress term, exposed for verification."""
    Z = np.asarray(Z, dtype=float)
    I, J, T = _gather_pairs(nbrs)
    if weights is not None:
        p = np.asarray(weights.p)
        w = coefficient * p[I] * p[J]
    else:
        w = np.full(I.shape, coefficient)
    _, grad = _pair_term_grad(Z, I, J, T, w)
    return grad


@dataclass(frozen=True)
class ProbeResult:
    coefficients: np.ndarray  # slope per embedding dimension
    intercept: float
    residual: float  # sum of squared prediction errors


def energy_probe(Z: np.ndarray, y: np.ndarray) -> ProbeResult:
    """Least-squares affine fit of per-state energies from coordinates."""
    Z = np.asarray(Z, dtype=float)
    y = np.asarray(y, dtype=float)
    n, d = Z.shape
    if n < d + 1:
        raise ValueError(f"need at least {d + 1} points, got {n}")
    A = np.hstack([Z, np.ones((n, 1))])
    if np.linalg.matrix_rank(A) < d + 1:
        raise RankDeficient("embedding is degenerate; affine fit is not unique")
    theta, _, _, _ = np.linalg.lstsq(A, y, rcond=None)
    resid = float(((A @ theta - y) ** 2).sum())
    return ProbeResult(coefficients=theta[:d], intercept=float(theta[d]), residual=resid)
