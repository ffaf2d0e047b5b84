"""Exact and Monte Carlo kinetics on explicit, desk-scale CTMCs.

Dense solvers only; the intended regime is n up to roughly 2000 states. All
operations are pure, and the Gillespie sampler is deterministic given a seed
(parallel ensembles derive per-run seeds as base_seed + run_index).
"""

from __future__ import annotations

import io
import math
from dataclasses import dataclass, field

import numpy as np

from .errors import AbsorbingState, AsymmetricSupport, Unreachable

# Order-13 Pade evaluation threshold for scaling-and-squaring (Higham 2005).
_PADE13_THETA = 5.371920351148152
_PADE13_B = (
    64764752532480000.0, 32382376266240000.0, 7771770303897600.0,
    1187353796428800.0, 129060195264000.0, 10559470521600.0, 670442572800.0,
    33522128640.0, 1323241920.0, 40840800.0, 960960.0, 16380.0, 182.0, 1.0,
)


@dataclass(frozen=True)
class EnergyModel:
    """Per-state free energies (kcal/mol) with inverse energy beta (mol/kcal)."""

    delta_g: np.ndarray
    beta: float

    def __post_init__(self):
        object.__setattr__(self, "delta_g", np.asarray(self.delta_g, dtype=float))
        if self.beta <= 0:
            raise ValueError("beta must be positive")
        if not np.all(np.isfinite(self.delta_g)):
            raise ValueError("energies must be finite")


@dataclass(frozen=True)
class RateMatrix:
    """Dense CTMC generator: off-diagonals >= 0, every row summing to zero."""

    K: np.ndarray

    def __post_init__(self):
        K = np.asarray(self.K, dtype=float)
        if K.ndim != 2 or K.shape[0] != K.shape[1]:
            raise ValueError("rate matrix must be square")
        off = K.copy()
        np.fill_diagonal(off, 0.0)
        if off.min() < 0:
            raise ValueError("off-diagonal rates must be non-negative")
        scale = max(1.0, float(np.abs(K).max())) * K.shape[0]
        if np.abs(K.sum(axis=1)).max() > 1e-12 * scale:
            raise ValueError("rows of a generator must sum to zero")
        K.setflags(write=False)
        object.__setattr__(self, "K", K)

    @classmethod
    def from_off_diagonal(cls, rates: np.ndarray) -> "RateMatrix":
        """Build a generator from off-diagonal rates, setting the diagonal."""
        rates = np.asarray(rates, dtype=float)
        K = rates.copy()
        np.fill_diagonal(K, 0.0)
        np.fill_diagonal(K, -K.sum(axis=1))
        return cls(K)

    @property
    def n(self) -> int:
        return self.K.shape[0]

    def to_dict(self) -> dict:
        return {"n": self.n, "rates": [float(x) for x in self.K.ravel()]}

    @classmethod
    def from_dict(cls, data: dict) -> "RateMatrix":
        n = int(data["n"])
        return cls(np.array(data["rates"], dtype=float).reshape(n, n))

    def to_csv(self) -> str:
        buf = io.StringIO()
        for row in self.K:
            buf.write(",".join(repr(float(x)) for x in row))
            buf.write("\n")
        return buf.getvalue()

    @classmethod
    def from_csv(cls, text: str) -> "RateMatrix":
        rows = [
            [float(x) for x in line.split(",")]
            for line in text.splitlines()
            if line.strip()
        ]
        return cls(np.array(rows, dtype=float))


def boltzmann(model: EnergyModel) -> np.ndarray:
    """Equilibrium distribution pi(x) ~ exp(-beta dG(x)).

    Energies are shifted by their minimum before exponentiation so large beta
    or deep wells cannot overflow.
    """
    shifted = model.delta_g - model.delta_g.min()
    weights = np.exp(-model.beta * shifted)
    return weights / weights.sum()


@dataclass(frozen=True)
class BalanceViolation:
    i: int
    j: int
    ratio: float
    expected: float


@dataclass(frozen=True)
class DetailedBalanceReport:
    ok: bool
    violations: tuple[BalanceViolation, ...]


def check_detailed_balance(
    rm: RateMatrix, model: EnergyModel, tol: float = 1e-9
) -> DetailedBalanceReport:
    """Check K(x,x')/K(x',x) == exp(-beta (dG(x') - dG(x))) on adjacent pairs.

    A pair counts as violating when |ratio - expected| > tol * expected. A
    pair with support in only one direction cannot satisfy the condition at
    all and raises AsymmetricSupport.
    """
    K = rm.K
    dg, beta = model.delta_g, model.beta
    violations = []
    for i in range(rm.n):
        for j in range(i + 1, rm.n):
            kij, kji = K[i, j], K[j, i]
            if kij == 0 and kji == 0:
                continue
            if kij == 0 or kji == 0:
                raise AsymmetricSupport(
                    f"rate {i}->{j} is {kij} but {j}->{i} is {kji}"
                )
            ratio = kij / kji
            expected = math.exp(-beta * (dg[j] - dg[i]))
            if abs(ratio - expected) > tol * expected:
                violations.append(BalanceViolation(i, j, ratio, expected))
    return DetailedBalanceReport(ok=not violations, violations=tuple(violations))


def transition_probabilities(rm: RateMatrix, allow_absorbing: bool = False) -> np.ndarray:
    """Embedded jump chain P(x,x') = K(x,x') / (-K(x,x)).

    Absorbing states (zero diagonal) get an identity row when allowed,
    otherwise raise AbsorbingState.
    """
    K = rm.K
    diag = np.diag(K)
    absorbing = diag == 0
    if absorbing.any() and not allow_absorbing:
        raise AbsorbingState(
            f"states {np.flatnonzero(absorbing).tolist()} have no exits"
        )
    P = np.zeros_like(K)
    active = ~absorbing
    P[active] = K[active] / (-diag[active])[:, None]
    P[active, np.flatnonzero(active)] = 0.0
    P[absorbing, np.flatnonzero(absorbing)] = 1.0
    return P


def _expm(A: np.ndarray) -> np.ndarray:
    """Matrix exponential by scaling-and-squaring with an order-13 Pade core."""
    norm = np.linalg.norm(A, 1)
    s = max(0, int(math.ceil(math.log2(norm / _PADE13_THETA)))) if norm > _PADE13_THETA else 0
    B = A / (2.0 ** s)
    b = _PADE13_B
    ident = np.eye(A.shape[0])
    B2 = B @ B
    B4 = B2 @ B2
    B6 = B4 @ B2
    U = B @ (
        B6 @ (b[13] * B6 + b[11] * B4 + b[9] * B2)
        + b[7] * B6 + b[5] * B4 + b[3] * B2 + b[1] * ident
    )
    V = (
        B6 @ (b[12] * B6 + b[10] * B4 + b[8] * B2)
        + b[6] * B6 + b[4] * B4 + b[2] * B2 + b[0] * ident
    )
    X = np.linalg.solve(V - U, V + U)
    for _ in range(s):
        X = X @ X
    return X


def propagator(rm: RateMatrix, t: float) -> np.ndarray:
    """Transient dynamics Q_t = exp(t K); rows of the result sum to one."""
    if t < 0:
        raise ValueError("t must be non-negative")
    if t == 0:
        return np.eye(rm.n)
    return _expm(t * rm.K)


def mfpt(rm: RateMatrix, final: set[int] | list[int]) -> np.ndarray:
    """Mean first passage times to the set ``final``, zero on the set itself.

    Solves the dense linear system in the complement of ``final`` by LU.
    Raises Unreachable when some state has no path into ``final``.
    """
    F = sorted(set(final))
    if not F:
        raise ValueError("final set must be nonempty")
    if any(f < 0 or f >= rm.n for f in F):
        raise ValueError("final set references unknown states")
    K = rm.K
    n = rm.n

    reachable = np.zeros(n, dtype=bool)
    reachable[F] = True
    frontier = list(F)
    support = K > 0
    while frontier:
        j = frontier.pop()
        for i in np.flatnonzero(support[:, j]):
            if not reachable[i]:
                reachable[i] = True
                frontier.append(int(i))
    if not reachable.all():
        raise Unreachable(
            f"states {np.flatnonzero(~reachable).tolist()} cannot reach the final set"
        )

    rest = np.array([i for i in range(n) if i not in set(F)], dtype=int)
    tau = np.zeros(n)
    if rest.size:
        M = -K[np.ix_(rest, rest)]
        try:
            tau[rest] = np.linalg.solve(M, np.ones(rest.size))
        except np.linalg.LinAlgError as exc:
            raise Unreachable(f"singular first-passage system: {exc}") from exc
    return tau


def mfpt_from_distribution(rm: RateMatrix, final: set[int], pi0: np.ndarray) -> float:
    """Expected first passage time from an initial distribution."""
    pi0 = np.asarray(pi0, dtype=float)
    return float(pi0 @ mfpt(rm, final))


@dataclass(frozen=True)
class SsaTrajectory:
    """One Gillespie sample path: visited states, absolute times, stop flag."""

    states: tuple[int, ...]
    times: tuple[float, ...]
    stopped: bool  # False means truncated at max_steps

    n_steps: int = field(init=False)

    def __post_init__(self):
        object.__setattr__(self, "n_steps", len(self.states))


def ssa_sample(
    rm: RateMatrix,
    pi0: np.ndarray,
    stop: set[int] | list[int],
    seed: int,
    max_steps: int = 1_000_000,
) -> SsaTrajectory:
    """Sample one trajectory with the stochastic simulation algorithm.

    Holding times are exponential with rate -K(x,x) and successors are drawn
    from the embedded jump chain. The walk ends on entering ``stop`` (the
    final state is recorded with its arrival time) or after max_steps.
    """
    stop_set = set(stop)
    rng = np.random.default_rng(seed)
    pi0 = np.asarray(pi0, dtype=float)
    if pi0.shape != (rm.n,) or abs(pi0.sum() - 1.0) > 1e-9 or pi0.min() < 0:
        raise ValueError("pi0 must be a probability vector over the states")
    K = rm.K
    exit_rates = -np.diag(K)

    cum0 = np.cumsum(pi0)
    state = min(int(np.searchsorted(cum0, rng.random(), side="right")), rm.n - 1)
    t = 0.0
    states = [state]
    times = [t]
    if state in stop_set:
        return SsaTrajectory(tuple(states), tuple(times), stopped=True)

    for _ in range(max_steps):
        rate = exit_rates[state]
        if rate <= 0:
            # Absorbing outside the stop set: nothing further can happen.
            return SsaTrajectory(tuple(states), tuple(times), stopped=False)
        t += rng.exponential(1.0 / rate)
        row = K[state].copy()
        row[state] = 0.0
        cum = np.cumsum(row / rate)
        state = min(int(np.searchsorted(cum, rng.random(), side="right")), rm.n - 1)
        states.append(state)
        times.append(t)
        if state in stop_set:
            return SsaTrajectory(tuple(states), tuple(times), stopped=True)
    return SsaTrajectory(tuple(states), tuple(times), stopped=False)


def ssa_ensemble(
    rm: RateMatrix,
    pi0: np.ndarray,
    stop: set[int] | list[int],
    base_seed: int,
    n_runs: int,
    max_steps: int = 1_000_000,
) -> list[SsaTrajectory]:
    """Independent SSA runs with per-run seeds base_seed + run_index."""
    return [
        ssa_sample(rm, pi0, stop, seed=base_seed + i, max_steps=max_steps)
        for i in range(n_runs)
    ]
