"""First-step-mode trajectory log parsing and summary statistics.

The line-oriented input grammar (as produced by the Multistrand simulator's
first step mode):

* header line: ``SEQ(+SEQ)*`` over ACGT, naming the strands;
* record line: ``[INT] DP | FLOAT | FLOAT`` with DP over ``.()+``, the first
  float the trajectory time in microseconds and the second the state free
  energy in kcal/mol;
* ``#``-prefixed lines are comments; all-dash ruler lines and the
  ``t[us] / dG`` column banner are ignored.

Times are converted to seconds internally. A change of the ``[k]`` index, a
blank line, or a new header starts a new trajectory. States are deduplicated
by dp string; the holding time of step i is ``t_{i+1} - t_i`` and the last
step of a trajectory contributes zero holding time.
"""

from __future__ import annotations

import enum
import math
import re
from dataclasses import dataclass, replace

from .dp import SecondaryStructure, StrandSet, parse_dp, strand_complexes
from .errors import EmptyLog, MalformedRecord, NonMonotoneTime, UnknownStrand

US_PER_S = 1e6

_HEADER_RE = re.compile(r"^[ACGT]+(\+[ACGT]+)*$")
_RECORD_RE = re.compile(r"^\[(\d+)\]\s+(\S+)\s*$")


class Outcome(str, enum.Enum):
    REACTIVE = "reactive"
    NONREACTIVE = "nonreactive"
    TRUNCATED = "truncated"


@dataclass(frozen=True)
class TrajectoryStep:
    state_id: int
    time: float  # seconds
    energy: float  # kcal/mol


@dataclass(frozen=True)
class Trajectory:
    steps: tuple[TrajectoryStep, ...]
    outcome: Outcome = Outcome.TRUNCATED

    @property
    def final_state(self) -> int:
        return self.steps[-1].state_id

    @property
    def final_time(self) -> float:
        return self.steps[-1].time

    @property
    def span(self) -> float:
        return self.steps[-1].time - self.steps[0].time


@dataclass(frozen=True)
class StateSpace:
    """Deduplicated states with their empirical occupation statistics.

    ``mean_holding_time[i]`` is the average of the sampled outgoing transition
    times from state i (zero for states never seen with a successor).
    """

    strands: StrandSet
    states: tuple[SecondaryStructure, ...]
    energies: tuple[float, ...]
    visit_counts: tuple[int, ...]
    cumulative_holding_times: tuple[float, ...]
    mean_holding_times: tuple[float, ...]
    probabilities: tuple[float, ...]

    def __len__(self) -> int:
        return len(self.states)

    def state_index(self, dp: str) -> int:
        for i, s in enumerate(self.states):
            if s.dp == dp:
                return i
        raise KeyError(dp)


@dataclass(frozen=True)
class TransitionGraph:
    """Observed transitions i -> j with counts, plus per-source mean holding time."""

    n: int
    edge_counts: dict[tuple[int, int], int]
    mean_holding_times: tuple[float, ...]

    def successors(self, i: int) -> list[int]:
        return sorted(j for (a, j) in self.edge_counts if a == i)


@dataclass(frozen=True)
class ParsedLog:
    strands: StrandSet
    trajectories: tuple[Trajectory, ...]
    space: StateSpace
    transitions: TransitionGraph


def _is_ruler(line: str) -> bool:
    s = line.strip()
    return bool(s) and set(s) == {"-"}


def _is_banner(line: str) -> bool:
    return "|" in line and ("t[us]" in line or "dG" in line) and not line.lstrip().startswith("[")


def parse_log(text: str, probability_mode: str = "visits") -> ParsedLog:
    """Parse a trajectory log into strands, trajectories and occupation stats.

    probability_mode selects how the empirical state probability p_i is
    normalized: "visits" (default) uses visit counts, "holding_time" uses
    cumulative holding-time mass. Truncated trajectories are included either
    way.
    """
    if probability_mode not in ("visits", "holding_time"):
        raise ValueError(f"unknown probability_mode {probability_mode!r}")

    strands: StrandSet | None = None
    raw_trajectories: list[list[tuple[str, float, float]]] = []
    current: list[tuple[str, float, float]] = []
    last_index: int | None = None

    def flush():
        nonlocal current, last_index
        if current:
            raw_trajectories.append(current)
            current = []
        last_index = None

    for lineno, line in enumerate(text.splitlines(), start=1):
        if not line.strip():
            flush()
            continue
        if line.lstrip().startswith("#") or _is_ruler(line) or _is_banner(line):
            continue
        stripped = line.strip()
        if _HEADER_RE.match(stripped):
            flush()
            header = StrandSet.from_sequences(stripped.split("+"))
            if strands is None:
                strands = header
            elif header.sequences != strands.sequences:
                raise MalformedRecord(
                    f"line {lineno}: header names a different strand system"
                )
            continue
        columns = [c.strip() for c in line.split("|")]
        if len(columns) != 3:
            raise MalformedRecord(
                f"line {lineno}: expected 3 '|'-separated columns, got {len(columns)}"
            )
        m = _RECORD_RE.match(columns[0])
        if not m:
            raise MalformedRecord(f"line {lineno}: bad '[k] DP' field {columns[0]!r}")
        index = int(m.group(1))
        dp = m.group(2)
        try:
            t_us = float(columns[1])
            energy = float(columns[2])
        except ValueError as exc:
            raise MalformedRecord(f"line {lineno}: non-numeric field: {exc}") from exc
        if not math.isfinite(t_us) or t_us < 0:
            raise MalformedRecord(f"line {lineno}: bad time {columns[1]!r}")
        if last_index is not None and index != last_index:
            flush()
        last_index = index
        current.append((dp, t_us / US_PER_S, energy))
    flush()

    if strands is None or not raw_trajectories:
        raise EmptyLog("log contains no header or no records")
    return _assemble(strands, raw_trajectories, probability_mode)


def _assemble(
    strands: StrandSet,
    raw_trajectories: list[list[tuple[str, float, float]]],
    probability_mode: str,
    outcomes: list[Outcome] | None = None,
) -> ParsedLog:
    """Deduplicate states and accumulate occupation statistics."""
    lengths = strands.strand_lengths
    state_ids: dict[str, int] = {}
    structures: list[SecondaryStructure] = []
    energies: list[float] = []
    visits: list[int] = []
    holding: list[float] = []
    exits: list[int] = []
    edge_counts: dict[tuple[int, int], int] = {}
    trajectories: list[Trajectory] = []

    for t_index, raw in enumerate(raw_trajectories):
        steps: list[TrajectoryStep] = []
        prev_time = None
        for dp, t, energy in raw:
            if prev_time is not None and t < prev_time:
                raise NonMonotoneTime(
                    f"time {t} s follows {prev_time} s within one trajectory"
                )
            prev_time = t
            sid = state_ids.get(dp)
            if sid is None:
                sid = len(structures)
                state_ids[dp] = sid
                structures.append(parse_dp(dp, lengths))
                energies.append(energy)
                visits.append(0)
                holding.append(0.0)
                exits.append(0)
            visits[sid] += 1
            steps.append(TrajectoryStep(state_id=sid, time=t, energy=energy))
        for a, b in zip(steps, steps[1:]):
            holding[a.state_id] += b.time - a.time
            exits[a.state_id] += 1
            key = (a.state_id, b.state_id)
            edge_counts[key] = edge_counts.get(key, 0) + 1
        outcome = outcomes[t_index] if outcomes else Outcome.TRUNCATED
        trajectories.append(Trajectory(steps=tuple(steps), outcome=outcome))

    total_visits = sum(visits)
    if probability_mode == "holding_time" and sum(holding) > 0:
        mass = sum(holding)
        probabilities = tuple(h / mass for h in holding)
    else:
        probabilities = tuple(v / total_visits for v in visits)
    mean_holding = tuple(
        h / e if e else 0.0 for h, e in zip(holding, exits)
    )

    space = StateSpace(
        strands=strands,
        states=tuple(structures),
        energies=tuple(energies),
        visit_counts=tuple(visits),
        cumulative_holding_times=tuple(holding),
        mean_holding_times=mean_holding,
        probabilities=probabilities,
    )
    transitions = TransitionGraph(
        n=len(structures),
        edge_counts=edge_counts,
        mean_holding_times=mean_holding,
    )
    return ParsedLog(
        strands=strands,
        trajectories=tuple(trajectories),
        space=space,
        transitions=transitions,
    )


def rebuild(parsed: ParsedLog, trajectories: tuple[Trajectory, ...],
            probability_mode: str = "visits") -> ParsedLog:
    """Recompute the state space and transition graph from edited trajectories
    (after subsampling, for instance). State ids are reassigned in order of
    first appearance; outcomes are preserved."""
    raw = [
        [(parsed.space.states[s.state_id].dp, s.time, s.energy) for s in traj.steps]
        for traj in trajectories
    ]
    outcomes = [traj.outcome for traj in trajectories]
    return _assemble(parsed.strands, raw, probability_mode, outcomes=outcomes)


# Outcome classification rules.


@dataclass(frozen=True)
class FullDuplex:
    """The final state pairs every base with its mirror partner."""


@dataclass(frozen=True)
class Dissociated:
    """The named strand sits alone in its complex at the final state."""

    strand: str


@dataclass(frozen=True)
class DpPattern:
    """The final dp string matches exactly."""

    dp: str


OutcomeRule = FullDuplex | Dissociated | DpPattern


def classify_outcome(trajectory: Trajectory, rule: OutcomeRule, space: StateSpace) -> Outcome:
    """Evaluate one rule on the trajectory's final state.

    A satisfied FullDuplex or DpPattern rule gives Reactive, a satisfied
    Dissociated rule gives NonReactive, anything else is Truncated.
    """
    final = space.states[trajectory.final_state]
    if isinstance(rule, FullDuplex):
        n = final.n_bases
        if all(final.pair_table[i] == n - 1 - i for i in range(n)):
            return Outcome.REACTIVE
        return Outcome.TRUNCATED
    if isinstance(rule, DpPattern):
        if final.dp == rule.dp:
            return Outcome.REACTIVE
        return Outcome.TRUNCATED
    if isinstance(rule, Dissociated):
        try:
            idx = space.strands.ids.index(rule.strand)
        except ValueError:
            raise UnknownStrand(f"no strand named {rule.strand!r}") from None
        for complex_ in strand_complexes(final):
            if idx in complex_:
                if complex_ == {idx}:
                    return Outcome.NONREACTIVE
                return Outcome.TRUNCATED
        raise AssertionError("strand missing from its own partition")
    raise TypeError(f"unknown rule {rule!r}")


def classify_all(
    trajectories: tuple[Trajectory, ...],
    space: StateSpace,
    rules: list[OutcomeRule],
) -> tuple[Trajectory, ...]:
    """Apply rules in order to each trajectory; first non-Truncated outcome wins."""
    out = []
    for traj in trajectories:
        outcome = Outcome.TRUNCATED
        for rule in rules:
            outcome = classify_outcome(traj, rule, space)
            if outcome is not Outcome.TRUNCATED:
                break
        out.append(replace(traj, outcome=outcome))
    return tuple(out)


def subsample(trajectory: Trajectory, dt: float) -> Trajectory:
    """Keep the first step in each interval [k*dt, (k+1)*dt) plus the final step."""
    if dt <= 0:
        raise ValueError("dt must be positive")
    kept: list[TrajectoryStep] = []
    last_bin = None
    for step in trajectory.steps:
        b = math.floor(step.time / dt)
        if b != last_bin:
            kept.append(step)
            last_bin = b
    if kept[-1] is not trajectory.steps[-1]:
        kept.append(trajectory.steps[-1])
    return replace(trajectory, steps=tuple(kept))


@dataclass(frozen=True)
class TrajectoryStats:
    n_total: int
    n_reactive: int
    n_nonreactive: int
    n_truncated: int
    fraction_reactive: float
    mean_reaction_time: float  # seconds; nan when nothing is reactive


def stats(trajectories: tuple[Trajectory, ...]) -> TrajectoryStats:
    """Outcome counts, reactive fraction and mean reactive final time."""
    if not trajectories:
        raise ValueError("need at least one trajectory")
    n = len(trajectories)
    reactive = [t for t in trajectories if t.outcome is Outcome.REACTIVE]
    n_non = sum(1 for t in trajectories if t.outcome is Outcome.NONREACTIVE)
    mean_rt = (
        sum(t.final_time for t in reactive) / len(reactive) if reactive else math.nan
    )
    return TrajectoryStats(
        n_total=n,
        n_reactive=len(reactive),
        n_nonreactive=n_non,
        n_truncated=n - len(reactive) - n_non,
        fraction_reactive=len(reactive) / n,
        mean_reaction_time=mean_rt,
    )


# JSON serialization of the parsed dataset (schema used by the CLI).


def dataset_to_dict(parsed: ParsedLog) -> dict:
    space = parsed.space
    return {
        "schema_version": "1",
        "strands": [
            {"id": sid, "sequence": seq} for sid, seq in parsed.strands.strands
        ],
        "states": [
            {
                "id": i,
                "dp": space.states[i].dp,
                "energy": space.energies[i],
                "visits": space.visit_counts[i],
                "cumulative_time": space.cumulative_holding_times[i],
                "mean_holding_time": space.mean_holding_times[i],
                "p": space.probabilities[i],
            }
            for i in range(len(space))
        ],
        "transitions": [
            {"from": i, "to": j, "count": c}
            for (i, j), c in sorted(parsed.transitions.edge_counts.items())
        ],
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


def dataset_from_dict(data: dict) -> ParsedLog:
    strands = StrandSet(
        tuple((s["id"], s["sequence"]) for s in data["strands"])
    )
    lengths = strands.strand_lengths
    states = tuple(parse_dp(s["dp"], lengths) for s in data["states"])
    energies = tuple(float(s["energy"]) for s in data["states"])
    space = StateSpace(
        strands=strands,
        states=states,
        energies=energies,
        visit_counts=tuple(int(s["visits"]) for s in data["states"]),
        cumulative_holding_times=tuple(float(s["cumulative_time"]) for s in data["states"]),
        mean_holding_times=tuple(float(s["mean_holding_time"]) for s in data["states"]),
        probabilities=tuple(float(s["p"]) for s in data["states"]),
    )
    transitions = TransitionGraph(
        n=len(states),
        edge_counts={
            (e["from"], e["to"]): int(e["count"]) for e in data["transitions"]
        },
        mean_holding_times=space.mean_holding_times,
    )
    trajectories = tuple(
        Trajectory(
            steps=tuple(
                TrajectoryStep(
                    state_id=sid, time=t, energy=energies[sid]
                )
                for sid, t in zip(rec["state_ids"], rec["times"])
            ),
            outcome=Outcome(rec["outcome"]),
        )
        for rec in data["trajectories"]
    )
    return ParsedLog(
        strands=strands, trajectories=trajectories, space=space, transitions=transitions
    )
