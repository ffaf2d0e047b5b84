"""Multi-strand dot-parenthesis secondary structures.

A structure over one or more DNA strands is written as a string over
``. ( ) +``: dots are unpaired bases, matching parentheses are base pairs
(single bracket family, so representable structures are pseudoknot-free) and
``+`` separates strands. Structures are graph-encoded with one node per base,
backbone edges between consecutive bases of a strand, and one edge per base
pair. The edit distance between two same-system structures is the L1 distance
between their flattened adjacency matrices.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import (
    DimensionMismatch,
    IllegalCharacter,
    LengthMismatch,
    SeparatorCount,
    UnbalancedParentheses,
)

DP_ALPHABET = frozenset(".()+")
BASE_ALPHABET = frozenset("ACGT")

UNPAIRED = -1


@dataclass(frozen=True)
class StrandSet:
    """Ordered strands of one reaction system."""

    strands: tuple[tuple[str, str], ...]

    def __post_init__(self):
        if not self.strands:
            raise ValueError("StrandSet needs at least one strand")
        for sid, seq in self.strands:
            if not seq:
                raise ValueError(f"strand {sid!r} has an empty sequence")
            bad = set(seq) - BASE_ALPHABET
            if bad:
                raise IllegalCharacter(
                    f"strand {sid!r} contains non-ACGT characters: {sorted(bad)}"
                )

    @classmethod
    def from_sequences(cls, sequences: list[str], ids: list[str] | None = None) -> "StrandSet":
        if ids is None:
            ids = [f"s{i + 1}" for i in range(len(sequences))]
        return cls(tuple(zip(ids, sequences)))

    @property
    def sequences(self) -> list[str]:
        return [seq for _, seq in self.strands]

    @property
    def ids(self) -> list[str]:
        return [sid for sid, _ in self.strands]

    @property
    def strand_lengths(self) -> list[int]:
        return [len(seq) for _, seq in self.strands]

    @property
    def total_length(self) -> int:
        return sum(self.strand_lengths)


@dataclass(frozen=True)
class SecondaryStructure:
    """A parsed dp structure: the string, its pair table and strand offsets.

    ``pair_table[i]`` is the 0-based partner of base ``i`` in the separator-free
    concatenation, or ``UNPAIRED``. ``strand_offsets[k]`` is the index of the
    first base of strand ``k``.
    """

    dp: str
    pair_table: tuple[int, ...]
    strand_lengths: tuple[int, ...]
    strand_offsets: tuple[int, ...] = field(init=False)

    def __post_init__(self):
        offsets = []
        pos = 0
        for n in self.strand_lengths:
            offsets.append(pos)
            pos += n
        object.__setattr__(self, "strand_offsets", tuple(offsets))

    @property
    def n_bases(self) -> int:
        return len(self.pair_table)

    @property
    def n_strands(self) -> int:
        return len(self.strand_lengths)

    def pairs(self) -> set[tuple[int, int]]:
        """Base pairs as (i, j) with i < j."""
        return {
            (i, j) for i, j in enumerate(self.pair_table) if j != UNPAIRED and i < j
        }

    def strand_of(self, base: int) -> int:
        """Index of the strand containing a base position."""
        for k in range(self.n_strands - 1, -1, -1):
            if base >= self.strand_offsets[k]:
                return k
        raise IndexError(base)

    def serialize(self) -> str:
        return self.dp


def parse_dp(dp: str, strand_lengths: list[int]) -> SecondaryStructure:
    """Parse a dp string against the given strand lengths.

    Pair matching uses a single stack over the separator-free concatenation,
    so inter-strand pairs across ``+`` are matched like any other.

    Raises
    ------
    IllegalCharacter, SeparatorCount, LengthMismatch, UnbalancedParentheses
    """
    if not dp:
        raise LengthMismatch("empty dp string")
    bad = set(dp) - DP_ALPHABET
    if bad:
        raise IllegalCharacter(f"dp contains characters outside .()+ : {sorted(bad)}")
    n_sep = dp.count("+")
    if n_sep != len(strand_lengths) - 1:
        raise SeparatorCount(
            f"expected {len(strand_lengths) - 1} '+' separators, found {n_sep}"
        )
    flat = dp.replace("+", "")
    total = sum(strand_lengths)
    if len(flat) != total:
        raise LengthMismatch(
            f"dp has {len(flat)} bases but strands sum to {total}"
        )
    # Separators must sit exactly at strand boundaries.
    boundary = 0
    cuts = []
    for n in strand_lengths[:-1]:
        boundary += n
        cuts.append(boundary)
    seen_cuts = []
    base_pos = 0
    for ch in dp:
        if ch == "+":
            seen_cuts.append(base_pos)
        else:
            base_pos += 1
    if seen_cuts != cuts:
        raise LengthMismatch(
            f"'+' separators at base offsets {seen_cuts}, expected {cuts}"
        )

    pair_table = [UNPAIRED] * total
    stack: list[int] = []
    for i, ch in enumerate(flat):
        if ch == "(":
            stack.append(i)
        elif ch == ")":
            if not stack:
                raise UnbalancedParentheses(f"unmatched ')' at base {i}")
            j = stack.pop()
            pair_table[i] = j
            pair_table[j] = i
    if stack:
        raise UnbalancedParentheses(f"unmatched '(' at base {stack[-1]}")

    return SecondaryStructure(dp=dp, pair_table=tuple(pair_table),
                              strand_lengths=tuple(strand_lengths))


@dataclass(frozen=True)
class StateGraph:
    """Base-level graph of a structure: nodes in sequence order, 0/1 adjacency."""

    n: int
    adjacency: np.ndarray
    backbone_edges: tuple[tuple[int, int], ...]
    pair_edges: tuple[tuple[int, int], ...]

    def __post_init__(self):
        self.adjacency.setflags(write=False)

    def degrees(self) -> np.ndarray:
        return self.adjacency.sum(axis=1)


def to_graph(s: SecondaryStructure) -> StateGraph:
    """Graph-encode a structure: backbone chain per strand plus pair edges."""
    n = s.n_bases
    adj = np.zeros((n, n), dtype=np.float64)
    backbone = []
    for k, length in enumerate(s.strand_lengths):
        off = s.strand_offsets[k]
        for i in range(off, off + length - 1):
            adj[i, i + 1] = adj[i + 1, i] = 1.0
            backbone.append((i, i + 1))
    pair_edges = tuple(sorted(s.pairs()))
    for i, j in pair_edges:
        adj[i, j] = adj[j, i] = 1.0
    return StateGraph(n=n, adjacency=adj, backbone_edges=tuple(backbone),
                      pair_edges=pair_edges)


def ged(a: StateGraph, b: StateGraph) -> int:
    """L1 distance between flattened adjacency matrices (always even)."""
    if a.n != b.n:
        raise DimensionMismatch(f"graphs have {a.n} and {b.n} nodes")
    return int(np.abs(a.adjacency - b.adjacency).sum())


def adjacency_vector(s: SecondaryStructure) -> np.ndarray:
    """Flattened adjacency row vector, the feature used for GED neighbor search."""
    return to_graph(s).adjacency.ravel()


def strand_complexes(s: SecondaryStructure) -> list[set[int]]:
    """Partition strand indices into complexes.

    Two strands are linked iff at least one base pair spans them; complexes are
    the connected components of that strand-level graph, returned sorted by
    their smallest strand index.
    """
    parent = list(range(s.n_strands))

    def find(x: int) -> int:
        while parent[x] != x:
            parent[x] = parent[parent[x]]
            x = parent[x]
        return x

    for i, j in s.pairs():
        a, b = find(s.strand_of(i)), find(s.strand_of(j))
        if a != b:
            parent[max(a, b)] = min(a, b)

    groups: dict[int, set[int]] = {}
    for k in range(s.n_strands):
        groups.setdefault(find(k), set()).add(k)
    return [groups[r] for r in sorted(groups)]
