"""Alternatives, preference types, choice sets and the latent sample space.

The latent state of one agent is a point w = (outcomes, preference type,
potential choice set without treatment, potential choice set with treatment).
This module fixes a deterministic enumeration of the full discrete space of
such points so that constraint matrices built downstream are reproducible
across runs.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from functools import cached_property
from typing import Iterator, Sequence

import numpy as np

#: Hard cap on the number of alternatives.  The latent space grows as
#: M^k * k! * 4^(k-1); beyond five alternatives the problem sizes are not
#: solvable with the dense-support approach used here.
MAX_ALTERNATIVES = 5


class EmptyChoiceSet(ValueError):
    """Raised when a choice is requested from an empty choice set."""


@dataclass(frozen=True)
class AlternativeSet:
    """Ordered set of choice alternatives with a designated base alternative.

    The base alternative (e.g. "no program") is always available: every
    admissible choice set contains it.  The construction order of the labels
    is fixed and defines all downstream indexing.
    """

    alternatives: tuple[str, ...]
    base_index: int = 0

    def __post_init__(self):
        alts = tuple(self.alternatives)
        object.__setattr__(self, "alternatives", alts)
        if len(alts) < 2:
            raise ValueError("need at least 2 alternatives")
        if len(alts) > MAX_ALTERNATIVES:
            raise ValueError(
                f"{len(alts)} alternatives requested; this library caps the "
                f"number of alternatives at {MAX_ALTERNATIVES} because the "
                "latent space grows factorially-exponentially in that count"
            )
        if len(set(alts)) != len(alts):
            raise ValueError("alternative labels must be unique")
        if not 0 <= self.base_index < len(alts):
            raise ValueError("base_index out of range")

    @property
    def n(self) -> int:
        return len(self.alternatives)

    @property
    def base_label(self) -> str:
        return self.alternatives[self.base_index]

    def index(self, label: str) -> int:
        try:
            return self.alternatives.index(label)
        except ValueError:
            raise KeyError(f"unknown alternative label {label!r}; "
                           f"known labels: {list(self.alternatives)}") from None

    def choice_set(self, labels: Sequence[str]) -> "ChoiceSet":
        """Build a ChoiceSet from labels; the base alternative must be listed."""
        mask = 0
        for lab in labels:
            mask |= 1 << self.index(lab)
        if not mask >> self.base_index & 1:
            raise ValueError(
                f"choice set {list(labels)} does not contain the base "
                f"alternative {self.base_label!r}")
        return ChoiceSet(mask)


@dataclass(frozen=True)
class PreferenceType:
    """A strict total order over alternatives, most-preferred first."""

    ranking: tuple[int, ...]

    def __post_init__(self):
        ranking = tuple(self.ranking)
        object.__setattr__(self, "ranking", ranking)
        if sorted(ranking) != list(range(len(ranking))):
            raise ValueError("ranking must be a permutation of 0..n-1")

    def rank_of(self, alt: int) -> int:
        return self.ranking.index(alt)

    def prefers(self, a: int, b: int) -> bool:
        """True iff alternative a is strictly preferred to b."""
        return self.rank_of(a) < self.rank_of(b)


@dataclass(frozen=True)
class ChoiceSet:
    """Subset of alternative indices encoded as a bitmask."""

    mask: int

    def __post_init__(self):
        if self.mask <= 0:
            raise ValueError("choice set mask must be positive")

    def contains(self, alt: int) -> bool:
        return bool(self.mask >> alt & 1)

    def members(self) -> tuple[int, ...]:
        out, mask, i = [], self.mask, 0
        while mask:
            if mask & 1:
                out.append(i)
            mask >>= 1
            i += 1
        return tuple(out)

    def union(self, other: "ChoiceSet") -> "ChoiceSet":
        return ChoiceSet(self.mask | other.mask)

    def issubset(self, other: "ChoiceSet") -> bool:
        return self.mask & ~other.mask == 0


@dataclass(frozen=True)
class OutcomeGrid:
    """Strictly increasing discrete support of the outcome variable."""

    points: tuple[float, ...]

    def __post_init__(self):
        points = tuple(float(p) for p in self.points)
        object.__setattr__(self, "points", points)
        if len(points) < 1:
            raise ValueError("outcome grid needs at least one point")
        if any(b <= a for a, b in zip(points, points[1:])):
            raise ValueError("outcome grid must be strictly increasing")

    @property
    def m(self) -> int:
        return len(self.points)

    def value(self, idx: int) -> float:
        return self.points[idx]


@dataclass(frozen=True)
class LatentPoint:
    """One atom of the latent sample space.

    ``outcomes[k]`` is the OutcomeGrid index of the potential outcome under
    alternative k; ``pref`` indexes into the enumerated preference types;
    ``c0``/``c1`` are the potential choice sets under control and treatment.
    """

    outcomes: tuple[int, ...]
    pref: int
    c0: ChoiceSet
    c1: ChoiceSet


def enumerate_preferences(alts: AlternativeSet) -> list[PreferenceType]:
    """All strict orderings, in lexicographic order of their permutations."""
    return [PreferenceType(p) for p in itertools.permutations(range(alts.n))]


def enumerate_choice_sets(alts: AlternativeSet) -> list[ChoiceSet]:
    """All subsets containing the base alternative, ascending bitmask order."""
    base_bit = 1 << alts.base_index
    return [ChoiceSet(mask) for mask in range(1, 1 << alts.n)
            if mask & base_bit]


def choice(u: PreferenceType, c: ChoiceSet) -> int:
    """The u-highest-ranked member of c."""
    for alt in u.ranking:
        if c.contains(alt):
            return alt
    raise EmptyChoiceSet("cannot choose from an empty choice set")


class LatentIndex:
    """Bijective mixed-radix enumeration of the latent sample space.

    Layout (fastest varying first): outcome index per alternative in
    alternative order, then preference type, then c0 (over the enumerated
    choice sets), then c1.  The layout is fixed so that assembled constraint
    systems are byte-reproducible across runs.
    """

    def __init__(self, alts: AlternativeSet, grid: OutcomeGrid):
        self.alts = alts
        self.grid = grid
        self.preferences = enumerate_preferences(alts)
        self.choice_sets = enumerate_choice_sets(alts)
        self._cset_pos = {cs.mask: k for k, cs in enumerate(self.choice_sets)}
        m, n = grid.m, alts.n
        self.n_pref = len(self.preferences)
        self.n_csets = len(self.choice_sets)
        self._outcome_block = m ** n
        self.total_count = self._outcome_block * self.n_pref * self.n_csets ** 2
        # choice_table[u, cpos] = chosen alternative index
        self.choice_table = np.array(
            [[choice(u, c) for c in self.choice_sets] for u in self.preferences],
            dtype=np.int64)

    def cset_position(self, c: ChoiceSet) -> int:
        try:
            return self._cset_pos[c.mask]
        except KeyError:
            raise ValueError(
                f"choice set mask {c.mask:#b} does not contain the base "
                "alternative or has out-of-range bits") from None

    def index_of(self, w: LatentPoint) -> int:
        m, n = self.grid.m, self.alts.n
        if len(w.outcomes) != n:
            raise ValueError("outcome vector length mismatch")
        acc = 0
        for k in reversed(range(n)):
            o = w.outcomes[k]
            if not 0 <= o < m:
                raise ValueError(f"outcome index {o} out of range")
            acc = acc * m + o
        if not 0 <= w.pref < self.n_pref:
            raise ValueError(f"preference index {w.pref} out of range")
        c0 = self.cset_position(w.c0)
        c1 = self.cset_position(w.c1)
        rest = (c1 * self.n_csets + c0) * self.n_pref + w.pref
        return rest * self._outcome_block + acc

    def point_at(self, i: int) -> LatentPoint:
        if not 0 <= i < self.total_count:
            raise IndexError(f"latent index {i} out of range "
                             f"[0, {self.total_count})")
        m, n = self.grid.m, self.alts.n
        i, acc = divmod(i, self._outcome_block)
        outcomes = []
        for _ in range(n):
            acc, o = divmod(acc, m)
            outcomes.append(o)
        i, pref = divmod(i, self.n_pref)
        c1, c0 = divmod(i, self.n_csets)
        return LatentPoint(tuple(outcomes), pref,
                           self.choice_sets[c0], self.choice_sets[c1])

    def points(self) -> Iterator[LatentPoint]:
        for i in range(self.total_count):
            yield self.point_at(i)

    @cached_property
    def components(self) -> tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
        """Vectorized decode of every index.

        Returns (outcomes, pref, c0_pos, c1_pos) where outcomes has shape
        (total_count, n_alternatives) and the rest are 1-d int arrays.
        """
        m, n = self.grid.m, self.alts.n
        idx = np.arange(self.total_count, dtype=np.int64)
        rest, acc = np.divmod(idx, self._outcome_block)
        outcomes = np.empty((self.total_count, n), dtype=np.int64)
        for k in range(n):
            outcomes[:, k] = acc % m
            acc //= m
        rest, pref = np.divmod(rest, self.n_pref)
        c1, c0 = np.divmod(rest, self.n_csets)
        return outcomes, pref, c0, c1

    def chosen_alternative(self, z: int, subset: np.ndarray | None = None) -> np.ndarray:
        """Alternative chosen under the arm-z potential choice set, per index."""
        outcomes, pref, c0, c1 = self.components
        cpos = c1 if z == 1 else c0
        if subset is not None:
            pref, cpos = pref[subset], cpos[subset]
        return self.choice_table[pref, cpos]
