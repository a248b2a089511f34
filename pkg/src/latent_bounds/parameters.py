"""Target parameters as linear-fractional functionals of the latent pmf.

A parameter is a numerator coefficient per latent index plus a denominator
index set; the denominator set ``None`` is the whole-space sentinel and marks
the parameter as linear.  Coefficients are stored against the unpruned space
so the same spec object is reusable across restriction sets.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Mapping, Sequence

import numpy as np

from .latent_space import ChoiceSet, LatentIndex


@dataclass(frozen=True)
class ParameterSpec:
    """Numerator coefficients (sparse, default 0) and denominator index set."""

    name: str
    a_num: Mapping[int, float]
    den: frozenset[int] | None = None  # None = whole space (linear parameter)

    def __post_init__(self):
        if any(not math.isfinite(v) for v in self.a_num.values()):
            raise ValueError("numerator coefficients must be finite")
        if self.den is not None and not self.den:
            raise ValueError("denominator index set must be non-empty")

    @property
    def is_linear(self) -> bool:
        return self.den is None

    def coefficient(self, i: int) -> float:
        return self.a_num.get(i, 0.0)

    def coefficient_vector(self, indices: np.ndarray) -> np.ndarray:
        get = self.a_num.get
        return np.fromiter((get(int(i), 0.0) for i in indices),
                           dtype=float, count=indices.size)

    def den_mask(self, indices: np.ndarray) -> np.ndarray:
        """Boolean denominator membership over the given indices."""
        if self.den is None:
            return np.ones(indices.size, dtype=bool)
        den = self.den
        return np.fromiter((int(i) in den for i in indices),
                           dtype=bool, count=indices.size)


def _resolve_set(idx: LatentIndex, labels) -> ChoiceSet:
    if isinstance(labels, ChoiceSet):
        return labels
    return idx.alts.choice_set(labels)


def _induced_types(idx: LatentIndex, with_set: ChoiceSet, without_set: ChoiceSet,
                   target: int) -> np.ndarray:
    """Preference types switched to ``target`` by enlarging the choice set."""
    wpos = idx.cset_position(with_set)
    wopos = idx.cset_position(without_set)
    tab = idx.choice_table
    return (tab[:, wpos] == target) & (tab[:, wopos] != target)


def participation_proportion(idx: LatentIndex, target: str,
                             baseline: Sequence[str] | ChoiceSet) -> ParameterSpec:
    """Share of the population induced to take ``target`` when it is added
    to the baseline choice set.  Linear parameter with {0,1} coefficients."""
    base = _resolve_set(idx, baseline)
    t = idx.alts.index(target)
    if base.contains(t):
        raise ValueError(f"target {target!r} is already in the baseline set")
    with_set = base.union(ChoiceSet(1 << t))
    induced = _induced_types(idx, with_set, base, t)
    _, pref, _, _ = idx.components
    hits = np.flatnonzero(induced[pref])
    return ParameterSpec(
        name=f"pp_{target}",
        a_num={int(i): 1.0 for i in hits},
        den=None)


def average_access_effect(idx: LatentIndex, with_set, without_set) -> ParameterSpec:
    """Mean outcome gain from enlarging the choice set.  Linear parameter;
    the coefficient is the outcome difference between the two induced choices,
    zero wherever the choice is unchanged."""
    ws = _resolve_set(idx, with_set)
    wos = _resolve_set(idx, without_set)
    if not wos.issubset(ws) or wos.mask == ws.mask:
        raise ValueError("without_set must be a strict subset of with_set")
    outcomes, pref, _, _ = idx.components
    d_with = idx.choice_table[pref, idx.cset_position(ws)]
    d_without = idx.choice_table[pref, idx.cset_position(wos)]
    grid = np.asarray(idx.grid.points)
    rows = np.arange(idx.total_count)
    delta = grid[outcomes[rows, d_with]] - grid[outcomes[rows, d_without]]
    nz = np.flatnonzero(delta != 0.0)
    return ParameterSpec(
        name="ate",
        a_num={int(i): float(delta[i]) for i in nz},
        den=None)


def average_effect_on_participants(idx: LatentIndex, with_set, without_set,
                                   target: str) -> ParameterSpec:
    """Mean outcome gain conditional on being induced into ``target``.
    Linear-fractional: same numerator as the unconditional effect, with the
    induced subpopulation as the denominator set."""
    ws = _resolve_set(idx, with_set)
    wos = _resolve_set(idx, without_set)
    t = idx.alts.index(target)
    if not ws.contains(t) or wos.contains(t):
        raise ValueError(f"target {target!r} must be the alternative added "
                         "between without_set and with_set")
    ate = average_access_effect(idx, ws, wos)
    induced = _induced_types(idx, ws, wos, t)
    _, pref, _, _ = idx.components
    den = frozenset(int(i) for i in np.flatnonzero(induced[pref]))
    return ParameterSpec(name=f"atop_{target}", a_num=ate.a_num, den=den)


def custom_linear(coeffs: Mapping[int, float], name: str = "custom") -> ParameterSpec:
    """Generic linear functional given directly by its coefficient map."""
    return ParameterSpec(name=name,
                         a_num={int(k): float(v) for k, v in coeffs.items()
                                if v != 0.0},
                         den=None)
