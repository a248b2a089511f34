"""Zero-probability restrictions on the latent distribution.

Every assumption supported here has the same shape: a set of latent points
is forced to carry zero probability mass.  Restrictions are kept as pure
predicates over LatentPoint (so they compose with any alternative set and
outcome grid) and are materialized once, by ``prune``, into the surviving
support.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from typing import Callable, Iterator

import numpy as np

from .latent_space import (
    AlternativeSet,
    LatentIndex,
    LatentPoint,
    enumerate_preferences,
)

Predicate = Callable[[LatentPoint], bool]


@dataclass(frozen=True)
class ZeroSetRestriction:
    """A named zero-mass event: predicate(w) == True means w is killed."""

    name: str
    predicate: Predicate


@dataclass(frozen=True)
class RestrictionSet:
    """Ordered collection of restrictions with unique names."""

    restrictions: tuple[ZeroSetRestriction, ...] = ()

    def __post_init__(self):
        rs = tuple(self.restrictions)
        object.__setattr__(self, "restrictions", rs)
        names = [r.name for r in rs]
        if len(set(names)) != len(names):
            raise ValueError(f"duplicate restriction names in {names}")

    def __iter__(self) -> Iterator[ZeroSetRestriction]:
        return iter(self.restrictions)

    def __len__(self) -> int:
        return len(self.restrictions)

    def extended(self, *more: ZeroSetRestriction | "RestrictionSet") -> "RestrictionSet":
        out = list(self.restrictions)
        for m in more:
            out.extend(m.restrictions if isinstance(m, RestrictionSet) else [m])
        return RestrictionSet(tuple(out))


@dataclass(frozen=True)
class PrunedSupport:
    """Sorted latent indices not killed by any restriction."""

    alive: np.ndarray = field(repr=False)

    def __post_init__(self):
        arr = np.asarray(self.alive, dtype=np.int64)
        object.__setattr__(self, "alive", arr)

    @property
    def size(self) -> int:
        return int(self.alive.size)


def hsis_access(alts: AlternativeSet, head_start_label: str) -> ZeroSetRestriction:
    """Treatment assignment guarantees the program is in the choice set."""
    h = alts.index(head_start_label)
    return ZeroSetRestriction(
        name=f"access_{head_start_label}",
        predicate=lambda w: not w.c1.contains(h))


def unaltered_alternative(alts: AlternativeSet, alt_label: str) -> ZeroSetRestriction:
    """Assignment arm does not change availability of the given alternative."""
    a = alts.index(alt_label)
    return ZeroSetRestriction(
        name=f"ua_{alt_label}",
        predicate=lambda w: w.c0.contains(a) != w.c1.contains(a))


def mtr(alts: AlternativeSet, base_label: str | None = None) -> ZeroSetRestriction:
    """Monotone response: every non-base outcome weakly dominates the base one.

    Outcome grid indices order the same way as grid values, so the predicate
    compares indices directly.
    """
    b = alts.index(base_label) if base_label is not None else alts.base_index
    others = [k for k in range(alts.n) if k != b]
    return ZeroSetRestriction(
        name="mtr",
        predicate=lambda w: any(w.outcomes[k] < w.outcomes[b] for k in others))


def roy(alts: AlternativeSet) -> RestrictionSet:
    """Roy selection: the strictly-better-outcome member of any pair is chosen.

    One restriction per unordered pair {d, d'}: a point is killed when the
    pairwise-preferred alternative has the strictly lower outcome.
    """
    prefs = enumerate_preferences(alts)

    def make(d1: int, d2: int) -> Predicate:
        def pred(w: LatentPoint) -> bool:
            top, other = (d1, d2) if prefs[w.pref].prefers(d1, d2) else (d2, d1)
            return w.outcomes[other] > w.outcomes[top]
        return pred

    labels = alts.alternatives
    out = [ZeroSetRestriction(name=f"roy_{labels[i]}_{labels[j]}",
                              predicate=make(i, j))
           for i in range(alts.n) for j in range(i + 1, alts.n)]
    return RestrictionSet(tuple(out))


def ohie_access(alts: AlternativeSet, medicaid_label: str) -> ZeroSetRestriction:
    """Program access in the control arm implies access in the treatment arm."""
    m = alts.index(medicaid_label)
    return ZeroSetRestriction(
        name=f"access_monotone_{medicaid_label}",
        predicate=lambda w: w.c0.contains(m) and not w.c1.contains(m))


def mfe_access(alts: AlternativeSet, m_label: str, a_label: str,
               ma_label: str) -> RestrictionSet:
    """Bundled-program access structure.

    Two restrictions: the treated arm always has the main program, and in
    either arm the bundle alternative is available exactly when both of its
    components are.
    """
    m = alts.index(m_label)
    a = alts.index(a_label)
    ma = alts.index(ma_label)

    def bundle_broken(w: LatentPoint) -> bool:
        for c in (w.c0, w.c1):
            if c.contains(ma) != (c.contains(m) and c.contains(a)):
                return True
        return False

    return RestrictionSet((
        ZeroSetRestriction(name=f"access_{m_label}",
                           predicate=lambda w: not w.c1.contains(m)),
        ZeroSetRestriction(name=f"bundle_{ma_label}", predicate=bundle_broken),
    ))


def prune(restrictions: RestrictionSet, idx: LatentIndex) -> PrunedSupport:
    """Materialize the surviving support: indices no restriction kills."""
    preds = [r.predicate for r in restrictions]
    if not preds:
        return PrunedSupport(np.arange(idx.total_count, dtype=np.int64))
    alive = [i for i, w in enumerate(idx.points())
             if not any(p(w) for p in preds)]
    return PrunedSupport(np.asarray(alive, dtype=np.int64))


def kill_mask(restriction: ZeroSetRestriction, idx: LatentIndex,
              subset: np.ndarray) -> np.ndarray:
    """Boolean mask over ``subset`` of points killed by one restriction."""
    p = restriction.predicate
    return np.fromiter((p(idx.point_at(int(i))) for i in subset),
                       dtype=bool, count=subset.size)


# --- declarative predicate language -----------------------------------------
#
# Custom restrictions are conjunctions of three clause shapes:
#   membership        "h in c(1)"  /  "a not in c(0)"
#   outcome compare   "y(n) > y(h)"       ops: < <= > >= == !=
#   pairwise choice   "choice(a,h) == a"  (also !=)
# Clauses are joined with "and".  A point is killed when every clause holds.

_MEMBER_RE = re.compile(r"^(\w+)\s+(not\s+)?in\s+c\((0|1)\)$")
_OUTCOME_RE = re.compile(r"^y\((\w+)\)\s*(<=|>=|==|!=|<|>)\s*y\((\w+)\)$")
_CHOICE_RE = re.compile(r"^choice\((\w+)\s*,\s*(\w+)\)\s*(==|!=)\s*(\w+)$")

_CMP = {
    "<": lambda a, b: a < b, "<=": lambda a, b: a <= b,
    ">": lambda a, b: a > b, ">=": lambda a, b: a >= b,
    "==": lambda a, b: a == b, "!=": lambda a, b: a != b,
}


def _parse_clause(alts: AlternativeSet, text: str) -> Predicate:
    text = text.strip()
    m = _MEMBER_RE.match(text)
    if m:
        alt = alts.index(m.group(1))
        negate = m.group(2) is not None
        arm = int(m.group(3))
        def member(w: LatentPoint, alt=alt, negate=negate, arm=arm) -> bool:
            c = w.c1 if arm == 1 else w.c0
            return c.contains(alt) != negate
        return member
    m = _OUTCOME_RE.match(text)
    if m:
        a, b = alts.index(m.group(1)), alts.index(m.group(3))
        op = _CMP[m.group(2)]
        return lambda w: op(w.outcomes[a], w.outcomes[b])
    m = _CHOICE_RE.match(text)
    if m:
        d1, d2 = alts.index(m.group(1)), alts.index(m.group(2))
        want = alts.index(m.group(4))
        if want not in (d1, d2):
            raise ValueError(f"choice({m.group(1)},{m.group(2)}) can never "
                             f"equal {m.group(4)}")
        eq = m.group(3) == "=="
        prefs = enumerate_preferences(alts)
        def pairwise(w: LatentPoint, d1=d1, d2=d2, want=want, eq=eq) -> bool:
            top = d1 if prefs[w.pref].prefers(d1, d2) else d2
            return (top == want) == eq
        return pairwise
    raise ValueError(f"cannot parse restriction clause {text!r}; expected "
                     "'LABEL [not] in c(0|1)', 'y(LABEL) OP y(LABEL)' or "
                     "'choice(LABEL,LABEL) ==|!= LABEL'")


def parse_restriction(alts: AlternativeSet, expr: str,
                      name: str | None = None) -> ZeroSetRestriction:
    """Parse a conjunction of clauses into a zero-set restriction."""
    clauses = [_parse_clause(alts, part) for part in expr.split(" and ")]
    def pred(w: LatentPoint) -> bool:
        return all(c(w) for c in clauses)
    return ZeroSetRestriction(name=name or expr.strip(), predicate=pred)
