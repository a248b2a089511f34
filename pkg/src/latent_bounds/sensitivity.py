"""Bounds under partially imposed assumptions via a mixture program.

The latent distribution is modeled as Q = lam * H1 + (1 - lam) * H0 where
only the H1 subpopulation satisfies a designated set of outcome-referencing
restrictions, and H0 and H1 allocate identical mass to every (preference,
choice-set pair) group.  For lam strictly between 0 and 1 the rescaled
program solves over [g, Qs, H0s, H1s] jointly; lam = 0 and lam = 1 reduce to
ordinary bounds without and with the designated restrictions.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp

from .bounds_solver import (
    IdentificationProblem,
    Interval,
    build_problem,
    solve_bounds,
)
from .latent_space import LatentIndex
from .restrictions import PrunedSupport, RestrictionSet, kill_mask
from .solvers import HighsLP, InfeasibleModel, LPBackend, UnboundedModel


def match_groups(idx: LatentIndex, alive: np.ndarray) -> np.ndarray:
    """Group id per alive index; a group shares (preference, c0, c1)."""
    _, pref, c0, c1 = idx.components
    key = (c1[alive] * idx.n_csets + c0[alive]) * idx.n_pref + pref[alive]
    _, inverse = np.unique(key, return_inverse=True)
    return inverse


@dataclass(frozen=True)
class MixtureProblem:
    """A bounds problem plus restrictions held only on the lam-fraction."""

    base: IdentificationProblem
    s1: RestrictionSet
    lam: float
    groups: np.ndarray = field(repr=False)

    def __post_init__(self):
        if not 0.0 <= self.lam <= 1.0:
            raise ValueError(f"lambda must be in [0, 1], got {self.lam}")
        base_names = {r.name for r in _base_restrictions(self.base)}
        overlap = base_names & {r.name for r in self.s1}
        if overlap:
            raise ValueError(f"restrictions {sorted(overlap)} are already "
                             "imposed on the full population")

    @property
    def n_groups(self) -> int:
        return int(self.groups.max()) + 1 if self.groups.size else 0


def _base_restrictions(problem: IdentificationProblem) -> RestrictionSet:
    # the pruned support does not retain its generating restrictions; the
    # disjointness check is only meaningful when the caller tracks them
    return getattr(problem.support, "restrictions", RestrictionSet())


def build_mixture_problem(base: IdentificationProblem, s1: RestrictionSet,
                          lam: float) -> MixtureProblem:
    groups = match_groups(base.idx, base.support.alive)
    return MixtureProblem(base=base, s1=s1, lam=lam, groups=groups)


def _restrict_support(problem: IdentificationProblem,
                      s1: RestrictionSet) -> IdentificationProblem:
    alive = problem.support.alive
    dead = np.zeros(alive.size, dtype=bool)
    for r in s1:
        dead |= kill_mask(r, problem.idx, alive)
    support = PrunedSupport(alive[~dead])
    return build_problem(problem.idx, support, problem.data, problem.param)


@dataclass(frozen=True)
class AssembledMixtureLP:
    """Sparse equality system over [g, Qs, H0s, H1s] (1 + 3n variables)."""

    c: np.ndarray
    a_eq: sp.csr_matrix
    b_eq: np.ndarray
    bounds: list[tuple[float, float | None]]
    n_match_rows: int

    @property
    def n_vars(self) -> int:
        return self.c.size


def assemble_mixture(problem: MixtureProblem) -> AssembledMixtureLP:
    base = problem.base
    n = base.n_alive
    n_cells = base.n_cells
    nd, m = base.idx.alts.n, base.idx.grid.m
    lam = problem.lam
    alive = base.support.alive
    q0, h0_0, h1_0 = 1, 1 + n, 1 + 2 * n  # column offsets per block

    rows, cols, vals = [], [], []

    def add(r, c, v):
        rows.append(np.asarray(r, dtype=np.int64))
        cols.append(np.asarray(c, dtype=np.int64))
        vals.append(np.asarray(v, dtype=float))

    qcols = np.arange(q0, q0 + n)
    # row 0: sum Qs - g = 0
    add(np.zeros(n + 1), np.concatenate(([0], qcols)),
        np.concatenate(([-1.0], np.ones(n))))
    # cell rows: sum_{cell} Qs - g * phat = 0
    for z in (0, 1):
        add(1 + z * nd * m + base.cell_of_alive[z], qcols, np.ones(n))
    add(np.arange(1, n_cells + 1), np.zeros(n_cells),
        -base.data.cells.reshape(-1))
    # denominator row
    den_cols = np.flatnonzero(base.param.den_mask(alive)) + q0
    r = 1 + n_cells
    add(np.full(den_cols.size, r), den_cols, np.ones(den_cols.size))
    # sum H0 = g, sum H1 = g
    for off in (h0_0, h1_0):
        r += 1
        add(np.full(n + 1, r), np.concatenate(([0], np.arange(off, off + n))),
            np.concatenate(([-1.0], np.ones(n))))
    # zero rows on H1, one per designated restriction
    for restr in problem.s1:
        r += 1
        hit = np.flatnonzero(kill_mask(restr, base.idx, alive))
        add(np.full(hit.size, r), h1_0 + hit, np.ones(hit.size))
    # mixture identity per point: Qs - lam H1s - (1 - lam) H0s = 0
    pt = np.arange(n)
    add(r + 1 + pt, qcols, np.ones(n))
    add(r + 1 + pt, h0_0 + pt, np.full(n, -(1.0 - lam)))
    add(r + 1 + pt, h1_0 + pt, np.full(n, -lam))
    r += n
    # matching rows: per group, sum H0 - sum H1 = 0
    g = problem.groups
    n_groups = problem.n_groups
    add(r + 1 + g, h0_0 + pt, np.ones(n))
    add(r + 1 + g, h1_0 + pt, -np.ones(n))
    r += n_groups

    a_eq = sp.csr_matrix(
        (np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
        shape=(r + 1, 1 + 3 * n))
    b_eq = np.zeros(r + 1)
    b_eq[1 + n_cells] = 1.0

    c = np.zeros(1 + 3 * n)
    c[q0:q0 + n] = base.param.coefficient_vector(alive)
    bounds = [(0.0, None)] * (1 + 3 * n)
    return AssembledMixtureLP(c=c, a_eq=a_eq, b_eq=b_eq, bounds=bounds,
                              n_match_rows=n_groups)


def solve_sensitivity(problem: MixtureProblem,
                      backend: LPBackend | None = None) -> Interval:
    """Sharp interval for the parameter when the designated restrictions
    hold for a lam-fraction of the population only.

    At lam = 1 the mixture forces Q = H1, so the problem reduces to ordinary
    bounds with the designated restrictions applied outright; at lam = 0 they
    bind nothing, reducing to bounds under the base restrictions alone.
    Either reduction also sidesteps the question of H mass on points the
    base restrictions kill, which for interior lam is pinned to zero by the
    mixture identity.
    """
    backend = backend or HighsLP()
    if problem.lam == 1.0:
        return solve_bounds(_restrict_support(problem.base, problem.s1),
                            backend=backend)
    if problem.lam == 0.0:
        return solve_bounds(problem.base, backend=backend)
    lp = assemble_mixture(problem)
    out = []
    statuses = []
    for sense in ("min", "max"):
        sol = backend.solve(sense, lp.c, lp.a_eq, lp.b_eq, lp.bounds)
        if sol.status == "infeasible":
            raise InfeasibleModel(
                "no admissible mixture: the cells are inconsistent with "
                f"holding the designated restrictions on a {problem.lam:g} "
                "fraction of the population")
        if sol.status == "unbounded":
            raise UnboundedModel("unbounded mixture LP; this cannot occur "
                                 "for a valid assembly")
        if not sol.is_optimal:
            raise RuntimeError(f"LP backend failed with status {sol.status}")
        out.append(sol.objective)
        statuses.append(sol.status)
    return Interval(lo=out[0], hi=out[1], lp_status=tuple(statuses))


def check_denominator(problem: MixtureProblem,
                      backend: LPBackend | None = None) -> float:
    """Lower bound of the denominator mass over the mixture-feasible set."""
    backend = backend or HighsLP()
    if problem.lam in (0.0, 1.0):
        from .bounds_solver import check_denominator as _plain
        base = (problem.base if problem.lam == 0.0
                else _restrict_support(problem.base, problem.s1))
        return _plain(base, backend=backend)
    lp = assemble_mixture(problem)
    n = problem.base.n_alive
    den = problem.base.param.den_mask(problem.base.support.alive)
    # repoint the scale: den row becomes sum Qs = 1 (so g is the reciprocal
    # of total mass, i.e. 1), objective is the denominator mass
    a = lp.a_eq.tolil()
    den_row = 1 + problem.base.n_cells
    a[den_row, 1:1 + n] = 1.0
    c = np.zeros(lp.n_vars)
    c[1:1 + n][den] = 1.0
    sol = backend.solve("min", c, a.tocsr(), lp.b_eq, lp.bounds)
    if sol.status == "infeasible":
        raise InfeasibleModel("no admissible mixture distribution")
    if not sol.is_optimal:
        raise RuntimeError(f"LP backend failed with status {sol.status}")
    return float(sol.objective)


def solve_lambda_grid(base: IdentificationProblem, s1: RestrictionSet,
                      lambdas, backend: LPBackend | None = None,
                      jobs: int = 1) -> dict[float, Interval]:
    """Intervals across a lambda grid; independent solves, optionally parallel."""
    problems = {float(lam): build_mixture_problem(base, s1, float(lam))
                for lam in lambdas}
    if jobs > 1:
        from concurrent.futures import ThreadPoolExecutor
        with ThreadPoolExecutor(max_workers=jobs) as pool:
            futs = {lam: pool.submit(solve_sensitivity, p, backend)
                    for lam, p in problems.items()}
            return {lam: f.result() for lam, f in futs.items()}
    return {lam: solve_sensitivity(p, backend) for lam, p in problems.items()}
