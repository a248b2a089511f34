"""Sharp identified-set bounds via the transformed linear programs.

A fractional objective num(Q)/den(Q) over the polytope of admissible pmfs is
rescaled with one extra variable g (the reciprocal denominator mass): in the
rescaled variables the data rows become homogeneous in g and the denominator
row pins the scale, so both bounds are plain LPs.  Linear parameters take the
same path; their denominator row coincides with the normalization row and
forces g = 1.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp

from .empirical import EmpiricalDistribution
from .latent_space import LatentIndex
from .parameters import ParameterSpec
from .restrictions import PrunedSupport
from .solvers import (
    DenominatorNotPositive,
    HighsLP,
    InfeasibleModel,
    LPBackend,
    UnboundedModel,
)

INTERVAL_TOL = 1e-7


@dataclass(frozen=True)
class Interval:
    lo: float
    hi: float
    lp_status: tuple[str, str] = ("optimal", "optimal")

    def __post_init__(self):
        if self.lo > self.hi + INTERVAL_TOL:
            raise ValueError(f"lower bound {self.lo} exceeds upper {self.hi}")

    @property
    def width(self) -> float:
        return self.hi - self.lo

    def contains(self, value: float, tol: float = INTERVAL_TOL) -> bool:
        return self.lo - tol <= value <= self.hi + tol

    def subset_of(self, other: "Interval", tol: float = 1e-8) -> bool:
        return self.lo >= other.lo - tol and self.hi <= other.hi + tol


@dataclass(frozen=True)
class IdentificationProblem:
    """Assembled sparse constraint data over the pruned support.

    ``cell_of_alive[z, k]`` is the flat observable-cell id (d * M + y) the
    k-th alive latent point falls into under arm z; each alive point belongs
    to exactly one cell per arm.
    """

    idx: LatentIndex
    support: PrunedSupport
    data: EmpiricalDistribution
    param: ParameterSpec
    cell_of_alive: np.ndarray = field(repr=False)

    @property
    def n_alive(self) -> int:
        return self.support.size

    @property
    def n_cells(self) -> int:
        return 2 * self.idx.alts.n * self.idx.grid.m


def build_problem(idx: LatentIndex, support: PrunedSupport,
                  data: EmpiricalDistribution,
                  param: ParameterSpec) -> IdentificationProblem:
    if data.alts is not idx.alts and data.alts != idx.alts:
        raise ValueError("empirical distribution uses a different alternative set")
    if tuple(data.grid.points) != tuple(idx.grid.points):
        raise ValueError("empirical distribution uses a different outcome grid")
    alive = support.alive
    m = idx.grid.m
    outcomes = idx.components[0][alive]
    rows = np.arange(alive.size)
    cell = np.empty((2, alive.size), dtype=np.int64)
    for z in (0, 1):
        d = idx.chosen_alternative(z, subset=alive)
        cell[z] = d * m + outcomes[rows, d]
    return IdentificationProblem(idx=idx, support=support, data=data,
                                 param=param, cell_of_alive=cell)


@dataclass(frozen=True)
class AssembledLP:
    """Sparse equality system over variables [g, Qs(w) for w alive].

    Rows, in order: normalization (sum Qs = g), one row per observable cell
    in (z, d, y) lexicographic order (including zero-probability cells), and
    the denominator row (sum over the denominator set = 1).  The bounds
    Qs(w) <= g hold implicitly: Qs >= 0 and sum Qs = g.
    """

    c: np.ndarray
    a_eq: sp.csr_matrix
    b_eq: np.ndarray
    bounds: list[tuple[float, float | None]]

    @property
    def n_vars(self) -> int:
        return self.c.size


def assemble(problem: IdentificationProblem) -> AssembledLP:
    n = problem.n_alive
    n_cells = problem.n_cells
    nd, m = problem.idx.alts.n, problem.idx.grid.m
    phat = problem.data.cells  # (2, nd, m)

    rows, cols, vals = [], [], []
    # normalization row 0: sum Qs - g = 0
    rows.append(np.zeros(n + 1, dtype=np.int64))
    cols.append(np.arange(n + 1, dtype=np.int64))
    vals.append(np.concatenate(([-1.0], np.ones(n))))
    # cell rows 1..n_cells: sum_{cell} Qs - g * phat = 0
    for z in (0, 1):
        row_base = 1 + z * nd * m
        cell = problem.cell_of_alive[z]
        rows.append(row_base + cell)
        cols.append(np.arange(1, n + 1, dtype=np.int64))
        vals.append(np.ones(n))
    rows.append(np.arange(1, n_cells + 1, dtype=np.int64))
    cols.append(np.zeros(n_cells, dtype=np.int64))
    vals.append(-phat.reshape(-1))
    # denominator row: sum over den = 1
    den_mask = problem.param.den_mask(problem.support.alive)
    den_cols = np.flatnonzero(den_mask) + 1
    den_row = 1 + n_cells
    rows.append(np.full(den_cols.size, den_row, dtype=np.int64))
    cols.append(den_cols)
    vals.append(np.ones(den_cols.size))

    a_eq = sp.csr_matrix(
        (np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
        shape=(n_cells + 2, n + 1))
    b_eq = np.zeros(n_cells + 2)
    b_eq[-1] = 1.0

    c = np.zeros(n + 1)
    c[1:] = problem.param.coefficient_vector(problem.support.alive)
    bounds = [(0.0, None)] * (n + 1)
    return AssembledLP(c=c, a_eq=a_eq, b_eq=b_eq, bounds=bounds)


def _solve_pair(lp: AssembledLP, backend: LPBackend):
    lo = backend.solve("min", lp.c, lp.a_eq, lp.b_eq, lp.bounds)
    hi = backend.solve("max", lp.c, lp.a_eq, lp.b_eq, lp.bounds)
    for sol in (lo, hi):
        if sol.status == "infeasible":
            raise InfeasibleModel(
                "no admissible latent distribution: the model is "
                "misspecified for these cells (or, for a fractional "
                "parameter, the denominator cannot be positive)")
        if sol.status == "unbounded":
            raise UnboundedModel("unbounded identified-set LP; this cannot "
                                 "occur for a valid assembly")
        if not sol.is_optimal:
            raise RuntimeError(f"LP backend failed with status {sol.status}")
    return lo, hi


def solve_bounds(problem: IdentificationProblem,
                 backend: LPBackend | None = None,
                 return_solutions: bool = False):
    """Sharp bounds [lo, hi] for the problem's parameter.

    Callers must verify denominator positivity first for fractional
    parameters (see check_denominator).  With return_solutions, also returns
    the two rescaled-back pmfs attaining the bounds.
    """
    backend = backend or HighsLP()
    if problem.n_alive == 0:
        raise InfeasibleModel("pruned support is empty")
    lp = assemble(problem)
    lo, hi = _solve_pair(lp, backend)
    interval = Interval(lo=lo.objective, hi=hi.objective,
                        lp_status=(lo.status, hi.status))
    if not return_solutions:
        return interval
    return interval, tuple(_detransform(sol.x) for sol in (lo, hi))


def _detransform(x: np.ndarray) -> np.ndarray:
    gamma = x[0]
    if gamma <= 0:
        raise DenominatorNotPositive("recovered scale variable is not positive")
    return x[1:] / gamma


def check_denominator(problem: IdentificationProblem,
                      backend: LPBackend | None = None) -> float:
    """Lower bound of the denominator mass over the feasible set.

    Fractional solves must be refused when this is not strictly positive.
    Linear parameters trivially return 1.
    """
    backend = backend or HighsLP()
    den_mask = problem.param.den_mask(problem.support.alive)
    aux = _replace_param_vector(problem, den_mask.astype(float))
    lp = assemble(aux)
    sol = backend.solve("min", lp.c, lp.a_eq, lp.b_eq, lp.bounds)
    if sol.status == "infeasible":
        raise InfeasibleModel("no admissible latent distribution")
    if not sol.is_optimal:
        raise RuntimeError(f"LP backend failed with status {sol.status}")
    return float(sol.objective)


def _replace_param_vector(problem: IdentificationProblem,
                          coeffs_on_alive: np.ndarray) -> IdentificationProblem:
    """Problem with a linear parameter given by coefficients on alive points."""
    alive = problem.support.alive
    a_num = {int(alive[k]): float(v) for k, v in enumerate(coeffs_on_alive)
             if v != 0.0}
    param = ParameterSpec(name="aux", a_num=a_num, den=None)
    return IdentificationProblem(idx=problem.idx, support=problem.support,
                                 data=problem.data, param=param,
                                 cell_of_alive=problem.cell_of_alive)


@dataclass(frozen=True)
class FeasibilityReport:
    feasible: bool
    message: str


def check_feasibility(problem: IdentificationProblem,
                      backend: LPBackend | None = None) -> FeasibilityReport:
    """Zero-objective solve of the constraint system without the parameter."""
    backend = backend or HighsLP()
    if problem.n_alive == 0:
        return FeasibilityReport(False, "pruned support is empty")
    aux = _replace_param_vector(problem, np.zeros(problem.n_alive))
    lp = assemble(aux)
    sol = backend.solve("min", lp.c, lp.a_eq, lp.b_eq, lp.bounds)
    if sol.is_optimal:
        return FeasibilityReport(True, "admissible distribution exists")
    if sol.status == "infeasible":
        return FeasibilityReport(
            False, "cells are inconsistent with the imposed restrictions")
    return FeasibilityReport(False, f"solver status {sol.status}")
