"""Bootstrap tests and confidence intervals for linear parameters, plus the
model specification test.

The test statistic is the scaled squared distance between the empirical cell
vector and the set of cell vectors reachable by admissible latent pmfs under
the hypothesized parameter value; bootstrap critical values come from
cluster resamples recentered at a projection onto a tightened constraint
set.  Latent masses enter the cell vector only through their per-arm cell
pair and their parameter coefficient, so the quadratic programs are solved
over aggregated variables, one per (cell pair, coefficient) class.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .bounds_solver import Interval, build_problem, solve_bounds
from .empirical import (
    ClusteredSample,
    EmptyArm,
    EmpiricalDistribution,
    cluster_resample,
    estimate,
)
from .latent_space import LatentIndex
from .parameters import ParameterSpec
from .restrictions import PrunedSupport
from .solvers import CvxoptQP, HighsLP, LPBackend, QPBackend

QP_TOL = 1e-7
MAX_TAU_HALVINGS = 60


class LinearOnly(TypeError):
    """Bootstrap inference covers linear parameters only."""


class EmptyTightenedSet(RuntimeError):
    """No tightening parameter made the projection set non-empty."""


@dataclass(frozen=True)
class TestConfig:
    alpha: float = 0.05
    b: int = 200
    tau: float | None = None  # None = sqrt(log G / G)
    theta_grid_points: int = 201
    seed: int = 0

    def __post_init__(self):
        if not 0.0 < self.alpha < 1.0:
            raise ValueError("alpha must be in (0, 1)")
        if self.b < 1:
            raise ValueError("need at least one bootstrap draw")
        if self.tau is not None and not 0.0 < self.tau < 1.0:
            raise ValueError("tau must be in (0, 1)")

    def tau_for(self, g: int) -> float:
        return self.tau if self.tau is not None else math.sqrt(math.log(g) / g)


@dataclass(frozen=True)
class ReducedDesign:
    """Aggregated QP design over (cell-pair, coefficient) classes.

    ``a`` maps class masses to the stacked cell vector; ``coef`` is the
    shared parameter coefficient per class; ``count`` the number of latent
    points pooled into each class.
    """

    a: np.ndarray        # (n_cells, k)
    coef: np.ndarray     # (k,)
    count: np.ndarray    # (k,) int
    n_points: int        # |W dagger|

    @property
    def k(self) -> int:
        return self.coef.size


def reduce_design(idx: LatentIndex, support: PrunedSupport,
                  param: ParameterSpec) -> ReducedDesign:
    if not param.is_linear:
        raise LinearOnly(
            f"parameter {param.name!r} is a ratio; bootstrap inference "
            "supports linear parameters only")
    alive = support.alive
    m = idx.grid.m
    nd = idx.alts.n
    outcomes = idx.components[0][alive]
    rows = np.arange(alive.size)
    cell = np.empty((2, alive.size), dtype=np.int64)
    for z in (0, 1):
        d = idx.chosen_alternative(z, subset=alive)
        cell[z] = d * m + outcomes[rows, d]
    coef = param.coefficient_vector(alive)
    key = np.stack([cell[0], cell[1], np.unique(coef, return_inverse=True)[1]])
    _, first, inverse = np.unique(key, axis=1, return_index=True,
                                  return_inverse=True)
    k = first.size
    count = np.bincount(inverse, minlength=k)
    n_cells = 2 * nd * m
    a = np.zeros((n_cells, k))
    for z in (0, 1):
        a[z * nd * m + cell[z, first], np.arange(k)] = 1.0
    return ReducedDesign(a=a, coef=coef[first], count=count,
                         n_points=int(alive.size))


@dataclass(frozen=True)
class TightenedSet:
    """Per-class lower bounds defining the projection polytope."""

    lower: np.ndarray  # per reduced class, already scaled by class size
    tau: float
    theta0: float | None

    @property
    def total_mass(self) -> float:
        return float(self.lower.sum())


def _class_lower_bounds(design: ReducedDesign, theta0: float,
                        tau: float) -> np.ndarray:
    """Lower bound per latent point from its coefficient class, times the
    number of points pooled into each reduced class."""
    coef = design.coef
    hi, lo = float(coef.max()), float(coef.min())
    if hi == lo:
        per_point = np.full(design.k, tau / design.n_points)
        return per_point * design.count
    at_hi = coef == hi
    at_lo = coef == lo
    middle = ~(at_hi | at_lo)
    n_not_hi = int(design.count[~at_hi].sum())
    n_not_lo = int(design.count[~at_lo].sum())
    w_lo = (hi - theta0) / (hi - lo) * tau / n_not_hi if n_not_hi else 0.0
    w_hi = (theta0 - lo) / (hi - lo) * tau / n_not_lo if n_not_lo else 0.0
    per_point = np.zeros(design.k)
    per_point[at_lo] = w_lo
    per_point[at_hi] = w_hi
    n_mid = int(design.count[middle].sum())
    if n_mid:
        per_point[middle] = (1.0 - w_lo - w_hi) * tau / n_mid
    return np.maximum(per_point, 0.0) * design.count


def tightened_set(design: ReducedDesign, theta0: float | None,
                  tau: float) -> TightenedSet:
    if theta0 is None:
        lower = (tau / design.n_points) * design.count.astype(float)
    else:
        lower = _class_lower_bounds(design, theta0, tau)
    return TightenedSet(lower=lower, tau=tau, theta0=theta0)


def _qp(design: ReducedDesign, target: np.ndarray, lower: np.ndarray,
        theta0: float | None, simplex: bool, qp_backend: QPBackend):
    """Projection residual min ||a q - target||^2 over the constraint set."""
    a_eq, b_eq = None, None
    if simplex:
        rows = [np.ones(design.k)]
        rhs = [1.0]
        # skip the parameter row when it is collinear with normalization
        if theta0 is not None and design.coef.max() != design.coef.min():
            rows.append(design.coef)
            rhs.append(theta0)
        a_eq = np.vstack(rows)
        b_eq = np.array(rhs)
    return qp_backend.solve_least_squares(design.a, target, lb=lower,
                                          a_eq=a_eq, b_eq=b_eq)


def test_statistic(emp: EmpiricalDistribution, idx: LatentIndex,
                   support: PrunedSupport, param: ParameterSpec,
                   theta0: float, g: int = 1,
                   qp_backend: QPBackend | None = None) -> float:
    """Scaled minimum squared cell residual under the hypothesized value.

    Returns +inf when the value is unattainable by any pmf on the support
    (outside the coefficient range), mirroring an infeasible constraint set.
    """
    qp_backend = qp_backend or CvxoptQP()
    design = reduce_design(idx, support, param)
    return _statistic_from_design(design, emp.cell_vector(), theta0,
                                  scale=float(g), qp_backend=qp_backend)


def _statistic_from_design(design: ReducedDesign, target: np.ndarray,
                           theta0: float | None, scale: float,
                           qp_backend: QPBackend,
                           lower: np.ndarray | None = None,
                           simplex: bool = True) -> float:
    if theta0 is not None and simplex:
        if theta0 > design.coef.max() + 1e-12 or theta0 < design.coef.min() - 1e-12:
            return math.inf
    lb = np.zeros(design.k) if lower is None else lower
    sol = _qp(design, target, lb, theta0, simplex, qp_backend)
    if not sol.is_optimal:
        return math.inf
    return scale * sol.objective


@dataclass(frozen=True)
class TestResult:
    statistic: float
    critical_value: float
    reject: bool
    bootstrap_stats: tuple[float, ...]
    tau: float
    theta0: float | None = None

    def __post_init__(self):
        if self.reject != (self.statistic > self.critical_value):
            raise ValueError("reject flag inconsistent with statistic")


def _critical_value(stats: np.ndarray, alpha: float) -> float:
    """Smallest bootstrap statistic t whose empirical cdf reaches 1 - alpha."""
    s = np.sort(stats)
    k = max(math.ceil((1.0 - alpha) * s.size) - 1, 0)
    return float(s[k])


def _feasible_tau(design: ReducedDesign, target: np.ndarray,
                  theta0: float | None, tau0: float, simplex: bool,
                  qp_backend: QPBackend):
    """First tau in the halving sequence whose tightened set is non-empty,
    together with the projection at that tau."""
    tau = tau0
    for _ in range(MAX_TAU_HALVINGS):
        ts = tightened_set(design, theta0, tau)
        if not simplex or ts.total_mass <= 1.0 + 1e-12:
            sol = _qp(design, target, ts.lower, theta0, simplex, qp_backend)
            if sol.is_optimal:
                return tau, ts, sol
        tau *= 0.5
    raise EmptyTightenedSet(
        "no tightening parameter yields a non-empty projection set "
        f"(started from tau={tau0:g})")


def _bootstrap_cells(sample: ClusteredSample, idx: LatentIndex, b: int,
                     seed) -> list[np.ndarray]:
    """Cell vectors of b cluster resamples; deterministic given seed."""
    out = []
    seeds = iter(np.random.SeedSequence(seed).spawn(4 * b + 16))
    while len(out) < b:
        try:
            child = next(seeds)
        except StopIteration:  # pragma: no cover - 4x margin
            raise RuntimeError("too many degenerate bootstrap resamples")
        try:
            res = cluster_resample(sample, child)
            emp = estimate(res, idx.alts, idx.grid)
        except (EmptyArm, ValueError):
            continue
        out.append(emp.cell_vector())
    return out


def _run_bootstrap(design: ReducedDesign, sample: ClusteredSample,
                   idx: LatentIndex, phat: np.ndarray, theta0: float | None,
                   cfg: TestConfig, simplex: bool,
                   qp_backend: QPBackend):
    """Shared steps: projection, recentred resampling, bootstrap statistics."""
    g = sample.g
    tau, ts, proj = _feasible_tau(design, phat, theta0, cfg.tau_for(g),
                                  simplex, qp_backend)
    eta = design.a @ proj.x
    stats = []
    for cells_b in _bootstrap_cells(sample, idx, cfg.b, cfg.seed):
        target = cells_b - phat + eta
        stats.append(_statistic_from_design(
            design, target, theta0, scale=float(g), qp_backend=qp_backend,
            lower=ts.lower, simplex=simplex))
    return tau, np.asarray(stats)


def bootstrap_test(sample: ClusteredSample, idx: LatentIndex,
                   support: PrunedSupport, param: ParameterSpec,
                   theta0: float, cfg: TestConfig,
                   qp_backend: QPBackend | None = None) -> TestResult:
    """Cluster-bootstrap test of a hypothesized linear parameter value."""
    qp_backend = qp_backend or CvxoptQP()
    design = reduce_design(idx, support, param)
    emp = estimate(sample, idx.alts, idx.grid)
    phat = emp.cell_vector()
    g = sample.g
    stat = _statistic_from_design(design, phat, theta0, scale=float(g),
                                  qp_backend=qp_backend)
    if math.isinf(stat):
        # unattainable value: reject outright, no resampling needed
        return TestResult(statistic=stat, critical_value=0.0, reject=True,
                          bootstrap_stats=(), tau=cfg.tau_for(g),
                          theta0=theta0)
    tau, stats = _run_bootstrap(design, sample, idx, phat, theta0, cfg,
                                simplex=True, qp_backend=qp_backend)
    crit = _critical_value(stats, cfg.alpha)
    return TestResult(statistic=stat, critical_value=crit,
                      reject=stat > crit,
                      bootstrap_stats=tuple(float(s) for s in stats),
                      tau=tau, theta0=theta0)


@dataclass(frozen=True)
class ConfidenceInterval:
    lo: float | None
    hi: float | None
    grid: tuple[float, ...]
    accepted: tuple[bool, ...]
    estimated: Interval

    @property
    def empty(self) -> bool:
        return self.lo is None


def confidence_interval(sample: ClusteredSample, idx: LatentIndex,
                        support: PrunedSupport, param: ParameterSpec,
                        cfg: TestConfig,
                        lp_backend: LPBackend | None = None,
                        qp_backend: QPBackend | None = None) -> ConfidenceInterval:
    """Grid inversion of the bootstrap test: hull of non-rejected values.

    An all-rejected grid yields an empty interval, reported rather than
    raised; it indicates severe misspecification at the grid resolution.
    """
    qp_backend = qp_backend or CvxoptQP()
    emp = estimate(sample, idx.alts, idx.grid)
    problem = build_problem(idx, support, emp, param)
    est = solve_bounds(problem, backend=lp_backend or HighsLP())
    design = reduce_design(idx, support, param)
    coef_span = float(design.coef.max() - design.coef.min())
    delta = max(0.5 * est.width, 0.25 * coef_span)
    grid = np.linspace(est.lo - delta, est.hi + delta, cfg.theta_grid_points)
    accepted = []
    for theta0 in grid:
        res = bootstrap_test(sample, idx, support, param, float(theta0), cfg,
                             qp_backend=qp_backend)
        accepted.append(not res.reject)
    acc = np.asarray(accepted)
    if not acc.any():
        return ConfidenceInterval(lo=None, hi=None,
                                  grid=tuple(map(float, grid)),
                                  accepted=tuple(accepted), estimated=est)
    kept = grid[acc]
    return ConfidenceInterval(lo=float(kept.min()), hi=float(kept.max()),
                              grid=tuple(map(float, grid)),
                              accepted=tuple(accepted), estimated=est)


def specification_test(sample: ClusteredSample, idx: LatentIndex,
                       support: PrunedSupport, cfg: TestConfig,
                       qp_backend: QPBackend | None = None) -> tuple[float, float]:
    """Bootstrap test that some admissible pmf reproduces the cells.

    Returns (statistic, p_value).  The projection set here drops the
    sum-to-one and parameter rows: masses are only required to be
    nonnegative (tightened to a small uniform floor), since total mass is
    pinned down by the cell equations themselves at any exact solution.
    """
    qp_backend = qp_backend or CvxoptQP()
    param = ParameterSpec(name="none", a_num={}, den=None)
    design = reduce_design(idx, support, param)
    emp = estimate(sample, idx.alts, idx.grid)
    phat = emp.cell_vector()
    g = sample.g
    stat = _statistic_from_design(design, phat, None, scale=float(g),
                                  qp_backend=qp_backend, simplex=False)
    _, stats = _run_bootstrap(design, sample, idx, phat, None, cfg,
                              simplex=False, qp_backend=qp_backend)
    p_value = float(np.mean(stats >= stat - 1e-12))
    return stat, p_value
