"""Independent verification machinery.

Everything here deliberately avoids the rescaled LP used by the production
solver: bounds are recovered by bisecting on feasibility of plain pmf
systems, synthetic samples are drawn from explicit latent distributions, and
infeasible cell vectors are constructed geometrically.  Agreement between
this module and the solver is therefore meaningful evidence.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from .bounds_solver import IdentificationProblem, Interval, build_problem
from .empirical import ClusteredSample, EmpiricalDistribution, Observation
from .latent_space import LatentIndex, choice
from .parameters import ParameterSpec
from .restrictions import RestrictionSet, prune
from .solvers import DenominatorNotPositive, HighsLP, InfeasibleModel, LPBackend

BISECT_MAX_ITER = 60
_FEAS_TOL = 1e-9


class NoExitingDirection(RuntimeError):
    """The feasible cell polytope fills the whole per-arm product of
    simplices, so no perturbation can leave it."""


@dataclass(frozen=True)
class SyntheticModel:
    """Explicit latent pmf plus sampling layout for one experiment."""

    idx: LatentIndex
    pmf: dict[int, float]
    p_z: float = 0.5
    cluster_count: int = 10

    def __post_init__(self):
        total = sum(self.pmf.values())
        if abs(total - 1.0) > 1e-9:
            raise ValueError(f"pmf must sum to 1, got {total}")
        if any(v < 0 for v in self.pmf.values()):
            raise ValueError("pmf masses must be nonnegative")
        if not 0.0 < self.p_z < 1.0:
            raise ValueError("p_z must be in (0, 1)")

    def theta(self, param: ParameterSpec) -> float:
        num = sum(param.coefficient(i) * q for i, q in self.pmf.items())
        if param.is_linear:
            return num
        den = sum(q for i, q in self.pmf.items() if i in param.den)
        return num / den

    def respects(self, restrictions: RestrictionSet) -> bool:
        preds = [r.predicate for r in restrictions]
        return all(not p(self.idx.point_at(i))
                   for i, q in self.pmf.items() if q > 0 for p in preds)


def _direct_system(problem: IdentificationProblem):
    """Plain pmf constraint system (no rescaling variable).

    Rows: normalization, then all observable cell rows in (z, d, y) order.
    Variables: Q(w) for alive w.
    """
    n = problem.n_alive
    nd, m = problem.idx.alts.n, problem.idx.grid.m
    rows = [np.zeros(n, dtype=np.int64)]
    cols = [np.arange(n, dtype=np.int64)]
    vals = [np.ones(n)]
    for z in (0, 1):
        rows.append(1 + z * nd * m + problem.cell_of_alive[z])
        cols.append(np.arange(n, dtype=np.int64))
        vals.append(np.ones(n))
    a = sp.csr_matrix(
        (np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
        shape=(1 + problem.n_cells, n))
    b = np.concatenate(([1.0], problem.data.cells.reshape(-1)))
    return a, b


def linear_bounds_direct(problem: IdentificationProblem,
                         backend: LPBackend | None = None) -> Interval:
    """Bounds for a linear parameter from the pmf LP, no rescaling variable."""
    if not problem.param.is_linear:
        raise ValueError("direct pmf LP applies to linear parameters only")
    backend = backend or HighsLP(feasibility_tol=_FEAS_TOL)
    a, b = _direct_system(problem)
    c = problem.param.coefficient_vector(problem.support.alive)
    bounds = [(0.0, None)] * problem.n_alive
    out = []
    for sense in ("min", "max"):
        sol = backend.solve(sense, c, a, b, bounds)
        if sol.status == "infeasible":
            raise InfeasibleModel("no admissible latent distribution")
        if not sol.is_optimal:
            raise RuntimeError(f"LP backend failed: {sol.status}")
        out.append(sol.objective)
    return Interval(lo=out[0], hi=out[1])


def bisect_bounds(problem: IdentificationProblem, tol: float = 1e-7,
                  backend: LPBackend | None = None) -> Interval:
    """Bounds by bisection on feasibility of the candidate-value system.

    For a candidate value t, feasibility of {Q pmf on alive, cell rows,
    sum (a_num - t * 1_den) Q = 0} is an LP; the set of feasible t is an
    interval by convexity, so its endpoints are found by bisection.
    """
    backend = backend or HighsLP(feasibility_tol=_FEAS_TOL)
    a, b = _direct_system(problem)
    n = problem.n_alive
    bounds = [(0.0, None)] * n
    a_vec = problem.param.coefficient_vector(problem.support.alive)
    den_vec = problem.param.den_mask(problem.support.alive).astype(float)
    zero = np.zeros(n)

    def feasible_at(t: float):
        row = sp.csr_matrix(a_vec - t * den_vec)
        a_t = sp.vstack([a, row], format="csr")
        b_t = np.concatenate([b, [0.0]])
        sol = backend.solve("min", zero, a_t, b_t, bounds)
        return sol

    base = backend.solve("min", zero, a, b, bounds)
    if base.status == "infeasible" or not base.is_optimal:
        raise InfeasibleModel("no admissible latent distribution")
    q0 = base.x
    den0 = float(den_vec @ q0)
    den_lb = backend.solve("min", den_vec, a, b, bounds).objective
    if not problem.param.is_linear and den_lb <= tol:
        raise DenominatorNotPositive(
            f"denominator lower bound {den_lb:.3g} is not strictly positive")
    t_mid = float(a_vec @ q0) / max(den0, 1e-15)

    span = float(np.max(np.abs(a_vec))) if a_vec.size else 0.0
    reach = span / max(den_lb, 1e-12) if not problem.param.is_linear else span
    lo_out, hi_out = t_mid - reach - 1.0, t_mid + reach + 1.0

    def bisect(feas: float, infeas: float) -> float:
        for _ in range(BISECT_MAX_ITER):
            if abs(infeas - feas) <= tol:
                break
            mid = 0.5 * (feas + infeas)
            if feasible_at(mid).is_optimal:
                feas = mid
            else:
                infeas = mid
        return feas

    hi = bisect(t_mid, hi_out)
    lo = bisect(t_mid, lo_out)
    return Interval(lo=min(lo, hi), hi=max(lo, hi))


def implied_cells(model: SyntheticModel) -> EmpiricalDistribution:
    """Exact population cell probabilities implied by the latent pmf."""
    idx = model.idx
    nd, m = idx.alts.n, idx.grid.m
    cells = np.zeros((2, nd, m))
    for i, q in model.pmf.items():
        w = idx.point_at(i)
        u = idx.preferences[w.pref]
        for z, c in ((0, w.c0), (1, w.c1)):
            d = choice(u, c)
            cells[z, d, w.outcomes[d]] += q
    return EmpiricalDistribution(alts=idx.alts, grid=idx.grid, cells=cells)


def generate(model: SyntheticModel, n_per_cluster: int, seed) -> ClusteredSample:
    """Draw a clustered sample from the latent model; deterministic by seed."""
    rng = np.random.default_rng(seed)
    idx = model.idx
    support = np.array(sorted(model.pmf), dtype=np.int64)
    probs = np.array([model.pmf[int(i)] for i in support])
    probs = probs / probs.sum()
    clusters = []
    for _ in range(model.cluster_count):
        obs = []
        draws = rng.choice(support, size=n_per_cluster, p=probs)
        zs = rng.random(n_per_cluster) < model.p_z
        for i, z in zip(draws, zs):
            w = idx.point_at(int(i))
            u = idx.preferences[w.pref]
            d = choice(u, w.c1 if z else w.c0)
            obs.append(Observation(y_raw=idx.grid.value(w.outcomes[d]),
                                   d=idx.alts.alternatives[d], z=int(z)))
        clusters.append(tuple(obs))
    return ClusteredSample(tuple(clusters))


def sample_from_cells(cells: EmpiricalDistribution, cluster_count: int,
                      n_per_cluster: int, p_z: float, seed) -> ClusteredSample:
    """Draw observations directly from conditional cell probabilities."""
    rng = np.random.default_rng(seed)
    alts, grid = cells.alts, cells.grid
    flat = [cells.cells[z].reshape(-1) for z in (0, 1)]
    nd, m = alts.n, grid.m
    clusters = []
    for _ in range(cluster_count):
        obs = []
        for _ in range(n_per_cluster):
            z = int(rng.random() < p_z)
            k = int(rng.choice(nd * m, p=flat[z]))
            d, y = divmod(k, m)
            obs.append(Observation(y_raw=grid.value(y),
                                   d=alts.alternatives[d], z=z))
        clusters.append(tuple(obs))
    return ClusteredSample(tuple(clusters))


def _reduced_cell_matrix(problem: IdentificationProblem) -> np.ndarray:
    """Unique columns of the cell-membership matrix over alive points.

    Each alive point contributes mass to one cell per arm; points sharing
    both cells are interchangeable for feasibility, so one column per
    distinct (control-cell, treatment-cell) pair suffices.
    """
    k = problem.idx.alts.n * problem.idx.grid.m
    pairs = np.unique(problem.cell_of_alive.T, axis=0)
    a = np.zeros((2 * k, pairs.shape[0]))
    cols = np.arange(pairs.shape[0])
    a[pairs[:, 0], cols] = 1.0
    a[k + pairs[:, 1], cols] = 1.0
    return a


def cell_distance(problem: IdentificationProblem, target: np.ndarray) -> float:
    """L2 distance from a cell vector to the set reachable by nonnegative
    latent masses: sqrt(min_{Q >= 0} ||target - cells(Q)||^2)."""
    from scipy.optimize import nnls
    _, resid = nnls(_reduced_cell_matrix(problem), np.asarray(target, float))
    return float(resid)


def plant_violation(problem: IdentificationProblem, magnitude: float,
                    max_targets: int = 64,
                    tol: float = 1e-9) -> EmpiricalDistribution:
    """Perturb the cell vector to sit off the feasible set.

    ``magnitude`` is the resulting L2 distance between the returned cells
    and the reachable set (the square root of the population value of the
    specification-test objective).  Candidate exterior targets put all
    per-arm mass on a single cell; the farthest one is mixed into the
    observed cells with a weight found by bisection, which keeps per-arm
    sums at 1.
    """
    if magnitude <= 0:
        raise ValueError("magnitude must be positive")
    k = problem.idx.alts.n * problem.idx.grid.m
    combos = [(i1, i0) for i1 in range(k) for i0 in range(k)][:max_targets]
    best, best_dist = None, 0.0
    for i1, i0 in combos:
        target = np.zeros(2 * k)
        target[i0] = 1.0       # arm z=0 block comes first in (z, d, y) order
        target[k + i1] = 1.0
        dist = cell_distance(problem, target)
        if dist > best_dist:
            best, best_dist = target, dist
    if best is None or best_dist <= tol:
        raise NoExitingDirection(
            "every candidate cell vector is reachable; the feasible set "
            "leaves no room for a planted violation")
    if magnitude > best_dist:
        raise ValueError(f"requested magnitude {magnitude:g} exceeds the "
                         f"largest attainable distance {best_dist:g}")
    base = problem.data.cells.reshape(-1)
    lo, hi = 0.0, 1.0
    for _ in range(60):
        mid = 0.5 * (lo + hi)
        if cell_distance(problem, (1.0 - mid) * base + mid * best) < magnitude:
            lo = mid
        else:
            hi = mid
    mixed = (1.0 - hi) * base + hi * best
    return EmpiricalDistribution(alts=problem.idx.alts, grid=problem.idx.grid,
                                 cells=mixed.reshape(problem.data.cells.shape))


def random_model(idx: LatentIndex, restrictions: RestrictionSet, seed,
                 max_support: int = 24, max_attempts: int = 10_000,
                 cluster_count: int = 10, p_z: float = 0.5) -> SyntheticModel:
    """Sparse random latent pmf respecting the given restrictions.

    Draws a Dirichlet pmf over a random subset of the pruned support;
    rejection-sampled (with an attempt cap) against the restrictions, which
    a draw from the pruned support passes immediately.
    """
    rng = np.random.default_rng(seed)
    alive = prune(restrictions, idx).alive
    if alive.size == 0:
        raise InfeasibleModel("restrictions kill the whole latent space")
    for _ in range(max_attempts):
        k = int(rng.integers(2, min(max_support, alive.size) + 1))
        support = rng.choice(alive, size=min(k, alive.size), replace=False)
        masses = rng.dirichlet(np.ones(support.size))
        model = SyntheticModel(
            idx=idx,
            pmf={int(i): float(p) for i, p in zip(support, masses) if p > 0},
            p_z=p_z, cluster_count=cluster_count)
        if model.respects(restrictions):
            return model
    raise RuntimeError("could not draw a restriction-respecting model "
                       f"in {max_attempts} attempts")


def build_population_problem(idx: LatentIndex, restrictions: RestrictionSet,
                             model: SyntheticModel,
                             param: ParameterSpec) -> IdentificationProblem:
    """Convenience: problem at the model's exact population cells."""
    support = prune(restrictions, idx)
    return build_problem(idx, support, implied_cells(model), param)
