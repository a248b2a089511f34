"""Identified-set bounds: assembly shape, fixtures, diagnostics."""

import numpy as np
import pytest

from latent_bounds import (
    AlternativeSet,
    InfeasibleModel,
    Interval,
    LatentIndex,
    OutcomeGrid,
    ParameterSpec,
    RestrictionSet,
    average_access_effect,
    average_effect_on_participants,
    build_problem,
    check_denominator,
    check_feasibility,
    hsis_access,
    implied_cells,
    participation_proportion,
    prune,
    random_model,
    solve_bounds,
)
from latent_bounds.bounds_solver import assemble
from latent_bounds.restrictions import PrunedSupport
from latent_bounds.solvers import HighsLP


class TestInterval:
    def test_rejects_inverted(self):
        with pytest.raises(ValueError):
            Interval(lo=1.0, hi=0.0)

    def test_contains_and_subset(self):
        a = Interval(lo=0.0, hi=1.0)
        b = Interval(lo=0.2, hi=0.8)
        assert b.subset_of(a)
        assert not a.subset_of(b)
        assert a.contains(0.5) and not a.contains(2.0)


class TestAssembly:
    def test_hsis_scale_dimensions(self):
        # 48,000 alive masses plus the scale variable; one normalization
        # row, 60 cell rows, one denominator row
        alts = AlternativeSet(("n", "a", "h"))
        grid = OutcomeGrid(tuple(float(v) for v in range(10)))
        idx = LatentIndex(alts, grid)
        sup = prune(RestrictionSet((hsis_access(alts, "h"),)), idx)
        model = random_model(idx, RestrictionSet((hsis_access(alts, "h"),)),
                             seed=0)
        prob = build_problem(idx, sup, implied_cells(model),
                             participation_proportion(idx, "h", ["n"]))
        lp = assemble(prob)
        assert lp.n_vars == 48_001
        assert lp.a_eq.shape == (62, 48_001)

    def test_each_alive_point_hits_one_cell_per_arm(self, two_alt):
        idx, _, sup = two_alt
        model = random_model(idx, RestrictionSet(), seed=1)
        prob = build_problem(idx, sup, implied_cells(model),
                             participation_proportion(idx, "h", ["n"]))
        lp = assemble(prob)
        # columns 1.. have entries: normalization, two cell rows, and the
        # denominator row for denominator members
        dense = lp.a_eq.toarray()
        cell_block = dense[1:1 + prob.n_cells, 1:]
        assert (cell_block.sum(axis=0) == 2.0).all()

    def test_empty_support_is_infeasible(self, two_alt):
        idx, _, _ = two_alt
        model = random_model(idx, RestrictionSet(), seed=2)
        prob = build_problem(idx, PrunedSupport(np.array([], dtype=np.int64)),
                             implied_cells(model),
                             participation_proportion(idx, "h", ["n"]))
        with pytest.raises(InfeasibleModel):
            solve_bounds(prob)


class TestPointIdentification:
    def test_pp_pinned_at_0_6(self, point_id):
        idx, sup, emp = point_id
        pp = participation_proportion(idx, "h", ["n"])
        iv = solve_bounds(build_problem(idx, sup, emp, pp))
        assert iv.lo == pytest.approx(0.6, abs=1e-8)
        assert iv.hi == pytest.approx(0.6, abs=1e-8)

    def test_atop_equals_ate_over_pp(self, point_id):
        idx, sup, emp = point_id
        ate = average_access_effect(idx, ["n", "h"], ["n"])
        atop = average_effect_on_participants(idx, ["n", "h"], ["n"], "h")
        ia = solve_bounds(build_problem(idx, sup, emp, ate))
        it = solve_bounds(build_problem(idx, sup, emp, atop))
        assert it.lo == pytest.approx(ia.lo / 0.6, abs=1e-8)
        assert it.hi == pytest.approx(ia.hi / 0.6, abs=1e-8)


class TestDiagnostics:
    def test_denominator_check_on_point_id(self, point_id):
        idx, sup, emp = point_id
        atop = average_effect_on_participants(idx, ["n", "h"], ["n"], "h")
        lb = check_denominator(build_problem(idx, sup, emp, atop))
        assert lb == pytest.approx(0.6, abs=1e-8)

    def test_denominator_can_be_zero(self, two_alt):
        # cells where nobody ever takes h leave the induced share free to
        # vanish: the fractional parameter must be refused
        idx, _, sup = two_alt
        alts, grid = idx.alts, idx.grid
        cells = np.zeros((2, 2, 2))
        cells[0, alts.index("n"), 0] = 1.0
        cells[1, alts.index("n"), 0] = 1.0
        from latent_bounds import EmpiricalDistribution
        emp = EmpiricalDistribution(alts=alts, grid=grid, cells=cells)
        atop = average_effect_on_participants(idx, ["n", "h"], ["n"], "h")
        lb = check_denominator(build_problem(idx, sup, emp, atop))
        assert lb == pytest.approx(0.0, abs=1e-8)

    def test_feasibility_report(self, point_id):
        idx, sup, emp = point_id
        aux = ParameterSpec(name="none", a_num={}, den=None)
        assert check_feasibility(build_problem(idx, sup, emp, aux)).feasible

    def test_infeasible_cells_detected(self, two_alt):
        # an empty support can match no cells at all
        idx, _, sup = two_alt
        alts, grid = idx.alts, idx.grid
        from latent_bounds import EmpiricalDistribution
        # kill every point: support empty means nothing can match the cells
        empty = PrunedSupport(np.array([], dtype=np.int64))
        cells = np.zeros((2, 2, 2))
        cells[0, 0, 0] = cells[1, 0, 0] = 1.0
        emp = EmpiricalDistribution(alts=alts, grid=grid, cells=cells)
        aux = ParameterSpec(name="none", a_num={}, den=None)
        report = check_feasibility(build_problem(idx, empty, emp, aux))
        assert not report.feasible


class TestGammaRecovery:
    def test_scale_variable_is_one_for_linear_parameters(self, point_id):
        idx, sup, emp = point_id
        pp = participation_proportion(idx, "h", ["n"])
        lp = assemble(build_problem(idx, sup, emp, pp))
        be = HighsLP()
        for sense in ("min", "max"):
            sol = be.solve(sense, lp.c, lp.a_eq, lp.b_eq, lp.bounds)
            assert sol.is_optimal
            assert sol.x[0] == pytest.approx(1.0, abs=1e-8)

    def test_scale_variable_is_reciprocal_denominator(self, point_id):
        idx, sup, emp = point_id
        atop = average_effect_on_participants(idx, ["n", "h"], ["n"], "h")
        lp = assemble(build_problem(idx, sup, emp, atop))
        be = HighsLP()
        sol = be.solve("min", lp.c, lp.a_eq, lp.b_eq, lp.bounds)
        assert sol.x[0] == pytest.approx(1.0 / 0.6, abs=1e-7)


class TestSolutions:
    def test_detransformed_pmfs_attain_bounds(self, two_alt):
        idx, rs, sup = two_alt
        model = random_model(idx, rs, seed=5)
        emp = implied_cells(model)
        ate = average_access_effect(idx, ["n", "h"], ["n"])
        prob = build_problem(idx, sup, emp, ate)
        iv, (q_lo, q_hi) = solve_bounds(prob, return_solutions=True)
        coef = ate.coefficient_vector(sup.alive)
        assert q_lo.sum() == pytest.approx(1.0, abs=1e-7)
        assert q_hi.sum() == pytest.approx(1.0, abs=1e-7)
        assert float(coef @ q_lo) == pytest.approx(iv.lo, abs=1e-7)
        assert float(coef @ q_hi) == pytest.approx(iv.hi, abs=1e-7)
