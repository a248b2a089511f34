"""LP and QP backend behavior on tiny hand-checkable programs."""

import numpy as np
import pytest
import scipy.sparse as sp

from latent_bounds import CvxoptQP, HighsLP


class TestHighsLP:
    def test_min_and_max_on_simplex(self):
        # optimize c.x over the 3-simplex
        be = HighsLP()
        c = np.array([1.0, 2.0, 3.0])
        a = sp.csr_matrix(np.ones((1, 3)))
        b = np.array([1.0])
        bounds = [(0.0, None)] * 3
        lo = be.solve("min", c, a, b, bounds)
        hi = be.solve("max", c, a, b, bounds)
        assert lo.objective == pytest.approx(1.0)
        assert hi.objective == pytest.approx(3.0)
        assert lo.x[0] == pytest.approx(1.0)

    def test_infeasible_status(self):
        be = HighsLP()
        a = sp.csr_matrix(np.array([[1.0, 1.0], [1.0, 1.0]]))
        b = np.array([1.0, 2.0])  # contradictory rows
        sol = be.solve("min", np.zeros(2), a, b, [(0.0, None)] * 2)
        assert sol.status == "infeasible"
        assert sol.objective is None

    def test_unbounded_status(self):
        be = HighsLP()
        a = sp.csr_matrix(np.array([[1.0, -1.0]]))
        b = np.array([0.0])
        sol = be.solve("max", np.array([1.0, 1.0]), a, b,
                       [(0.0, None)] * 2)
        assert sol.status == "unbounded"


class TestCvxoptQP:
    def test_unconstrained_projection(self):
        # project b onto the column space with nonnegativity slack enough
        qp = CvxoptQP()
        a = np.eye(3)
        b = np.array([0.2, 0.3, 0.5])
        sol = qp.solve_least_squares(a, b, lb=np.zeros(3))
        assert sol.is_optimal
        assert sol.objective == pytest.approx(0.0, abs=1e-10)
        assert np.allclose(sol.x, b, atol=1e-6)

    def test_active_lower_bound(self):
        qp = CvxoptQP()
        a = np.eye(2)
        b = np.array([-1.0, 1.0])
        sol = qp.solve_least_squares(a, b, lb=np.zeros(2))
        assert sol.is_optimal
        # first coordinate clamps at 0, residual 1
        assert sol.objective == pytest.approx(1.0, abs=1e-6)
        assert sol.x[0] == pytest.approx(0.0, abs=1e-7)

    def test_equality_row(self):
        qp = CvxoptQP()
        a = np.eye(2)
        b = np.array([1.0, 1.0])
        sol = qp.solve_least_squares(a, b, lb=np.zeros(2),
                                     a_eq=np.ones((1, 2)),
                                     b_eq=np.array([1.0]))
        assert sol.is_optimal
        assert sol.x.sum() == pytest.approx(1.0, abs=1e-8)
        assert sol.objective == pytest.approx(0.5, abs=1e-6)

    def test_rank_deficient_design(self):
        # duplicated column: the Gram matrix is singular without the ridge
        qp = CvxoptQP()
        a = np.array([[1.0, 1.0], [0.0, 0.0]])
        b = np.array([1.0, 0.0])
        sol = qp.solve_least_squares(a, b, lb=np.zeros(2))
        assert sol.is_optimal
        assert sol.objective == pytest.approx(0.0, abs=1e-6)
