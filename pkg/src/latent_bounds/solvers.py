"""Linear and quadratic program backends.

The rest of the library talks to these thin interfaces only, so a different
solver can be swapped in without touching assembly code.  Backends are cheap
to instantiate; concurrent solves should use one instance per task.
"""

from __future__ import annotations

from abc import ABC, abstractmethod
from dataclasses import dataclass

import numpy as np
from scipy.optimize import linprog

FEASIBILITY_TOL = 1e-8
OPTIMALITY_TOL = 1e-8


class InfeasibleModel(RuntimeError):
    """The constraint system admits no distribution (model misspecified)."""


class UnboundedModel(RuntimeError):
    """Signals an assembly bug: valid assemblies are always bounded."""


class DenominatorNotPositive(RuntimeError):
    """A fractional parameter's denominator can be zero on the feasible set."""


@dataclass(frozen=True)
class LPSolution:
    status: str  # "optimal" | "infeasible" | "unbounded" | "error"
    objective: float | None
    x: np.ndarray | None

    @property
    def is_optimal(self) -> bool:
        return self.status == "optimal"


class LPBackend(ABC):
    """Solve min/max of a sparse linear objective over linear constraints."""

    @abstractmethod
    def solve(self, sense: str, c: np.ndarray, a_eq, b_eq,
              bounds) -> LPSolution:
        """sense is "min" or "max"; bounds is a list of (lo, hi) pairs."""


_STATUS = {0: "optimal", 1: "error", 2: "infeasible", 3: "unbounded",
           4: "error"}


class HighsLP(LPBackend):
    """scipy.optimize.linprog with the HiGHS solvers.

    Infeasibility is declared only on a clean certificate from the default
    method; unclear outcomes are retried once with the dual simplex.
    """

    def __init__(self, feasibility_tol: float = FEASIBILITY_TOL,
                 optimality_tol: float = OPTIMALITY_TOL):
        self.options = {
            "primal_feasibility_tolerance": feasibility_tol,
            "dual_feasibility_tolerance": optimality_tol,
            "presolve": True,
        }

    def solve(self, sense: str, c, a_eq, b_eq, bounds) -> LPSolution:
        sign = 1.0 if sense == "min" else -1.0
        c = sign * np.asarray(c, dtype=float)
        res = linprog(c, A_eq=a_eq, b_eq=b_eq, bounds=bounds,
                      method="highs", options=self.options)
        status = _STATUS.get(res.status, "error")
        if status == "error":
            res = linprog(c, A_eq=a_eq, b_eq=b_eq, bounds=bounds,
                          method="highs-ds", options=self.options)
            status = _STATUS.get(res.status, "error")
        if status != "optimal":
            return LPSolution(status=status, objective=None, x=None)
        return LPSolution(status="optimal", objective=sign * float(res.fun),
                          x=np.asarray(res.x))


@dataclass(frozen=True)
class QPSolution:
    status: str
    objective: float | None  # sum of squared residuals, unscaled
    x: np.ndarray | None

    @property
    def is_optimal(self) -> bool:
        return self.status == "optimal"


class QPBackend(ABC):
    """Minimize ||a @ x - b||^2 subject to bounds and equality rows."""

    @abstractmethod
    def solve_least_squares(self, a, b, lb, ub=None, a_eq=None,
                            b_eq=None) -> QPSolution:
        ...


class CvxoptQP(QPBackend):
    """cvxopt cone QP for the constrained least-squares problems.

    The Gram matrix a.T @ a is typically rank deficient (more latent masses
    than cells), so a tiny ridge keeps the KKT system factorizable; the
    reported objective is always the exact unregularized residual.
    """

    _RIDGES = (1e-10, 1e-8, 1e-6)

    def __init__(self, tol: float = 1e-9):
        self.tol = tol

    def solve_least_squares(self, a, b, lb, ub=None, a_eq=None,
                            b_eq=None) -> QPSolution:
        from cvxopt import matrix, solvers

        a = np.asarray(a, dtype=float)
        b = np.asarray(b, dtype=float)
        lb = np.asarray(lb, dtype=float)
        n = a.shape[1]
        gram = a.T @ a
        lin = -(a.T @ b)
        scale = max(np.trace(gram) / n, 1.0)

        g_rows = [-np.eye(n)]
        h_rows = [-lb]
        if ub is not None:
            g_rows.append(np.eye(n))
            h_rows.append(np.asarray(ub, dtype=float))
        g = matrix(np.vstack(g_rows))
        h = matrix(np.concatenate(h_rows))
        kw = {}
        if a_eq is not None:
            kw["A"] = matrix(np.atleast_2d(np.asarray(a_eq, dtype=float)))
            kw["b"] = matrix(np.asarray(b_eq, dtype=float).reshape(-1, 1))

        opts = {"show_progress": False, "abstol": self.tol,
                "reltol": self.tol, "feastol": self.tol,
                "maxiters": 200}
        last_status = "error"
        for ridge in self._RIDGES:
            p = matrix(2.0 * (gram + ridge * scale * np.eye(n)))
            q = matrix(2.0 * lin)
            try:
                sol = solvers.qp(p, q, g, h, options=opts, **kw)
            except (ValueError, ArithmeticError):
                continue
            last_status = sol["status"]
            if sol["status"] == "optimal":
                x = np.asarray(sol["x"]).ravel()
                resid = a @ x - b
                return QPSolution(status="optimal",
                                  objective=float(resid @ resid), x=x)
        if last_status in ("primal infeasible", "dual infeasible"):
            return QPSolution(status="infeasible", objective=None, x=None)
        return QPSolution(status="error", objective=None, x=None)
