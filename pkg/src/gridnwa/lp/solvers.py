"""LP solvers on StandardFormLP.

``simplex`` is the reference: dense two-phase revised simplex with Bland's
rule. ``highs`` hands the same standard form to scipy's HiGHS and exists for
the 8760-hour models, which are far beyond a dense basis inverse.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
from scipy.optimize import linprog

from .model import LPModel
from .standard import StandardFormLP, compile_standard_form

log = logging.getLogger(__name__)

OPTIMAL, INFEASIBLE, UNBOUNDED, ITERATION_LIMIT = "optimal", "infeasible", "unbounded", "iteration_limit"


class IterationLimitError(RuntimeError):
    def __init__(self, msg, basis=None):
        super().__init__(msg)
        self.basis = basis


@dataclass(frozen=True)
class Tolerances:
    feasibility: float = 1e-7
    optimality: float = 1e-8
    pivot: float = 1e-7       # relative to the largest entry of the entering column
    max_iter: int = 50_000
    refactor_every: int = 50


@dataclass
class LPSolution:
    status: str
    x: np.ndarray | None = None       # model variables
    duals: np.ndarray | None = None   # model rows, d(obj)/d(rhs)
    objective: float = float("nan")
    x_std: np.ndarray | None = None
    y_std: np.ndarray | None = None
    basis: np.ndarray | None = None
    iterations: int = 0
    backend: str = ""
    info: dict = field(default_factory=dict)

    @property
    def optimal(self) -> bool:
        return self.status == OPTIMAL


# -- reference revised simplex -----------------------------------------------

class _Basis:
    """Explicit basis inverse with rank-one (eta) updates and periodic refactor."""

    def __init__(self, A, basis, tol):
        self.A = A
        self.basis = np.array(basis)
        self.tol = tol
        self.refactor()

    def refactor(self):
        self.Binv = np.linalg.inv(self.A[:, self.basis])
        self.updates = 0

    def pivot(self, row, col, u):
        piv = u[row]
        E = self.Binv
        E[row] /= piv
        others = np.arange(E.shape[0]) != row
        E[others] -= np.outer(u[others], E[row])
        self.basis[row] = col
        self.updates += 1
        if self.updates >= self.tol.refactor_every:
            self.refactor()


def _simplex_phase(A, b, c, B: _Basis, allowed, tol, it0=0):
    """Bland's-rule primal simplex from a feasible basis. Returns (status, iters)."""
    m, n = A.shape
    it = it0
    colscale = np.maximum(1.0, np.abs(A).max(axis=0))
    while True:
        if it >= tol.max_iter:
            raise IterationLimitError(f"simplex exceeded {tol.max_iter} iterations", B.basis.copy())
        xB = B.Binv @ b
        y = c[B.basis] @ B.Binv
        d = c - y @ A
        in_basis = np.zeros(n, bool)
        in_basis[B.basis] = True
        thresh = tol.optimality * np.maximum(colscale, np.abs(c))
        cand = np.flatnonzero(allowed & ~in_basis & (d < -thresh))
        if cand.size == 0:
            return OPTIMAL, it
        j = int(cand[0])  # Bland: lowest index entering
        u = B.Binv @ A[:, j]
        # entries this small are round-off in the eta-updated inverse, not pivots
        pos = u > tol.pivot * max(1.0, float(np.abs(u).max()))
        if not pos.any():
            return UNBOUNDED, it
        ratios = np.full(m, np.inf)
        ratios[pos] = np.maximum(xB[pos], 0.0) / u[pos]
        rmin = ratios.min()
        ties = np.flatnonzero(ratios <= rmin + tol.pivot * max(1.0, rmin))
        row = int(ties[np.argmin(B.basis[ties])])  # Bland: lowest index leaving
        B.pivot(row, j, u)
        it += 1


def revised_simplex(lp: StandardFormLP, tol: Tolerances = Tolerances()) -> LPSolution:
    A = lp.A.toarray() if sp.issparse(lp.A) else np.array(lp.A, float)
    b = np.array(lp.b, float)
    c = np.array(lp.c, float)
    m, n = A.shape
    neg = b < 0
    A[neg] *= -1
    b[neg] *= -1
    sign = np.where(neg, -1.0, 1.0)

    if m == 0:
        if np.any(c < -tol.optimality):
            return LPSolution(UNBOUNDED, backend="simplex")
        x_std = np.zeros(n)
        return _finish(lp, x_std, np.zeros(0), np.zeros(0, int), 0)

    # phase 1: artificial identity basis
    A1 = np.hstack([A, np.eye(m)])
    c1 = np.r_[np.zeros(n), np.ones(m)]
    B = _Basis(A1, np.arange(n, n + m), tol)
    allowed = np.ones(n + m, bool)
    _, it = _simplex_phase(A1, b, c1, B, allowed, tol)
    xB = B.Binv @ b
    infeas = float(c1[B.basis] @ xB)
    if infeas > tol.feasibility * max(1.0, np.abs(b).max()):
        return LPSolution(INFEASIBLE, iterations=it, backend="simplex",
                          info={"phase1_objective": infeas})

    # drive artificials out of the basis; drop redundant rows
    keep = np.ones(m, bool)
    for row in range(m):
        if B.basis[row] < n:
            continue
        r = B.Binv[row] @ A
        r[B.basis[B.basis < n]] = 0.0
        cand = np.flatnonzero(np.abs(r) > 1e-7)
        if cand.size:
            j = int(cand[0])
            B.pivot(row, j, B.Binv @ A1[:, j])
        else:
            keep[row] = False
    basis = B.basis[keep]
    A2 = A[keep]
    b2 = b[keep]
    B2 = _Basis(A2, basis, tol)
    status, it = _simplex_phase(A2, b2, c, B2, np.ones(n, bool), tol, it0=it)
    if status == UNBOUNDED:
        return LPSolution(UNBOUNDED, iterations=it, backend="simplex")
    x_std = np.zeros(n)
    x_std[B2.basis] = B2.Binv @ b2
    x_std[np.abs(x_std) < 1e-13] = 0.0
    y = np.zeros(m)
    y[keep] = c[B2.basis] @ B2.Binv
    y = y * sign
    return _finish(lp, x_std, y, B2.basis.copy(), it, "simplex")


def _finish(lp, x_std, y_std, basis, iters, backend="simplex", info=None):
    x = lp.recover_primal(x_std)
    duals = lp.recover_duals(y_std) if y_std.size else np.zeros(lp.n_model_rows)
    obj = float(lp.c @ x_std + lp.c0)
    return LPSolution(OPTIMAL, x=x, duals=duals, objective=obj, x_std=x_std, y_std=y_std,
                      basis=basis, iterations=iters, backend=backend, info=info or {})


# -- HiGHS backend -------------------------------------------------------------

def highs(lp: StandardFormLP, tol: Tolerances = Tolerances()) -> LPSolution:
    res = linprog(lp.c, A_eq=lp.A.tocsc(), b_eq=lp.b, bounds=(0, None), method="highs",
                  options={"primal_feasibility_tolerance": tol.feasibility,
                           "dual_feasibility_tolerance": tol.optimality,
                           "presolve": True})
    if res.status == 2:
        return LPSolution(INFEASIBLE, backend="highs", info={"message": res.message})
    if res.status == 3:
        return LPSolution(UNBOUNDED, backend="highs", info={"message": res.message})
    if res.status == 1:
        raise IterationLimitError(f"HiGHS: {res.message}")
    if res.status != 0:
        raise RuntimeError(f"HiGHS failed: {res.message}")
    x_std = np.maximum(res.x, 0.0)
    y = np.asarray(res.eqlin.marginals, float)
    return _finish(lp, x_std, y, np.zeros(0, int), int(getattr(res, "nit", 0)), "highs",
                   {"message": res.message})


BACKENDS = {"simplex": revised_simplex, "highs": highs}

# dense simplex beyond this many standard-form cells is hopeless
AUTO_DENSE_LIMIT = 400_000


def solve(lp: StandardFormLP, tol: Tolerances | None = None, backend: str = "simplex") -> LPSolution:
    """Solve a compiled LP with the named backend ("simplex", "highs" or "auto")."""
    tol = tol or Tolerances()
    if backend == "auto":
        m, n = lp.shape
        backend = "simplex" if m * n <= AUTO_DENSE_LIMIT else "highs"
    try:
        fn = BACKENDS[backend]
    except KeyError:
        raise ValueError(f"unknown LP backend {backend!r}; have {sorted(BACKENDS)}") from None
    log.debug("solving %s LP %s with %s", getattr(lp.source, "name", "?"), lp.shape, backend)
    return fn(lp, tol)


def solve_model(model: LPModel, tol: Tolerances | None = None, backend: str = "auto"):
    """Compile and solve; returns ``(StandardFormLP, LPSolution)``."""
    lp = compile_standard_form(model)
    return lp, solve(lp, tol, backend)
