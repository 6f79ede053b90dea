"""KKT certification of an optimal standard-form solution."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .solvers import LPSolution
from .standard import StandardFormLP


@dataclass(frozen=True)
class CertificationReport:
    primal_residual: float      # ||Ax - b||_inf, scaled by 1 + ||b||_inf
    primal_bound_violation: float  # max(0, -x)
    dual_residual: float        # max(0, -(c - A'y)), scaled by 1 + ||c||_inf
    duality_gap: float          # |c x - b y| / (1 + |c x|)
    complementarity: float      # max |x_j * d_j|, scaled by 1 + |c x|
    passed: bool

    def __str__(self):
        flag = "PASS" if self.passed else "FAIL"
        return (f"{flag} primal={self.primal_residual:.2e} bound={self.primal_bound_violation:.2e} "
                f"dual={self.dual_residual:.2e} gap={self.duality_gap:.2e} "
                f"cs={self.complementarity:.2e}")


def certify(lp: StandardFormLP, sol: LPSolution, primal_tol: float = 1e-7,
            dual_tol: float = 1e-7, gap_tol: float = 1e-6,
            cs_tol: float = 1e-6) -> CertificationReport:
    if not sol.optimal:
        raise ValueError(f"cannot certify a {sol.status} solution")
    x = np.asarray(sol.x_std, float)
    y = np.asarray(sol.y_std, float)
    if y.size == 0:
        y = np.zeros(lp.A.shape[0])
    r = lp.A @ x - lp.b
    primal = float(np.abs(r).max(initial=0.0)) / (1.0 + float(np.abs(lp.b).max(initial=0.0)))
    bound = float(max(0.0, -x.min(initial=0.0)))
    d = lp.c - lp.A.T @ y
    cscale = 1.0 + float(np.abs(lp.c).max(initial=0.0))
    dual = float(max(0.0, -d.min(initial=0.0))) / cscale
    px = float(lp.c @ x)
    gap = abs(px - float(lp.b @ y)) / (1.0 + abs(px))
    cs = float(np.abs(x * d).max(initial=0.0)) / (1.0 + abs(px))
    ok = (primal <= primal_tol and bound <= primal_tol and dual <= dual_tol and gap <= gap_tol
          and cs <= cs_tol)
    return CertificationReport(primal, bound, dual, gap, cs, ok)
