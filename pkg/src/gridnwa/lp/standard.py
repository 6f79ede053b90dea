"""Compilation of an LPModel to ``min c x  s.t.  A x = b, x >= 0``."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from .model import LPModel, LPModelError


class InconsistentBoundsError(LPModelError):
    pass


@dataclass
class StandardFormLP:
    A: sp.csr_matrix
    b: np.ndarray
    c: np.ndarray
    c0: float
    # x_original = offset + R @ x_std
    offset: np.ndarray
    R: sp.csr_matrix
    # original row i lives in standard row i, multiplied by row_sign[i]
    row_sign: np.ndarray
    n_model_rows: int
    col_kind: np.ndarray  # "struct", "split", "slack", "bound_slack"
    source: LPModel | None = None

    @property
    def shape(self):
        return self.A.shape

    def recover_primal(self, x_std) -> np.ndarray:
        return self.offset + self.R @ np.asarray(x_std)

    def recover_duals(self, y_std) -> np.ndarray:
        """Duals of the model rows, as d(objective)/d(rhs)."""
        return self.row_sign * np.asarray(y_std)[: self.n_model_rows]


def compile_standard_form(model: LPModel) -> StandardFormLP:
    lb, ub = model.lb, model.ub
    bad = lb > ub
    if np.any(bad):
        j = int(np.flatnonzero(bad)[0])
        raise InconsistentBoundsError(
            f"variable {model.var_names()[j]} has lower bound {lb[j]} > upper bound {ub[j]}")
    n = model.n_vars
    flo, fhi = np.isfinite(lb), np.isfinite(ub)
    fixed = flo & fhi & (lb == ub)
    lower = flo & ~fixed
    upper_only = ~flo & fhi
    free = ~flo & ~fhi
    offset = np.where(fixed | lower, lb, np.where(upper_only, ub, 0.0))
    offset = np.where(np.isfinite(offset), offset, 0.0)
    width = np.where(fixed, 0, np.where(free, 2, 1))
    start = np.r_[0, np.cumsum(width)[:-1]] if n else np.zeros(0, int)
    n_struct = int(width.sum())

    one = np.flatnonzero(lower | upper_only)
    two = np.flatnonzero(free)
    r_rows = np.r_[one, two, two]
    r_cols = np.r_[start[one], start[two], start[two] + 1]
    r_vals = np.r_[np.where(lower[one], 1.0, -1.0), np.ones(two.size), -np.ones(two.size)]
    R = sp.csr_matrix((r_vals, (r_rows, r_cols)), shape=(n, n_struct))
    kinds = np.empty(n_struct, dtype=object)
    kinds[start[one]] = "struct"
    kinds[start[two]] = "split"
    kinds[start[two] + 1] = "split"
    kinds = list(kinds)
    boxed = np.flatnonzero(lower & fhi)
    bcols, bvals = start[boxed], ub[boxed] - lb[boxed]

    M = model.matrix()
    sense = model.sense
    rhs = model.rhs - M @ offset
    A_struct = (M @ R).tocsc()

    m = model.n_cons
    slack_rows = np.flatnonzero(sense != 1)
    n_slack = slack_rows.size
    slack_sign = np.where(sense[slack_rows] == 0, 1.0, -1.0)
    S = sp.csc_matrix((slack_sign, (slack_rows, np.arange(n_slack))), shape=(m, n_slack))
    kinds += ["slack"] * n_slack

    nb = boxed.size
    A = sp.hstack([A_struct, S, sp.csc_matrix((m, nb))], format="csr")
    b = rhs
    if nb:
        Bnd = sp.csr_matrix(
            (np.ones(2 * nb), (np.r_[np.arange(nb), np.arange(nb)],
                               np.r_[bcols, n_struct + n_slack + np.arange(nb)])),
            shape=(nb, n_struct + n_slack + nb))
        A = sp.vstack([A, Bnd], format="csr")
        b = np.r_[b, bvals]
        kinds += ["bound_slack"] * nb
    R = sp.hstack([R, sp.csr_matrix((n, n_slack + nb))], format="csr")

    row_sign = np.ones(m)
    flip = np.flatnonzero(b[:m] < 0)
    if flip.size:
        row_sign[flip] = -1.0
        D = sp.diags(np.r_[row_sign, np.ones(nb)])
        A = (D @ A).tocsr()
        b = np.r_[b[:m] * row_sign, b[m:]]

    c_model = model.c
    c = R.T @ c_model
    c0 = float(c_model @ offset + model.constant)
    model.frozen = True
    return StandardFormLP(A=A, b=np.asarray(b, float), c=np.asarray(c, float), c0=c0,
                          offset=offset, R=R, row_sign=row_sign, n_model_rows=m,
                          col_kind=np.array(kinds, dtype=object), source=model)
