"""Fixed-layout MPS export (and a small reader for round-trip checks)."""
from __future__ import annotations

import re

import numpy as np

from .model import LPModel

_SENSE_CODE = {0: "L", 1: "E", 2: "G"}


def _mps_name(s: str, prefix: str, k: int) -> str:
    s = re.sub(r"[^A-Za-z0-9_]", "", s)
    return s if 0 < len(s) <= 8 else f"{prefix}{k}"


def write_mps(model: LPModel, path) -> None:
    """Write ``model`` in fixed MPS. Names longer than 8 chars become R<i>/C<j>."""
    A = model.matrix().tocsc()
    c, lb, ub = model.c, model.lb, model.ub
    sense, rhs = model.sense, model.rhs
    rnames = [_mps_name(n, "R", i) for i, n in enumerate(model.con_names())]
    cnames = [_mps_name(n, "C", j) for j, n in enumerate(model.var_names())]
    if len(set(rnames)) < len(rnames):
        rnames = [f"R{i}" for i in range(len(rnames))]
    if len(set(cnames)) < len(cnames):
        cnames = [f"C{j}" for j in range(len(cnames))]
    out = [f"NAME          {model.name[:8].upper()}", "ROWS", " N  COST"]
    out += [f" {_SENSE_CODE[int(s)]}  {rn}" for s, rn in zip(sense, rnames)]
    out.append("COLUMNS")
    for j, cn in enumerate(cnames):
        entries = [("COST", c[j])] if c[j] != 0 else []
        lo, hi = A.indptr[j], A.indptr[j + 1]
        entries += [(rnames[i], v) for i, v in zip(A.indices[lo:hi], A.data[lo:hi])]
        if not entries:
            entries = [("COST", 0.0)]
        for rn, v in entries:
            out.append(f"    {cn:<8}  {rn:<8}  {v:.17g}".rstrip())
    out.append("RHS")
    for rn, v in zip(rnames, rhs):
        if v != 0:
            out.append(f"    RHS       {rn:<8}  {v:.17g}")
    if model.constant:
        out.append(f"    RHS       COST      {-model.constant:.17g}")
    out.append("BOUNDS")
    for j, cn in enumerate(cnames):
        lo, hi = lb[j], ub[j]
        if lo == hi:
            out.append(f" FX BND       {cn:<8}  {lo:.17g}")
            continue
        if not np.isfinite(lo) and not np.isfinite(hi):
            out.append(f" FR BND       {cn:<8}")
            continue
        if not np.isfinite(lo):
            out.append(f" MI BND       {cn:<8}")
        elif lo != 0:
            out.append(f" LO BND       {cn:<8}  {lo:.17g}")
        if np.isfinite(hi):
            out.append(f" UP BND       {cn:<8}  {hi:.17g}")
    out.append("ENDATA")
    with open(path, "w") as fh:
        fh.write("\n".join(out) + "\n")


def read_mps(path) -> LPModel:
    """Parse the subset of fixed MPS produced by :func:`write_mps`."""
    rows, senses, cols, coef, rhs, bounds = [], {}, [], {}, {}, {}
    section = None
    obj = None
    for line in open(path):
        if not line.strip():
            continue
        if not line.startswith(" "):
            section = line.split()[0]
            continue
        f = line.split()
        if section == "ROWS":
            if f[0] == "N":
                obj = f[1]
            else:
                rows.append(f[1]); senses[f[1]] = f[0]
        elif section == "COLUMNS":
            if f[0] not in coef:
                cols.append(f[0]); coef[f[0]] = {}
            for k in range(1, len(f), 2):
                coef[f[0]][f[k]] = float(f[k + 1])
        elif section == "RHS":
            for k in range(1, len(f), 2):
                rhs[f[k]] = float(f[k + 1])
        elif section == "BOUNDS":
            kind, col = f[0], f[2]
            lo, hi = bounds.get(col, (0.0, np.inf))
            val = float(f[3]) if len(f) > 3 else None
            if kind == "FX":
                lo = hi = val
            elif kind == "FR":
                lo, hi = -np.inf, np.inf
            elif kind == "MI":
                lo = -np.inf
            elif kind == "LO":
                lo = val
            elif kind == "UP":
                hi = val
            bounds[col] = (lo, hi)
    m = LPModel("mps")
    lb = [bounds.get(cn, (0.0, np.inf))[0] for cn in cols]
    ub = [bounds.get(cn, (0.0, np.inf))[1] for cn in cols]
    x = m.add_variables("x", len(cols), lb=lb, ub=ub)
    m.add_objective(x, [coef[cn].get(obj, 0.0) for cn in cols])
    m.constant = -rhs.get(obj, 0.0)
    code = {"L": "<=", "E": "==", "G": ">="}
    for rn in rows:
        idx = [j for j, cn in enumerate(cols) if rn in coef[cn]]
        vals = [coef[cols[j]][rn] for j in idx]
        terms = [(np.array([v]), np.array([x[j]])) for j, v in zip(idx, vals)]
        if not terms:
            terms = [(np.array([0.0]), np.array([x[0]]))]
        m.add_constraints(rn, terms, code[senses[rn]], [rhs.get(rn, 0.0)])
    return m
