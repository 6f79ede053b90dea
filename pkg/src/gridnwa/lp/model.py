"""Algebraic LP container.

Variables are declared in named blocks (numpy index arrays) and constraints
are added row-vectorised, so an 8760-hour dispatch model can be assembled
without a Python loop per hour.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

SENSES = ("<=", "==", ">=")


class LPModelError(ValueError):
    pass


@dataclass(frozen=True)
class Block:
    name: str
    start: int
    shape: tuple

    @property
    def size(self) -> int:
        return int(np.prod(self.shape, dtype=int))

    @property
    def index(self) -> np.ndarray:
        return np.arange(self.start, self.start + self.size).reshape(self.shape)


class LPModel:
    """Minimise ``c @ x + constant`` subject to row constraints and bounds."""

    def __init__(self, name: str = "lp"):
        self.name = name
        self.var_blocks: dict[str, Block] = {}
        self.con_blocks: dict[str, Block] = {}
        self._lb: list[np.ndarray] = []
        self._ub: list[np.ndarray] = []
        self._rows: list[np.ndarray] = []
        self._cols: list[np.ndarray] = []
        self._vals: list[np.ndarray] = []
        self._sense: list[np.ndarray] = []
        self._rhs: list[np.ndarray] = []
        self._obj_idx: list[np.ndarray] = []
        self._obj_val: list[np.ndarray] = []
        self.constant = 0.0
        self.n_vars = 0
        self.n_cons = 0
        self.frozen = False

    def _check_open(self):
        if self.frozen:
            raise LPModelError(f"model {self.name!r} is frozen (already compiled)")

    def add_variables(self, name, shape=(), lb=0.0, ub=np.inf) -> np.ndarray:
        """Declare a block of variables; returns their indices with ``shape``."""
        self._check_open()
        if name in self.var_blocks:
            raise LPModelError(f"duplicate variable block {name!r}")
        shape = (int(shape),) if np.ndim(shape) == 0 else tuple(int(k) for k in shape)
        block = Block(name, self.n_vars, shape)
        n = block.size
        self._lb.append(np.broadcast_to(np.asarray(lb, float), shape).reshape(-1).copy())
        self._ub.append(np.broadcast_to(np.asarray(ub, float), shape).reshape(-1).copy())
        self.var_blocks[name] = block
        self.n_vars += n
        return block.index

    def add_constraints(self, name, terms, sense, rhs) -> np.ndarray:
        """Add rows ``sum_k coef_k[i] * x[idx_k[i]]  sense  rhs[i]``.

        ``terms`` is a list of ``(coef, idx)`` pairs; ``coef`` broadcasts
        against ``idx``, and every ``idx`` must share one shape, which is the
        shape of the constraint block.
        """
        self._check_open()
        if sense not in SENSES:
            raise LPModelError(f"unknown sense {sense!r}")
        if name in self.con_blocks:
            raise LPModelError(f"duplicate constraint block {name!r}")
        if not terms:
            raise LPModelError(f"constraint block {name!r} has no terms")
        shape = np.shape(terms[0][1])
        block = Block(name, self.n_cons, tuple(shape))
        rows = block.index.reshape(-1)
        for coef, idx in terms:
            idx = np.asarray(idx)
            if idx.shape != shape:
                raise LPModelError(f"{name}: term shape {idx.shape} != {shape}")
            idx = idx.reshape(-1)
            if idx.size and (idx.min() < 0 or idx.max() >= self.n_vars):
                raise LPModelError(f"{name}: references undeclared variable")
            coef = np.broadcast_to(np.asarray(coef, float), shape).reshape(-1)
            if not np.all(np.isfinite(coef)):
                raise LPModelError(f"{name}: non-finite coefficient")
            self._rows.append(rows)
            self._cols.append(idx)
            self._vals.append(coef.copy())
        rhs = np.broadcast_to(np.asarray(rhs, float), shape).reshape(-1).copy()
        if not np.all(np.isfinite(rhs)):
            raise LPModelError(f"{name}: non-finite right-hand side")
        self._sense.append(np.full(rows.size, SENSES.index(sense), dtype=np.int8))
        self._rhs.append(rhs)
        self.con_blocks[name] = block
        self.n_cons += rows.size
        return block.index

    def add_objective(self, idx, coef) -> None:
        self._check_open()
        idx = np.asarray(idx)
        coef = np.broadcast_to(np.asarray(coef, float), idx.shape).reshape(-1)
        idx = idx.reshape(-1)
        if not np.all(np.isfinite(coef)):
            raise LPModelError("non-finite objective coefficient")
        self._obj_idx.append(idx)
        self._obj_val.append(coef.copy())

    # -- assembled views -------------------------------------------------

    @property
    def lb(self) -> np.ndarray:
        return np.concatenate(self._lb) if self._lb else np.zeros(0)

    @property
    def ub(self) -> np.ndarray:
        return np.concatenate(self._ub) if self._ub else np.zeros(0)

    @property
    def c(self) -> np.ndarray:
        c = np.zeros(self.n_vars)
        for idx, val in zip(self._obj_idx, self._obj_val):
            np.add.at(c, idx, val)
        return c

    @property
    def sense(self) -> np.ndarray:
        """Row senses coded 0 (<=), 1 (==), 2 (>=)."""
        return np.concatenate(self._sense) if self._sense else np.zeros(0, np.int8)

    @property
    def rhs(self) -> np.ndarray:
        return np.concatenate(self._rhs) if self._rhs else np.zeros(0)

    def matrix(self) -> sp.csr_matrix:
        if not self._rows:
            return sp.csr_matrix((self.n_cons, self.n_vars))
        M = sp.csr_matrix(
            (np.concatenate(self._vals), (np.concatenate(self._rows), np.concatenate(self._cols))),
            shape=(self.n_cons, self.n_vars),
        )
        M.sum_duplicates()
        M.eliminate_zeros()
        return M

    def objective_value(self, x) -> float:
        return float(self.c @ np.asarray(x) + self.constant)

    def var_names(self) -> list[str]:
        names = [""] * self.n_vars
        for blk in self.var_blocks.values():
            for k, flat in enumerate(np.ndindex(*blk.shape) if blk.shape else [()]):
                suffix = "[" + ",".join(map(str, flat)) + "]" if flat else ""
                names[blk.start + k] = blk.name + suffix
        return names

    def con_names(self) -> list[str]:
        names = [""] * self.n_cons
        for blk in self.con_blocks.values():
            for k, flat in enumerate(np.ndindex(*blk.shape) if blk.shape else [()]):
                suffix = "[" + ",".join(map(str, flat)) + "]" if flat else ""
                names[blk.start + k] = blk.name + suffix
        return names

    def values(self, x, name) -> np.ndarray:
        """Slice of a primal vector belonging to variable block ``name``."""
        blk = self.var_blocks[name]
        return np.asarray(x)[blk.start:blk.start + blk.size].reshape(blk.shape)

    def row_values(self, y, name) -> np.ndarray:
        blk = self.con_blocks[name]
        return np.asarray(y)[blk.start:blk.start + blk.size].reshape(blk.shape)
