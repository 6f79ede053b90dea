from .certify import CertificationReport, certify
from .model import LPModel, LPModelError
from .mps import read_mps, write_mps
from .solvers import (BACKENDS, INFEASIBLE, OPTIMAL, UNBOUNDED, IterationLimitError, LPSolution,
                      Tolerances, highs, revised_simplex, solve, solve_model)
from .standard import InconsistentBoundsError, StandardFormLP, compile_standard_form

__all__ = [
    "BACKENDS", "CertificationReport", "INFEASIBLE", "InconsistentBoundsError", "IterationLimitError",
    "LPModel", "LPModelError", "LPSolution", "OPTIMAL", "StandardFormLP", "Tolerances", "UNBOUNDED",
    "certify", "compile_standard_form", "highs", "read_mps", "revised_simplex", "solve",
    "solve_model", "write_mps",
]
