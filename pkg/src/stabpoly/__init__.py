"""Optimal stability polynomials for explicit one-step integrators.

Given a spectrum, an order ``p`` and a stage count ``s``, find the largest step
size ``H`` for which some degree-``s`` polynomial matching ``exp`` to order
``p`` keeps every scaled eigenvalue inside its stability region.
"""

from .errors import (
    FormatError,
    InfeasibleInputError,
    InvalidInputError,
    InvalidParameterError,
    InvalidStateError,
    RankDeficientError,
    SolverError,
    StabPolyError,
)
from .leastdev import LeastDevProblem, LeastDevSolution, SolverOptions, assemble, solve_least_deviation
from .optimizer import BisectionResult, RectangleResult, max_kappa, optimize_h, optimize_h_sip
from .polybasis import Basis, StabilityPolynomial, make_basis, order_condition_system
from .region import max_stable_step, region_grid, verify_feasible
from .spectra import Spectrum, SpectrumFamily, builtin, convex_hull, family, load_spectrum

__version__ = "0.1.0"

__all__ = [
    "Basis", "BisectionResult", "FormatError", "InfeasibleInputError", "InvalidInputError",
    "InvalidParameterError", "InvalidStateError", "LeastDevProblem", "LeastDevSolution",
    "RankDeficientError", "RectangleResult", "SolverError", "SolverOptions", "Spectrum",
    "SpectrumFamily", "StabPolyError", "StabilityPolynomial", "assemble", "builtin",
    "convex_hull", "family", "load_spectrum", "make_basis", "max_kappa", "max_stable_step",
    "optimize_h", "optimize_h_sip", "order_condition_system", "region_grid",
    "solve_least_deviation", "verify_feasible",
]
