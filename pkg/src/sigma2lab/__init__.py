"""Numerical toolkit for radial solutions of the sigma_2 Yamabe problem.

The metrics studied are conformal to the flat metric on R^n and singular
along a p-dimensional subspace.  Submodules cover the algebra of symmetric
functions and cones (``geometry``), the fast-decay radial profile
(``radial``), its linearization (``linearization``), indicial roots
(``indicial``), the forced mode equations (``modes``), the glued
approximate solution (``gluing``) and the verification driver (``report``).
"""

from __future__ import annotations

from .errors import *  # noqa: F401,F403
from .geometry import ModelDims, cone_membership, critical_dimension_P, product_constant_c
from .gluing import assemble_glued, cone_scan, cutoff_profile, residual_scan
from .indicial import indicial_spectrum
from .linearization import linearized_coeffs
from .modes import ModeProblem, mode_green_solve
from .radial import solve_fast_decay
from .report import RunConfig, verify_suite

__all__ = [
    "ModelDims",
    "cone_membership",
    "critical_dimension_P",
    "product_constant_c",
    "solve_fast_decay",
    "linearized_coeffs",
    "indicial_spectrum",
    "ModeProblem",
    "mode_green_solve",
    "cutoff_profile",
    "cone_scan",
    "assemble_glued",
    "residual_scan",
    "RunConfig",
    "verify_suite",
]
__version__ = "0.1.0"
