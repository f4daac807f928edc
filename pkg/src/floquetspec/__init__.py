"""Floquet spectral analysis of periodic differential operators.

Monodromy matrices and multiplicators, Hill band structure, the half-line
resolvent, and sampled certificates that a point is not an eigenvalue of an
integro-differential perturbation.
"""
__version__ = "0.1.0"

from .expr import parse, unparse, evaluate, evaluate_array  # noqa: E402
from .kernel import BACKEND, AVAILABLE_BACKENDS  # noqa: E402
from .periodic_ode import OperatorSpec, monodromy, matriciant_samples  # noqa: E402
from .floquet import (classify_multiplicators, floquet_decomposition, multiplicators_at,  # noqa: E402
                      halfline_invertibility, wholeline_spectrum_membership)
from .hill import HillSpec, band_structure, classify_hill_point, discriminant  # noqa: E402
from .perturbation import PerturbationSpec, certify_absence  # noqa: E402

__all__ = [
    "__version__", "parse", "unparse", "evaluate", "evaluate_array", "BACKEND", "AVAILABLE_BACKENDS",
    "OperatorSpec", "monodromy", "matriciant_samples", "classify_multiplicators", "floquet_decomposition",
    "multiplicators_at", "halfline_invertibility", "wholeline_spectrum_membership", "HillSpec",
    "band_structure", "classify_hill_point", "discriminant", "PerturbationSpec", "certify_absence",
]
