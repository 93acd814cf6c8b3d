"""Stability diagnostics for explicit finite difference schemes on the half-line.

Modules: ``scheme`` (stencils and their amplification factor), ``spectral``
(companion matrix, splitting, Lopatinskii determinant), ``resolvent``
(spatial Green's function and surface waves), ``evolution`` (the operator T
and its powers), ``asymptotics`` (remainder envelopes and power bounds).
"""

from .errors import AssumptionError, NumericalError
from .scheme import Scheme, lax_friedrichs, lax_wendroff, load_scheme, validate

__all__ = ["AssumptionError", "NumericalError", "Scheme", "lax_friedrichs", "lax_wendroff",
           "load_scheme", "validate"]
__version__ = "0.1.0"
