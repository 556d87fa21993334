"""Resonances of a coupled-channel model in static and oscillating fields.

Public surface: the Hermite-Gaussian coupling family, resolvent and F
evaluators with analytic continuation, certified window zero finding, the
truncated dilated Floquet operator, field sweeps, and brute-force oracle
references.
"""

__version__ = "0.1.0"

from .formfactor import (
    DilationParameter,
    EvalOverflow,
    FormFactor,
    Term,
    conj_reflect,
    dilate,
    eval_momentum,
    eval_momentum_log,
    fourier_transform,
    translate_modulate,
)
from .resolvent import (
    CutProximityError,
    QuadratureError,
    QuadratureSettings,
    ResolventEvaluator,
    RoucheCertificate,
    SectorLimitError,
)
from .rootfind import (
    BoundaryZeroError,
    Resonance,
    Window,
    find_zeros,
    multiplicity_estimate,
    winding_number,
)
from .floquet import (
    FloquetEigenpair,
    FloquetProblem,
    eigen_near,
    hermite_functions,
    load_matrix,
    momentum_squared_matrix,
    save_matrix,
)
from .sweep import SlopeFit, SweepResult, ac_sweep, dc_sweep, fit_slope
from .oracle import (
    PoleTestResult,
    TaylorPathError,
    erfc_closed_form,
    erfc_free_element,
    full_resolvent_pole_test,
    grid_scan,
    ode_resolvent_oracle,
    taylor_continuation_oracle,
    verify_report,
)

__all__ = [
    "__version__",
    "DilationParameter", "EvalOverflow", "FormFactor", "Term",
    "conj_reflect", "dilate", "eval_momentum", "eval_momentum_log",
    "fourier_transform", "translate_modulate",
    "CutProximityError", "QuadratureError", "QuadratureSettings",
    "ResolventEvaluator", "RoucheCertificate", "SectorLimitError",
    "BoundaryZeroError", "Resonance", "Window", "find_zeros",
    "multiplicity_estimate", "winding_number",
    "FloquetEigenpair", "FloquetProblem", "eigen_near",
    "hermite_functions", "load_matrix", "momentum_squared_matrix",
    "save_matrix",
    "SlopeFit", "SweepResult", "ac_sweep", "dc_sweep", "fit_slope",
    "PoleTestResult", "TaylorPathError", "erfc_closed_form",
    "erfc_free_element", "full_resolvent_pole_test", "grid_scan",
    "ode_resolvent_oracle", "taylor_continuation_oracle", "verify_report",
]
