"""Conformal sigma_2 curvature on the 3-sphere: pointwise algebra, functionals and a perturbed flow.

Metrics are ``g = exp(-2u) g0`` on the round unit 3-sphere with ``u``
rotationally symmetric about an axis.  The modules build up from
symmetric 3x3 Schouten data (:mod:`.curvature_algebra`), through the
discretised sphere (:mod:`.sphere_geometry`) and global functionals
(:mod:`.functionals`), to the normalised parabolic flow (:mod:`.flow_engine`)
and the batch front end (:mod:`.experiments`, :mod:`.cli`).
"""

__version__ = "0.1.0"

from .curvature_algebra import (
    SymMatrix3,
    SymTriple,
    cone_membership,
    newton_transform,
    quotient_F,
    quotient_gradient,
    quotient_hessian_form,
    sigma_k,
    sigma_k_matrix,
)
from .errors import (
    ConeExit,
    DegenerateCone,
    FlowOverflow,
    NotAdmissible,
    NotInCone,
    ParseError,
    RejectionExhausted,
    RetryExhausted,
    Sigma2FlowError,
    ValidationError,
)
from .flow_engine import FlowConfig, RunResult, TimeSeries, Verdict, eps_sweep, flow_rhs, run, step
from .functionals import FunctionalReport, dlt_sides, report
from .sphere_geometry import ConformalFactor, Grid

__all__ = [
    "ConeExit",
    "ConformalFactor",
    "DegenerateCone",
    "FlowConfig",
    "FlowOverflow",
    "FunctionalReport",
    "Grid",
    "NotAdmissible",
    "NotInCone",
    "ParseError",
    "RejectionExhausted",
    "RetryExhausted",
    "RunResult",
    "Sigma2FlowError",
    "SymMatrix3",
    "SymTriple",
    "TimeSeries",
    "ValidationError",
    "Verdict",
    "cone_membership",
    "dlt_sides",
    "eps_sweep",
    "flow_rhs",
    "newton_transform",
    "quotient_F",
    "quotient_gradient",
    "quotient_hessian_form",
    "report",
    "run",
    "sigma_k",
    "sigma_k_matrix",
    "step",
]
