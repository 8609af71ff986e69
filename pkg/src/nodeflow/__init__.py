"""nodeflow: invertible neural-ODE flow networks with verified error bounds.

A numerical library and CLI built around flow endpoints (time-1 maps of
Lipschitz vector fields), invertible networks composed from them, a
measurable Gronwall-type endpoint error bound, and the L^1-vs-L^p
approximation gap of a singular comparison series.
"""

from ._kernels import backend_name
from . import approx_lab, field_zoo, flow_engine, inn_model, norm_lab, ode_core
from .errors import (BoundViolated, BudgetMissed, ConfigInvalid,
                     DimensionMismatch, DomainError, GridTooLarge,
                     MaxStepsExceeded, NoClosedForm, NodeflowError,
                     NonFiniteLoss, NonFiniteState, QuadratureNotConverged,
                     SingularAffine, TailNotConverged)

__version__ = "0.1.0"

__all__ = [
    "approx_lab", "field_zoo", "flow_engine", "inn_model", "norm_lab",
    "ode_core", "backend_name",
    "NodeflowError", "DimensionMismatch", "NonFiniteState",
    "MaxStepsExceeded", "NoClosedForm", "SingularAffine", "GridTooLarge",
    "BoundViolated", "NonFiniteLoss", "BudgetMissed", "DomainError",
    "TailNotConverged", "QuadratureNotConverged", "ConfigInvalid",
]
