"""Exception types shared across the package."""


class NodeflowError(Exception):
    """Base class for all nodeflow errors."""


class DimensionMismatch(NodeflowError):
    """Input dimension does not match the field/model dimension."""


class NonFiniteState(NodeflowError):
    """An ODE trajectory produced NaN or Inf."""


class MaxStepsExceeded(NodeflowError):
    """The adaptive integrator hit its step budget before reaching t."""


class NoClosedForm(NodeflowError):
    """Requested an exact flow for a field variant that has none."""


class SingularAffine(NodeflowError):
    """Affine map is numerically singular (|det W| <= 1e-12)."""


class GridTooLarge(NodeflowError):
    """Evaluation grid would exceed the 1e7-point budget."""


class BoundViolated(NodeflowError):
    """Measured endpoint error exceeded the certified bound.

    Signals either a solver-accuracy problem or an invalid Lipschitz
    bound; the full report is attached for diagnosis.
    """

    def __init__(self, message, report):
        super().__init__(message)
        self.report = report


class NonFiniteLoss(NodeflowError):
    """Training diverged (learning rate too high for the target)."""


class BudgetMissed(NodeflowError):
    """A stage fit did not reach its error budget.

    Carries the per-stage deltas; rerun with a larger architecture or
    more epochs.
    """

    def __init__(self, message, stage_deltas):
        super().__init__(message)
        self.stage_deltas = stage_deltas


class DomainError(NodeflowError):
    """Argument outside the mathematical domain of the function."""


class TailNotConverged(NodeflowError):
    """Series truncation cap reached before the tail bound was met."""


class QuadratureNotConverged(NodeflowError):
    """Adaptive quadrature exhausted its panel or depth budget."""


class ConfigInvalid(NodeflowError):
    """Experiment config failed validation; names the offending field."""

    def __init__(self, field, message):
        super().__init__(f"config field '{field}': {message}")
        self.field = field
