"""Exception hierarchy shared across the package."""


class LossySchedError(Exception):
    """Base class for all package errors."""


class DimensionError(LossySchedError):
    """Operands have incompatible shapes."""


class NumericalError(LossySchedError):
    """Non-finite values or a failed numerical routine."""


class SingularMatrixError(NumericalError):
    """A matrix required to be invertible (or SPD) is not."""


class ConvergenceError(LossySchedError):
    """An iterative solver hit its iteration budget.

    Carries the last residual (and optionally a residual history) so the
    caller can diagnose slow convergence vs. genuine divergence.
    """

    def __init__(self, message, residual=None, history=None):
        super().__init__(message)
        self.residual = residual
        self.history = history


class PossiblyUnstableError(ConvergenceError):
    """Average-cost iteration failed to settle; the model may not be
    stabilizable at the given loss rates."""


class ModelError(LossySchedError):
    """A model invariant is violated."""


class ConfigError(LossySchedError):
    """Malformed configuration file; message is path-addressed."""


class GridOverflowError(LossySchedError):
    """State-grid closure exceeded the state budget before covering the
    truncation ball; advise a larger max_states or smaller r_max."""


class ConsistencyError(LossySchedError):
    """Monte Carlo verdicts violated a deterministic ordering property;
    usually means more replications are needed."""
