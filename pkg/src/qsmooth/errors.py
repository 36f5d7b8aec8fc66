"""Exception hierarchy shared by all qsmooth modules."""


class QSmoothError(Exception):
    """Base class for all package errors."""


class InvalidStateError(QSmoothError, ValueError):
    """A matrix violates the invariants of the requested state/effect kind."""


class ConfigError(QSmoothError, ValueError):
    """Invalid model or experiment configuration."""


class PropagationError(QSmoothError, ArithmeticError):
    """A map produced an unusable result (vanishing trace, drift, non-finite).

    ``step`` is the grid index at which the failure occurred, when known.
    """

    def __init__(self, message, step=None):
        if step is not None:
            message = f"{message} (step {step})"
        super().__init__(message)
        self.step = step


class DriftError(PropagationError):
    """Anti-Hermitian drift exceeded the hermitize threshold."""


class EstimationError(QSmoothError, ArithmeticError):
    """Ensemble cannot support the requested estimate (e.g. all-zero weights)."""

    def __init__(self, message, step=None):
        if step is not None:
            message = f"{message} (step {step})"
        super().__init__(message)
        self.step = step
