"""Exception types raised across the toolkit."""


class TripMineError(Exception):
    """Base class for every toolkit error."""


class TransformError(TripMineError):
    """Datum conversion did not converge."""


class EmptyInputError(TripMineError):
    """A stream or sequence held nothing usable."""


class InconsistencyError(TripMineError):
    """Two inputs that must agree do not (e.g. a trip missing from a labeling)."""


class ParameterDomainError(TripMineError, ValueError):
    """Distribution parameters violate their positivity constraints."""


class FitError(TripMineError):
    """Every optimizer start failed to converge.

    ``best`` carries the best-so-far ``(params, log_likelihood)`` if any start
    produced a finite objective.
    """

    def __init__(self, message, best=None):
        super().__init__(message)
        self.best = best


class SpecInfeasibleError(TripMineError):
    """A synthetic scenario cannot be realized (e.g. place separation)."""


class ConfigError(TripMineError, ValueError):
    """A configuration document is malformed or violates an invariant."""
