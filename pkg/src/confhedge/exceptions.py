"""Exception hierarchy shared by the learners, readers and the CLI."""


class ConfHedgeError(Exception):
    """Base class for every error raised by the package."""


class ValidationError(ConfHedgeError, ValueError):
    """Input violates a documented precondition (shape, range, mass)."""


class DeadEnsembleError(ValidationError):
    """All awake experts carry zero posterior mass, so no prediction exists."""


class DegenerateDistributionError(ValidationError):
    """A weight vector has no positive component."""


class InfiniteDivergenceError(ValidationError):
    """Relative entropy D(p||q) is infinite: q vanishes where p does not."""


class UnsupportedSchemeError(ConfHedgeError):
    """No published regret coefficient exists for the requested mixing scheme."""


class NumericalError(ConfHedgeError):
    """A computed quantity fails its defining equation beyond rounding."""
