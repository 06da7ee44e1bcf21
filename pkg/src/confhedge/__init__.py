"""Online aggregation of signed, unbounded losses with shifting experts and
confidence levels.

:class:`ConfHedge1` allocates losses among experts; :class:`ConfHedge2`
aggregates numeric forecasts under a convex loss.  Both adapt their
learning rate to the observed mixability gap and track shifting leaders
through Fixed Share or Uniform Past mixing.
"""

from .confhedge1 import ConfHedge1
from .confhedge2 import (
    AbsoluteLoss,
    BiasedAbsoluteLoss,
    ConfHedge2,
    ConvexityWarning,
    ForecastRound,
    PluggableLoss,
)
from .confidence import ConfidenceProfile, Trapezoid, load_profiles
from .core import LearnerState, RoundInput, RoundRecord
from .exceptions import (
    ConfHedgeError,
    DeadEnsembleError,
    NumericalError,
    DegenerateDistributionError,
    InfiniteDivergenceError,
    UnsupportedSchemeError,
    ValidationError,
)
from .mixing import MixingScheme
from .regret import RegretLedger, bound_values, check_bounds

__all__ = [
    "AbsoluteLoss",
    "BiasedAbsoluteLoss",
    "ConfHedge1",
    "ConfHedge2",
    "ConfHedgeError",
    "ConfidenceProfile",
    "ConvexityWarning",
    "DeadEnsembleError",
    "NumericalError",
    "DegenerateDistributionError",
    "ForecastRound",
    "InfiniteDivergenceError",
    "LearnerState",
    "MixingScheme",
    "PluggableLoss",
    "RegretLedger",
    "RoundInput",
    "RoundRecord",
    "Trapezoid",
    "UnsupportedSchemeError",
    "ValidationError",
    "bound_values",
    "check_bounds",
    "load_profiles",
]

__version__ = "0.1.0"
