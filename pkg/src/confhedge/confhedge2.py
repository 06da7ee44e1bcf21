"""ConfHedge-2: aggregation of numeric expert forecasts under a convex loss."""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from typing import Callable, Mapping, Optional, Tuple

import numpy as np
from sklearn.base import BaseEstimator, RegressorMixin
from sklearn.utils.validation import check_array, check_is_fitted

from .confhedge1 import hedge_round
from .confhedge1 import prediction_weights
from .core import LearnerState, RoundRecord, check_confidences, convex_combination
from .exceptions import ValidationError
from .mixing import MixingScheme


class ConvexityWarning(UserWarning):
    """A pluggable loss failed the midpoint convexity spot check."""


@dataclass(frozen=True)
class AbsoluteLoss:
    def __call__(self, outcome: float, forecast: float) -> float:
        return abs(outcome - forecast)

    def __str__(self):
        return "abs"


@dataclass(frozen=True)
class BiasedAbsoluteLoss:
    """``mu1 * |r|_- + mu2 * |r|_+`` with ``r = outcome - forecast``.

    ``mu1`` prices over-forecasts, ``mu2`` under-forecasts.
    """

    mu1: float
    mu2: float

    def __post_init__(self):
        if not (self.mu1 > 0 and self.mu2 > 0):
            raise ValidationError("biased loss multipliers must be positive")

    def __call__(self, outcome: float, forecast: float) -> float:
        r = outcome - forecast
        return self.mu1 * max(0.0, -r) + self.mu2 * max(0.0, r)

    def __str__(self):
        return f"biased:{self.mu1!r},{self.mu2!r}"


@dataclass(frozen=True)
class PluggableLoss:
    """User-supplied loss ``fn(outcome, forecast)``, declared convex in the forecast."""

    fn: Callable[[float, float], float]

    def __call__(self, outcome: float, forecast: float) -> float:
        return float(self.fn(outcome, forecast))


@dataclass(frozen=True)
class ForecastRound:
    """One forecasting round: expert forecasts, confidences, outcome and features.

    ``confidences`` may be ``None`` when they come from confidence profiles
    evaluated on ``features``.
    """

    forecasts: np.ndarray
    outcome: float
    confidences: Optional[np.ndarray] = None
    features: Mapping[str, float] = field(default_factory=dict)

    def __post_init__(self):
        c = np.asarray(self.forecasts, dtype=float)
        if c.ndim != 1 or c.size == 0 or not np.all(np.isfinite(c)):
            raise ValidationError("forecasts must be a non-empty vector of finite numbers")
        if not math.isfinite(float(self.outcome)):
            raise ValidationError("outcome must be finite")
        object.__setattr__(self, "forecasts", c)
        object.__setattr__(self, "outcome", float(self.outcome))
        if self.confidences is not None:
            p = np.asarray(self.confidences, dtype=float)
            if p.shape != c.shape:
                raise ValidationError(f"{p.size} confidences for {c.size} forecasts")
            check_confidences(p)
            object.__setattr__(self, "confidences", p)


def parse_loss(spec) -> Callable[[float, float], float]:
    """Accept ``"abs"``, ``"biased:<mu1>,<mu2>"``, a loss object or a callable."""
    if isinstance(spec, (AbsoluteLoss, BiasedAbsoluteLoss, PluggableLoss)):
        return spec
    if callable(spec):
        return PluggableLoss(spec)
    if spec == "abs":
        return AbsoluteLoss()
    if isinstance(spec, str) and spec.startswith("biased:"):
        try:
            mu1, mu2 = (float(v) for v in spec[len("biased:"):].split(","))
        except ValueError:
            raise ValidationError(f"malformed biased loss {spec!r}; use biased:<mu1>,<mu2>") from None
        return BiasedAbsoluteLoss(mu1, mu2)
    raise ValidationError(f"unknown loss {spec!r}")


def evaluate_loss(fn, outcome: float, forecast: float) -> float:
    return parse_loss(fn)(outcome, forecast)


def aggregate_forecast(posterior, confidences, forecasts) -> float:
    """Closed-form solution ``g`` of ``g = sum_i w_i (p_i c_i + (1 - p_i) g)``."""
    return convex_combination(prediction_weights(posterior, confidences), forecasts)


def _spot_check_convexity(fn, outcome, forecasts, gamma):
    lo, hi = float(forecasts.min()), float(forecasts.max())
    for a, b in ((lo, hi), (lo, gamma), (gamma, hi)):
        mid = fn(outcome, 0.5 * (a + b))
        chord = 0.5 * (fn(outcome, a) + fn(outcome, b))
        if mid > chord + 1e-12 * (1.0 + abs(chord)):
            warnings.warn(
                f"loss is not convex between forecasts {a!r} and {b!r} at outcome {outcome!r}",
                ConvexityWarning,
                stacklevel=3,
            )
            return


def step(
    state: LearnerState,
    forecasts,
    confidences,
    outcome: float,
    loss,
    scheme: MixingScheme,
) -> Tuple[float, RoundRecord, LearnerState]:
    """Advance ConfHedge-2 by one round; returns ``(gamma, record, next_state)``."""
    fn = parse_loss(loss)
    c = np.asarray(forecasts, dtype=float)
    p = np.asarray(confidences, dtype=float)
    if c.ndim != 1 or c.size != state.n_experts or p.shape != c.shape:
        raise ValidationError(
            f"round has shapes {c.shape}/{p.shape}, learner was built for {state.n_experts} experts"
        )
    check_confidences(p)
    gamma = aggregate_forecast(state.posterior, p, c)
    losses = np.array([fn(outcome, ci) for ci in c], dtype=float)
    a = float(fn(outcome, gamma))
    if not (np.all(np.isfinite(losses)) and math.isfinite(a)):
        raise ValidationError(f"loss function returned a non-finite value at round {state.round + 1}")
    if isinstance(fn, PluggableLoss):
        _spot_check_convexity(fn, outcome, c[p > 0], gamma)
    fields, next_state = hedge_round(state, scheme, p, losses, a)
    record = RoundRecord(
        prediction=(state.posterior * p) / (state.posterior @ p),
        aggregate_loss=a,
        forecast=gamma,
        outcome=float(outcome),
        **fields,
    )
    return gamma, record, next_state


class ConfHedge2(BaseEstimator, RegressorMixin):
    """Online aggregation of expert forecasts with confidence levels.

    ``partial_fit`` consumes rounds in order: for each row the aggregated
    forecast is formed from the current weights *before* the outcome is
    used, and it is stored in ``forecasts_``.

    Parameters
    ----------
    loss : "abs", "biased:<mu1>,<mu2>", or callable ``(outcome, forecast) -> loss``
    mixing : {"fixed-share", "uniform-past", "none"}
    alpha : "inverse-t" or float in (0, 1]
    """

    def __init__(self, loss="abs", mixing="fixed-share", alpha="inverse-t"):
        self.loss = loss
        self.mixing = mixing
        self.alpha = alpha

    def fit(self, X, y, confidences=None):
        for attr in ("state_", "records_", "forecasts_", "n_experts_in_"):
            self.__dict__.pop(attr, None)
        return self.partial_fit(X, y, confidences)

    def partial_fit(self, X, y, confidences=None):
        X = check_array(X, ensure_2d=False, dtype=float)
        if X.ndim == 1:
            X = X[None, :]
        y = np.atleast_1d(np.asarray(y, dtype=float))
        if y.shape != (X.shape[0],):
            raise ValidationError(f"need one outcome per row, got {y.shape} for {X.shape[0]} rows")
        if confidences is None:
            P = np.ones_like(X)
        else:
            P = check_array(confidences, ensure_2d=False, dtype=float)
            if P.ndim == 1:
                P = P[None, :]
            if P.shape != X.shape:
                raise ValidationError(f"confidences shape {P.shape} != forecasts shape {X.shape}")
        fn = parse_loss(self.loss)
        scheme = MixingScheme(self.mixing, self.alpha)
        if not hasattr(self, "state_"):
            self.n_experts_in_ = X.shape[1]
            self.state_ = LearnerState.initial(self.n_experts_in_)
            self.records_ = []
            self.forecasts_ = []
        elif X.shape[1] != self.n_experts_in_:
            raise ValidationError(f"expected {self.n_experts_in_} experts, got {X.shape[1]}")
        for c_t, p_t, y_t in zip(X, P, y):
            gamma, record, self.state_ = step(self.state_, c_t, p_t, y_t, fn, scheme)
            self.records_.append(record)
            self.forecasts_.append(gamma)
        return self

    def predict(self, X, confidences=None):
        """Aggregate forecasts with the current weights, without updating them."""
        check_is_fitted(self, "state_")
        X = check_array(X, ensure_2d=False, dtype=float)
        single = X.ndim == 1
        X = np.atleast_2d(X)
        P = np.ones_like(X) if confidences is None else np.atleast_2d(np.asarray(confidences, dtype=float))
        out = np.array([aggregate_forecast(self.state_.posterior, p, c) for c, p in zip(X, P)])
        return out[0] if single else out

    @property
    def weights_(self) -> np.ndarray:
        check_is_fitted(self, "state_")
        return self.state_.posterior

    @property
    def cumulative_loss_(self) -> float:
        """Cumulative loss ``A_T`` of the aggregated forecasts."""
        check_is_fitted(self, "state_")
        return math.fsum(r.aggregate_loss for r in self.records_)

    @property
    def mae_(self) -> float:
        """Mean per-round loss of the aggregate; the MAE under absolute loss."""
        check_is_fitted(self, "state_")
        return self.cumulative_loss_ / max(1, len(self.records_))
