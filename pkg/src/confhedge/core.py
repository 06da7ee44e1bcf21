"""Domain types, simplex arithmetic and exponential-weight kernels.

Weight distributions are plain 1-d ``float64`` arrays on the probability
simplex; :func:`check_distribution` is the gatekeeper.  A learning rate of
``math.inf`` is a legal value everywhere (it is the rate used on the first
round) and every kernel implements its analytic limit.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .exceptions import (
    DegenerateDistributionError,
    InfiniteDivergenceError,
    ValidationError,
)

SIMPLEX_TOL = 1e-12

# above this value of eta * (mean - min) the expm1 form of the mixloss loses
# nothing to the min-shifted form and risks overflow
_EXPM1_SWITCH = 30.0

WeightDistribution = np.ndarray


def ln_star(n: int) -> float:
    """Return ``max(1, ln n)``, the log factor used by the adaptive learning rate."""
    if isinstance(n, bool) or int(n) != n or n < 1:
        raise ValidationError(f"invalid expert count {n!r}; need a positive integer")
    return max(1.0, math.log(n))


def uniform(n: int) -> WeightDistribution:
    ln_star(n)
    return np.full(int(n), 1.0 / n)


def check_distribution(weights, name: str = "weights") -> WeightDistribution:
    """Validate a point of the simplex and return it as a float array.

    Components must be non-negative and sum to one within ``SIMPLEX_TOL``.
    """
    w = np.asarray(weights, dtype=float)
    if w.ndim != 1 or w.size == 0:
        raise ValidationError(f"{name} must be a non-empty 1-d vector")
    if not np.all(np.isfinite(w)) or np.any(w < 0):
        raise ValidationError(f"{name} must be finite and non-negative")
    total = w.sum()
    if abs(total - 1.0) > SIMPLEX_TOL * max(1, w.size):
        raise ValidationError(f"{name} must sum to 1, got {total!r}")
    return w


def normalize(weights) -> WeightDistribution:
    w = np.asarray(weights, dtype=float)
    total = w.sum()
    if not total > 0:
        raise DegenerateDistributionError("cannot normalize a vector with no positive mass")
    return w / total


def relative_entropy(p, q) -> float:
    """Relative entropy ``sum p_i ln(p_i / q_i)`` with the ``0 ln 0 = 0`` convention."""
    p = np.asarray(p, dtype=float)
    q = np.asarray(q, dtype=float)
    if p.shape != q.shape:
        raise ValidationError(f"dimension mismatch: {p.shape} vs {q.shape}")
    support = p > 0
    if np.any(q[support] <= 0):
        raise InfiniteDivergenceError("q vanishes on the support of p")
    ps = p[support]
    return max(0.0, float(np.sum(ps * np.log(ps / q[support]))))


def _support(weights: np.ndarray, values: np.ndarray) -> np.ndarray:
    if weights.shape != values.shape:
        raise ValidationError(f"dimension mismatch: {weights.shape} vs {values.shape}")
    support = weights > 0
    if not support.any():
        raise DegenerateDistributionError("weight vector has no positive component")
    return support


def stable_exp_weights(weights, exponents, eta: float) -> WeightDistribution:
    """Normalized ``w_i exp(-eta x_i)``.

    The exponents are shifted by their minimum over the support of ``w``
    before exponentiation.  For ``eta = inf`` the mass of ``w`` restricted to
    the argmin set is returned, renormalized.
    """
    w = np.asarray(weights, dtype=float)
    x = np.asarray(exponents, dtype=float)
    support = _support(w, x)
    if not eta > 0:
        raise ValidationError(f"learning rate must be positive, got {eta!r}")
    x_min = x[support].min()
    out = np.zeros_like(w)
    if math.isinf(eta):
        winners = support & (x == x_min)
        out[winners] = w[winners]
    else:
        out[support] = w[support] * np.exp(-eta * (x[support] - x_min))
    return out / out.sum()


def mixloss(weights, losses, eta: float) -> float:
    """Soft minimum ``-(1/eta) ln sum w_i exp(-eta x_i)``.

    At ``eta = inf`` this is the minimum of ``x`` over the support of ``w``.
    For moderate ``eta`` the sum is formed around the weighted mean with
    ``expm1``/``log1p`` so that the gap to the mean keeps full relative
    precision even when ``eta`` is tiny.
    """
    w = np.asarray(weights, dtype=float)
    x = np.asarray(losses, dtype=float)
    support = _support(w, x)
    ws, xs = w[support], x[support]
    x_min = xs.min()
    if math.isinf(eta):
        return float(x_min)
    if not eta > 0:
        raise ValidationError(f"learning rate must be positive, got {eta!r}")
    ws = ws / ws.sum()
    mean = float(ws @ xs)
    if eta * (mean - x_min) <= _EXPM1_SWITCH:
        excess = float(ws @ np.expm1(-eta * (xs - mean)))
        return min(mean, mean - math.log1p(excess) / eta)
    return float(x_min - math.log(ws @ np.exp(-eta * (xs - x_min))) / eta)


def convex_combination(weights, values) -> float:
    """``weights @ values`` clipped to the range of the values with positive weight.

    The clip only removes rounding, so equal values combine to exactly that value.
    """
    w = np.asarray(weights, dtype=float)
    x = np.asarray(values, dtype=float)
    active = x[w > 0]
    return float(np.clip(w @ x, active.min(), active.max()))


def weighted_variance(weights, values) -> float:
    w = np.asarray(weights, dtype=float)
    x = np.asarray(values, dtype=float)
    if w.shape != x.shape:
        raise ValidationError(f"dimension mismatch: {w.shape} vs {x.shape}")
    mean = w @ x
    return float(w @ (x - mean) ** 2)


@dataclass(frozen=True)
class RoundInput:
    """Losses and confidence levels revealed on one round of loss allocation."""

    losses: np.ndarray
    confidences: np.ndarray

    def __post_init__(self):
        losses = np.asarray(self.losses, dtype=float)
        conf = np.asarray(self.confidences, dtype=float)
        if losses.ndim != 1 or losses.size == 0:
            raise ValidationError("losses must be a non-empty 1-d vector")
        if conf.shape != losses.shape:
            raise ValidationError(
                f"confidences have shape {conf.shape}, losses have {losses.shape}"
            )
        if not np.all(np.isfinite(losses)):
            raise ValidationError("losses must be finite")
        check_confidences(conf)
        object.__setattr__(self, "losses", losses)
        object.__setattr__(self, "confidences", conf)

    @classmethod
    def full_confidence(cls, losses) -> "RoundInput":
        losses = np.asarray(losses, dtype=float)
        return cls(losses, np.ones_like(losses))


def check_confidences(conf: np.ndarray, where: str = "") -> np.ndarray:
    if np.any(~np.isfinite(conf)) or np.any(conf < 0) or np.any(conf > 1):
        raise ValidationError(f"confidences must lie in [0, 1]{where}")
    if not conf.sum() > 0:
        raise ValidationError(f"zero confidence mass{where}")
    return conf


@dataclass(frozen=True)
class MixingMemory:
    """Running uniform average of the loss-updated weights seen so far.

    ``count`` includes the uniform initial vector, so after ``t`` loss
    updates it equals ``t + 1``.
    """

    past_mean: np.ndarray
    count: int = 1

    @classmethod
    def initial(cls, n: int) -> "MixingMemory":
        return cls(uniform(n), 1)


@dataclass(frozen=True)
class LearnerState:
    """Everything a learner carries from one round to the next."""

    round: int
    posterior: np.ndarray
    cumulative_gap: float
    learning_rate: float
    mixing_memory: MixingMemory
    # running sum of p * (l - offset); the unmixed learner weighs experts by it
    cumulative_exponents: Optional[np.ndarray] = None

    @classmethod
    def initial(cls, n_experts: int) -> "LearnerState":
        w = uniform(n_experts)
        return cls(0, w, 0.0, math.inf, MixingMemory(w.copy(), 1), np.zeros(n_experts))

    @property
    def n_experts(self) -> int:
        return self.posterior.size

    @property
    def ln_star_n(self) -> float:
        return ln_star(self.n_experts)


def learning_rate_from_gap(cumulative_gap: float, n_experts: int) -> float:
    if cumulative_gap > 0:
        return ln_star(n_experts) / cumulative_gap
    return math.inf


@dataclass(frozen=True)
class RoundRecord:
    """Per-round diagnostics produced by both learners.

    ``offset`` is the value blended into the effective losses
    ``p*l + (1-p)*offset``: the allocation loss ``h`` for loss allocation,
    the loss ``a`` of the aggregated forecast for forecasting.
    The confidence regret is measured with the same value.
    """

    t: int
    algorithm_loss: float
    mixloss: float
    gap: float
    learning_rate: float
    loss_min: float
    loss_max: float
    loss_range: float
    weight_variance: float
    posterior: np.ndarray
    posterior_mu: np.ndarray
    prediction: np.ndarray
    losses: np.ndarray
    confidences: np.ndarray
    aggregate_loss: Optional[float] = None
    forecast: Optional[float] = None
    outcome: Optional[float] = None

    @property
    def offset(self) -> float:
        return self.algorithm_loss if self.aggregate_loss is None else self.aggregate_loss

    @property
    def effective_losses(self) -> np.ndarray:
        p = self.confidences
        return p * self.losses + (1 - p) * self.offset
