"""ConfHedge-1: adaptive Hedge for signed unbounded losses with confidences.

Each round runs predict -> observe losses -> loss update -> mixing update ->
learning-rate update.  The functional core is :func:`step`, a pure state
transition; :class:`ConfHedge1` wraps it in the scikit-learn estimator API.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Tuple

import numpy as np
from sklearn.base import BaseEstimator
from sklearn.utils.validation import check_array, check_is_fitted

from .core import (
    convex_combination,
    LearnerState,
    RoundInput,
    RoundRecord,
    WeightDistribution,
    learning_rate_from_gap,
    mixloss,
    stable_exp_weights,
    weighted_variance,
)
from .exceptions import DeadEnsembleError, NumericalError, ValidationError
from .mixing import NONE, MixingScheme, mix


# relative tolerance on the fixed-point residual of the allocation loss
FIXED_POINT_TOL = 1e-9


def prediction_weights(posterior, confidences) -> WeightDistribution:
    """Posterior reweighted by confidence: ``w_i p_i / sum_j w_j p_j``."""
    wp = np.asarray(posterior, dtype=float) * np.asarray(confidences, dtype=float)
    mass = wp.sum()
    if not mass > 0:
        raise DeadEnsembleError("all awake experts have zero posterior mass")
    return wp / mass


def algorithm_loss(posterior, confidences, losses) -> float:
    """Closed-form solution ``h`` of ``h = sum_i w_i (p_i l_i + (1 - p_i) h)``."""
    return convex_combination(prediction_weights(posterior, confidences), losses)


def fixed_point_residual(posterior, confidences, losses, h: float) -> float:
    """``sum_i w_i (p_i l_i + (1 - p_i) h) - h``; zero at the allocation loss."""
    w = np.asarray(posterior, dtype=float)
    return float(w @ effective_losses(confidences, losses, h) - h)


def effective_losses(confidences, losses, h: float) -> np.ndarray:
    p = np.asarray(confidences, dtype=float)
    return p * np.asarray(losses, dtype=float) + (1.0 - p) * h


def loss_update(posterior, confidences, losses, h: float, eta: float) -> WeightDistribution:
    p = np.asarray(confidences, dtype=float)
    return stable_exp_weights(posterior, p * (np.asarray(losses, dtype=float) - h), eta)


def hedge_round(
    state: LearnerState,
    scheme: MixingScheme,
    confidences: np.ndarray,
    losses: np.ndarray,
    offset: float,
) -> Tuple[dict, LearnerState]:
    """Loss, mixing and learning-rate updates shared by both learners.

    ``offset`` is the loss blended into the effective losses of partially
    awake experts.  The exponents ``p * (l - offset)`` are the effective
    losses shifted by ``offset``; every quantity below is evaluated in that
    shifted frame and moved back afterwards.
    """
    w = state.posterior
    eta = state.learning_rate
    shifted = confidences * (losses - offset)
    w_mu = stable_exp_weights(w, shifted, eta)
    t = state.round + 1
    w_next, memory = mix(scheme, w_mu, state.mixing_memory, t)

    mean_shifted = float(w @ shifted)
    mix_shifted = mixloss(w, shifted, eta)
    gap = max(0.0, mean_shifted - mix_shifted)
    cumulative_gap = state.cumulative_gap + gap
    next_eta = learning_rate_from_gap(cumulative_gap, w.size)
    previous = state.cumulative_exponents
    cumulative = shifted if previous is None else previous + shifted
    if scheme.variant == NONE:
        # Without mixing, w_t^mu carries the rates of all earlier rounds and
        # an infinite first rate would zero out every non-leader for good.
        # Re-deriving the weights from cumulative exponents at the new rate
        # agrees with w_t^mu whenever the rate is unchanged.
        w_next = stable_exp_weights(np.full(w.size, 1.0 / w.size), cumulative, next_eta)
    next_state = LearnerState(
        round=t,
        posterior=w_next,
        cumulative_gap=cumulative_gap,
        learning_rate=next_eta,
        mixing_memory=memory,
        cumulative_exponents=cumulative,
    )
    loss_min = float(losses.min())
    loss_max = float(losses.max())
    fields = dict(
        t=t,
        algorithm_loss=offset + mean_shifted,
        mixloss=offset + mix_shifted,
        gap=gap,
        learning_rate=eta,
        loss_min=loss_min,
        loss_max=loss_max,
        loss_range=loss_max - loss_min,
        weight_variance=weighted_variance(w, shifted),
        posterior=w,
        posterior_mu=w_mu,
        losses=losses,
        confidences=confidences,
    )
    return fields, next_state


@dataclass(frozen=True)
class AllocationStep:
    prediction: WeightDistribution
    record: RoundRecord
    next_state: LearnerState


def step(state: LearnerState, round_input: RoundInput, scheme: MixingScheme) -> AllocationStep:
    """Advance ConfHedge-1 by one round."""
    losses, conf = round_input.losses, round_input.confidences
    if losses.size != state.n_experts:
        raise ValidationError(
            f"round has {losses.size} experts, learner was built for {state.n_experts}"
        )
    w_star = prediction_weights(state.posterior, conf)
    h = convex_combination(w_star, losses)
    residual = fixed_point_residual(state.posterior, conf, losses, h)
    if not abs(residual) <= FIXED_POINT_TOL * (1.0 + float(np.abs(losses).max())):
        raise NumericalError(f"allocation loss {h!r} misses its fixed-point equation by {residual!r}")
    fields, next_state = hedge_round(state, scheme, conf, losses, h)
    fields["algorithm_loss"] = h
    record = RoundRecord(prediction=w_star, **fields)
    return AllocationStep(w_star, record, next_state)


def run(rounds, scheme: MixingScheme, n_experts: int = None):
    """Run ConfHedge-1 over an iterable of :class:`RoundInput`.

    Returns the list of round records and the final state.
    """
    rounds = iter(rounds)
    records = []
    state = None
    if n_experts is not None:
        state = LearnerState.initial(n_experts)
    for r in rounds:
        if state is None:
            state = LearnerState.initial(r.losses.size)
        out = step(state, r, scheme)
        records.append(out.record)
        state = out.next_state
    return records, state


def _as_rounds(losses, confidences):
    L = check_array(losses, ensure_2d=False, dtype=float)
    if L.ndim == 1:
        L = L[None, :]
    if confidences is None:
        P = np.ones_like(L)
    else:
        P = check_array(confidences, ensure_2d=False, dtype=float)
        if P.ndim == 1:
            P = P[None, :]
        if P.shape != L.shape:
            raise ValidationError(f"confidences shape {P.shape} != losses shape {L.shape}")
    return L, P


class ConfHedge1(BaseEstimator):
    """Online loss allocation among experts that report confidence levels.

    Parameters
    ----------
    mixing : {"fixed-share", "uniform-past", "none"}
        Mixing Past Posteriors scheme applied after each loss update.
        ``"none"`` with full confidence is AdaHedge.
    alpha : "inverse-t" or float in (0, 1]
        Switching-rate schedule of the mixing scheme.

    Attributes
    ----------
    state_ : LearnerState
    records_ : list of RoundRecord
    n_experts_in_ : int
    """

    def __init__(self, mixing="fixed-share", alpha="inverse-t"):
        self.mixing = mixing
        self.alpha = alpha

    def _scheme(self) -> MixingScheme:
        return MixingScheme(self.mixing, self.alpha)

    def fit(self, losses, confidences=None):
        """Reset and process a whole ``(T, N)`` loss matrix in order."""
        for attr in ("state_", "records_", "n_experts_in_"):
            self.__dict__.pop(attr, None)
        return self.partial_fit(losses, confidences)

    def partial_fit(self, losses, confidences=None):
        """Process one round (1-d input) or several rounds (2-d input)."""
        L, P = _as_rounds(losses, confidences)
        scheme = self._scheme()
        if not hasattr(self, "state_"):
            self.n_experts_in_ = L.shape[1]
            self.state_ = LearnerState.initial(self.n_experts_in_)
            self.records_ = []
        elif L.shape[1] != self.n_experts_in_:
            raise ValidationError(
                f"expected {self.n_experts_in_} experts, got {L.shape[1]}"
            )
        for l_t, p_t in zip(L, P):
            out = step(self.state_, RoundInput(l_t, p_t), scheme)
            self.records_.append(out.record)
            self.state_ = out.next_state
        return self

    def predict(self, confidences=None):
        """Distribution the learner would play next, given confidences.

        A 2-d input yields one row per confidence vector, all computed from
        the current posterior.
        """
        check_is_fitted(self, "state_")
        if confidences is None:
            return self.state_.posterior.copy()
        P = check_array(confidences, ensure_2d=False, dtype=float)
        if P.ndim == 1:
            return prediction_weights(self.state_.posterior, P)
        return np.vstack([prediction_weights(self.state_.posterior, p) for p in P])

    @property
    def weights_(self) -> np.ndarray:
        check_is_fitted(self, "state_")
        return self.state_.posterior

    @property
    def learning_rate_(self) -> float:
        check_is_fitted(self, "state_")
        return self.state_.learning_rate

    @property
    def cumulative_loss_(self) -> float:
        check_is_fitted(self, "state_")
        return math.fsum(r.algorithm_loss for r in self.records_)
