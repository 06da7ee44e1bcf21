"""Mixing Past Posteriors schemes: Fixed Share and Uniform Past.

The mixing update turns the loss-updated weights ``w_t^mu`` into the
posterior ``w_{t+1}`` used on the next round.  Uniform Past only ever needs
the uniform average of past loss-updated vectors, so it is kept as a running
mean in :class:`~confhedge.core.MixingMemory` instead of the full history.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Tuple, Union

import numpy as np

from .core import MixingMemory, WeightDistribution
from .exceptions import ValidationError

NONE = "none"
FIXED_SHARE = "fixed-share"
UNIFORM_PAST = "uniform-past"
VARIANTS = (NONE, FIXED_SHARE, UNIFORM_PAST)

INVERSE_T = "inverse-t"

AlphaSchedule = Union[str, float]

__all__ = [
    "MixingMemory",
    "MixingScheme",
    "alpha_at",
    "fixed_share_mix",
    "uniform_past_mix",
    "mix",
]


def _check_schedule(schedule: AlphaSchedule) -> AlphaSchedule:
    if isinstance(schedule, str):
        if schedule != INVERSE_T:
            raise ValidationError(f"unknown alpha schedule {schedule!r}")
        return schedule
    value = float(schedule)
    if not 0 < value <= 1:
        raise ValidationError(f"constant alpha must lie in (0, 1], got {value!r}")
    return value


@dataclass(frozen=True)
class MixingScheme:
    """A named mixing scheme plus its switching-rate schedule.

    ``alpha`` is either ``"inverse-t"`` (``alpha_t = 1/t``) or a constant in
    ``(0, 1]``.  It is ignored by the ``"none"`` variant.
    """

    variant: str = FIXED_SHARE
    alpha: AlphaSchedule = INVERSE_T

    def __post_init__(self):
        if self.variant not in VARIANTS:
            raise ValidationError(
                f"unknown mixing scheme {self.variant!r}; choose from {', '.join(VARIANTS)}"
            )
        object.__setattr__(self, "alpha", _check_schedule(self.alpha))

    @classmethod
    def parse(cls, mixing: str, alpha: str = INVERSE_T) -> "MixingScheme":
        """Build a scheme from CLI-style strings (``alpha`` may be a number)."""
        if alpha != INVERSE_T:
            try:
                alpha = float(alpha)
            except ValueError:
                raise ValidationError(f"unknown alpha schedule {alpha!r}") from None
        return cls(mixing, alpha)


def alpha_at(schedule: AlphaSchedule, t: int) -> float:
    """Switching rate ``alpha_t``; the first mixing update uses ``t = 2``."""
    if t < 2:
        raise ValidationError(f"alpha is defined for t >= 2, got t={t}")
    schedule = _check_schedule(schedule)
    if schedule == INVERSE_T:
        return 1.0 / t
    return schedule


def fixed_share_mix(w_mu, alpha: float) -> WeightDistribution:
    w_mu = np.asarray(w_mu, dtype=float)
    out = alpha / w_mu.size + (1.0 - alpha) * w_mu
    return out / out.sum()


def uniform_past_mix(
    w_mu, memory: MixingMemory, alpha: float
) -> Tuple[WeightDistribution, MixingMemory]:
    """Mix ``w_mu`` with the mean of past loss-updated vectors.

    Returns the next posterior and the memory with ``w_mu`` folded in.
    """
    if memory.count < 1:
        raise ValidationError("uniform-past memory must hold at least the initial vector")
    w_mu = np.asarray(w_mu, dtype=float)
    out = alpha * memory.past_mean + (1.0 - alpha) * w_mu
    count = memory.count + 1
    past = memory.past_mean + (w_mu - memory.past_mean) / count
    return out / out.sum(), MixingMemory(past / past.sum(), count)


def mix(
    scheme: MixingScheme, w_mu, memory: MixingMemory, t: int
) -> Tuple[WeightDistribution, MixingMemory]:
    """Produce ``w_{t+1}`` from ``w_t^mu`` at the end of round ``t``."""
    if scheme.variant == NONE:
        return np.asarray(w_mu, dtype=float), memory
    alpha = alpha_at(scheme.alpha, t + 1)
    if scheme.variant == FIXED_SHARE:
        return fixed_share_mix(w_mu, alpha), memory
    return uniform_past_mix(w_mu, memory, alpha)
