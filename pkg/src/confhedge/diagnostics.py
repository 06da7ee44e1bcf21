"""Inequalities and identities behind the regret bounds, as numeric checks.

Each ``*_slack`` function returns ``rhs - lhs``; a non-negative value (up to
rounding) means the inequality holds on the given data.
"""

from __future__ import annotations

import math
from typing import Optional

import numpy as np

from .core import RoundRecord, ln_star, relative_entropy
from .mixing import MixingScheme
from .regret import RegretLedger, gamma_coefficient

# below this argument g and phi switch to their Taylor series
_SERIES_CUTOFF = 1e-2


def _exp_tail(x: float, start: int) -> float:
    """``sum_{k >= start} x^k / k!`` for small ``x``."""
    term = x ** start / math.factorial(start)
    total = term
    k = start
    while abs(term) > 1e-18 * abs(total):
        k += 1
        term *= x / k
        total += term
    return total


def g(x: float) -> float:
    """``(e^x - x - 1) / x``."""
    if x <= 0:
        raise ValueError("g is evaluated on x > 0")
    if x < _SERIES_CUTOFF:
        return _exp_tail(x, 2) / x
    if x > 700:
        return math.inf
    return (math.expm1(x) - x) / x


def phi(x: float) -> float:
    """``(e^x - x^2/2 - x - 1) / (x e^x - x^2 - x)``; never exceeds 1/3 for x > 0."""
    if x <= 0:
        raise ValueError("phi is evaluated on x > 0")
    if x < _SERIES_CUTOFF:
        return _exp_tail(x, 3) / (x * _exp_tail(x, 2))
    if x > 700:
        # ratio tends to 1/x; e^x overflows first
        return (1.0 - (0.5 * x * x + x) * math.exp(-x)) / (x - (x * x + x) * math.exp(-x))
    return (math.expm1(x) - 0.5 * x * x - x) / (x * (math.expm1(x) - x))


def gap_bound(record: RoundRecord) -> Optional[float]:
    """Per-round Bernstein bound on the mixability gap, ``g(s eta)/s * v``.

    ``None`` when it does not apply (infinite rate or zero loss range).
    """
    s, eta = record.loss_range, record.learning_rate
    if math.isinf(eta) or s <= 0:
        return None
    if record.weight_variance == 0:
        return 0.0
    return g(s * eta) / s * record.weight_variance


def gap_bound_slack(record: RoundRecord) -> Optional[float]:
    rhs = gap_bound(record)
    return None if rhs is None else rhs - record.gap


def cumulative_gap_slack(ledger: RegretLedger) -> float:
    """``lnN* V + (2/3 lnN* + 1) S D - D^2`` with ``D`` the cumulative gap."""
    lns = ln_star(ledger.n_experts)
    D = ledger.cum_gap
    rhs = lns * ledger.cum_variance + (2.0 / 3.0 * lns + 1.0) * ledger.max_range * D
    return rhs - D * D


def mixloss_identity_residual(record: RoundRecord, q) -> float:
    """``m - q.l_hat - (D(q||w) - D(q||w_mu)) / eta``; zero for finite eta."""
    eta = record.learning_rate
    if math.isinf(eta):
        raise ValueError("identity needs a finite learning rate")
    q = np.asarray(q, dtype=float)
    lhs = record.mixloss - float(q @ record.effective_losses)
    rhs = (relative_entropy(q, record.posterior) - relative_entropy(q, record.posterior_mu)) / eta
    return lhs - rhs


def regret_gap_slack(ledger, scheme: MixingScheme = MixingScheme()) -> float:
    """``gamma * D - (H - Lq)``: regret of the algorithm against the comparator
    loss built from effective losses, bounded by the cumulative gap.

    Works on a :class:`RegretLedger` or on an array-valued prefix view.
    """
    gam = gamma_coefficient(ledger.switches, np.maximum(ledger.rounds, 1), scheme)
    return gam * ledger.cum_gap - (ledger.cum_algorithm_loss - ledger.comparator_loss)


def variance_slack(ledger: RegretLedger, scheme: MixingScheme) -> Optional[float]:
    """Cumulative-variance bound; ``None`` unless ``Lq <= H``."""
    Lq, H = ledger.comparator_loss, ledger.cum_algorithm_loss
    if Lq > H:
        return None
    Lm, Lp, S = ledger.cum_min, ledger.cum_max, ledger.max_range
    span = Lp - Lm
    ratio = (Lp - Lq) * (Lq - Lm) / span if span > 0 else 0.0
    gam = gamma_coefficient(ledger.switches, max(ledger.rounds, 1), scheme)
    return S * ratio + gam * S * ledger.cum_gap - ledger.cum_variance


def entropy_change_of_reference_slack(p, q, w) -> float:
    """``D(p||w) + ln sum p_i w_i/q_i - D(p||q)`` for positive ``q`` and ``w``."""
    p, q, w = (np.asarray(v, dtype=float) for v in (p, q, w))
    return relative_entropy(p, w) + math.log(float(np.sum(p * w / q))) - relative_entropy(p, q)


def entropy_floor_slack(w, q, r: float) -> float:
    """``ln(1/r) - D(w||q)`` for ``q >= r w`` componentwise."""
    return math.log(1.0 / r) - relative_entropy(w, q)


def mixture_entropy_slack(components, betas) -> np.ndarray:
    """``ln(1/beta_i) - D(w_i || sum_j beta_j w_j)`` for every component ``i``."""
    W = np.asarray(components, dtype=float)
    b = np.asarray(betas, dtype=float)
    q = b @ W
    return np.array([math.log(1.0 / bi) - relative_entropy(wi, q) for wi, bi in zip(W, b)])
