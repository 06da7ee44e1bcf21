"""Confidence shifting regret, comparator envelopes and regret-bound evaluators.

All bounds are evaluated from a :class:`RegretLedger`, which accumulates
the per-round records of a run against a comparator sequence.  Notation in
the field comments: ``H`` algorithm loss, ``L-``/``L+`` cumulative per-round
min/max expert loss, ``S`` largest per-round loss range, ``Lq-``/``Lq+`` the
comparator envelopes.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from types import SimpleNamespace
from typing import Dict, Iterable, Optional, Sequence, Tuple

import numpy as np

from .core import RoundRecord, check_distribution, ln_star
from .exceptions import UnsupportedSchemeError, ValidationError
from .mixing import FIXED_SHARE, INVERSE_T, UNIFORM_PAST, MixingScheme

SWITCH_TOL = 1e-12

# relative slack for "<=" checks; scaled by the cumulative loss magnitude
REL_SLACK = 1e-9

BOUND_NAMES = ("eq7", "eq8", "eq9", "eq10", "eq11")


def _as_sequence(q) -> np.ndarray:
    q = np.asarray(q, dtype=float)
    if q.ndim != 2:
        raise ValidationError("comparator sequence must be a (T, N) array")
    return q


def switch_count(q) -> int:
    """Number of rounds ``t > 1`` whose comparator differs from round ``t - 1``."""
    q = _as_sequence(q)
    if len(q) < 2:
        return 0
    changed = np.any(np.abs(np.diff(q, axis=0)) > SWITCH_TOL, axis=1)
    return int(changed.sum())


def confidence_regret(h, losses, confidences, q) -> float:
    """``sum_t sum_i q_it p_it (h_t - l_it)``."""
    h = np.asarray(h, dtype=float)
    L = np.asarray(losses, dtype=float)
    P = np.asarray(confidences, dtype=float)
    q = _as_sequence(q)
    if not (L.shape == P.shape == q.shape and h.shape == (L.shape[0],)):
        raise ValidationError("regret inputs are not aligned")
    return float(np.sum(q * P * (h[:, None] - L)))


def comparator_envelopes(losses, confidences, q) -> Tuple[float, float]:
    """Lower and upper envelopes of the comparator loss.

    Partially awake experts are charged the round's minimum (lower) or
    maximum (upper) expert loss for the asleep fraction.
    """
    L = np.asarray(losses, dtype=float)
    P = np.asarray(confidences, dtype=float)
    q = _as_sequence(q)
    if not L.shape == P.shape == q.shape:
        raise ValidationError("envelope inputs are not aligned")
    lo = L.min(axis=1, keepdims=True)
    hi = L.max(axis=1, keepdims=True)
    lower = float(np.sum(q * (P * L + (1 - P) * lo)))
    upper = float(np.sum(q * (P * L + (1 - P) * hi)))
    return lower, upper


def _check_inverse_t(scheme: MixingScheme) -> None:
    if scheme.variant not in (FIXED_SHARE, UNIFORM_PAST) or scheme.alpha != INVERSE_T:
        raise UnsupportedSchemeError(
            f"no regret coefficient for mixing={scheme.variant!r}, alpha={scheme.alpha!r}"
        )


def gamma_coefficient(k, T, scheme: MixingScheme):
    """Switch-dependent multiplier of the shifting-regret bounds.

    Only the ``alpha_t = 1/t`` schedule has a published coefficient.  ``k``
    and ``T`` may be arrays of equal shape (one entry per prefix).
    """
    _check_inverse_t(scheme)
    if np.any(np.asarray(T) < 1) or np.any(np.asarray(k) < 0):
        raise ValidationError(f"need T >= 1 and k >= 0, got T={T}, k={k}")
    log_t = np.log(T)
    if scheme.variant == FIXED_SHARE:
        out = (k + 2) * (log_t + 1)
    else:
        out = (2 * k + 3) * log_t + (k + 2)
    return float(out) if np.ndim(out) == 0 else out


@dataclass
class RegretLedger:
    """Running totals of one run measured against a comparator sequence."""

    n_experts: int
    rounds: int = 0
    cum_algorithm_loss: float = 0.0  # H
    cum_regret_loss: float = 0.0  # H for allocation, A for forecasting
    cum_min: float = 0.0  # L-
    cum_max: float = 0.0  # L+
    max_range: float = 0.0  # S
    sum_sq_range: float = 0.0
    cum_gap: float = 0.0
    cum_variance: float = 0.0
    comparator_loss: float = 0.0  # Lq, built from effective losses
    comparator_lower: float = 0.0  # Lq-
    comparator_upper: float = 0.0  # Lq+
    switches: int = 0
    regret: float = 0.0
    loss_scale: float = 0.0
    expert_losses: np.ndarray = field(default=None, repr=False)
    _last_q: Optional[np.ndarray] = field(default=None, repr=False)

    def __post_init__(self):
        ln_star(self.n_experts)
        if self.expert_losses is None:
            self.expert_losses = np.zeros(self.n_experts)

    def add(self, record: RoundRecord, q) -> "RegretLedger":
        q = check_distribution(q, "comparator")
        l, p, off = record.losses, record.confidences, record.offset
        if q.shape != l.shape:
            raise ValidationError(f"comparator has {q.size} entries, round has {l.size}")
        if self._last_q is not None and np.any(np.abs(q - self._last_q) > SWITCH_TOL):
            self.switches += 1
        self._last_q = q
        self.rounds += 1
        self.cum_algorithm_loss += record.algorithm_loss
        self.cum_regret_loss += off
        self.cum_min += record.loss_min
        self.cum_max += record.loss_max
        self.max_range = max(self.max_range, record.loss_range)
        self.sum_sq_range += record.loss_range ** 2
        self.cum_gap += record.gap
        self.cum_variance += record.weight_variance
        self.comparator_loss += float(q @ (p * l + (1 - p) * off))
        self.comparator_lower += float(q @ (p * l + (1 - p) * record.loss_min))
        self.comparator_upper += float(q @ (p * l + (1 - p) * record.loss_max))
        self.regret += float(q @ (p * (off - l)))
        self.loss_scale += float(np.abs(l).max()) + abs(off)
        self.expert_losses = self.expert_losses + l
        return self

    @classmethod
    def from_records(cls, records: Sequence[RoundRecord], comparators) -> "RegretLedger":
        """Ledger of a finished run; equivalent to calling :meth:`add` per round."""
        comparators = _as_sequence(comparators)
        if not records:
            return cls(comparators.shape[1])
        totals = prefix_totals(records, comparators)
        n = comparators.shape[1]
        ledger = cls(n, **{k: v[-1].item() for k, v in totals.items() if k != "expert_losses"})
        ledger.expert_losses = totals["expert_losses"][-1].copy()
        ledger._last_q = check_distribution(comparators[-1], "comparator")
        return ledger

    @property
    def cum_mixloss(self) -> float:
        return self.cum_algorithm_loss - self.cum_gap

    @property
    def best_expert_loss(self) -> float:
        return float(self.expert_losses.min())

    @property
    def slack(self) -> float:
        return REL_SLACK * self.loss_scale

    def gamma(self, scheme: MixingScheme) -> float:
        return gamma_coefficient(self.switches, max(self.rounds, 1), scheme)


def _ratio(num_a, num_b, den):
    # a == b == 0 whenever den == 0 (all experts identical on every round)
    den = np.asarray(den, dtype=float)
    safe = np.where(den > 0, den, 1.0)
    return np.where(den > 0, np.maximum(0.0, num_a) * np.maximum(0.0, num_b) / safe, 0.0)


def _scalar(x):
    return float(x) if np.ndim(x) == 0 else x


def bound_values(ledger, n_experts: int, scheme: MixingScheme) -> Dict[str, float]:
    """Right-hand sides of the shifting-regret bounds and the AdaHedge bound.

    Keys ``eq7`` .. ``eq11`` bound the confidence shifting regret; ``eq2``
    bounds the plain regret against the best single expert and is only
    meaningful for full confidence without mixing.  Raises
    :class:`UnsupportedSchemeError` for schemes without a coefficient.
    Accepts a :class:`RegretLedger` or an array-valued :func:`prefix_ledger`
    view, in which case every value is an array over prefixes.
    """
    gam = gamma_coefficient(ledger.switches, np.maximum(ledger.rounds, 1), scheme)
    lns = ln_star(n_experts)
    S = ledger.max_range
    Lm, Lp = ledger.cum_min, ledger.cum_max
    Lq_lo, Lq_hi = ledger.comparator_lower, ledger.comparator_upper
    span = Lp - Lm
    short = gam * (2.0 / 3.0 * lns + 1.0) * S
    long = gam * ((gam + 2.0 / 3.0) * lns + 1.0) * S
    out = {
        "eq7": 0.5 * gam * np.sqrt(ledger.sum_sq_range * lns) + short,
        "eq8": gam * np.sqrt(S * _ratio(Lp - Lq_lo, Lq_hi - Lm, span) * lns) + long,
        "eq9": gam * np.sqrt(S * np.maximum(0.0, Lq_hi - Lm) * lns) + long,
        "eq10": gam * np.sqrt(S * np.maximum(0.0, Lp - Lq_lo) * lns) + short,
        "eq11": gam * np.sqrt(S * np.maximum(0.0, span) * lns) + short,
    }
    out["eq2"] = adahedge_bound(ledger, n_experts)
    return {k: _scalar(v) for k, v in out.items()}


def adahedge_bound(ledger, n_experts: int) -> float:
    """Regret bound of plain adaptive Hedge against the best single expert."""
    log_n = math.log(n_experts)
    S = ledger.max_range
    best = np.min(ledger.expert_losses, axis=-1)
    ratio = _ratio(best - ledger.cum_min, ledger.cum_max - best, ledger.cum_max - ledger.cum_min)
    return _scalar(2.0 * np.sqrt(S * ratio * log_n) + (16.0 / 3.0 * log_n + 2.0) * S)


def check_bounds(ledger: RegretLedger, scheme: MixingScheme) -> Dict[str, bool]:
    """Whether the ledger's regret respects each shifting-regret bound."""
    values = bound_values(ledger, ledger.n_experts, scheme)
    return {name: ledger.regret <= values[name] + ledger.slack for name in BOUND_NAMES}


def segment_comparators(boundaries: Iterable[int], experts: Sequence[int], T: int, n: int) -> np.ndarray:
    """Unit-vector comparators: expert ``experts[j]`` on segment ``j``.

    ``boundaries`` are the first (0-based) rounds of segments 2, 3, ...
    """
    starts = [0, *boundaries, T]
    if len(experts) != len(starts) - 1:
        raise ValidationError("need one expert per segment")
    q = np.zeros((T, n))
    for j, e in enumerate(experts):
        q[starts[j]:starts[j + 1], e] = 1.0
    return q


def best_segment_experts(records: Sequence[RoundRecord], boundaries: Iterable[int]) -> list:
    """Per segment, the expert that maximizes the confidence regret on it."""
    T = len(records)
    starts = [0, *boundaries, T]
    off = np.array([r.offset for r in records])
    L = np.array([r.losses for r in records])
    P = np.array([r.confidences for r in records])
    gain = P * (off[:, None] - L)
    return [int(np.argmax(gain[a:b].sum(axis=0))) for a, b in zip(starts[:-1], starts[1:])]


def prefix_totals(records: Sequence[RoundRecord], comparators) -> Dict[str, np.ndarray]:
    """Every ledger total at every prefix ``T = 1 .. len(records)``.

    Keys match the :class:`RegretLedger` fields; each value has one entry per
    prefix (``expert_losses`` has one row per prefix).
    """
    q = _as_sequence(comparators)
    T = len(records)
    if q.shape[0] != T:
        raise ValidationError(f"{T} records but {q.shape[0]} comparators")
    if np.any(q < 0) or np.any(np.abs(q.sum(axis=1) - 1) > 1e-12 * max(1, q.shape[1])):
        raise ValidationError("every comparator must lie on the simplex")
    L = np.array([r.losses for r in records])
    P = np.array([r.confidences for r in records])
    if L.shape != q.shape:
        raise ValidationError(f"comparators have shape {q.shape}, losses {L.shape}")
    off = np.array([r.offset for r in records])
    lo = np.array([r.loss_min for r in records])
    hi = np.array([r.loss_max for r in records])
    rng = np.array([r.loss_range for r in records])
    switched = np.concatenate([[0], np.any(np.abs(np.diff(q, axis=0)) > SWITCH_TOL, axis=1)])
    return {
        "rounds": np.arange(1, T + 1),
        "cum_algorithm_loss": np.cumsum([r.algorithm_loss for r in records]),
        "cum_regret_loss": np.cumsum(off),
        "cum_min": np.cumsum(lo),
        "cum_max": np.cumsum(hi),
        "max_range": np.maximum.accumulate(rng),
        "sum_sq_range": np.cumsum(rng ** 2),
        "cum_gap": np.cumsum([r.gap for r in records]),
        "cum_variance": np.cumsum([r.weight_variance for r in records]),
        "comparator_loss": np.cumsum(np.sum(q * (P * L + (1 - P) * off[:, None]), axis=1)),
        "comparator_lower": np.cumsum(np.sum(q * (P * L + (1 - P) * lo[:, None]), axis=1)),
        "comparator_upper": np.cumsum(np.sum(q * (P * L + (1 - P) * hi[:, None]), axis=1)),
        "switches": np.cumsum(switched).astype(int),
        "regret": np.cumsum(np.sum(q * P * (off[:, None] - L), axis=1)),
        "loss_scale": np.cumsum(np.abs(L).max(axis=1) + np.abs(off)),
        "expert_losses": np.cumsum(L, axis=0),
    }


def prefix_ledger(records: Sequence[RoundRecord], comparators) -> SimpleNamespace:
    """Array-valued view of :func:`prefix_totals` with ledger attribute names.

    ``view.regret[t - 1]`` is the regret after ``t`` rounds, and so on;
    ``view.slack`` is the per-prefix comparison slack.
    """
    totals = prefix_totals(records, comparators)
    n = np.asarray(comparators).shape[1]
    return SimpleNamespace(n_experts=n, slack=REL_SLACK * totals["loss_scale"], **totals)
