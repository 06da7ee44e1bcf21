"""Randomized adversarial trials checking the shifting-regret bounds.

Each trial draws a loss/confidence stream, runs ConfHedge-1 on it and
measures the confidence shifting regret against several comparator
sequences: random piecewise-constant experts and the best expert per
segment, each for switch counts 0, 1, 2 and 5.  Per comparator it checks
the five bounds at the horizon plus the gap-based regret bound and the
cumulative-gap inequality at every prefix; per trial it checks the
per-round gap bound.

Trial ``i`` is seeded by child ``i`` of ``SeedSequence(seed)``, so reports
do not depend on the thread count.
"""

from __future__ import annotations

import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import List, Optional, Sequence, Tuple

import numpy as np

from .confhedge1 import run
from .core import RoundInput, RoundRecord
from .diagnostics import cumulative_gap_slack, gap_bound_slack, regret_gap_slack, variance_slack
from .exceptions import ValidationError
from .mixing import FIXED_SHARE, INVERSE_T, MixingScheme
from .regret import (
    BOUND_NAMES,
    REL_SLACK,
    RegretLedger,
    best_segment_experts,
    bound_values,
    prefix_ledger,
    segment_comparators,
)

LOSS_SHAPES = ("uniform", "segments", "spikes")
CONFIDENCE_SHAPES = ("ones", "uniform", "binary", "mixed")

REPORT_COLUMNS = (
    "trial", "comparator", "target_switches", "switches", "T", "N", "scale",
    "loss_shape", "confidence_shape", "regret",
    *BOUND_NAMES, *(f"ok_{b}" for b in BOUND_NAMES),
    "regret_gap_min_slack", "cumulative_gap_min_slack", "variance_slack",
    "round_gap_bound_ok", "ok",
)


@dataclass(frozen=True)
class FuzzConfig:
    trials: int = 1000
    seed: int = 0
    max_experts: int = 8
    max_horizon: int = 500
    switch_counts: Tuple[int, ...] = (0, 1, 2, 5)
    scales: Tuple[float, ...] = (1e-3, 1.0, 1e3)
    mixing: str = FIXED_SHARE

    def __post_init__(self):
        if self.trials < 1:
            raise ValidationError("trials must be positive")
        if self.max_experts < 1 or self.max_horizon < 1:
            raise ValidationError("max_experts and max_horizon must be positive")

    @property
    def scheme(self) -> MixingScheme:
        return MixingScheme(self.mixing, INVERSE_T)


@dataclass
class Trial:
    index: int
    losses: np.ndarray
    confidences: np.ndarray
    scale: float
    loss_shape: str
    confidence_shape: str

    @property
    def rounds(self) -> List[RoundInput]:
        return [RoundInput(l, p) for l, p in zip(self.losses, self.confidences)]


@dataclass
class TrialResult:
    trial: Trial
    rows: List[dict]
    comparators: List[np.ndarray] = field(repr=False)

    @property
    def ok(self) -> bool:
        return all(r["ok"] for r in self.rows)

    def first_violation(self) -> Optional[Tuple[dict, np.ndarray]]:
        for row, q in zip(self.rows, self.comparators):
            if not row["ok"]:
                return row, q
        return None


def draw_trial(index: int, rng: np.random.Generator, config: FuzzConfig) -> Trial:
    n = int(rng.integers(1, config.max_experts + 1))
    T = int(rng.integers(1, config.max_horizon + 1))
    scale = float(rng.choice(config.scales))
    loss_shape = str(rng.choice(LOSS_SHAPES))
    conf_shape = str(rng.choice(CONFIDENCE_SHAPES))

    if loss_shape == "uniform":
        L = rng.uniform(-10, 10, size=(T, n))
    elif loss_shape == "segments":
        # a few regimes with different leaders, plus noise
        k = int(rng.integers(1, 6))
        starts = np.sort(rng.choice(np.arange(1, T), size=min(k - 1, T - 1), replace=False)) if T > 1 else []
        means = rng.uniform(-8, 8, size=(len(starts) + 1, n))
        seg = np.searchsorted(starts, np.arange(T), side="right")
        L = np.clip(means[seg] + rng.normal(0, 2, size=(T, n)), -10, 10)
    else:
        # mostly flat, with rare large spikes
        L = np.where(rng.uniform(size=(T, n)) < 0.05, rng.choice([-10.0, 10.0], size=(T, n)), 0.0)
        L += rng.uniform(-0.1, 0.1, size=(T, n))

    if conf_shape == "ones":
        P = np.ones((T, n))
    elif conf_shape == "uniform":
        P = rng.uniform(size=(T, n))
    elif conf_shape == "binary":
        P = (rng.uniform(size=(T, n)) < 0.6).astype(float)
    else:
        P = rng.uniform(size=(T, n)) * (rng.uniform(size=(T, n)) < 0.7)
    dead = P.sum(axis=1) <= 0
    P[dead, rng.integers(0, n, size=int(dead.sum()))] = 1.0
    return Trial(index, L * scale, P, scale, loss_shape, conf_shape)


def _random_boundaries(rng, T: int, k: int) -> List[int]:
    k = min(k, T - 1)
    if k <= 0:
        return []
    return sorted(int(b) for b in rng.choice(np.arange(1, T), size=k, replace=False))


def _random_experts(rng, n: int, segments: int) -> List[int]:
    experts = [int(rng.integers(n))]
    for _ in range(segments - 1):
        if n == 1:
            experts.append(0)
        else:
            e = int(rng.integers(n - 1))
            experts.append(e if e < experts[-1] else e + 1)
    return experts


def comparator_set(rng, records: Sequence[RoundRecord], config: FuzzConfig, n: int):
    """``(label, target_k, q)`` for random and best-segment comparators."""
    T = len(records)
    out = []
    for k in config.switch_counts:
        bounds = _random_boundaries(rng, T, k)
        experts = _random_experts(rng, n, len(bounds) + 1)
        out.append(("random", k, segment_comparators(bounds, experts, T, n)))
        best = best_segment_experts(records, bounds)
        out.append(("best", k, segment_comparators(bounds, best, T, n)))
    return out


def evaluate(trial: Trial, records: Sequence[RoundRecord], comparators, scheme: MixingScheme) -> List[dict]:
    n = trial.losses.shape[1]
    T = len(records)
    round_ok = True
    for r in records:
        slack = gap_bound_slack(r)
        tol = REL_SLACK * (float(np.abs(r.losses).max()) + abs(r.algorithm_loss))
        if slack is not None and slack < -tol:
            round_ok = False
            break
    rows = []
    for label, k, q in comparators:
        view = prefix_ledger(records, q)
        regret_gap = regret_gap_slack(view, scheme) + view.slack
        cum_gap = cumulative_gap_slack(view) + view.slack * (2 * view.cum_gap + view.slack)
        ledger = RegretLedger.from_records(records, q)
        values = bound_values(ledger, n, scheme)
        oks = {b: bool(ledger.regret <= values[b] + ledger.slack) for b in BOUND_NAMES}
        regret_gap_min, cum_gap_min = float(regret_gap.min()), float(cum_gap.min())
        # only defined when the comparator does not beat the algorithm
        var_slack = variance_slack(ledger, scheme)
        if var_slack is not None:
            var_slack += ledger.slack * (1 + ledger.max_range)
        row = {
            "trial": trial.index, "comparator": label, "target_switches": k,
            "switches": ledger.switches, "T": T, "N": n, "scale": trial.scale,
            "loss_shape": trial.loss_shape, "confidence_shape": trial.confidence_shape,
            "regret": ledger.regret,
            **{b: values[b] for b in BOUND_NAMES},
            **{f"ok_{b}": int(oks[b]) for b in BOUND_NAMES},
            "regret_gap_min_slack": regret_gap_min,
            "cumulative_gap_min_slack": cum_gap_min,
            "variance_slack": "" if var_slack is None else var_slack,
            "round_gap_bound_ok": int(round_ok),
        }
        inequalities_ok = regret_gap_min >= 0 and cum_gap_min >= 0 and (var_slack is None or var_slack >= 0)
        row["ok"] = int(all(oks.values()) and inequalities_ok and round_ok)
        rows.append(row)
    return rows


def run_trial(index: int, seed_seq: np.random.SeedSequence, config: FuzzConfig) -> TrialResult:
    rng = np.random.default_rng(seed_seq)
    trial = draw_trial(index, rng, config)
    scheme = config.scheme
    records, _ = run(trial.rounds, scheme)
    comps = comparator_set(rng, records, config, trial.losses.shape[1])
    rows = evaluate(trial, records, comps, scheme)
    return TrialResult(trial, rows, [q for _, _, q in comps])


def thread_count(requested: Optional[int] = None) -> int:
    """Worker threads: ``requested``, capped by ``CONFHEDGE_THREADS`` if set."""
    n = requested or os.cpu_count() or 1
    cap = os.environ.get("CONFHEDGE_THREADS")
    if cap:
        try:
            n = min(n, max(1, int(cap)))
        except ValueError:
            raise ValidationError(f"CONFHEDGE_THREADS must be an integer, got {cap!r}") from None
    return max(1, n)


def run_fuzz(config: FuzzConfig, threads: Optional[int] = None) -> List[TrialResult]:
    """Run every trial; results come back in trial order."""
    seeds = np.random.SeedSequence(config.seed).spawn(config.trials)
    workers = thread_count(threads)
    if workers == 1:
        return [run_trial(i, s, config) for i, s in enumerate(seeds)]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(lambda a: run_trial(a[0], a[1], config), enumerate(seeds)))


def report_rows(results: Sequence[TrialResult]):
    for res in results:
        for row in res.rows:
            yield [row[c] for c in REPORT_COLUMNS]
