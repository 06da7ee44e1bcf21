"""Stream readers, record writers and synthetic stream generators.

Every table is wide (one row per round) and comes in two encodings chosen
by file extension: CSV, or JSONL (``.jsonl``) with one object per row and
the same field names.  Floats are written with ``repr`` so that reading a
file back reproduces every double exactly; ``inf`` is written literally.

Loss streams have columns ``t, l_<name>..., [p_<name>...]``.  Forecast
streams have ``t, outcome, c_<name>..., [p_<name>...]`` and any further
columns are treated as features for confidence profiles.
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Dict, Iterator, List, Mapping, Optional, Sequence, Tuple

import numpy as np

from .confhedge2 import ForecastRound
from .core import RoundInput, RoundRecord
from .exceptions import ValidationError

LOSS_ALLOCATION = "allocation"
FORECASTING = "forecasting"


@dataclass(frozen=True)
class StreamSchema:
    expert_names: Tuple[str, ...]
    mode: str = LOSS_ALLOCATION
    has_confidences: bool = True
    feature_names: Tuple[str, ...] = ()

    def __post_init__(self):
        if len(set(self.expert_names)) != len(self.expert_names) or not self.expert_names:
            raise ValidationError("expert names must be unique and non-empty")
        if self.mode not in (LOSS_ALLOCATION, FORECASTING):
            raise ValidationError(f"unknown stream mode {self.mode!r}")

    @property
    def n_experts(self) -> int:
        return len(self.expert_names)

    def columns(self) -> List[str]:
        value = "l_" if self.mode == LOSS_ALLOCATION else "c_"
        cols = ["t"] + (["outcome"] if self.mode == FORECASTING else [])
        cols += [value + n for n in self.expert_names]
        if self.has_confidences:
            cols += ["p_" + n for n in self.expert_names]
        return cols + list(self.feature_names)


def _fmt(x) -> str:
    if isinstance(x, str):
        return x
    if isinstance(x, (int, np.integer)) and not isinstance(x, bool):
        return str(int(x))
    return repr(float(x))


def _is_jsonl(path) -> bool:
    return Path(path).suffix.lower() == ".jsonl"


def _json_value(x):
    if isinstance(x, str):
        return x
    if isinstance(x, (int, np.integer)) and not isinstance(x, bool):
        return int(x)
    x = float(x)
    return x if math.isfinite(x) else repr(x)


def write_table(path, header: Sequence[str], rows) -> None:
    """Write rows (sequences aligned with ``header``) as CSV or JSONL."""
    if len(set(header)) != len(header):
        raise ValidationError("duplicate column names")
    try:
        with open(path, "w", encoding="utf-8", newline="") as fh:
            if _is_jsonl(path):
                for row in rows:
                    fh.write(json.dumps({k: _json_value(v) for k, v in zip(header, row)}) + "\n")
            else:
                writer = csv.writer(fh, lineterminator="\n")
                writer.writerow(header)
                for row in rows:
                    writer.writerow([_fmt(v) for v in row])
    except OSError as exc:
        raise OSError(f"cannot write {path}: {exc.strerror or exc}") from exc


def _open(path):
    try:
        return open(path, encoding="utf-8", newline="")
    except OSError as exc:
        raise OSError(f"cannot read {path}: {exc.strerror or exc}") from exc


def _read_header(path) -> List[str]:
    with _open(path) as fh:
        first = fh.readline()
    if not first.strip():
        return []
    if _is_jsonl(path):
        try:
            return list(json.loads(first))
        except json.JSONDecodeError:
            raise ValidationError(f"{path}:1: invalid JSON") from None
    header = next(csv.reader([first]))
    if len(set(header)) != len(header):
        raise ValidationError(f"{path}: duplicate column names in header")
    return header


def _rows(path, header) -> Iterator[Tuple[int, Dict[str, str]]]:
    with _open(path) as fh:
        if _is_jsonl(path):
            for i, line in enumerate(fh, start=1):
                if not line.strip():
                    continue
                try:
                    row = json.loads(line)
                except json.JSONDecodeError:
                    raise ValidationError(f"{path}:{i}: invalid JSON") from None
                if list(row) != header:
                    raise ValidationError(f"{path}:{i}: fields differ from line 1")
                yield i, row
            return
        reader = csv.reader(fh)
        next(reader, None)
        for row in reader:
            if not row:
                continue
            if len(row) != len(header):
                raise ValidationError(
                    f"{path}:{reader.line_num}: expected {len(header)} fields, got {len(row)}"
                )
            yield reader.line_num, dict(zip(header, row))


def read_table(path) -> Tuple[List[str], Iterator[Tuple[int, Dict[str, str]]]]:
    """Header and a lazy iterator of ``(line_number, row)`` pairs."""
    header = _read_header(path)
    return header, (_rows(path, header) if header else iter(()))


def _number(value, path, line, column) -> float:
    try:
        return float(value)
    except (TypeError, ValueError):
        raise ValidationError(f"{path}:{line}: column {column!r} is not a number: {value!r}") from None


def _split_header(header: Sequence[str], value_prefix: str, path) -> Tuple[List[str], bool, List[str]]:
    names = [c[len(value_prefix):] for c in header if c.startswith(value_prefix)]
    if not names:
        raise ValidationError(f"{path}: no {value_prefix}<name> columns in header")
    conf = [c[2:] for c in header if c.startswith("p_")]
    if conf and conf != names:
        raise ValidationError(f"{path}: p_ columns must match the {value_prefix} columns one to one")
    return names, bool(conf), [c for c in header if c not in ("t", "outcome") and not c.startswith((value_prefix, "p_"))]


def stream_schema(path, mode: str = LOSS_ALLOCATION) -> StreamSchema:
    header = _read_header(path)
    if "t" not in header:
        raise ValidationError(f"{path}: header has no 't' column")
    prefix = "l_" if mode == LOSS_ALLOCATION else "c_"
    if mode == FORECASTING and "outcome" not in header:
        raise ValidationError(f"{path}: forecast stream needs an 'outcome' column")
    names, has_conf, features = _split_header(header, prefix, path)
    if mode == LOSS_ALLOCATION and features:
        raise ValidationError(f"{path}: unexpected columns {features}")
    return StreamSchema(tuple(names), mode, has_conf, tuple(features))


def _check_schema(found: StreamSchema, expected: Optional[StreamSchema], path) -> None:
    if expected is not None and found.expert_names != expected.expert_names:
        raise ValidationError(f"{path}: experts {found.expert_names} do not match {expected.expert_names}")


def _confidences(row, names, line, path, t):
    p = np.array([_number(row["p_" + n], path, line, "p_" + n) for n in names])
    if np.any(~np.isfinite(p)) or np.any(p < 0) or np.any(p > 1):
        raise ValidationError(f"{path}:{line}: confidences must lie in [0, 1]")
    if not p.sum() > 0:
        raise ValidationError(f"{path}:{line}: zero confidence mass at t={t}")
    return p


def read_loss_stream(path, schema: Optional[StreamSchema] = None) -> List[RoundInput]:
    """Rounds of a loss stream in file order; missing ``p_`` columns mean 1.0."""
    found = stream_schema(path, LOSS_ALLOCATION)
    _check_schema(found, schema, path)
    names = found.expert_names
    _, rows = read_table(path)
    out = []
    for line, row in rows:
        t = row["t"]
        losses = np.array([_number(row["l_" + n], path, line, "l_" + n) for n in names])
        if not np.all(np.isfinite(losses)):
            raise ValidationError(f"{path}:{line}: losses must be finite")
        p = _confidences(row, names, line, path, t) if found.has_confidences else np.ones(len(names))
        out.append(RoundInput(losses, p))
    return out


def write_loss_stream(path, rounds: Sequence[RoundInput], expert_names: Optional[Sequence[str]] = None) -> None:
    n = rounds[0].losses.size if rounds else len(expert_names or ())
    names = list(expert_names) if expert_names is not None else [f"e{i + 1}" for i in range(n)]
    schema = StreamSchema(tuple(names))
    rows = ([t, *r.losses, *r.confidences] for t, r in enumerate(rounds, start=1))
    write_table(path, schema.columns(), rows)


def read_forecast_stream(path, schema: Optional[StreamSchema] = None) -> Tuple[StreamSchema, List[ForecastRound]]:
    """Schema and rounds of a forecast stream; extra columns become features."""
    found = stream_schema(path, FORECASTING)
    _check_schema(found, schema, path)
    names = found.expert_names
    _, rows = read_table(path)
    out = []
    for line, row in rows:
        t = row["t"]
        c = np.array([_number(row["c_" + n], path, line, "c_" + n) for n in names])
        y = _number(row["outcome"], path, line, "outcome")
        if not (np.all(np.isfinite(c)) and math.isfinite(y)):
            raise ValidationError(f"{path}:{line}: forecasts and outcome must be finite")
        p = _confidences(row, names, line, path, t) if found.has_confidences else None
        feats = {f: _number(row[f], path, line, f) for f in found.feature_names}
        out.append(ForecastRound(c, y, p, feats))
    return found, out


def write_forecast_stream(path, schema: StreamSchema, rounds: Sequence[ForecastRound]) -> None:
    def rows():
        for t, r in enumerate(rounds, start=1):
            row = [t, r.outcome, *r.forecasts]
            if schema.has_confidences:
                row += list(r.confidences)
            yield row + [r.features[f] for f in schema.feature_names]

    write_table(path, schema.columns(), rows())


def read_comparators(path, n_experts: Optional[int] = None) -> np.ndarray:
    """``(T, N)`` comparator sequence from a ``t, q_<name>...`` table."""
    header, rows = read_table(path)
    cols = [c for c in header if c.startswith("q_")]
    if not cols:
        raise ValidationError(f"{path}: no q_<name> columns in header")
    if n_experts is not None and len(cols) != n_experts:
        raise ValidationError(f"{path}: {len(cols)} comparator columns for {n_experts} experts")
    q = [[_number(row[c], path, line, c) for c in cols] for line, row in rows]
    return np.array(q, dtype=float).reshape(-1, len(cols))


def write_comparators(path, q, expert_names: Optional[Sequence[str]] = None) -> None:
    q = np.asarray(q, dtype=float)
    names = list(expert_names) if expert_names is not None else [f"e{i + 1}" for i in range(q.shape[1])]
    write_table(path, ["t"] + ["q_" + n for n in names], ([t, *row] for t, row in enumerate(q, start=1)))


def record_columns(n_experts: int, forecasting: bool = False) -> List[str]:
    cols = ["t", "h"]
    if forecasting:
        cols += ["a", "gamma", "outcome"]
    cols += ["m", "delta", "eta", "l_min", "l_max", "s", "v"]
    if forecasting:
        cols += [f"loss_{i}" for i in range(1, n_experts + 1)]
    cols += [f"w_{i}" for i in range(1, n_experts + 1)]
    cols += [f"wstar_{i}" for i in range(1, n_experts + 1)]
    return cols


def write_round_records(
    path,
    records: Sequence[RoundRecord],
    weights: Optional[Sequence[np.ndarray]] = None,
    n_experts: Optional[int] = None,
    forecasting: Optional[bool] = None,
) -> None:
    """Per-round table: scalar record fields, then ``w_i`` and ``wstar_i``.

    ``weights`` defaults to each record's posterior; ``n_experts`` and
    ``forecasting`` are only needed to lay out the header of an empty run.
    """
    if weights is None:
        weights = [r.posterior for r in records]
    if len(weights) != len(records):
        raise ValidationError(f"{len(records)} records but {len(weights)} weight vectors")
    if records:
        n_experts = records[0].losses.size
        if forecasting is None:
            forecasting = records[0].aggregate_loss is not None
    elif n_experts is None:
        raise ValidationError("n_experts is required to write an empty run")
    forecasting = bool(forecasting)

    def rows():
        for r, w in zip(records, weights):
            row = [r.t, r.algorithm_loss]
            if forecasting:
                row += [r.aggregate_loss, r.forecast, r.outcome]
            row += [r.mixloss, r.gap, r.learning_rate, r.loss_min, r.loss_max, r.loss_range, r.weight_variance]
            if forecasting:
                row += list(r.losses)
            yield row + list(w) + list(r.prediction)

    write_table(path, record_columns(n_experts, forecasting), rows())


def read_round_records(path) -> List[Dict[str, object]]:
    """Rows written by :func:`write_round_records`.

    Scalars come back as floats (``t`` as int); ``w``, ``wstar`` and
    ``loss`` are gathered into arrays.
    """
    header, rows = read_table(path)
    groups = {"w": "w_", "wstar": "wstar_", "loss": "loss_"}
    out = []
    for line, row in rows:
        rec: Dict[str, object] = {}
        vectors: Dict[str, list] = {k: [] for k in groups}
        for col in header:
            key = col.rsplit("_", 1)[0] if col[-1].isdigit() and "_" in col else None
            value = _number(row[col], path, line, col)
            if key in groups:
                vectors[key].append(value)
            else:
                rec[col] = int(value) if col == "t" else value
        rec.update({k: np.array(v) for k, v in vectors.items() if v})
        out.append(rec)
    return out


# ---------------------------------------------------------------- synthetic


@dataclass(frozen=True)
class SyntheticSpec:
    """Piecewise-stationary loss stream: per-segment means plus Gaussian noise.

    ``segment_starts`` are the first (0-based) rounds of segments 2, 3, ...;
    by default the horizon is split into equal segments.
    """

    n_experts: int
    horizon: int
    segment_means: Tuple[Tuple[float, ...], ...]
    noise_std: float = 1.0
    seed: int = 0
    segment_starts: Optional[Tuple[int, ...]] = None

    def __post_init__(self):
        means = tuple(tuple(float(v) for v in row) for row in self.segment_means)
        object.__setattr__(self, "segment_means", means)
        if self.n_experts < 1 or self.horizon < 1:
            raise ValidationError("need at least one expert and one round")
        if not means or any(len(row) != self.n_experts for row in means):
            raise ValidationError(f"every segment needs {self.n_experts} means")
        if not self.noise_std >= 0:
            raise ValidationError("noise_std must be non-negative")
        starts = self.segment_starts
        if starts is None:
            k = len(means)
            starts = tuple(round(j * self.horizon / k) for j in range(1, k))
        starts = tuple(int(s) for s in starts)
        if len(starts) != len(means) - 1 or list(starts) != sorted(set(starts)) or (
            starts and not (0 < starts[0] and starts[-1] < self.horizon)
        ):
            raise ValidationError("segment starts must be increasing and inside the horizon")
        object.__setattr__(self, "segment_starts", starts)

    def mean_matrix(self) -> np.ndarray:
        bounds = [0, *self.segment_starts, self.horizon]
        M = np.empty((self.horizon, self.n_experts))
        for j, row in enumerate(self.segment_means):
            M[bounds[j]:bounds[j + 1]] = row
        return M

    @classmethod
    def from_dict(cls, d: Mapping) -> "SyntheticSpec":
        starts = d.get("segment_starts")
        return cls(
            int(d["n_experts"]),
            int(d["horizon"]),
            tuple(tuple(r) for r in d["segment_means"]),
            float(d.get("noise_std", 1.0)),
            int(d.get("seed", 0)),
            None if starts is None else tuple(starts),
        )


def load_synthetic_spec(path) -> SyntheticSpec:
    with open(path, encoding="utf-8") as fh:
        return SyntheticSpec.from_dict(json.load(fh))


def synthetic_losses(spec: SyntheticSpec) -> np.ndarray:
    """``(T, N)`` loss matrix of the spec.

    Noise is ``Generator(PCG64(seed)).standard_normal((T, N))`` (numpy's
    ziggurat sampler), drawn in one call in row-major order.
    """
    noise = np.random.Generator(np.random.PCG64(spec.seed)).standard_normal((spec.horizon, spec.n_experts))
    return spec.mean_matrix() + spec.noise_std * noise


def generate_synthetic(spec: SyntheticSpec) -> List[RoundInput]:
    ones = np.ones(spec.n_experts)
    return [RoundInput(row, ones) for row in synthetic_losses(spec)]


# daily load fixture: 8 calendar specialists and one generalist
_TIME_OF_DAY = {"night": (0, 5), "morning": (6, 11), "day": (12, 17), "evening": (18, 23)}
_DAY_TYPES = {"workday": 1, "weekend": 0}


def daily_load_expert_names() -> List[str]:
    return [f"{d}_{tod}" for d in _DAY_TYPES for tod in _TIME_OF_DAY] + ["generalist"]


def _hours_outside(hour: int, start: int, end: int) -> int:
    if start <= hour <= end:
        return 0
    return min((start - hour) % 24, (hour - end) % 24)


def generate_daily_load(days: int = 120, seed: int = 0) -> List[ForecastRound]:
    """Hourly synthetic load with calendar-specialized forecasters.

    The load follows a daily cycle that is lower on weekends.  A specialist
    forecasts with noise of standard deviation ``1 + 0.5 d`` where ``d`` is
    the number of hours outside its time-of-day block, tripled on the wrong
    day type.  The generalist has standard deviation 3 everywhere.
    Features: ``hour``, ``workday`` (0/1) and ``day_of_year``.
    """
    if days < 1:
        raise ValidationError("need at least one day")
    rng = np.random.Generator(np.random.PCG64(seed))
    rounds = []
    for day in range(days):
        workday = int(day % 7 < 5)
        for hour in range(24):
            level = 50.0 + 15.0 * math.sin(2 * math.pi * (hour - 8) / 24) - (0.0 if workday else 8.0)
            outcome = level + rng.standard_normal()
            forecasts = []
            for d_val in _DAY_TYPES.values():
                for start, end in _TIME_OF_DAY.values():
                    sd = 1.0 + 0.5 * _hours_outside(hour, start, end)
                    if d_val != workday:
                        sd *= 3.0
                    forecasts.append(level + sd * rng.standard_normal())
            forecasts.append(level + 3.0 * rng.standard_normal())
            feats = {"hour": float(hour), "workday": float(workday), "day_of_year": float(day % 365 + 1)}
            rounds.append(ForecastRound(np.array(forecasts), outcome, None, feats))
    return rounds


def daily_load_profiles_dict(hour_slope: float) -> dict:
    """Profile config matching :func:`generate_daily_load`'s specialists."""
    experts = []
    for d_name, d_val in _DAY_TYPES.items():
        for tod, (start, end) in _TIME_OF_DAY.items():
            experts.append({
                "name": f"{d_name}_{tod}",
                "factors": [
                    {"feature": "hour", "plateau": [start, end], "slope": hour_slope, "period": 24},
                    {"feature": "workday", "plateau": [d_val, d_val], "slope": 0},
                ],
            })
    return {"experts": experts}
