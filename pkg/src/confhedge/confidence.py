"""Trapezoidal confidence functions over calendar-like features.

A :class:`Trapezoid` is 1 on its plateau, falls linearly to 0 over
``slope_width`` on either side, and is 0 beyond.  With a ``cyclic_period``
distances wrap around (hour of day, day of year), and a plateau whose start
exceeds its end wraps through the origin.  A :class:`ConfidenceProfile` is
the product of several trapezoids, one per specialization of an expert.

Profile files are JSON::

    {"experts": [
        {"name": "workday_night",
         "factors": [
            {"feature": "hour", "plateau": [0, 5], "slope": 2, "period": 24},
            {"feature": "workday", "plateau": [1, 1], "slope": 0}
         ]}
    ]}

``slope`` has no default and must be given for every factor.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path
from typing import Dict, Mapping, Optional, Sequence, Tuple

import numpy as np

from .exceptions import ValidationError


@dataclass(frozen=True)
class Trapezoid:
    plateau_start: float
    plateau_end: float
    slope_width: float
    cyclic_period: Optional[float] = None

    def __post_init__(self):
        if not self.slope_width >= 0:
            raise ValidationError("slope width must be non-negative")
        if self.cyclic_period is None:
            if self.plateau_start > self.plateau_end:
                raise ValidationError("plateau start exceeds end on a non-cyclic axis")
        elif not self.cyclic_period > 0:
            raise ValidationError("cyclic period must be positive")

    def distance(self, x: float) -> float:
        """Distance from ``x`` to the plateau (0 on the plateau)."""
        a, b, period = self.plateau_start, self.plateau_end, self.cyclic_period
        if period is None:
            if x < a:
                return a - x
            if x > b:
                return x - b
            return 0.0
        length = (b - a) % period
        if (x - a) % period <= length:
            return 0.0
        return min((a - x) % period, (x - b) % period)

    def __call__(self, x: float) -> float:
        d = self.distance(x)
        if d == 0:
            return 1.0
        if d >= self.slope_width:
            return 0.0
        return 1.0 - d / self.slope_width

    def crisp(self) -> "Trapezoid":
        return Trapezoid(self.plateau_start, self.plateau_end, 0.0, self.cyclic_period)


def trapezoid_eval(t: Trapezoid, x: float) -> float:
    return t(x)


@dataclass(frozen=True)
class ConfidenceProfile:
    factors: Tuple[Tuple[str, Trapezoid], ...]

    def __post_init__(self):
        if not self.factors:
            raise ValidationError("a confidence profile needs at least one factor")
        object.__setattr__(self, "factors", tuple((str(f), t) for f, t in self.factors))

    def __call__(self, features: Mapping[str, float]) -> float:
        value = 1.0
        for feature, trap in self.factors:
            try:
                x = features[feature]
            except KeyError:
                raise ValidationError(f"feature {feature!r} is missing") from None
            value *= trap(float(x))
        return value

    def crisp(self) -> "ConfidenceProfile":
        return ConfidenceProfile(tuple((f, t.crisp()) for f, t in self.factors))


def profile_eval(profile: ConfidenceProfile, features: Mapping[str, float]) -> float:
    return profile(features)


def _factor_from_dict(d: dict, where: str) -> Tuple[str, Trapezoid]:
    try:
        feature = d["feature"]
        start, end = d["plateau"]
        slope = d["slope"]
    except KeyError as exc:
        raise ValidationError(f"{where}: missing key {exc.args[0]!r}") from None
    except (TypeError, ValueError):
        raise ValidationError(f"{where}: plateau must be a [start, end] pair") from None
    period = d.get("period")
    return feature, Trapezoid(float(start), float(end), float(slope), None if period is None else float(period))


def profiles_from_dict(data: dict) -> Dict[str, ConfidenceProfile]:
    experts = data.get("experts")
    if not isinstance(experts, list) or not experts:
        raise ValidationError("profile config needs a non-empty 'experts' list")
    out: Dict[str, ConfidenceProfile] = {}
    for i, entry in enumerate(experts):
        name = entry.get("name")
        if not name:
            raise ValidationError(f"expert #{i} has no name")
        if name in out:
            raise ValidationError(f"duplicate expert name {name!r}")
        factors = [_factor_from_dict(f, f"expert {name!r}") for f in entry.get("factors", [])]
        out[name] = ConfidenceProfile(tuple(factors))
    return out


def profiles_to_dict(profiles: Mapping[str, ConfidenceProfile]) -> dict:
    experts = []
    for name, prof in profiles.items():
        factors = []
        for feature, t in prof.factors:
            f = {"feature": feature, "plateau": [t.plateau_start, t.plateau_end], "slope": t.slope_width}
            if t.cyclic_period is not None:
                f["period"] = t.cyclic_period
            factors.append(f)
        experts.append({"name": name, "factors": factors})
    return {"experts": experts}


def load_profiles(path, crisp: bool = False) -> Dict[str, ConfidenceProfile]:
    """Read a JSON profile config; ``crisp=True`` zeroes every slope."""
    with open(path, encoding="utf-8") as fh:
        try:
            data = json.load(fh)
        except json.JSONDecodeError as exc:
            raise ValidationError(f"{path}: invalid JSON ({exc})") from None
    profiles = profiles_from_dict(data)
    if crisp:
        profiles = {k: v.crisp() for k, v in profiles.items()}
    return profiles


def confidence_matrix(
    profiles: Mapping[str, ConfidenceProfile],
    expert_names: Sequence[str],
    features: Sequence[Mapping[str, float]],
) -> np.ndarray:
    """``(T, N)`` confidences for each round's features, experts in the given order.

    Experts without a profile are always fully awake.
    """
    P = np.ones((len(features), len(expert_names)))
    for j, name in enumerate(expert_names):
        prof = profiles.get(name)
        if prof is not None:
            P[:, j] = [prof(f) for f in features]
    return P


def data_path(name: str) -> Path:
    """Path of a file shipped in the package ``data`` directory."""
    return Path(__file__).with_name("data") / name


def calendar_taxonomy(
    hour_slope: float, season_slope: float
) -> Dict[str, ConfidenceProfile]:
    """The 4 x 2 x 4 calendar grid plus 4 season experts and one anytime expert."""
    tods = {"night": (0, 5), "morning": (6, 11), "day": (12, 17), "evening": (18, 23)}
    seasons = {"winter": (335, 59), "spring": (60, 151), "summer": (152, 243), "fall": (244, 334)}
    daytypes = {"workday": (1, 1), "weekend": (0, 0)}
    out: Dict[str, ConfidenceProfile] = {}
    for s, (s0, s1) in seasons.items():
        season = ("day_of_year", Trapezoid(s0, s1, season_slope, 365))
        for d, (d0, d1) in daytypes.items():
            for tod, (h0, h1) in tods.items():
                out[f"{s}_{d}_{tod}"] = ConfidenceProfile(
                    (season, ("workday", Trapezoid(d0, d1, 0.0)), ("hour", Trapezoid(h0, h1, hour_slope, 24)))
                )
    for s, (s0, s1) in seasons.items():
        out[f"{s}_all"] = ConfidenceProfile((("day_of_year", Trapezoid(s0, s1, season_slope, 365)),))
    # the anytime expert has no profile and is always awake
    return out

