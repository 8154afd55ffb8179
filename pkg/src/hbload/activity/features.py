"""Exercise records, derived features and design matrices."""

from __future__ import annotations

import csv
import io
import warnings
from dataclasses import dataclass
from enum import IntEnum
from typing import Iterable, Sequence, TextIO

import numpy as np


class ActivityType(IntEnum):
    RUNNING = 1
    SKIING = 2
    WALKING = 3

    @classmethod
    def parse(cls, value) -> "ActivityType":
        if isinstance(value, str):
            v = value.strip()
            if v.isdigit():
                return cls(int(v))
            return cls[v.upper()]
        return cls(int(value))


@dataclass(frozen=True)
class ExerciseRecord:
    activity: ActivityType
    distance_m: float
    duration_s: float
    hr_rest: float
    hr_min: float
    hr_max: float
    hr_avg: float
    hr_rest_after: float

    def __post_init__(self):
        object.__setattr__(self, "activity", ActivityType.parse(self.activity))
        if self.distance_m <= 0 or self.duration_s <= 0:
            raise ValueError("distance and duration must be positive")
        if not self.hr_min <= self.hr_avg <= self.hr_max:
            raise ValueError(
                f"need hr_min <= hr_avg <= hr_max, got {self.hr_min}, {self.hr_avg}, {self.hr_max}"
            )


@dataclass(frozen=True)
class DynamicFeatures:
    pace: float  # min/km
    velocity: float  # m/min
    metric_d: float  # pace squared


def dynamic_features(distance_m: float, duration_s: float) -> DynamicFeatures:
    if distance_m <= 0 or duration_s <= 0:
        raise ValueError("distance and duration must be positive")
    minutes = duration_s / 60.0
    pace = minutes / (distance_m / 1000.0)
    return DynamicFeatures(pace=pace, velocity=distance_m / minutes, metric_d=pace * pace)


@dataclass(frozen=True)
class HeartDerivedFeatures:
    working_range: float  # MHR - minHR
    reserve: float  # MHR - HRrest
    recovery: float  # MHR - resting HR after the exercise


def heart_derived(hr_rest: float, hr_max: float, hr_min: float, hr_rest_after: float) -> HeartDerivedFeatures:
    if min(hr_rest, hr_max, hr_min, hr_rest_after) <= 0:
        raise ValueError("heart rates must be positive")
    if hr_min > hr_max:
        raise ValueError(f"minimal HR {hr_min} exceeds maximal HR {hr_max}")
    return HeartDerivedFeatures(hr_max - hr_min, hr_max - hr_rest, hr_max - hr_rest_after)


MODEL_FEATURES: dict[int, tuple[str, ...]] = {
    1: ("distance", "duration"),
    2: ("MHR", "AHR"),
    3: ("distance", "duration", "pace", "velocity", "metricD"),
    4: ("distance", "duration", "pace", "velocity", "metricD", "MHR", "AHR"),
}


def feature_row(rec: ExerciseRecord) -> dict[str, float]:
    dyn = dynamic_features(rec.distance_m, rec.duration_s)
    return {
        "distance": rec.distance_m,
        "duration": rec.duration_s,
        "pace": dyn.pace,
        "velocity": dyn.velocity,
        "metricD": dyn.metric_d,
        "MHR": rec.hr_max,
        "AHR": rec.hr_avg,
    }


@dataclass(frozen=True, eq=False)
class Dataset:
    X: np.ndarray
    y: np.ndarray
    feature_names: tuple[str, ...]
    x_mean: np.ndarray
    x_std: np.ndarray
    constant_columns: tuple[str, ...] = ()
    model_id: int | None = None


def standardization(X: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Per-column mean and population std; constant columns get std 1."""
    mean = X.mean(axis=0)
    std = X.std(axis=0)
    return mean, np.where(std > 0, std, 1.0)


def build_dataset(records: Sequence[ExerciseRecord], model_id: int) -> Dataset:
    """Design matrix, targets and standardization for one of the four models.

    Columns follow the order of the model formula. Constant columns are
    kept and reported through a warning and ``constant_columns``.
    """
    if model_id not in MODEL_FEATURES:
        raise ValueError(f"model id must be one of {sorted(MODEL_FEATURES)}, got {model_id}")
    if len(records) < 2:
        raise ValueError("need at least two records")
    names = MODEL_FEATURES[model_id]
    rows = [feature_row(r) for r in records]
    X = np.array([[row[c] for c in names] for row in rows], dtype=float)
    y = np.array([float(r.activity) for r in records])
    const = tuple(n for j, n in enumerate(names) if np.all(X[:, j] == X[0, j]))
    if const:
        warnings.warn(f"constant feature columns: {', '.join(const)}", stacklevel=2)
    mean, std = standardization(X)
    return Dataset(X, y, names, mean, std, const, model_id)


# -- file format -----------------------------------------------------------

EXERCISE_COLUMNS = (
    "activity", "distance_m", "duration_s", "hr_rest", "hr_min", "hr_max", "hr_avg", "hr_rest_after",
)


class SchemaError(ValueError):
    pass


def read_exercises(stream: TextIO | str) -> list[ExerciseRecord]:
    if isinstance(stream, str):
        stream = io.StringIO(stream)
    lines = (l for l in stream if l.strip() and not l.lstrip().startswith("#"))
    reader = csv.DictReader(lines)
    if reader.fieldnames is None:
        raise SchemaError("empty exercise dataset")
    header = tuple(f.strip() for f in reader.fieldnames)
    if header != EXERCISE_COLUMNS:
        raise SchemaError(f"expected header {','.join(EXERCISE_COLUMNS)}, got {','.join(header)}")
    out = []
    for i, row in enumerate(reader, start=2):
        try:
            vals = {k.strip(): v for k, v in row.items()}
            out.append(ExerciseRecord(
                ActivityType.parse(vals["activity"]),
                *(float(vals[c]) for c in EXERCISE_COLUMNS[1:]),
            ))
        except (KeyError, ValueError, TypeError) as exc:
            raise SchemaError(f"record {i}: {exc}") from None
    if not out:
        raise SchemaError("exercise dataset has no records")
    return out


def format_exercises(records: Iterable[ExerciseRecord]) -> str:
    lines = [",".join(EXERCISE_COLUMNS)]
    for r in records:
        vals = [int(r.activity)] + [getattr(r, c) for c in EXERCISE_COLUMNS[1:]]
        lines.append(",".join(repr(v) for v in vals))
    return "\n".join(lines) + "\n"


# (pace min/km range, AHR bpm range, distance km range) per activity
_SYNTH_PROFILES = {
    ActivityType.RUNNING: ((4.5, 6.0), (155.0, 175.0), (3.0, 15.0)),
    ActivityType.SKIING: ((5.0, 7.5), (128.0, 148.0), (5.0, 25.0)),
    ActivityType.WALKING: ((9.0, 13.0), (95.0, 118.0), (2.0, 8.0)),
}


def synthetic_exercises(n: int = 60, seed: int = 0, twins: int = 8) -> list[ExerciseRecord]:
    """Balanced three-activity dataset separable in (pace, AHR).

    Running and skiing overlap in pace and differ in average heart rate;
    walking is slower and calmer than both. In the first ``twins``
    running/skiing pairs both records share distance and duration, so only
    heart-rate features can tell them apart.
    """
    rng = np.random.default_rng(seed)
    kinds = list(ActivityType)
    out: list[ExerciseRecord] = []
    for i in range(n):
        kind = kinds[i % 3]
        (p0, p1), (a0, a1), (d0, d1) = _SYNTH_PROFILES[kind]
        twin = i // 3 < twins
        if twin and kind is ActivityType.RUNNING:
            p0, p1 = 5.0, 6.0
        pace = rng.uniform(p0, p1)
        ahr = round(rng.uniform(a0, a1))
        dist = round(rng.uniform(d0, d1) * 1000.0, 1)
        duration = round(pace * dist / 1000.0 * 60.0, 1)
        if twin and kind is ActivityType.SKIING:
            dist, duration = out[-1].distance_m, out[-1].duration_s
        hr_rest = round(rng.uniform(50, 68))
        hr_min = hr_rest + round(rng.uniform(5, 20))
        hr_max = ahr + round(rng.uniform(8, 25))
        hr_after = hr_rest + round(rng.uniform(3, 15))
        out.append(ExerciseRecord(kind, dist, duration, hr_rest, min(hr_min, ahr), hr_max, ahr, hr_after))
    return out
