"""Heartbeat recording ingestion, validation and phase marking.

Recordings are delimiter-separated text with a header row. The header names
an optional ``t_s`` column and exactly one value column, either ``hb_ms``
(beat-to-beat interval) or ``hr_bpm`` (integer heart rate). Lines starting
with ``#`` are comments.

Rate-only recordings are converted to approximate intervals and the series
is flagged ``low_precision``: a rate rounded to an integer carries roughly an
order of magnitude less information than a millisecond interval.
"""

from __future__ import annotations

import csv
import dataclasses
import io
import math
from dataclasses import dataclass, field
from enum import Enum
from typing import Iterable, Literal, TextIO

import numpy as np

HB_MIN_MS = 250.0
HB_MAX_MS = 3000.0

ValueColumn = Literal["hb_ms", "hr_bpm"]


class RecordingError(ValueError):
    """Raised for malformed or inconsistent recordings."""

    def __init__(self, message: str, line: int | None = None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


class Phase(str, Enum):
    REST_BEFORE = "rest_before"
    EXERCISE = "exercise"
    REST_AFTER = "rest_after"


def hb_to_hr(hb_ms):
    """Heart rate in bpm from a beat interval in ms, rounded half-up.

    Accepts a scalar or an array. Scalars return ``int``.
    """
    arr = np.asarray(hb_ms, dtype=float)
    if not np.all(np.isfinite(arr)) or np.any(arr <= 0):
        raise ValueError("heartbeat interval must be positive and finite")
    hr = np.floor(60000.0 / arr + 0.5).astype(np.int64)
    if hr.ndim == 0:
        return int(hr)
    return hr


def hr_to_hb(hr_bpm):
    """Approximate beat interval in ms from a heart rate in bpm.

    The result is lossy: many intervals map to the same integer rate.
    """
    arr = np.asarray(hr_bpm, dtype=float)
    if not np.all(np.isfinite(arr)) or np.any(arr <= 0):
        raise ValueError("heart rate must be positive and finite")
    hb = 60000.0 / arr
    if hb.ndim == 0:
        return float(hb)
    return hb


@dataclass(frozen=True)
class HeartSample:
    t: float
    hb_ms: float
    hr_bpm: int


@dataclass(frozen=True, eq=False)
class HeartSeries:
    """Per-beat samples stored column-wise.

    ``t`` is seconds from recording start, ``hb_ms`` the beat interval and
    ``hr_bpm`` the derived integer rate. ``start_s``/``end_s`` are the
    optional exercise markers.
    """

    t: np.ndarray
    hb_ms: np.ndarray
    hr_bpm: np.ndarray = field(default=None)  # type: ignore[assignment]
    start_s: float | None = None
    end_s: float | None = None
    low_precision: bool = False

    def __post_init__(self):
        t = np.asarray(self.t, dtype=float)
        hb = np.asarray(self.hb_ms, dtype=float)
        if t.ndim != 1 or t.shape != hb.shape:
            raise ValueError("t and hb_ms must be 1-d arrays of equal length")
        if not (np.all(np.isfinite(t)) and np.all(np.isfinite(hb))):
            raise ValueError("non-finite values in series")
        if t.size and np.any(np.diff(t) < 0):
            raise ValueError("timestamps must not decrease")
        hr = hb_to_hr(hb) if self.hr_bpm is None else np.asarray(self.hr_bpm, dtype=np.int64)
        if hr.shape != hb.shape:
            raise ValueError("hr_bpm must match hb_ms in length")
        object.__setattr__(self, "t", t)
        object.__setattr__(self, "hb_ms", hb)
        object.__setattr__(self, "hr_bpm", np.atleast_1d(hr))
        if (self.start_s is None) != (self.end_s is None):
            raise ValueError("start_s and end_s must be given together")
        if self.start_s is not None:
            _check_marks(t, self.start_s, self.end_s)

    def __len__(self) -> int:
        return int(self.t.size)

    def __getitem__(self, i: int) -> HeartSample:
        return HeartSample(float(self.t[i]), float(self.hb_ms[i]), int(self.hr_bpm[i]))

    def __iter__(self):
        for i in range(len(self)):
            yield self[i]

    @property
    def span(self) -> tuple[float, float]:
        return float(self.t[0]), float(self.t[-1])

    @property
    def has_phases(self) -> bool:
        return self.start_s is not None

    def phases(self) -> np.ndarray:
        """Phase label per sample (object array of :class:`Phase`)."""
        if not self.has_phases:
            raise ValueError("series has no phase markers")
        out = np.empty(len(self), dtype=object)
        out.fill(Phase.EXERCISE)
        out[self.t < self.start_s] = Phase.REST_BEFORE
        out[self.t >= self.end_s] = Phase.REST_AFTER
        return out

    def phase_durations(self) -> dict[Phase, float]:
        """Duration in seconds of each phase over the recording span."""
        if not self.has_phases:
            raise ValueError("series has no phase markers")
        t0, t1 = self.span
        return {
            Phase.REST_BEFORE: self.start_s - t0,
            Phase.EXERCISE: self.end_s - self.start_s,
            Phase.REST_AFTER: t1 - self.end_s,
        }

    def phase_mask(self, phase: Phase | str) -> np.ndarray:
        phase = Phase(phase)
        if not self.has_phases:
            raise ValueError("series has no phase markers")
        if phase is Phase.REST_BEFORE:
            return self.t < self.start_s
        if phase is Phase.REST_AFTER:
            return self.t >= self.end_s
        return (self.t >= self.start_s) & (self.t < self.end_s)

    def select(self, mask: np.ndarray) -> "HeartSeries":
        """Subset of samples; phase markers are dropped if they fall outside."""
        t = self.t[mask]
        keep_marks = (
            self.has_phases and t.size > 0 and t[0] <= self.start_s < self.end_s <= t[-1]
        )
        return HeartSeries(
            t,
            self.hb_ms[mask],
            self.hr_bpm[mask],
            start_s=self.start_s if keep_marks else None,
            end_s=self.end_s if keep_marks else None,
            low_precision=self.low_precision,
        )


def _check_marks(t: np.ndarray, start_s: float, end_s: float) -> None:
    if not start_s < end_s:
        raise ValueError(f"exercise start {start_s} must precede end {end_s}")
    if t.size == 0:
        raise ValueError("cannot mark phases on an empty series")
    lo, hi = float(t[0]), float(t[-1])
    for name, v in (("start", start_s), ("end", end_s)):
        if not lo <= v <= hi:
            raise ValueError(f"{name} marker {v} outside recording span [{lo}, {hi}]")


def mark_phases(series: HeartSeries, start_s: float, end_s: float) -> HeartSeries:
    """Return a copy of ``series`` with exercise start/end markers set."""
    _check_marks(series.t, start_s, end_s)
    return dataclasses.replace(series, start_s=float(start_s), end_s=float(end_s))


def series_from_intervals(hb_ms: Iterable[float], t: Iterable[float] | None = None) -> HeartSeries:
    """Build a series from intervals; timestamps default to their cumulative sum."""
    hb = np.fromiter(hb_ms, dtype=float)
    ts = np.cumsum(hb) / 1000.0 if t is None else np.asarray(t, dtype=float)
    return HeartSeries(ts, hb)


# -- parsing ---------------------------------------------------------------


def _data_lines(stream: TextIO):
    for lineno, line in enumerate(stream, start=1):
        stripped = line.strip()
        if not stripped or stripped.startswith("#"):
            continue
        yield lineno, line


def parse_recording(
    stream: TextIO | str,
    value_column: ValueColumn | None = None,
    delimiter: str = ",",
) -> HeartSeries:
    """Parse a heartbeat recording.

    Args:
        stream: open text stream, or the recording contents as a string.
        value_column: expected value column. ``None`` accepts whichever of
            ``hb_ms``/``hr_bpm`` the header names.
        delimiter: field separator.

    Raises:
        RecordingError: empty input, bad header, malformed row (with its
            line number) or timestamps that are not strictly increasing.
    """
    if isinstance(stream, str):
        stream = io.StringIO(stream)
    lines = _data_lines(stream)
    try:
        header_line, header = next(lines)
    except StopIteration:
        raise RecordingError("empty recording") from None
    cols = [c.strip() for c in next(csv.reader([header], delimiter=delimiter))]
    present = [c for c in ("hb_ms", "hr_bpm") if c in cols]
    if len(present) != 1:
        raise RecordingError("header needs exactly one of hb_ms, hr_bpm", header_line)
    column = present[0]
    if value_column is not None and column != value_column:
        raise RecordingError(f"expected column {value_column}, found {column}", header_line)
    unknown = set(cols) - {"t_s", column}
    if unknown:
        raise RecordingError(f"unknown columns {sorted(unknown)}", header_line)
    vi = cols.index(column)
    ti = cols.index("t_s") if "t_s" in cols else None

    ts: list[float] = []
    vals: list[float] = []
    for lineno, line in lines:
        row = next(csv.reader([line], delimiter=delimiter))
        if len(row) != len(cols):
            raise RecordingError(f"expected {len(cols)} fields, got {len(row)}", lineno)
        try:
            v = float(row[vi])
            tv = float(row[ti]) if ti is not None else None
        except ValueError as exc:
            raise RecordingError(str(exc), lineno) from None
        if not math.isfinite(v) or v <= 0:
            raise RecordingError(f"{column} must be positive, got {row[vi]}", lineno)
        if tv is not None:
            if not math.isfinite(tv) or tv < 0:
                raise RecordingError(f"invalid timestamp {row[ti]}", lineno)
            if ts and tv <= ts[-1]:
                raise RecordingError(
                    f"non-monotone timestamps: {tv} after {ts[-1]}", lineno
                )
            ts.append(tv)
        if column == "hr_bpm" and v != int(v):
            raise RecordingError(f"hr_bpm must be an integer, got {row[vi]}", lineno)
        vals.append(v)
    if not vals:
        raise RecordingError("recording has no samples")

    values = np.asarray(vals)
    if column == "hb_ms":
        hb = values
        hr = hb_to_hr(hb)
    else:
        hr = values.astype(np.int64)
        hb = hr_to_hb(values)
    t = np.asarray(ts) if ti is not None else np.cumsum(hb) / 1000.0
    return HeartSeries(t, hb, hr, low_precision=column == "hr_bpm")


def format_recording(series: HeartSeries, delimiter: str = ",") -> str:
    """Serialize a series so that :func:`parse_recording` restores it exactly.

    Phase markers are not part of the recording format (see
    :func:`read_phase_sidecar`).
    """
    column = "hr_bpm" if series.low_precision else "hb_ms"
    values = series.hr_bpm if series.low_precision else series.hb_ms
    out = [f"t_s{delimiter}{column}"]
    for t, v in zip(series.t.tolist(), values.tolist()):
        out.append(f"{t!r}{delimiter}{v!r}")
    return "\n".join(out) + "\n"


def read_phase_sidecar(path) -> tuple[float, float]:
    """Read exercise start/end seconds from a sidecar file with two numbers."""
    with open(path) as fh:
        text = "\n".join(l for l in fh.read().splitlines() if not l.lstrip().startswith("#"))
    parts = text.replace(",", " ").split()
    if len(parts) != 2:
        raise RecordingError(f"phase sidecar needs exactly two numbers, got {len(parts)}")
    try:
        return float(parts[0]), float(parts[1])
    except ValueError as exc:
        raise RecordingError(str(exc)) from None


# -- validation ------------------------------------------------------------


@dataclass
class ValidationReport:
    range_violations: list[int]
    duplicate_timestamps: list[int]
    gap_count: int
    max_gap_s: float
    median_step_s: float

    @property
    def ok(self) -> bool:
        return not self.range_violations and not self.duplicate_timestamps


def validate_series(
    series: HeartSeries,
    hb_range: tuple[float, float] = (HB_MIN_MS, HB_MAX_MS),
    gap_factor: float = 2.0,
) -> ValidationReport:
    """Report implausible intervals, repeated timestamps and time gaps.

    A gap is a timestamp step exceeding ``gap_factor`` times the median step,
    which usually means missed beats. The series is not modified.
    """
    lo, hi = hb_range
    bad = np.flatnonzero((series.hb_ms < lo) | (series.hb_ms > hi))
    steps = np.diff(series.t)
    dups = np.flatnonzero(steps == 0) + 1
    if steps.size:
        med = float(np.median(steps))
        gaps = steps > gap_factor * med if med > 0 else np.zeros(steps.size, bool)
        max_gap = float(steps.max())
    else:
        med, gaps, max_gap = 0.0, np.zeros(0, bool), 0.0
    return ValidationReport(
        range_violations=bad.tolist(),
        duplicate_timestamps=dups.tolist(),
        gap_count=int(gaps.sum()),
        max_gap_s=max_gap,
        median_step_s=med,
    )


def drop_implausible(
    series: HeartSeries, hb_range: tuple[float, float] = (HB_MIN_MS, HB_MAX_MS)
) -> HeartSeries:
    lo, hi = hb_range
    return series.select((series.hb_ms >= lo) & (series.hb_ms <= hi))
