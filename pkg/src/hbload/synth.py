"""Seeded synthetic heartbeat series for tests and demos."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .ingest import HB_MAX_MS, HB_MIN_MS, HeartSeries

DEFAULT_SEED = 20180503


@dataclass(frozen=True)
class Segment:
    beats: int
    mean_ms: float
    std_ms: float
    trend_ms: float = 0.0  # total linear drift across the segment

    def __post_init__(self):
        if self.beats < 1:
            raise ValueError("segment needs at least one beat")
        if self.std_ms < 0:
            raise ValueError("std must be non-negative")
        if not HB_MIN_MS <= self.mean_ms <= HB_MAX_MS:
            raise ValueError(f"mean {self.mean_ms} ms outside [{HB_MIN_MS}, {HB_MAX_MS}]")


@dataclass(frozen=True)
class SynthSpec:
    segments: tuple[Segment, ...]
    seed: int = DEFAULT_SEED

    def __post_init__(self):
        if not self.segments:
            raise ValueError("at least one segment is required")
        object.__setattr__(self, "segments", tuple(self.segments))

    @property
    def boundaries(self) -> list[int]:
        """Sample index at which each segment after the first begins."""
        return list(np.cumsum([s.beats for s in self.segments])[:-1])


def three_phase_spec(
    seed: int = DEFAULT_SEED,
    beats: int = 1000,
    mean_ms: float = 800.0,
    rest_std: float = 80.0,
    exercise_std: float = 15.0,
) -> SynthSpec:
    """Rest / exercise / rest fixture: high variability at rest, low during exercise."""
    rest = Segment(beats, mean_ms, rest_std)
    return SynthSpec((rest, Segment(beats, mean_ms, exercise_std), rest), seed)


def generate_intervals(spec: SynthSpec) -> np.ndarray:
    rng = np.random.default_rng(spec.seed)
    parts = []
    for seg in spec.segments:
        base = seg.mean_ms + seg.trend_ms * (np.arange(seg.beats) / max(seg.beats - 1, 1))
        noise = rng.standard_normal(seg.beats) * seg.std_ms if seg.std_ms > 0 else np.zeros(seg.beats)
        parts.append(base + noise)
    return np.concatenate(parts)


def generate(spec: SynthSpec) -> HeartSeries:
    """Gaussian intervals per segment; timestamps are cumulative interval sums.

    When ``spec`` has exactly three segments the exercise markers are set at
    the start of the second and third segments.
    """
    hb = generate_intervals(spec)
    if np.any(hb <= 0):
        raise ValueError("generated non-positive intervals; reduce std")
    t = np.cumsum(hb) / 1000.0
    start = end = None
    if len(spec.segments) == 3:
        b = spec.boundaries
        start, end = float(t[b[0]]), float(t[b[1]])
    return HeartSeries(t, hb, start_s=start, end_s=end)
