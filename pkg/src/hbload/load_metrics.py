"""Load and fatigue indicators derived from Pearson-plane trajectories."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Literal

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from .moments import Trajectory
from .pearson import metric1_array, metric2_array

MetricName = Literal["metric1", "metric2", "beta1", "beta2"]
PeakSource = Literal["window_metric1", "window_kurtosis", "window_skew2"]

DEFAULT_DELTA = 0.1


@dataclass(frozen=True, eq=False)
class MetricSeries:
    """Per-point distances to the normal (metric1) and uniform (metric2) landmarks."""

    t: np.ndarray
    index: np.ndarray
    metric1: np.ndarray
    metric2: np.ndarray
    beta1: np.ndarray
    beta2: np.ndarray
    mode: str = ""

    def __len__(self) -> int:
        return int(self.t.size)

    def column(self, which: str) -> np.ndarray:
        if which not in ("metric1", "metric2", "beta1", "beta2"):
            raise ValueError(f"unknown column {which!r}")
        return getattr(self, which)

    def between(self, t0: float, t1: float) -> "MetricSeries":
        keep = (self.t >= t0) & (self.t <= t1)
        return MetricSeries(*(a[keep] for a in (
            self.t, self.index, self.metric1, self.metric2, self.beta1, self.beta2)), mode=self.mode)


def metric_series(trajectory: Trajectory) -> MetricSeries:
    """Map each trajectory point to the plane; degenerate points are already absent."""
    if len(trajectory) == 0:
        raise ValueError("empty trajectory")
    b1 = trajectory.skewness**2
    b2 = trajectory.kurtosis
    return MetricSeries(
        t=trajectory.t,
        index=trajectory.index,
        metric1=metric1_array(b1, b2),
        metric2=metric2_array(b1, b2),
        beta1=b1,
        beta2=b2,
        mode=trajectory.mode,
    )


@dataclass(frozen=True)
class SlopeEstimate:
    t0: float
    t1: float
    slope: float  # metric units per second
    intercept: float
    residual_std: float
    count: int


def slope(series: MetricSeries, t0: float, t1: float, which: MetricName = "metric1") -> SlopeEstimate:
    """Least-squares line of a metric against time over ``[t0, t1]``.

    ``residual_std`` uses n - 2 degrees of freedom.
    """
    if not t0 < t1:
        raise ValueError("t0 must be before t1")
    part = series.between(t0, t1)
    n = len(part)
    if n < 3:
        raise ValueError(f"need at least 3 points in [{t0}, {t1}], got {n}")
    t = part.t
    y = part.column(which)
    tc = t - t.mean()
    sxx = float(tc @ tc)
    if sxx == 0:
        raise ValueError("all points share one timestamp")
    b = float(tc @ (y - y.mean())) / sxx
    a = float(y.mean() - b * t.mean())
    resid = y - (a + b * t)
    return SlopeEstimate(t0, t1, b, a, float(np.sqrt(resid @ resid / (n - 2))), n)


# -- regime changes --------------------------------------------------------


@dataclass(frozen=True)
class PeakConfig:
    """Rolling median/MAD peak detector settings.

    ``half_width`` is in samples of the metric series; the baseline window
    spans ``2 * half_width + 1`` points, truncated at the series ends.
    """

    half_width: int = 300
    k: float = 25.0

    def __post_init__(self):
        if self.half_width < 1:
            raise ValueError("half_width must be >= 1")
        if self.k <= 0:
            raise ValueError("k must be positive")


@dataclass(frozen=True)
class RegimeEvent:
    t: float
    index: int
    magnitude: float  # height above the rolling median
    source: str
    kind: str = "peak"


def rolling_median_mad(y: np.ndarray, half_width: int) -> tuple[np.ndarray, np.ndarray]:
    """Centered rolling median and median absolute deviation."""
    n = y.size
    width = 2 * half_width + 1
    med = np.empty(n)
    mad = np.empty(n)
    if n >= width:
        win = sliding_window_view(y, width)
        mid = np.median(win, axis=1)
        med[half_width : n - half_width] = mid
        mad[half_width : n - half_width] = np.median(np.abs(win - mid[:, None]), axis=1)
        edges = list(range(half_width)) + list(range(n - half_width, n))
    else:
        edges = range(n)
    for i in edges:
        s = y[max(0, i - half_width) : i + half_width + 1]
        m = np.median(s)
        med[i] = m
        mad[i] = np.median(np.abs(s - m))
    return med, mad


def _source_values(series: MetricSeries, source: str) -> np.ndarray:
    if source == "window_metric1":
        return series.metric1
    if source == "window_kurtosis":
        return series.beta2
    if source == "window_skew2":
        return series.beta1
    raise ValueError(f"unknown peak source {source!r}")


def detect_regime_changes(
    series: MetricSeries, config: PeakConfig = PeakConfig(), source: PeakSource = "window_metric1"
) -> list[RegimeEvent]:
    """Sharp peaks of a window-mode metric that stand out from a rolling baseline.

    A point is a candidate when it is a local maximum and exceeds the rolling
    median by more than ``k`` rolling MADs. Candidates closer than one
    half-width to the previous event are merged, keeping the higher one.
    """
    y = _source_values(series, source)
    if y.size < 2 * config.half_width + 1:
        raise ValueError(
            f"series of {y.size} points is shorter than the baseline window "
            f"{2 * config.half_width + 1}"
        )
    med, mad = rolling_median_mad(y, config.half_width)
    local_max = np.zeros(y.size, dtype=bool)
    local_max[1:-1] = (y[1:-1] >= y[:-2]) & (y[1:-1] >= y[2:])
    above = y - med > config.k * mad
    picked: list[int] = []
    for i in np.flatnonzero(local_max & above):
        if picked and i - picked[-1] <= config.half_width:
            if y[i] > y[picked[-1]]:
                picked[-1] = int(i)
        else:
            picked.append(int(i))
    return [
        RegimeEvent(
            t=float(series.t[i]),
            index=int(series.index[i]),
            magnitude=float(y[i] - med[i]),
            source=source,
        )
        for i in picked
    ]


def recovery_delay(
    series: MetricSeries,
    exercise_start_t: float,
    exercise_end_t: float,
    delta: float = DEFAULT_DELTA,
) -> float | None:
    """Time after the exercise end until metric1 returns to its resting baseline.

    The baseline is the median metric1 before ``exercise_start_t``. Returns
    the delay to the first point from which metric1 stays within ``delta`` of
    the baseline through the end of the series, or ``None`` if it never does.
    """
    if delta <= 0:
        raise ValueError("delta must be positive")
    pre = series.metric1[series.t < exercise_start_t]
    if pre.size == 0:
        raise ValueError("no points before exercise start for a baseline")
    baseline = float(np.median(pre))
    after = series.t >= exercise_end_t
    t = series.t[after]
    if t.size == 0:
        return None
    inside = np.abs(series.metric1[after] - baseline) <= delta
    if not inside[-1]:
        return None
    outside = np.flatnonzero(~inside)
    first = 0 if outside.size == 0 else int(outside[-1]) + 1
    return float(t[first] - exercise_end_t)
