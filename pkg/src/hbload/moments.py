"""Streaming mean, standard deviation, skewness and kurtosis.

Two ensembles are supported: everything accumulated since the start of a
recording, and a fixed-length sliding window of the most recent samples.
All estimators are population (1/n) moments and kurtosis is non-excess
(b2, equal to 3 for a normal distribution).

``batch_moments`` is the two-pass reference; the streaming paths are checked
against it in the test suite.
"""

from __future__ import annotations

import copy
import math
from collections import deque
from dataclasses import dataclass, field

import numpy as np

MIN_COUNT = 4
DEFAULT_WINDOW = 100
RECOMPUTE_EVERY = 4096

# vectorized paths recompute exact sums once per block
_BLOCK = RECOMPUTE_EVERY


class InsufficientData(ValueError):
    """Fewer samples than a fourth-moment summary needs."""


class DegenerateSample(ValueError):
    """All samples equal, so skewness and kurtosis are undefined."""


@dataclass(frozen=True)
class MomentSummary:
    n: int
    mean: float
    std: float
    skewness: float
    kurtosis: float

    @property
    def excess_kurtosis(self) -> float:
        return self.kurtosis - 3.0


def _summary_from_central(n, mean, m2, m3, m4) -> MomentSummary:
    # m2..m4 are the 1/n central moments
    return MomentSummary(
        n=int(n),
        mean=float(mean),
        std=math.sqrt(m2),
        skewness=m3 / m2**1.5,
        kurtosis=m4 / (m2 * m2),
    )


def _central_moments(x: np.ndarray, axis: int = -1):
    """Corrected two-pass central moments m2, m3, m4 and the mean along ``axis``."""
    mean = x.mean(axis=axis, keepdims=True)
    d = x - mean
    # second pass correction for rounding in the first mean
    corr = d.mean(axis=axis, keepdims=True)
    mean = mean + corr
    d = d - corr
    d2 = d * d
    m2 = d2.mean(axis=axis)
    m3 = (d2 * d).mean(axis=axis)
    m4 = (d2 * d2).mean(axis=axis)
    return np.squeeze(mean, axis=axis), m2, m3, m4


def batch_moments(samples) -> MomentSummary:
    """Two-pass moments of a complete sample.

    Raises:
        InsufficientData: fewer than four samples.
        DegenerateSample: all samples equal.
    """
    x = np.asarray(samples, dtype=float).ravel()
    if x.size < MIN_COUNT:
        raise InsufficientData(f"need at least {MIN_COUNT} samples, got {x.size}")
    if not np.all(np.isfinite(x)):
        raise ValueError("non-finite sample")
    if np.all(x == x[0]):
        raise DegenerateSample("zero variance")
    mean, m2, m3, m4 = _central_moments(x)
    return _summary_from_central(x.size, mean, float(m2), float(m3), float(m4))


# -- accumulated ensemble --------------------------------------------------


def _combine(na, ma, a2, a3, a4, nb, mb, b2, b3, b4):
    """Pairwise combination of central-moment sums (works on arrays)."""
    n = na + nb
    delta = mb - ma
    d_n = delta / n
    d_n2 = d_n * d_n
    mean = ma + nb * d_n
    m2 = a2 + b2 + delta * d_n * na * nb
    m3 = a3 + b3 + d_n2 * delta * na * nb * (na - nb) + 3.0 * d_n * (na * b2 - nb * a2)
    m4 = (
        a4
        + b4
        + d_n2 * d_n * delta * na * nb * (na * na - na * nb + nb * nb)
        + 6.0 * d_n2 * (na * na * b2 + nb * nb * a2)
        + 4.0 * d_n * (na * b3 - nb * a3)
    )
    return n, mean, m2, m3, m4


@dataclass
class MomentAccumulator:
    """Single-pass accumulator of count, mean and central sums M2..M4.

    ``M_k`` is the sum of ``(x - mean) ** k`` over everything pushed so far.
    Accumulators fed disjoint parts of a stream can be combined with
    :meth:`merge`, which makes partitioned or parallel accumulation possible.
    """

    n: int = 0
    mean: float = 0.0
    M2: float = 0.0
    M3: float = 0.0
    M4: float = 0.0

    def push(self, x: float) -> "MomentAccumulator":
        x = float(x)
        if not math.isfinite(x):
            raise ValueError(f"non-finite sample {x}")
        n1 = self.n
        n = n1 + 1
        delta = x - self.mean
        d_n = delta / n
        d_n2 = d_n * d_n
        term = delta * d_n * n1
        self.M4 += term * d_n2 * (n * n - 3 * n + 3) + 6.0 * d_n2 * self.M2 - 4.0 * d_n * self.M3
        self.M3 += term * d_n * (n - 2) - 3.0 * d_n * self.M2
        self.M2 += term
        self.mean += d_n
        self.n = n
        return self

    def extend(self, values) -> "MomentAccumulator":
        """Push many values; block-wise two-pass sums merged into the state."""
        x = np.asarray(values, dtype=float).ravel()
        if not np.all(np.isfinite(x)):
            raise ValueError("non-finite sample")
        for start in range(0, x.size, _BLOCK):
            block = x[start : start + _BLOCK]
            mean, m2, m3, m4 = _central_moments(block)
            k = block.size
            other = MomentAccumulator(k, float(mean), float(m2) * k, float(m3) * k, float(m4) * k)
            merged = self.merge(other)
            self.n, self.mean, self.M2, self.M3, self.M4 = (
                merged.n, merged.mean, merged.M2, merged.M3, merged.M4,
            )
        return self

    def merge(self, other: "MomentAccumulator") -> "MomentAccumulator":
        """Accumulator equivalent to feeding both input streams into one."""
        if other.n == 0:
            return self.copy()
        if self.n == 0:
            return other.copy()
        n, mean, m2, m3, m4 = _combine(
            self.n, self.mean, self.M2, self.M3, self.M4,
            other.n, other.mean, other.M2, other.M3, other.M4,
        )
        return MomentAccumulator(int(n), float(mean), float(m2), float(m3), float(m4))

    def copy(self) -> "MomentAccumulator":
        return MomentAccumulator(self.n, self.mean, self.M2, self.M3, self.M4)

    @property
    def is_degenerate(self) -> bool:
        return self.n > 0 and self.M2 <= 0.0

    def summary(self) -> MomentSummary:
        if self.n < MIN_COUNT:
            raise InsufficientData(f"need at least {MIN_COUNT} samples, got {self.n}")
        if self.M2 <= 0.0:
            raise DegenerateSample("zero variance")
        n = self.n
        return _summary_from_central(n, self.mean, self.M2 / n, self.M3 / n, self.M4 / n)


def accumulate(acc: MomentAccumulator, x: float) -> MomentAccumulator:
    """Functional form of :meth:`MomentAccumulator.push` (returns a new state)."""
    return acc.copy().push(x)


def merge(a: MomentAccumulator, b: MomentAccumulator) -> MomentAccumulator:
    return a.merge(b)


# -- sliding window --------------------------------------------------------


def _sums_to_central(s1, s2, s3, s4, n):
    """Central moments from power sums of shifted values (works on arrays)."""
    mu = s1 / n
    r2 = s2 / n
    r3 = s3 / n
    r4 = s4 / n
    mu2 = mu * mu
    m2 = r2 - mu2
    m3 = r3 - 3.0 * mu * r2 + 2.0 * mu2 * mu
    m4 = r4 - 4.0 * mu * r3 + 6.0 * mu2 * r2 - 3.0 * mu2 * mu2
    return mu, m2, m3, m4


class WindowAccumulator:
    """Moments of the last ``capacity`` pushed values.

    Keeps compensated power sums of ``x - shift`` and recomputes them from
    the buffer every :data:`RECOMPUTE_EVERY` pushes to bound drift. The shift
    is the buffer mean at the time of the last recompute.
    """

    def __init__(self, capacity: int = DEFAULT_WINDOW):
        if capacity < MIN_COUNT:
            raise ValueError(f"window capacity must be >= {MIN_COUNT}")
        self.capacity = int(capacity)
        self.buffer: deque[float] = deque(maxlen=self.capacity)
        self._shift = 0.0
        self._sums = [0.0] * 4
        self._comp = [0.0] * 4
        self._pushes = 0
        self._run = 0  # length of the trailing run of equal values

    def __len__(self) -> int:
        return len(self.buffer)

    @property
    def full(self) -> bool:
        return len(self.buffer) == self.capacity

    def _add(self, k: int, v: float) -> None:
        # Neumaier summation
        s = self._sums[k]
        t = s + v
        if abs(s) >= abs(v):
            self._comp[k] += (s - t) + v
        else:
            self._comp[k] += (v - t) + s
        self._sums[k] = t

    def _recompute(self) -> None:
        buf = np.fromiter(self.buffer, dtype=float, count=len(self.buffer))
        self._shift = float(buf.mean())
        d = buf - self._shift
        p = d.copy()
        for k in range(4):
            self._sums[k] = math.fsum(p)
            self._comp[k] = 0.0
            p *= d

    def push(self, x: float) -> "WindowAccumulator":
        x = float(x)
        if not math.isfinite(x):
            raise ValueError(f"non-finite sample {x}")
        if self.buffer and x == self.buffer[-1]:
            self._run += 1
        else:
            self._run = 1
        evicted = self.buffer[0] if self.full else None
        self.buffer.append(x)
        self._pushes += 1
        if self._pushes % RECOMPUTE_EVERY == 0 or (
            evicted is None and len(self.buffer) in (1, self.capacity)
        ):
            self._recompute()
            return self
        d = x - self._shift
        p = d
        for k in range(4):
            self._add(k, p)
            p *= d
        if evicted is not None:
            d = evicted - self._shift
            p = d
            for k in range(4):
                self._add(k, -p)
                p *= d
        return self

    @property
    def is_degenerate(self) -> bool:
        return self._run >= len(self.buffer) > 0

    def summary(self) -> MomentSummary:
        n = len(self.buffer)
        if n < MIN_COUNT:
            raise InsufficientData(f"need at least {MIN_COUNT} samples, got {n}")
        if self.is_degenerate:
            raise DegenerateSample("zero variance in window")
        s = [a + c for a, c in zip(self._sums, self._comp)]
        mu, m2, m3, m4 = _sums_to_central(*s, n)
        return _summary_from_central(n, self._shift + mu, max(m2, 0.0), m3, m4)


def window_push(acc: WindowAccumulator, x: float) -> WindowAccumulator:
    """Functional form of :meth:`WindowAccumulator.push` (returns a new state)."""
    return copy.deepcopy(acc).push(x)


# -- trajectories ----------------------------------------------------------


@dataclass(frozen=True)
class TimedSummary:
    t: float
    index: int
    summary: MomentSummary


@dataclass(frozen=True, eq=False)
class Trajectory:
    """Column-wise sequence of timed summaries.

    ``index`` is the position of the last contributing sample. Points whose
    ensemble had zero variance are left out and listed in
    ``degenerate_index``/``degenerate_t``.
    """

    mode: str
    index: np.ndarray
    t: np.ndarray
    n: np.ndarray
    mean: np.ndarray
    std: np.ndarray
    skewness: np.ndarray
    kurtosis: np.ndarray
    degenerate_index: np.ndarray = field(default_factory=lambda: np.zeros(0, np.int64))
    degenerate_t: np.ndarray = field(default_factory=lambda: np.zeros(0))

    def __len__(self) -> int:
        return int(self.t.size)

    def __getitem__(self, i: int) -> TimedSummary:
        return TimedSummary(
            float(self.t[i]),
            int(self.index[i]),
            MomentSummary(
                int(self.n[i]),
                float(self.mean[i]),
                float(self.std[i]),
                float(self.skewness[i]),
                float(self.kurtosis[i]),
            ),
        )

    def __iter__(self):
        for i in range(len(self)):
            yield self[i]

    @classmethod
    def from_summaries(cls, mode: str, items: list[TimedSummary]) -> "Trajectory":
        s = [it.summary for it in items]
        return cls(
            mode,
            np.array([it.index for it in items], dtype=np.int64),
            np.array([it.t for it in items], dtype=float),
            np.array([x.n for x in s], dtype=np.int64),
            np.array([x.mean for x in s], dtype=float),
            np.array([x.std for x in s], dtype=float),
            np.array([x.skewness for x in s], dtype=float),
            np.array([x.kurtosis for x in s], dtype=float),
        )

    def shifted(self, dt: float) -> "Trajectory":
        """Same trajectory with every timestamp moved by ``dt``."""
        return Trajectory(
            self.mode, self.index, self.t + dt, self.n, self.mean, self.std,
            self.skewness, self.kurtosis, self.degenerate_index, self.degenerate_t + dt,
        )


def _values_and_times(data, t=None):
    hb = getattr(data, "hb_ms", None)
    if hb is not None:
        return np.asarray(hb, dtype=float), np.asarray(data.t, dtype=float)
    x = np.asarray(data, dtype=float).ravel()
    times = np.arange(x.size, dtype=float) if t is None else np.asarray(t, dtype=float)
    if times.shape != x.shape:
        raise ValueError("timestamps must match samples in length")
    return x, times


def _leading_run(x: np.ndarray) -> int:
    """Number of leading samples equal to the first one."""
    diff = np.flatnonzero(x != x[0])
    return int(diff[0]) if diff.size else int(x.size)


def _trailing_runs(x: np.ndarray) -> np.ndarray:
    """For each position, length of the run of equal values ending there."""
    change = np.r_[True, x[1:] != x[:-1]]
    starts = np.flatnonzero(change)
    run_start = starts[np.cumsum(change) - 1]
    return np.arange(x.size) - run_start + 1


def _build(mode, x, times, idx, n, mean, m2, m3, m4, degenerate):
    ok = ~degenerate
    m2o = m2[ok]
    return Trajectory(
        mode=mode,
        index=idx[ok],
        t=times[idx[ok]],
        n=n[ok].astype(np.int64),
        mean=mean[ok],
        std=np.sqrt(m2o),
        skewness=m3[ok] / m2o**1.5,
        kurtosis=m4[ok] / (m2o * m2o),
        degenerate_index=idx[degenerate],
        degenerate_t=times[idx[degenerate]],
    )


def accumulated_trajectory(data, stride: int = 1, t=None) -> Trajectory:
    """Summaries of the ensemble accumulated from the first sample.

    One point every ``stride`` samples (prefix lengths stride, 2*stride, ...).
    Prefixes shorter than four samples are omitted; zero-variance prefixes go
    to the degenerate side channel.

    Args:
        data: a :class:`~hbload.ingest.HeartSeries` or a 1-d array.
        stride: emission period in samples.
        t: timestamps when ``data`` is a plain array (default: sample index).
    """
    if stride < 1:
        raise ValueError("stride must be >= 1")
    x, times = _values_and_times(data, t)
    if x.size == 0:
        raise ValueError("empty series")
    if not np.all(np.isfinite(x)):
        raise ValueError("non-finite sample")
    N = x.size
    n_all = np.empty(N)
    mean_all = np.empty(N)
    M2 = np.empty(N)
    M3 = np.empty(N)
    M4 = np.empty(N)
    acc = MomentAccumulator()
    for start in range(0, N, _BLOCK):
        block = x[start : start + _BLOCK]
        shift = acc.mean if acc.n else block[0]
        y = block - shift
        k = np.arange(1, block.size + 1, dtype=float)
        y2 = y * y
        p1 = np.cumsum(y)
        p2 = np.cumsum(y2)
        p3 = np.cumsum(y2 * y)
        p4 = np.cumsum(y2 * y2)
        mu, c2, c3, c4 = _sums_to_central(p1, p2, p3, p4, k)
        bn, bmean, b2, b3, b4 = k, shift + mu, c2 * k, c3 * k, c4 * k
        if acc.n:
            bn, bmean, b2, b3, b4 = _combine(acc.n, acc.mean, acc.M2, acc.M3, acc.M4,
                                             bn, bmean, b2, b3, b4)
        sl = slice(start, start + block.size)
        n_all[sl], mean_all[sl], M2[sl], M3[sl], M4[sl] = bn, bmean, b2, b3, b4
        # exact two-pass sums of the whole block keep the carried state accurate
        cm, cm2, cm3, cm4 = _central_moments(block)
        nb = block.size
        acc = acc.merge(MomentAccumulator(nb, float(cm), float(cm2) * nb,
                                          float(cm3) * nb, float(cm4) * nb))
    idx = np.arange(stride - 1, N, stride)
    idx = idx[idx >= MIN_COUNT - 1]
    n = n_all[idx]
    degenerate = idx < _leading_run(x)
    m2 = np.where(degenerate, 1.0, M2[idx] / n)
    return _build("accumulated", x, times, idx, n, mean_all[idx], m2,
                  M3[idx] / n, M4[idx] / n, degenerate)


def window_trajectory(data, w: int = DEFAULT_WINDOW, stride: int = 1, t=None) -> Trajectory:
    """Summaries of a sliding window of the last ``w`` samples.

    The first point is emitted when the window fills, then every ``stride``
    samples. Each point equals :func:`batch_moments` over its window.
    """
    if w < MIN_COUNT:
        raise ValueError(f"window must be >= {MIN_COUNT}")
    if stride < 1:
        raise ValueError("stride must be >= 1")
    x, times = _values_and_times(data, t)
    if not np.all(np.isfinite(x)):
        raise ValueError("non-finite sample")
    N = x.size
    if N < w:
        raise ValueError(f"series of {N} samples is shorter than window {w}")
    ends = np.arange(w - 1, N)
    mean_all = np.empty(ends.size)
    m2_all = np.empty(ends.size)
    m3_all = np.empty(ends.size)
    m4_all = np.empty(ends.size)
    for b0 in range(0, ends.size, _BLOCK):
        e0 = w - 1 + b0
        e1 = min(e0 + _BLOCK, N)
        seg = x[e0 - w + 1 : e1]
        shift = float(seg[:w].mean())
        y = seg - shift
        y2 = y * y
        sums = []
        for p in (y, y2, y2 * y, y2 * y2):
            c = np.concatenate(([0.0], np.cumsum(p)))
            sums.append(c[w:] - c[:-w])
        mu, m2, m3, m4 = _sums_to_central(*sums, w)
        sl = slice(b0, b0 + (e1 - e0))
        mean_all[sl], m2_all[sl], m3_all[sl], m4_all[sl] = shift + mu, m2, m3, m4
    sel = np.arange(0, ends.size, stride)
    idx = ends[sel]
    degenerate = _trailing_runs(x)[idx] >= w
    m2 = np.where(degenerate, 1.0, np.maximum(m2_all[sel], 0.0))
    n = np.full(idx.size, w)
    return _build("window", x, times, idx, n, mean_all[sel], m2,
                  m3_all[sel], m4_all[sel], degenerate)
