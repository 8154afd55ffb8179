"""Seeded bootstrap clouds of Pearson-plane points.

Every trial draws its resample from its own Philox stream keyed by
``(seed, trial index)`` through :class:`numpy.random.SeedSequence`, so the
cloud does not depend on how trials are scheduled across workers.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from .moments import MIN_COUNT, DegenerateSample, InsufficientData, _central_moments
from .pearson import PearsonPoint

DEFAULT_TRIALS = 1000
DEFAULT_SEED = 20180503

# trials per work unit; fixed so that results do not depend on worker count
_CHUNK = 64


@dataclass(frozen=True)
class BootstrapConfig:
    trials: int = DEFAULT_TRIALS
    m: int | None = None  # resample size, None means the input size
    seed: int = DEFAULT_SEED

    def __post_init__(self):
        if self.trials < 1:
            raise ValueError("trials must be >= 1")
        if self.m is not None and self.m < MIN_COUNT:
            raise ValueError(f"resample size must be >= {MIN_COUNT}")
        if not 0 <= self.seed < 2**64:
            raise ValueError("seed must fit in 64 unsigned bits")


@dataclass(frozen=True, eq=False)
class BootstrapCloud:
    trial: np.ndarray  # index of the trial behind each point
    beta1: np.ndarray
    beta2: np.ndarray
    degenerate_count: int
    config: BootstrapConfig
    m: int

    def __len__(self) -> int:
        return int(self.beta1.size)

    @property
    def points(self) -> list[PearsonPoint]:
        return [PearsonPoint(float(a), float(b)) for a, b in zip(self.beta1, self.beta2)]

    @property
    def centroid(self) -> PearsonPoint:
        return PearsonPoint(float(self.beta1.mean()), float(self.beta2.mean()))

    @property
    def dispersion(self) -> np.ndarray:
        """Population 2x2 covariance of (beta1, beta2)."""
        return np.atleast_2d(np.cov(np.vstack([self.beta1, self.beta2]), bias=True))


def trial_generator(seed: int, trial: int) -> np.random.Generator:
    return np.random.Generator(np.random.Philox(np.random.SeedSequence(seed, spawn_key=(trial,))))


def _run_chunk(x: np.ndarray, m: int, seed: int, trials: range):
    idx = np.empty((len(trials), m), dtype=np.intp)
    for row, trial in enumerate(trials):
        idx[row] = trial_generator(seed, trial).integers(0, x.size, size=m)
    res = x[idx]
    degenerate = np.all(res == res[:, :1], axis=1)
    _, m2, m3, m4 = _central_moments(res, axis=1)
    m2 = np.where(degenerate, 1.0, m2)
    beta1 = m3 * m3 / (m2 * m2 * m2)
    beta2 = m4 / (m2 * m2)
    return degenerate, beta1, beta2


def bootstrap_cloud(samples, config: BootstrapConfig = BootstrapConfig(), workers: int = 1) -> BootstrapCloud:
    """Resample ``samples`` with replacement and place each resample on the plane.

    Zero-variance resamples are counted in ``degenerate_count`` and left out.

    Raises:
        InsufficientData: fewer than four samples.
        DegenerateSample: every trial produced a zero-variance resample.
    """
    x = np.asarray(samples, dtype=float).ravel()
    if x.size < MIN_COUNT:
        raise InsufficientData(f"need at least {MIN_COUNT} samples, got {x.size}")
    if not np.all(np.isfinite(x)):
        raise ValueError("non-finite sample")
    m = config.m or x.size
    chunks = [range(s, min(s + _CHUNK, config.trials)) for s in range(0, config.trials, _CHUNK)]
    if workers > 1 and len(chunks) > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            parts = list(pool.map(lambda r: _run_chunk(x, m, config.seed, r), chunks))
    else:
        parts = [_run_chunk(x, m, config.seed, r) for r in chunks]
    degenerate = np.concatenate([p[0] for p in parts])
    beta1 = np.concatenate([p[1] for p in parts])
    beta2 = np.concatenate([p[2] for p in parts])
    ok = ~degenerate
    if not ok.any():
        raise DegenerateSample("all bootstrap trials were degenerate")
    return BootstrapCloud(
        trial=np.flatnonzero(ok),
        beta1=beta1[ok],
        beta2=beta2[ok],
        degenerate_count=int(degenerate.sum()),
        config=config,
        m=m,
    )


@dataclass(frozen=True)
class CloudSummary:
    centroid: PearsonPoint
    std_beta1: float
    std_beta2: float
    box_beta1: tuple[float, float]
    box_beta2: tuple[float, float]
    count: int
    degenerate_count: int


def cloud_summary(cloud: BootstrapCloud, coverage: float = 0.95) -> CloudSummary:
    """Centroid, per-axis population std and a central quantile box."""
    if len(cloud) == 0:
        raise ValueError("empty cloud")
    lo, hi = (1 - coverage) / 2, (1 + coverage) / 2
    q1 = np.quantile(cloud.beta1, [lo, hi])
    q2 = np.quantile(cloud.beta2, [lo, hi])
    return CloudSummary(
        centroid=cloud.centroid,
        std_beta1=float(cloud.beta1.std()),
        std_beta2=float(cloud.beta2.std()),
        box_beta1=(float(q1[0]), float(q1[1])),
        box_beta2=(float(q2[0]), float(q2[1])),
        count=len(cloud),
        degenerate_count=cloud.degenerate_count,
    )
