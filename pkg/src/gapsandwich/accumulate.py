"""Numerically stable accumulation primitives.

All per-pair bound arithmetic runs in log domain, so the core primitives are
a max-shifted log-sum-exp and its two-way merge, plus a mergeable streaming
mean/variance.  Merges are associativity-tolerant: chunking the same data
differently changes results by at most ~1e-9 relative.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

# Per-pair exponents above this saturate to keep every reported value finite.
EXP_SATURATION = 700.0


def logsumexp(values: np.ndarray, axis: int | None = None) -> np.ndarray | float:
    """log(sum(exp(values))) with max-shifting; -inf entries are harmless."""
    values = np.asarray(values, dtype=float)
    if values.size == 0:
        raise ValueError("logsumexp of an empty array")
    vmax = np.max(values, axis=axis, keepdims=True)
    vmax = np.where(np.isfinite(vmax), vmax, 0.0)
    out = np.log(np.sum(np.exp(values - vmax), axis=axis, keepdims=True)) + vmax
    if axis is None:
        return float(out.reshape(()))
    return np.squeeze(out, axis=axis)


def log_mean_exp(values: np.ndarray, axis: int | None = None) -> np.ndarray | float:
    """log of the arithmetic mean of exp(values)."""
    values = np.asarray(values, dtype=float)
    n = values.size if axis is None else values.shape[axis]
    return logsumexp(values, axis=axis) - math.log(n)


def lse_merge(a: float, b: float) -> float:
    """Combine two log-sum partial results: log(exp(a) + exp(b))."""
    if a == -math.inf:
        return b
    if b == -math.inf:
        return a
    hi, lo = (a, b) if a >= b else (b, a)
    return hi + math.log1p(math.exp(lo - hi))


def mean_stderr(values: np.ndarray) -> tuple[float, float]:
    """Sample mean and standard error (n-1 variance, std/sqrt(n)).

    n = 1 reports stderr = +inf rather than a falsely tight 0.  Moments are
    computed on rescaled values so saturated terms (up to exp(700)) cannot
    overflow intermediate sums.
    """
    values = np.asarray(values, dtype=float)
    n = values.size
    if n == 0:
        raise ValueError("mean of an empty array")
    scale = float(np.max(np.abs(values)))
    if scale == 0.0 or not math.isfinite(scale):
        scale = 1.0
    scaled = values / scale
    mean_scaled = float(scaled.mean())
    mean = scale * mean_scaled
    if n == 1:
        return mean, math.inf
    var_scaled = float(np.sum((scaled - mean_scaled) ** 2)) / (n - 1)
    stderr = scale * math.sqrt(var_scaled) / math.sqrt(n)
    return mean, stderr


@dataclass
class RunningMoments:
    """Streaming count/mean/M2 with a parallel (Chan) merge.

    Chunks may be accumulated independently and merged in any grouping; the
    merged moments agree with a single pass to well under 1e-9 relative.
    """

    count: int = 0
    mean: float = 0.0
    m2: float = 0.0

    def update(self, values: np.ndarray) -> None:
        values = np.asarray(values, dtype=float)
        if values.size == 0:
            return
        other = RunningMoments(
            count=int(values.size),
            mean=float(values.mean()),
            m2=float(np.sum((values - values.mean()) ** 2)),
        )
        self.merge(other)

    def merge(self, other: "RunningMoments") -> None:
        if other.count == 0:
            return
        if self.count == 0:
            self.count, self.mean, self.m2 = other.count, other.mean, other.m2
            return
        n = self.count + other.count
        delta = other.mean - self.mean
        self.m2 = self.m2 + other.m2 + delta * delta * self.count * other.count / n
        self.mean = self.mean + delta * other.count / n
        self.count = n

    @property
    def variance(self) -> float:
        if self.count < 2:
            return math.inf
        return self.m2 / (self.count - 1)

    @property
    def stderr(self) -> float:
        if self.count < 2:
            return math.inf
        return math.sqrt(self.variance / self.count)
