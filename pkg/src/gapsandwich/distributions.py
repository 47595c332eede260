"""Samplers plus closed-form quantities used to validate the bound estimators.

Each distribution carries its exact mean, log-mean, mean-log and (where a
closed form exists) log E[Y/X], so Monte Carlo estimates can be checked
against ground truth.  Sampling is deterministic in (dist, n, seed) and uses
the package's counter-based streams.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.special import digamma, gammaln

from .errors import InvalidParams, ParseError
from .rng import generator


def _marsaglia_tsang(rng: np.random.Generator, a: float, n: int) -> np.ndarray:
    """Standard Gamma(a, 1) draws for a >= 1 via squeeze-free Marsaglia-Tsang."""
    d = a - 1.0 / 3.0
    c = 1.0 / math.sqrt(9.0 * d)
    out = np.empty(n, dtype=float)
    todo = np.arange(n)
    while todo.size:
        x = rng.standard_normal(todo.size)
        v = (1.0 + c * x) ** 3
        u = rng.random(todo.size)
        with np.errstate(divide="ignore", invalid="ignore"):
            accept = (v > 0.0) & (
                np.log(u) < 0.5 * x * x + d - d * v + d * np.log(v)
            )
        out[todo[accept]] = d * v[accept]
        todo = todo[~accept]
    return out


def standard_gamma(rng: np.random.Generator, a: float, n: int) -> np.ndarray:
    """Gamma(a, 1) sampler; shapes below 1 use the boosting transform
    Gamma(a) = Gamma(a+1) * U^(1/a), which stays accurate as a -> 0."""
    if a <= 0.0:
        raise InvalidParams(f"gamma shape must be positive, got {a}")
    if a < 1.0:
        boost = rng.random(n) ** (1.0 / a)
        return _marsaglia_tsang(rng, a + 1.0, n) * boost
    return _marsaglia_tsang(rng, a, n)


@dataclass(frozen=True)
class AnalyticDist:
    """Base descriptor: a sampler plus closed-form accessors.

    Accessors return None when no closed form exists for that kind.
    """

    def draw(self, rng: np.random.Generator, n: int) -> np.ndarray:
        raise NotImplementedError

    @property
    def mean(self) -> float | None:
        return None

    @property
    def log_mean(self) -> float | None:
        """log E X."""
        m = self.mean
        return None if m is None or m <= 0.0 else math.log(m)

    @property
    def mean_log(self) -> float | None:
        """E log X."""
        return None

    @property
    def log_ratio_mean(self) -> float | None:
        """log E[Y/X] for an independent copy Y."""
        return None

    @property
    def differential_entropy(self) -> float | None:
        return None

    def spec_string(self) -> str:
        raise NotImplementedError


@dataclass(frozen=True)
class Constant(AnalyticDist):
    c: float

    def __post_init__(self) -> None:
        if not math.isfinite(self.c) or self.c <= 0.0:
            raise InvalidParams(f"constant c must be positive, got {self.c}")

    def draw(self, rng, n):
        return np.full(n, self.c, dtype=float)

    @property
    def mean(self):
        return self.c

    @property
    def mean_log(self):
        return math.log(self.c)

    @property
    def log_ratio_mean(self):
        return 0.0

    def spec_string(self):
        return f"constant:c={self.c:g}"


@dataclass(frozen=True)
class Gamma(AnalyticDist):
    a: float
    theta: float

    def __post_init__(self) -> None:
        if self.a <= 0.0 or self.theta <= 0.0:
            raise InvalidParams(
                f"gamma needs a>0 and theta>0, got a={self.a}, theta={self.theta}"
            )

    def draw(self, rng, n):
        return self.theta * standard_gamma(rng, self.a, n)

    @property
    def mean(self):
        return self.a * self.theta

    @property
    def mean_log(self):
        return float(digamma(self.a)) + math.log(self.theta)

    @property
    def log_ratio_mean(self):
        # E[1/X] = 1/(theta*(a-1)) exists only for a > 1.
        if self.a <= 1.0:
            return None
        return math.log(self.a / (self.a - 1.0))

    @property
    def differential_entropy(self):
        return float(
            self.a + math.log(self.theta) + gammaln(self.a)
            + (1.0 - self.a) * digamma(self.a)
        )

    def spec_string(self):
        return f"gamma:a={self.a:g},theta={self.theta:g}"


@dataclass(frozen=True)
class LogNormal(AnalyticDist):
    m: float
    sigma: float

    def __post_init__(self) -> None:
        if not math.isfinite(self.m) or self.sigma <= 0.0:
            raise InvalidParams(
                f"lognormal needs finite m and sigma>0, got m={self.m}, sigma={self.sigma}"
            )

    def draw(self, rng, n):
        return np.exp(self.m + self.sigma * rng.standard_normal(n))

    @property
    def mean(self):
        return math.exp(self.m + 0.5 * self.sigma**2)

    @property
    def log_mean(self):
        return self.m + 0.5 * self.sigma**2

    @property
    def mean_log(self):
        return self.m

    @property
    def log_ratio_mean(self):
        return self.sigma**2

    @property
    def differential_entropy(self):
        return self.m + 0.5 * math.log(2.0 * math.pi * math.e * self.sigma**2)

    def spec_string(self):
        return f"lognormal:m={self.m:g},sigma={self.sigma:g}"


@dataclass(frozen=True)
class UniformPos(AnalyticDist):
    lo: float
    hi: float

    def __post_init__(self) -> None:
        if self.lo <= 0.0 or self.hi <= self.lo:
            raise InvalidParams(
                f"uniform needs 0 < lo < hi, got lo={self.lo}, hi={self.hi}"
            )

    def draw(self, rng, n):
        return self.lo + (self.hi - self.lo) * rng.random(n)

    @property
    def mean(self):
        return 0.5 * (self.lo + self.hi)

    @property
    def mean_log(self):
        lo, hi = self.lo, self.hi
        return (hi * (math.log(hi) - 1.0) - lo * (math.log(lo) - 1.0)) / (hi - lo)

    @property
    def log_ratio_mean(self):
        # E[1/X] = (log hi - log lo)/(hi - lo).
        inv_mean = (math.log(self.hi) - math.log(self.lo)) / (self.hi - self.lo)
        return math.log(self.mean * inv_mean)

    @property
    def differential_entropy(self):
        return math.log(self.hi - self.lo)

    def spec_string(self):
        return f"uniform:lo={self.lo:g},hi={self.hi:g}"


@dataclass(frozen=True)
class Laplace(AnalyticDist):
    """Double-exponential data law; used as a data distribution for the toy
    VAE experiment, not as a positivity-constrained X."""

    loc: float
    b: float

    def __post_init__(self) -> None:
        if not math.isfinite(self.loc) or self.b <= 0.0:
            raise InvalidParams(
                f"laplace needs finite loc and b>0, got loc={self.loc}, b={self.b}"
            )

    def draw(self, rng, n):
        u = rng.random(n) - 0.5
        return self.loc - self.b * np.sign(u) * np.log1p(-2.0 * np.abs(u))

    @property
    def mean(self):
        return self.loc

    @property
    def log_mean(self):
        return None

    @property
    def differential_entropy(self):
        return 1.0 + math.log(2.0 * self.b)

    def log_density(self, x: np.ndarray) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        return -np.abs(x - self.loc) / self.b - math.log(2.0 * self.b)

    def spec_string(self):
        return f"laplace:loc={self.loc:g},b={self.b:g}"


def sample(d: AnalyticDist, n: int, seed: int) -> np.ndarray:
    """n i.i.d. draws, bit-identical for fixed (d, n, seed)."""
    if n < 1:
        raise InvalidParams(f"n must be >= 1, got {n}")
    return d.draw(generator(seed), n)


def k_averaged_law(d: AnalyticDist, k: int) -> AnalyticDist | None:
    """Closed-form law of the k-sample mean, when one exists.

    Gamma(a, theta) averages to Gamma(k*a, theta/k); constants are fixed
    points; other kinds (log-normal sums in particular) have none.
    """
    if k < 1:
        raise InvalidParams(f"k must be >= 1, got {k}")
    if isinstance(d, Gamma):
        return Gamma(k * d.a, d.theta / k)
    if isinstance(d, Constant):
        return d
    return None


def laplace_loglik(loc: float, b: float) -> float:
    """Exact expected log-density of Laplace(loc, b) under itself:
    the negative differential entropy -(1 + ln(2b))."""
    if b <= 0.0:
        raise InvalidParams(f"laplace scale b must be positive, got {b}")
    return -(1.0 + math.log(2.0 * b))


_KIND_KEYS = {
    "constant": ("c",),
    "gamma": ("a", "theta"),
    "lognormal": ("m", "sigma"),
    "uniform": ("lo", "hi"),
    "laplace": ("loc", "b"),
}

_KIND_FACTORY = {
    "constant": lambda p: Constant(p["c"]),
    "gamma": lambda p: Gamma(p["a"], p["theta"]),
    "lognormal": lambda p: LogNormal(p["m"], p["sigma"]),
    "uniform": lambda p: UniformPos(p["lo"], p["hi"]),
    "laplace": lambda p: Laplace(p["loc"], p["b"]),
}


def parse_dist(text: str) -> AnalyticDist:
    """Parse `kind:key=val{,key=val}`, e.g. `gamma:a=2,theta=1`.

    Keys are lowercase and kind-specific; values are decimal literals.
    Raises ParseError with a message naming the offending key.
    """
    head, sep, tail = text.strip().partition(":")
    kind = head.strip().lower()
    if kind not in _KIND_KEYS:
        raise ParseError(
            f"unknown distribution kind {kind!r}; expected one of "
            f"{sorted(_KIND_KEYS)}"
        )
    if not sep:
        raise ParseError(f"missing parameters for {kind!r}; expected key=val list")
    params: dict[str, float] = {}
    for item in tail.split(","):
        key, eq, val = item.partition("=")
        key = key.strip()
        if not eq or not key:
            raise ParseError(f"malformed parameter {item!r}; expected key=val")
        if key not in _KIND_KEYS[kind]:
            raise ParseError(f"unknown key {key!r} for {kind!r}")
        if key in params:
            raise ParseError(f"duplicate key {key!r}")
        try:
            params[key] = float(val.strip())
        except ValueError:
            raise ParseError(f"value for key {key!r} is not a decimal: {val!r}")
    missing = [k for k in _KIND_KEYS[kind] if k not in params]
    if missing:
        raise ParseError(f"missing key {missing[0]!r} for {kind!r}")
    return _KIND_FACTORY[kind](params)
