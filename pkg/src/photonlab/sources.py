"""Single-mode U(1)-invariant sources and two-mode source pairs.

A source is described either by its photon-number distribution p(N), by its
radial coherent-state density P(r) (normalised as ``int r dr P(r) = 1``), or
both. Pairs combine two sources into the state seen by the detectors.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Callable

import numpy as np
from scipy import integrate, special, stats

from ._logmath import NEG_INF, log_binom, log_factorial, log_of
from .errors import ConfigError, UnsupportedRepresentation

TAIL = 1e-12


# -- number distributions ------------------------------------------------------


@dataclass(frozen=True, eq=False)
class NumberDistribution:
    """Photon-number probabilities on the contiguous support ``offset + arange(len)``.

    Probabilities are held as logs. ``tail`` is the mass dropped by truncation.
    """

    offset: int
    log_p: np.ndarray
    tail: float = 0.0
    declared_mean: float | None = None
    declared_variance: float | None = None

    def __post_init__(self):
        log_p = np.asarray(self.log_p, dtype=float)
        log_p.setflags(write=False)
        object.__setattr__(self, "log_p", log_p)
        if self.offset < 0:
            raise ConfigError("photon numbers must be non-negative")
        if np.any(log_p > 1e-12):
            raise ConfigError("probabilities must not exceed one")
        total = self.total()
        if not (1 - 1e-12 - self.tail <= total <= 1 + 1e-12):
            raise ConfigError(f"number distribution sums to {total!r}")
        mean, var = self.mean, self.variance
        for name, declared, actual in (("mean", self.declared_mean, mean), ("variance", self.declared_variance, var)):
            if declared is not None and abs(declared - actual) > 1e-9 * max(1.0, abs(declared)):
                raise ConfigError(f"declared {name} {declared} disagrees with entries ({actual})")

    @classmethod
    def from_probs(cls, probs, offset=0, **kw):
        probs = np.asarray(probs, dtype=float)
        if np.any(probs < 0):
            raise ConfigError("probabilities must be non-negative")
        return cls(offset, log_of(probs), **kw)

    @classmethod
    def from_mapping(cls, entries: dict, **kw):
        if not entries:
            raise ConfigError("empty number distribution")
        lo, hi = min(entries), max(entries)
        probs = np.zeros(hi - lo + 1)
        for n, p in entries.items():
            probs[int(n) - lo] = p
        return cls.from_probs(probs, offset=lo, **kw)

    @property
    def support(self):
        return np.arange(self.offset, self.offset + len(self.log_p))

    @property
    def probs(self):
        return np.exp(self.log_p)

    @property
    def max_n(self):
        return self.offset + len(self.log_p) - 1

    def total(self):
        return float(np.sum(self.probs))

    @property
    def mean(self):
        return float(np.sum(self.support * self.probs))

    @property
    def variance(self):
        p, n = self.probs, self.support
        mean = np.sum(n * p)
        return float(np.sum((n - mean) ** 2 * p))

    def log_pmf(self, n):
        n = np.asarray(n)
        idx = n - self.offset
        inside = (idx >= 0) & (idx < len(self.log_p))
        return np.where(inside, self.log_p[np.clip(idx, 0, len(self.log_p) - 1)], NEG_INF)

    def pmf(self, n):
        return np.exp(self.log_pmf(n))

    def items(self, floor=-np.inf):
        """(N, log p) pairs with non-zero probability above ``floor``."""
        keep = self.log_p > floor
        return list(zip(self.support[keep].tolist(), self.log_p[keep].tolist()))


def truncated(log_pmf: Callable, lo: int, hi: int, tail: float, **kw) -> NumberDistribution:
    n = np.arange(lo, hi + 1)
    log_p = np.asarray(log_pmf(n), dtype=float)
    # pin the kept mass to 1 - tail so rounding in the pmf cannot drift the total
    log_p = log_p - np.logaddexp.reduce(log_p) + np.log1p(-tail)
    return NumberDistribution(lo, log_p, tail=tail, **kw)


def _tail_range(dist, tail=TAIL):
    """Smallest central range whose omitted mass is below ``tail``."""
    lo = int(dist.ppf(tail / 2))
    hi = int(dist.isf(tail / 2))
    lo = max(lo - 1, 0)
    hi = hi + 1
    omitted = float(dist.cdf(lo - 1) + dist.sf(hi)) if lo > 0 else float(dist.sf(hi))
    return lo, hi, omitted


# -- radial densities ----------------------------------------------------------


@dataclass(frozen=True, eq=False)
class RadialDensity:
    """Phase-invariant coherent-state weight P(r).

    ``kind`` is ``"delta"`` (all weight at ``u0 = r**2``), ``"gamma"`` (Gamma
    law in u = r**2 with ``shape`` and ``scale``), ``"tabulated"`` (explicit
    u-nodes and weights) or ``"function"`` (a callable evaluated on r).
    """

    kind: str
    u0: float = 0.0
    shape: float = 1.0
    scale: float = 1.0
    nodes: np.ndarray | None = None
    weights: np.ndarray | None = None
    evaluator: Callable | None = None
    u_max: float | None = None

    def __post_init__(self):
        if self.kind not in ("delta", "gamma", "tabulated", "function"):
            raise ConfigError(f"unknown radial kind {self.kind!r}")
        if self.kind == "tabulated":
            w = np.asarray(self.weights, dtype=float)
            u = np.asarray(self.nodes, dtype=float)
            if u.shape != w.shape or np.any(w < 0) or np.any(u < 0):
                raise ConfigError("tabulated radial density needs matching non-negative nodes/weights")
            if abs(w.sum() - 1) > 1e-9:
                raise ConfigError("tabulated radial weights must sum to one")
        if self.kind == "function":
            if self.evaluator is None or self.u_max is None:
                raise ConfigError("functional radial density needs an evaluator and u_max")
            norm = self.normalisation()
            if abs(norm - 1) > 1e-9:
                raise ConfigError(f"radial density integrates to {norm}, not 1")

    @property
    def singular(self):
        return self.kind in ("delta", "tabulated")

    def __call__(self, r):
        r = np.asarray(r, dtype=float)
        if self.kind == "gamma":
            u = r**2
            return 2.0 * stats.gamma.pdf(u, self.shape, scale=self.scale)
        if self.kind == "function":
            return np.asarray(self.evaluator(r), dtype=float)
        raise UnsupportedRepresentation(f"{self.kind} radial density has no pointwise value")

    def normalisation(self):
        if self.kind in ("delta",):
            return 1.0
        if self.kind == "tabulated":
            return float(np.sum(self.weights))
        if self.kind == "gamma":
            f = lambda r: r * self(r)
            return integrate.quad(f, 0, np.inf, epsabs=1e-13, epsrel=1e-12, limit=400)[0]
        f = lambda u: 0.5 * float(self.evaluator(np.sqrt(u)))
        return integrate.quad(f, 0, self.u_max, epsabs=1e-13, epsrel=1e-12, limit=400)[0]

    def rule(self, order=64):
        """Nodes and weights in u = r**2 for the measure (dr**2 / 2) P(r)."""
        if self.kind == "delta":
            return np.array([self.u0]), np.array([1.0])
        if self.kind == "tabulated":
            return np.asarray(self.nodes, float), np.asarray(self.weights, float)
        if self.kind == "gamma":
            x, w = special.roots_genlaguerre(order, self.shape - 1.0)
            w = w / math.gamma(self.shape) if self.shape < 150 else np.exp(np.log(w) - special.gammaln(self.shape))
            return x * self.scale, w
        x, w = special.roots_legendre(order)
        u = 0.5 * self.u_max * (x + 1.0)
        return u, 0.25 * self.u_max * w * np.asarray(self.evaluator(np.sqrt(u)), float)

    def quantile_u(self, tail=TAIL):
        """u beyond which at most ``tail`` of the weight lies."""
        if self.kind == "delta":
            return self.u0
        if self.kind == "tabulated":
            return float(np.max(self.nodes))
        if self.kind == "gamma":
            return float(stats.gamma.isf(tail, self.shape, scale=self.scale))
        return float(self.u_max)


# -- single-mode sources -------------------------------------------------------


class Source:
    """Base class of the single-mode source families."""

    def number_distribution(self) -> NumberDistribution:
        raise UnsupportedRepresentation(f"{type(self).__name__} has no diagonal form")

    def radial(self) -> RadialDensity:
        raise UnsupportedRepresentation(f"{type(self).__name__} has no regular radial density")

    def moments(self):
        d = self.number_distribution()
        return d.mean, d.variance

    @property
    def has_diagonal(self):
        try:
            self.number_distribution()
        except UnsupportedRepresentation:
            return False
        return True

    @property
    def has_radial(self):
        try:
            self.radial()
        except UnsupportedRepresentation:
            return False
        return True


def _require_int(x, what):
    if isinstance(x, (int, np.integer)):
        return int(x)
    if isinstance(x, Fraction) and x.denominator == 1:
        return int(x)
    if float(x).is_integer():
        return int(x)
    raise ConfigError(f"{what} must be an integer, got {x!r}")


def as_fraction(q) -> Fraction:
    if isinstance(q, Fraction):
        return q
    if isinstance(q, str):
        return Fraction(q)
    if isinstance(q, int):
        return Fraction(q)
    return Fraction(q).limit_denominator(10**6)


@dataclass(frozen=True)
class NumberState(Source):
    n: int

    def __post_init__(self):
        object.__setattr__(self, "n", _require_int(self.n, "photon number"))
        if self.n < 0:
            raise ConfigError("photon number must be non-negative")

    def number_distribution(self):
        return NumberDistribution(self.n, np.zeros(1))

    def moments(self):
        return float(self.n), 0.0


@dataclass(frozen=True)
class Binomial(Source):
    """Binomial thinning of the number state |mean/q> by q (rational q)."""

    q: Fraction
    mean: float

    def __post_init__(self):
        q = as_fraction(self.q)
        if not (0 < q <= 1):
            raise ConfigError("binomial q must lie in (0, 1]")
        object.__setattr__(self, "q", q)
        cap = Fraction(self.mean).limit_denominator(10**6) / q
        if cap.denominator != 1:
            raise ConfigError(f"mean/q = {float(cap)} is not an integer")

    @property
    def cap(self):
        return int(Fraction(self.mean).limit_denominator(10**6) / self.q)

    def number_distribution(self):
        cap, q = self.cap, float(self.q)
        if q == 1:
            return NumberDistribution(cap, np.zeros(1))
        dist = stats.binom(cap, q)
        lo, hi, omitted = _tail_range(dist)
        hi = min(hi, cap)
        omitted = float(dist.cdf(lo - 1) + dist.sf(hi)) if lo > 0 else float(dist.sf(hi))
        return truncated(lambda n: dist.logpmf(n), lo, hi, omitted)

    def moments(self):
        q = float(self.q)
        return float(self.mean), float(self.mean * (1 - q))


@dataclass(frozen=True)
class Poissonian(Source):
    mean: float

    def __post_init__(self):
        if self.mean < 0:
            raise ConfigError("mean photon number must be non-negative")

    def number_distribution(self):
        if self.mean == 0:
            return NumberDistribution(0, np.zeros(1))
        dist = stats.poisson(self.mean)
        lo, hi, omitted = _tail_range(dist)
        return truncated(lambda n: dist.logpmf(n), lo, hi, omitted)

    def radial(self):
        return RadialDensity("delta", u0=float(self.mean))

    def moments(self):
        return float(self.mean), float(self.mean)


@dataclass(frozen=True)
class SuperPoissonian(Source):
    """Gamma-law intensity with variance mean + Q mean**2.

    ``poisson_limit=True`` selects the Q -> 0 limit, which is the Poissonian
    source and is carried as an exact delta node.
    """

    Q: float
    mean: float
    poisson_limit: bool = False

    def __post_init__(self):
        if self.mean < 0:
            raise ConfigError("mean photon number must be non-negative")
        if self.poisson_limit:
            object.__setattr__(self, "Q", 0.0)
        elif not self.Q > 0:
            raise ConfigError("super-Poissonian Q must be positive (use poisson_limit for Q -> 0)")

    @classmethod
    def limit(cls, mean):
        return cls(0.0, mean, poisson_limit=True)

    @property
    def shape(self):
        return 1.0 / self.Q

    @property
    def scale(self):
        return self.Q * self.mean

    def radial(self):
        if self.poisson_limit or self.mean == 0:
            return RadialDensity("delta", u0=float(self.mean))
        return RadialDensity("gamma", shape=self.shape, scale=self.scale)

    def number_distribution(self):
        if self.poisson_limit:
            return Poissonian(self.mean).number_distribution()
        if self.mean == 0:
            return NumberDistribution(0, np.zeros(1))
        # Poisson mixed over a Gamma intensity is negative binomial
        dist = stats.nbinom(self.shape, 1.0 / (1.0 + self.scale))
        lo, hi, omitted = _tail_range(dist)
        return truncated(lambda n: dist.logpmf(n), lo, hi, omitted)

    def moments(self):
        return float(self.mean), float(self.mean + self.Q * self.mean**2)


@dataclass(frozen=True)
class Thermal(Source):
    """Bose-Einstein source; the Q = 1 member of the Gamma family."""

    mean: float

    def __post_init__(self):
        if self.mean < 0:
            raise ConfigError("mean photon number must be non-negative")

    def _as_gamma(self):
        return SuperPoissonian(1.0, self.mean)

    def radial(self):
        return self._as_gamma().radial()

    def number_distribution(self):
        return self._as_gamma().number_distribution()

    def moments(self):
        return self._as_gamma().moments()


@dataclass(frozen=True)
class TwoNumberMixture(Source):
    """Equal mixture of the number states mean - spread and mean + spread."""

    mean: int
    spread: int

    def __post_init__(self):
        object.__setattr__(self, "mean", _require_int(self.mean, "mixture mean"))
        object.__setattr__(self, "spread", _require_int(self.spread, "mixture spread"))
        if self.mean - self.spread < 0 or self.spread < 0:
            raise ConfigError("mixture components must be non-negative photon numbers")

    def number_distribution(self):
        if self.spread == 0:
            return NumberDistribution(self.mean, np.zeros(1))
        return NumberDistribution.from_mapping({self.mean - self.spread: 0.5, self.mean + self.spread: 0.5})

    def moments(self):
        return float(self.mean), float(self.spread**2)


@dataclass(frozen=True, eq=False)
class CustomDiagonal(Source):
    dist: NumberDistribution

    def number_distribution(self):
        return self.dist


@dataclass(frozen=True, eq=False)
class CustomRadial(Source):
    density: RadialDensity
    dist: NumberDistribution | None = None

    def radial(self):
        return self.density

    def number_distribution(self):
        if self.dist is None:
            raise UnsupportedRepresentation("custom radial source has no diagonal form")
        return self.dist

    def moments(self):
        if self.dist is not None:
            return self.dist.mean, self.dist.variance
        u, w = self.density.rule(256)
        mean = float(np.sum(w * u))
        return mean, float(mean + np.sum(w * u**2) - mean**2)


# -- operations ----------------------------------------------------------------


def pmf(source: Source, n: int) -> float:
    """p(N). Poissonian values come straight from the closed form."""
    if n < 0:
        raise ConfigError("photon number must be non-negative")
    if isinstance(source, Poissonian):
        if source.mean == 0:
            return 1.0 if n == 0 else 0.0
        return float(np.exp(n * np.log(source.mean) - source.mean - log_factorial(n)))
    return float(source.number_distribution().pmf(n))


def radial_density(source: Source, r: float):
    """P(r). Singular (delta) densities are returned as their RadialDensity node."""
    dens = source.radial()
    if dens.singular:
        return dens
    return float(dens(r))


def moments(source: Source):
    return source.moments()


# -- pairs ---------------------------------------------------------------------


def _check_delta(delta):
    if not (-math.pi <= delta < math.pi):
        raise ConfigError("relative phase must lie in [-pi, pi)")


def _check_cs(c, s):
    if c < 0 or s < 0 or abs(c * c + s * s - 1) > 1e-12:
        raise ConfigError("splitting amplitudes need c, s >= 0 and c^2 + s^2 = 1")


class SourcePair:
    """Two-mode input state (source a in mode a, source b in mode b)."""

    def means(self):
        raise NotImplementedError


@dataclass(frozen=True, eq=False)
class Independent(SourcePair):
    a: Source
    b: Source

    def means(self):
        return self.a.moments()[0], self.b.moments()[0]


@dataclass(frozen=True)
class CommonNumber(SourcePair):
    """|N> of a common mode split into modes a, b with amplitudes c and s e^{i delta}."""

    n: int
    c: float
    s: float
    delta: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, "n", _require_int(self.n, "photon number"))
        _check_cs(self.c, self.s)
        _check_delta(self.delta)

    def means(self):
        return self.c**2 * self.n, self.s**2 * self.n


@dataclass(frozen=True, eq=False)
class CommonDiagonal(SourcePair):
    dist: NumberDistribution
    c: float
    s: float
    delta: float = 0.0

    def __post_init__(self):
        _check_cs(self.c, self.s)
        _check_delta(self.delta)

    def means(self):
        m = self.dist.mean
        return self.c**2 * m, self.s**2 * m


@dataclass(frozen=True, eq=False)
class ReferencedPhase(SourcePair):
    """Two radial sources sharing a reference frame at fixed relative phase."""

    a: Source
    b: Source
    delta: float = 0.0

    def __post_init__(self):
        _check_delta(self.delta)
        self.a.radial()
        self.b.radial()

    def means(self):
        return self.a.moments()[0], self.b.moments()[0]


def common_source_amplitudes(pair: CommonNumber):
    """[(K, c_K)] for |N>_1|0>_2 expanded on |K>_a |N-K>_b."""
    n, c, s = pair.n, pair.c, pair.s
    out = []
    for k in range(n + 1):
        logmag = 0.5 * float(log_binom(n, k))
        if k:
            logmag += k * math.log(c) if c > 0 else -math.inf
        if n - k:
            logmag += (n - k) * math.log(s) if s > 0 else -math.inf
        if logmag == -math.inf:
            continue
        out.append((k, math.exp(logmag) * complex(math.cos((n - k) * pair.delta), math.sin((n - k) * pair.delta))))
    return out


def common_log_amplitudes(n, c, s, delta):
    """Vectorised log|c_K| and arg c_K for K = 0..n."""
    k = np.arange(n + 1)
    logmag = 0.5 * log_binom(n, k)
    with np.errstate(divide="ignore", invalid="ignore"):
        logmag = logmag + np.where(k > 0, k * log_of(c), 0.0) + np.where(n - k > 0, (n - k) * log_of(s), 0.0)
    return logmag, (n - k) * delta
