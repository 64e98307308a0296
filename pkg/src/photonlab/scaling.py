"""q-scaling: thinning the sources by q is equivalent to scaling the detectors by q.

A beam splitter of transmissivity q in front of every source thins each
number distribution binomially. Moving that loss onto the detector side
multiplies every detector matrix by q, so {R/q, thinned sources} and
{R, original sources} give the same count statistics.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from fractions import Fraction

import numpy as np

from ._thinning import log_binomial_weight, thin_distribution, thinned_moments
from .detectors import DetectorArray
from .engines import choose_engine, compute_joint
from .engines.distribution import JointDistribution
from .errors import ConfigError, UnsupportedRepresentation
from .sources import (
    Binomial,
    CommonDiagonal,
    CommonNumber,
    CustomDiagonal,
    CustomRadial,
    Independent,
    NumberDistribution,
    NumberState,
    Poissonian,
    RadialDensity,
    ReferencedPhase,
    Source,
    SuperPoissonian,
    Thermal,
    as_fraction,
)


def _check_q(q):
    qf = float(as_fraction(q)) if isinstance(q, str) else float(q)
    if not (0.0 < qf <= 1.0):
        raise ConfigError(f"q must lie in (0, 1], got {q}")
    return qf


def binomial_weight(N, N_prime, q, log=False):
    """C(N, N') q^N' (1 - q)^(N - N'); zero outside 0 <= N' <= N."""
    lw = float(log_binomial_weight(N, N_prime, _check_q(q)))
    return lw if log else math.exp(lw)


def effective_distribution(p, q) -> NumberDistribution:
    """p~(N) = sum_{N' >= N} p(N') B^{N'}_N(q). Accepts a distribution or a diagonal source.

    Only exact zeros are trimmed, so moments follow the input to rounding.
    """
    q = _check_q(q)
    if isinstance(p, Source):
        p = p.number_distribution()
    return thin_distribution(p, q, tail=0.0)


def effective_moments(mean, variance, q):
    """(q N, q^2 V + (1 - q) q N)."""
    return thinned_moments(float(mean), float(variance), _check_q(q))


def scale_detectors(array: DetectorArray, q) -> DetectorArray:
    """R -> R / q with visibility and phase unchanged (physicality is checked where it matters)."""
    return array.scaled(1.0 / _check_q(q))


def _thin_radial(d: RadialDensity, q):
    if d.kind == "delta":
        return replace(d, u0=d.u0 * q)
    if d.kind == "gamma":
        return replace(d, scale=d.scale * q)
    if d.kind == "tabulated":
        return replace(d, nodes=np.asarray(d.nodes) * q)
    raise UnsupportedRepresentation("functional radial densities cannot be rescaled")


def thin(source, q):
    """The source (or pair) seen through beam splitters of transmissivity q, keeping the family where one exists."""
    qf = _check_q(q)
    if qf == 1.0:
        return source
    if isinstance(source, Independent):
        return Independent(thin(source.a, q), thin(source.b, q))
    if isinstance(source, ReferencedPhase):
        return ReferencedPhase(thin(source.a, q), thin(source.b, q), source.delta)
    if isinstance(source, CommonNumber):
        # thinning both output modes equals thinning the common mode before the split
        dist = thin_distribution(NumberDistribution(source.n, np.zeros(1)), qf)
        return CommonDiagonal(dist, source.c, source.s, source.delta)
    if isinstance(source, CommonDiagonal):
        return CommonDiagonal(thin_distribution(source.dist, qf), source.c, source.s, source.delta)
    if isinstance(source, NumberState):
        qq = as_fraction(q)
        return Binomial(qq, float(qq * source.n))
    if isinstance(source, Binomial):
        qq = source.q * as_fraction(q)
        return Binomial(qq, float(qq * source.cap))
    if isinstance(source, Poissonian):
        return Poissonian(source.mean * qf)
    if isinstance(source, Thermal):
        return Thermal(source.mean * qf)
    if isinstance(source, SuperPoissonian):
        if source.poisson_limit:
            return SuperPoissonian.limit(source.mean * qf)
        return SuperPoissonian(source.Q, source.mean * qf)
    if isinstance(source, CustomRadial):
        dist = None if source.dist is None else thin_distribution(source.dist, qf)
        return CustomRadial(_thin_radial(source.density, qf), dist)
    if isinstance(source, Source):
        return CustomDiagonal(thin_distribution(source.number_distribution(), qf))
    raise ConfigError(f"cannot thin {type(source).__name__}")


@dataclass(frozen=True)
class ScalingTransform:
    """R -> R / q together with binomial thinning of the sources by q."""

    q: Fraction | float

    def __post_init__(self):
        _check_q(self.q)

    def detectors(self, array):
        return scale_detectors(array, self.q)

    def sources(self, sources):
        return thin(sources, self.q)

    def distribution(self, dist):
        return effective_distribution(dist, self.q)

    def moments(self, mean, variance):
        return effective_moments(mean, variance, self.q)

    def apply(self, array, sources):
        return self.detectors(array), self.sources(sources)


@dataclass(frozen=True)
class EquivalenceReport:
    q: float
    engine: str
    sup_norm: float
    thinned: JointDistribution
    rescaled: JointDistribution

    @property
    def tail_bound(self):
        return self.thinned.tail_bound + self.rescaled.tail_bound


def _sup_diff(a: JointDistribution, b: JointDistribution):
    """Largest pointwise difference, treating points outside either grid as zero."""
    shape = tuple(max(x, y) for x, y in zip(a.shape, b.shape))
    pa, pb = np.zeros(shape), np.zeros(shape)
    pa[tuple(slice(0, s) for s in a.shape)] = a.probs
    pb[tuple(slice(0, s) for s in b.shape)] = b.probs
    return float(np.max(np.abs(pa - pb)))


def equivalence_check(array: DetectorArray, sources, q, engine="auto", grid=None, fixed=None, tol=1e-10):
    """sup |P(thinned sources; R) - P(sources; q R)|.

    Both sides use the same outcome grid. The Fock engine evaluates the
    thinned side block by block (its binomial shortcut would make the check
    circular).
    """
    qf = _check_q(q)
    thinned = thin(sources, q)
    name = choose_engine(thinned) if engine == "auto" else engine
    kw = dict(engine=name, fixed=fixed, tol=tol, reduce_binomial=False)
    left = compute_joint(array, thinned, grid=grid, **kw)
    if grid is None:
        grid = [0] * len(array)
        for ax, n in zip(left.axes, left.shape):
            grid[ax] = n - 1
    right_engine = choose_engine(sources) if engine == "auto" else engine
    kw["engine"] = right_engine
    right = compute_joint(array.scaled(qf), sources, grid=grid, **kw)
    return EquivalenceReport(qf, name if name == right_engine else f"{name}/{right_engine}", _sup_diff(left, right), left, right)
