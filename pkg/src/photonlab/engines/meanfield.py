"""Fixed-phase product of Poissons and the uniform phase average over it."""

from __future__ import annotations

import math

import numpy as np

from ..detectors import DetectorArray, max_mean_count, mean_count
from ..errors import ConvergenceError, UnsupportedRepresentation
from ..sources import Independent, ReferencedPhase
from .distribution import JointDistribution, resolve_axes
from .mixture import max_change, mixture_grid, mixture_tail

ARITH_SLACK = 1e-12


def detector_means(array: DetectorArray, means):
    na, nb = means
    return [(s.R_aa * na, s.R_bb * nb) for s in array]


def node_rates(array: DetectorArray, means, delta):
    """Mean counts (K, M) for every phase in ``delta``."""
    delta = np.atleast_1d(np.asarray(delta, dtype=float))
    return np.stack([mean_count(s, m, delta) for s, m in zip(array, detector_means(array, means))], axis=1)


def peak_counts(array, means):
    return [max_mean_count(s, m) for s, m in zip(array, detector_means(array, means))]


def meanfield_joint(array: DetectorArray, means, delta, grid=None, fixed=None) -> JointDistribution:
    """prod_m Poisson(n_m; nbar_m(delta))."""
    free, nmax, fixed = resolve_axes(len(array), fixed, grid, peak_counts(array, means))
    lam = node_rates(array, means, delta)
    logp = mixture_grid([0.0], lam, free, nmax, fixed)
    tail = mixture_tail([1.0], lam, free, nmax)
    return JointDistribution(
        logp, free, "meanfield", fixed, {"tail_bound": tail + ARITH_SLACK, "tail_mass": tail, "delta": float(delta)}
    )


def delta_means(sources):
    """Intensities (|alpha|^2, |beta|^2) of two delta-node sources."""
    if not isinstance(sources, (Independent, ReferencedPhase)):
        raise UnsupportedRepresentation("phase averaging needs two single-mode sources")
    out = []
    for src in (sources.a, sources.b):
        dens = src.radial()
        if dens.kind != "delta":
            raise UnsupportedRepresentation(
                f"{type(src).__name__} is not a coherent-amplitude source; use the radial engine"
            )
        out.append(dens.u0)
    return tuple(out)


def trapezoid_nodes(K, odd_only=False):
    k = np.arange(1, K, 2) if odd_only else np.arange(K)
    return -math.pi + 2.0 * math.pi * k / K


def phase_average_joint(
    array: DetectorArray, sources, grid=None, fixed=None, tol=1e-10, start=64, max_nodes=4096
) -> JointDistribution:
    """(1/2pi) int d delta prod_m Poisson(n_m; nbar_m(delta)) by periodic trapezoid.

    Node count doubles (reusing the previous nodes) until the largest change
    of any grid probability falls below ``tol``.
    """
    means = delta_means(sources)
    if isinstance(sources, ReferencedPhase):
        return meanfield_joint(array, means, sources.delta, grid, fixed).with_meta(engine_detail="referenced")
    free, nmax, fixed = resolve_axes(len(array), fixed, grid, peak_counts(array, means))

    K = start
    delta = trapezoid_nodes(K)
    lam = node_rates(array, means, delta)
    logp = mixture_grid(np.full(K, -math.log(K)), lam, free, nmax, fixed)
    tails = [mixture_tail(np.full(K, 1.0 / K), lam, free, nmax)]
    change = math.inf
    while K < max_nodes:
        odd = trapezoid_nodes(2 * K, odd_only=True)
        lam_odd = node_rates(array, means, odd)
        part = mixture_grid(np.full(K, -math.log(K)), lam_odd, free, nmax, fixed)
        new = np.logaddexp(logp, part) - math.log(2.0)
        tails.append(mixture_tail(np.full(K, 1.0 / K), lam_odd, free, nmax))
        change = max_change(new, logp)
        logp, K = new, 2 * K
        if change < tol:
            break
    if change >= tol:
        raise ConvergenceError(
            f"phase quadrature changed by {change:.3g} at {K} nodes (tolerance {tol:g})", achieved=change, order=K
        )
    tail = _nested_tail(tails)
    meta = {
        "tail_bound": tail + ARITH_SLACK,
        "tail_mass": tail,
        "quadrature_order": K,
        "achieved_tolerance": change,
        "tolerance": tol,
    }
    return JointDistribution(logp, free, "phase", fixed, meta)


def _nested_tail(tails):
    """Tail of the final nested rule from per-level tails of the added nodes."""
    acc = tails[0]
    for t in tails[1:]:
        acc = 0.5 * (acc + t)
    return acc
