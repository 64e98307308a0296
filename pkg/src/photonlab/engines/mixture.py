"""Grids of Poisson mixtures sum_k w_k prod_m Poisson(n_m; lam_km).

Every quadrature engine reduces to this form: the mean-field engine has one
node, the phase average has one node per phase and the radial engines have one
node per (intensity, phase) pair.
"""

import numpy as np
from scipy import stats

from .._logmath import log_poisson, lse, separable_logsum


def fold_fixed(logw, lam, fixed):
    """Absorb pinned detector counts into the node weights."""
    logw = np.array(logw, dtype=float)
    for d, c in fixed.items():
        logw = logw + log_poisson(c, lam[:, d])
    return logw


def mixture_grid(logw, lam, free, nmax, fixed):
    """log P over the free-axis grid. ``lam`` has shape (K, M)."""
    lam = np.asarray(lam, dtype=float)
    logw = fold_fixed(logw, lam, fixed)
    if not free:
        return np.asarray(lse(logw))
    logf = [log_poisson(np.arange(n + 1)[None, :], lam[:, m][:, None]) for m, n in zip(free, nmax)]
    return separable_logsum(logw, logf)


def mixture_tail(weights, lam, free, nmax):
    """Probability mass of the mixture outside the grid (union bound over axes)."""
    lam = np.asarray(lam, dtype=float)
    tail = np.zeros(lam.shape[0])
    for m, n in zip(free, nmax):
        tail += stats.poisson.sf(n, lam[:, m])
    return float(np.sum(np.asarray(weights) * tail))


def max_change(new, old):
    with np.errstate(invalid="ignore"):
        diff = np.abs(np.exp(new) - np.exp(old))
    return float(np.nanmax(diff)) if diff.size else 0.0
