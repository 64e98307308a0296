"""Binomial thinning of photon-number distributions."""

import numpy as np
from scipy.special import gammaln

from ._logmath import NEG_INF, log_binom, lse
from .sources import TAIL, NumberDistribution


def log_binomial_weight(n, k, q):
    """log C(n, k) q^k (1-q)^(n-k); -inf outside 0 <= k <= n."""
    n = np.asarray(n, dtype=float)
    k = np.asarray(k, dtype=float)
    with np.errstate(divide="ignore", invalid="ignore"):
        lq = np.where(k > 0, k * np.log(q), 0.0)
        lr = np.where(n - k > 0, (n - k) * np.log1p(-q) if q < 1 else NEG_INF, 0.0)
        out = log_binom(n, k) + lq + lr
    return np.where((k < 0) | (k > n), NEG_INF, out)


def thin_distribution(dist: NumberDistribution, q: float, tail=TAIL) -> NumberDistribution:
    """p~(N) = sum_{N' >= N} p(N') C(N', N) q^N (1 - q)^(N' - N), trimmed to ``tail``."""
    q = float(q)
    if q == 1.0:
        return dist
    src = dist.support
    out_n = np.arange(0, dist.max_n + 1)
    # rows: input numbers, columns: thinned numbers
    logm = dist.log_p[:, None] + log_binomial_weight(src[:, None], out_n[None, :], q)
    logp = lse(logm, axis=0)
    probs = np.exp(logp)
    # trim both ends while the dropped mass stays under the budget
    budget = max(tail - dist.tail, 0.0)
    cum = np.cumsum(probs)
    rcum = np.cumsum(probs[::-1])[::-1]
    lo = int(np.searchsorted(cum, budget / 2, side="right"))
    hi_candidates = np.nonzero(rcum > budget / 2)[0]
    hi = int(hi_candidates[-1]) if hi_candidates.size else len(probs) - 1
    lo = min(lo, hi)
    dropped = float(np.sum(probs[:lo]) + np.sum(probs[hi + 1 :]))
    kept = logp[lo : hi + 1]
    total_tail = dist.tail + dropped
    kept = kept - lse(kept) + np.log1p(-total_tail) if total_tail > 0 else kept - lse(kept)
    return NumberDistribution(lo, kept, tail=total_tail)


def thinned_moments(mean, variance, q):
    return q * mean, q * q * variance + (1.0 - q) * q * mean


def log_factorial_table(n):
    return gammaln(np.arange(n + 1) + 1.0)
