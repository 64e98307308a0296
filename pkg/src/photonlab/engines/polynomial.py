"""Coefficient-extraction evaluation of the dilation, for small photon numbers.

An input |K, N-K> becomes a polynomial in the output creation operators; the
amplitude for output counts k_j is

    sqrt(K! (N-K)! / prod_j k_j!) [x^K] prod_j (conj(v_ja) x + conj(v_jb))^k_j ,

with the loss rows rotated so that only one of them depends on x. The binomial
expansions cancel heavily once N reaches a few dozen photons, so this path
serves as an independent cross-check of the sequential engine at small N.
"""

from __future__ import annotations

import itertools
import math

import numpy as np
from scipy.special import gammaln

from .._logmath import NEG_INF, binomial_poly, lse, normalise, poly_mul
from ..detectors import DetectorArray, detector_rows, loss_matrix
from ..sources import common_log_amplitudes


def pure_components(inp):
    """(log weight, N, log|c'_K|, arg c'_K) with c'_K = c_K sqrt(K! (N-K)!)."""
    out = []
    if inp.kind == "independent":
        for na, la in inp.a.items(floor=NEG_INF):
            for nb, lb in inp.b.items(floor=NEG_INF):
                n = na + nb
                mag = np.full(n + 1, NEG_INF)
                mag[na] = 0.5 * (gammaln(na + 1.0) + gammaln(nb + 1.0))
                out.append((la + lb, n, mag, np.zeros(n + 1)))
        return out
    for n, lp in inp.common.items(floor=NEG_INF):
        mag, ph = common_log_amplitudes(n, inp.c, inp.s, inp.delta)
        k = np.arange(n + 1)
        mag = mag + 0.5 * (gammaln(k + 1.0) + gammaln(n - k + 1.0))
        out.append((lp, n, mag, ph))
    return out


# -- rows ----------------------------------------------------------------------


class Rows:
    """Detector rows (conjugated, as they enter the polynomials) with a power cache."""

    def __init__(self, array: DetectorArray):
        rows, owner = [], []
        for m, spec in enumerate(array):
            for v in detector_rows(spec):
                rows.append(np.conj(v))
                owner.append(m)
        self.rows = rows
        self.owner = np.array(owner)
        self.per_detector = [[j for j, o in enumerate(owner) if o == m] for m in range(len(array))]
        self._cache = {}

    def power(self, j, k):
        key = (j, k)
        hit = self._cache.get(key)
        if hit is None:
            a, b = self.rows[j]
            hit = binomial_poly(a, b, k)
            self._cache[key] = hit
        return hit

    def splits(self, counts):
        """Row-count vectors compatible with detector counts (sub-counts of split detectors)."""
        options = []
        for m, n in enumerate(counts):
            rows = self.per_detector[m]
            if len(rows) == 1:
                options.append([((rows[0], n),)])
            else:
                options.append([((rows[0], k), (rows[1], n - k)) for k in range(n + 1)])
        for combo in itertools.product(*options):
            yield tuple(itertools.chain.from_iterable(combo))

    def product(self, row_counts):
        out = (0.0, np.ones(1, dtype=complex))
        for j, k in row_counts:
            if k:
                out = poly_mul(out, self.power(j, k))
        return out


def _triangular_loss(L, atol=1e-14):
    """Two loss vectors w1, w2 with w1 w1^+ + w2 w2^+ = L and w2 free of mode a."""
    laa, lbb, lab = L[0, 0].real, L[1, 1].real, L[0, 1]
    if laa > atol:
        w1 = np.array([math.sqrt(laa), np.conj(lab) / math.sqrt(laa)])
        w2b = math.sqrt(max(lbb - abs(lab) ** 2 / laa, 0.0))
    else:
        w1 = np.array([0.0, 0.0], dtype=complex)
        w2b = math.sqrt(max(lbb, 0.0))
    return w1, w2b


# -- evaluator ----------------------------------------------------------------


class PolynomialEvaluator:
    def __init__(self, array, inp):
        self.rows = Rows(array)
        L = loss_matrix(array)
        w1, w2b = _triangular_loss(L)
        self.w1 = np.conj(w1)
        self.log_w2 = math.log(w2b) if w2b > 0 else NEG_INF
        self.components = []
        for lw, n, mag, ph in pure_components(inp):
            scale, coeffs = normalise(np.exp(mag - np.max(mag)) * np.exp(1j * ph), np.max(mag))
            self.components.append((lw, n, scale, coeffs))
        self.max_loss = max((n for _, n, _, _ in self.components), default=0)
        self._build_loss_table(self.max_loss)

    def _build_loss_table(self, lmax):
        a, b = self.w1
        scales = np.empty(lmax + 1)
        table = np.zeros((lmax + 1, lmax + 1), dtype=complex)
        for l1 in range(lmax + 1):
            sc, co = binomial_poly(a, b, l1)
            scales[l1] = sc
            table[l1, : l1 + 1] = co
        self.loss_scale = scales
        self.loss_table = table
        self.log_fact = gammaln(np.arange(lmax + 2) + 1.0)

    def log_prob_rows(self, row_counts):
        S = sum(k for _, k in row_counts)
        q_scale, q = self.rows.product(row_counts)
        if not np.isfinite(q_scale):
            return NEG_INF
        log_kfact = sum(gammaln(k + 1.0) for _, k in row_counts)
        terms = []
        for lw, n, c_scale, c in self.components:
            L = n - S
            if L < 0:
                continue
            e = np.correlate(c, np.conj(q), mode="valid")
            e_scale, e = normalise(e)
            if not np.isfinite(e_scale):
                continue
            amp = self.loss_table[: L + 1, : L + 1] @ e
            l1 = np.arange(L + 1)
            with np.errstate(divide="ignore"):
                log_amp = np.log(np.abs(amp)) + self.loss_scale[: L + 1] + e_scale + q_scale + c_scale
            l2 = L - l1
            with np.errstate(invalid="ignore"):
                loss_term = np.where(l2 > 0, 2.0 * l2 * self.log_w2, 0.0)
            logp = 2.0 * log_amp + loss_term - self.log_fact[l1] - self.log_fact[l2]
            terms.append(lw + lse(logp) - log_kfact)
        return lse(np.array(terms)) if terms else NEG_INF

    def cost(self, S):
        return sum((n - S + 1) ** 2 + n for _, n, _, _ in self.components if n >= S)
