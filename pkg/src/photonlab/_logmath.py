"""Log-domain helpers shared by the engines.

Polynomials with enormous coefficient ranges are carried as ``(log_scale,
coeffs)`` pairs where ``coeffs`` is a complex array normalised so that
``max|coeffs| == 1``. The true polynomial is ``exp(log_scale) * coeffs``.
"""

import itertools

import numpy as np
from scipy.special import gammaln, xlogy

NEG_INF = -np.inf


def log_factorial(n):
    return gammaln(np.asarray(n, dtype=float) + 1.0)


def log_binom(n, k):
    n = np.asarray(n, dtype=float)
    k = np.asarray(k, dtype=float)
    out = gammaln(n + 1.0) - gammaln(k + 1.0) - gammaln(n - k + 1.0)
    return np.where((k < 0) | (k > n), NEG_INF, out)


def log_poisson(n, lam):
    """log of e^-lam lam^n / n!, with lam = 0 handled exactly."""
    n = np.asarray(n, dtype=float)
    lam = np.asarray(lam, dtype=float)
    return xlogy(n, lam) - lam - gammaln(n + 1.0)


def lse(a, axis=None):
    """log(sum(exp(a))) along ``axis``; all -inf input gives -inf (not nan)."""
    a = np.asarray(a, dtype=float)
    if a.size == 0:
        return NEG_INF if axis is None else np.full(np.delete(a.shape, axis), NEG_INF)
    top = np.max(a, axis=axis, keepdims=True)
    top = np.where(np.isfinite(top), top, 0.0)
    with np.errstate(divide="ignore", under="ignore"):
        out = np.log(np.sum(np.exp(a - top), axis=axis, keepdims=True)) + top
    if axis is None:
        return float(out.reshape(()))
    return np.squeeze(out, axis=axis)


def log_of(x):
    with np.errstate(divide="ignore"):
        return np.log(x)


# -- scaled complex polynomials ------------------------------------------------


def normalise(coeffs, log_scale=0.0):
    coeffs = np.asarray(coeffs, dtype=complex)
    peak = np.max(np.abs(coeffs)) if coeffs.size else 0.0
    if peak == 0.0:
        return NEG_INF, np.zeros_like(coeffs)
    return log_scale + np.log(peak), coeffs / peak


def binomial_poly(alpha, beta, k):
    """Coefficients of (alpha x + beta)^k in ascending powers of x."""
    k = int(k)
    if k == 0:
        return 0.0, np.ones(1, dtype=complex)
    i = np.arange(k + 1)
    la, lb = log_of(abs(alpha)), log_of(abs(beta))
    with np.errstate(invalid="ignore"):
        logmag = log_binom(k, i) + np.where(i > 0, i * la, 0.0) + np.where(k - i > 0, (k - i) * lb, 0.0)
    phase = i * np.angle(alpha) + (k - i) * np.angle(beta)
    top = np.max(logmag)
    if not np.isfinite(top):
        return NEG_INF, np.zeros(k + 1, dtype=complex)
    coeffs = np.exp(logmag - top) * np.exp(1j * phase)
    return top, coeffs


def poly_mul(p, q):
    (sp, cp), (sq, cq) = p, q
    if not (np.isfinite(sp) and np.isfinite(sq)):
        return NEG_INF, np.zeros(len(cp) + len(cq) - 1, dtype=complex)
    return normalise(np.convolve(cp, cq), sp + sq)


def poly_product(polys):
    out = (0.0, np.ones(1, dtype=complex))
    for p in polys:
        out = poly_mul(out, p)
    return out


# -- separable mixtures --------------------------------------------------------


def separable_logsum(logw, logf, block=64, tilt=None):
    """log of sum_k exp(logw[k]) * prod_m exp(logf[m][k, n_m]) on the full grid.

    ``logf[m]`` has shape ``(K, len_m)``. Each block of the output grid is
    shifted by its own per-node maxima, so intermediate values never overflow
    and only terms that are negligible within their block underflow.

    ``tilt(sl)`` may return one additive log vector per axis for the block
    ``sl``; it is added to the factors and taken off the result. A tilt that
    follows a non-separable factor applied afterwards keeps the block's
    relevant corner from underflowing.
    """
    logw = np.asarray(logw, dtype=float)
    shape = tuple(f.shape[1] for f in logf)
    out = np.full(shape, NEG_INF)
    if len(logf) == 0:
        return np.asarray(lse(logw))
    live = np.isfinite(logw)
    if not live.any():
        return out
    logw = logw[live]
    logf = [f[live] for f in logf]
    chunks = [range(0, s, block) for s in shape]
    for starts in itertools.product(*chunks):
        sl = tuple(slice(s, min(s + block, n)) for s, n in zip(starts, shape))
        parts = [f[:, s] for f, s in zip(logf, sl)]
        tv = None
        if tilt is not None:
            tv = tilt(sl)
            parts = [p + t[None, :] for p, t in zip(parts, tv)]
        shifts = [np.max(p, axis=1) for p in parts]
        c = logw + np.sum(shifts, axis=0)
        finite = np.isfinite(c)
        if not finite.any():
            continue
        top = np.max(c[finite])
        wk = np.exp(c[finite] - top)
        mats = [np.exp(p[finite] - s[finite, None]) for p, s in zip(parts, shifts)]
        acc = _contract(wk, mats)
        with np.errstate(divide="ignore"):
            out[sl] = top + np.log(acc)
        if tv is not None:
            out[sl] -= sum(np.ix_(*tv))
    return out


def _contract(w, mats):
    if len(mats) == 1:
        return w @ mats[0]
    if len(mats) == 2:
        return (mats[0] * w[:, None]).T @ mats[1]
    return np.stack([_contract(w * mats[0][:, i], mats[1:]) for i in range(mats[0].shape[1])])
