"""Phase averages over sources with radial coherent-state densities.

Two Gamma-law intensities (or a Gamma law next to the vacuum) are handled by
integrating the overall intensity s = u_a + u_b analytically: for fixed split
t = u_a / s and phase the counts are negative multinomial, leaving a
Gauss-Jacobi rule in t and a periodic trapezoid rule in the phase. Every other
combination uses tensor rules in u_a, u_b and the phase.
"""

from __future__ import annotations

import math

import numpy as np
from scipy import special, stats

from .._logmath import separable_logsum
from ..detectors import DetectorArray
from ..errors import ConvergenceError, UnsupportedRepresentation
from ..sources import Independent, ReferencedPhase, RadialDensity
from .distribution import JointDistribution, resolve_axes
from .meanfield import ARITH_SLACK, phase_average_joint, trapezoid_nodes
from .mixture import max_change, mixture_grid, mixture_tail

MAX_SPLIT_ORDER = 1024
MAX_PHASE_ORDER = 4096
MAX_RADIAL_ORDER = 512


def _densities(sources):
    if not isinstance(sources, (Independent, ReferencedPhase)):
        raise UnsupportedRepresentation("radial averaging needs two single-mode sources")
    return sources.a.radial(), sources.b.radial()


def _is_vacuum(d: RadialDensity):
    return d.kind == "delta" and d.u0 == 0.0


def _gamma_like(d):
    return d.kind == "gamma" or _is_vacuum(d)


def _peak_counts(array, da, db):
    ua, ub = da.quantile_u(), db.quantile_u()
    return [s.R_aa * ua + s.R_bb * ub + 2 * s.xi * math.sqrt(s.R_aa * s.R_bb * ua * ub) for s in array]


def _coupling(array):
    ra = np.array([s.R_aa for s in array])
    rb = np.array([s.R_bb for s in array])
    amp = np.array([2 * s.xi * math.sqrt(s.R_aa * s.R_bb) for s in array])
    th = np.array([s.theta for s in array])
    return ra, rb, amp, th


# -- Gamma x Gamma: negative multinomial reduction ---------------------------------


def _split_rule(da, db, order):
    """Nodes t in [0, 1], log weights and (K, 1/theta_a, 1/theta_b) for the split variable."""
    if _is_vacuum(db):
        # a single Gamma law: the node weight c^-K must cancel to one
        return np.array([1.0]), np.array([-da.shape * math.log(da.scale)]), da.shape, 1.0 / da.scale, 0.0
    if _is_vacuum(da):
        return np.array([0.0]), np.array([-db.shape * math.log(db.scale)]), db.shape, 0.0, 1.0 / db.scale
    ka, kb = da.shape, db.shape
    x, w = special.roots_jacobi(order, kb - 1.0, ka - 1.0)
    t = 0.5 * (1.0 + x)
    K = ka + kb
    with np.errstate(divide="ignore"):
        logw = (
            np.log(w)
            - (K - 1.0) * math.log(2.0)
            + special.gammaln(K)
            - special.gammaln(ka)
            - special.gammaln(kb)
            - ka * math.log(da.scale)
            - kb * math.log(db.scale)
        )
    return t, logw, K, 1.0 / da.scale, 1.0 / db.scale


def _negmult_nodes(array, da, db, delta, order):
    """Per node: log quadrature weight, log p0 and log p_m for every detector."""
    t, logw_t, K, ia, ib = _split_rule(da, db, order)
    ra, rb, amp, th = _coupling(array)
    tt = np.repeat(t, len(delta))
    dd = np.tile(delta, len(t))
    h = ra[None, :] * tt[:, None] + rb[None, :] * (1 - tt[:, None])
    h = h + amp[None, :] * np.sqrt(tt * (1 - tt))[:, None] * np.cos(dd[:, None] + th[None, :])
    h = np.maximum(h, 0.0)
    c = ia * tt + ib * (1 - tt)
    den = c + h.sum(axis=1)
    with np.errstate(divide="ignore"):
        logw = np.repeat(logw_t, len(delta)) - math.log(len(delta)) - K * np.log(c)
        logp = np.log(h) - np.log(den)[:, None]
        logp0 = np.log(c) - np.log(den)
    return logw, logp0, logp, K


def _xlog(n, logp):
    n = np.asarray(n, dtype=float)
    with np.errstate(invalid="ignore"):
        return np.where(n == 0, 0.0, n * logp)


def _negmult_grid(logw, logp0, logp, K, free, nmax, fixed):
    """sum_k w_k Gamma(K + S) / (Gamma(K) prod n!) p0^K prod p_m^n_m, with S = sum n."""
    logw = logw + K * logp0 - special.gammaln(K)
    S0 = 0
    for d, cnt in fixed.items():
        logw = logw + _xlog(cnt, logp[:, d]) - special.gammaln(cnt + 1.0)
        S0 += cnt
    if not free:
        return np.asarray(separable_logsum(logw, [])) + special.gammaln(K + S0)
    logf = []
    for m, n in zip(free, nmax):
        k = np.arange(n + 1)
        logf.append(_xlog(k[None, :], logp[:, m][:, None]) - special.gammaln(k + 1.0)[None, :])

    def tilt(sl):
        # local slope of log Gamma(K + S) at the block centre
        centre = S0 + sum(0.5 * (s.start + s.stop - 1) for s in sl)
        slope = float(special.digamma(K + centre))
        return [slope * np.arange(s.start, s.stop) for s in sl]

    out = separable_logsum(logw, logf, tilt=tilt)
    S = S0 + sum(np.ix_(*[np.arange(n + 1) for n in nmax]))
    return out + special.gammaln(K + S)


def _negmult_tail(logw, logp0, logp, K, free, nmax):
    w = np.exp(logw)
    tail = np.zeros(len(logw))
    for m, n in zip(free, nmax):
        # each marginal is negative binomial with success probability p0 / (p0 + p_m)
        succ = 1.0 / (1.0 + np.exp(logp[:, m] - logp0))
        tail += stats.nbinom.sf(n, K, succ)
    return float(np.sum(w * tail)), float(np.sum(w))


# -- generic tensor rules ----------------------------------------------------------


def _tensor_nodes(array, da, db, delta, order):
    ua, wa = da.rule(order)
    ub, wb = db.rule(order)
    ra, rb, amp, th = _coupling(array)
    UA, UB, DD = np.meshgrid(ua, ub, delta, indexing="ij")
    W = (wa[:, None, None] * wb[None, :, None]) * np.full(len(delta), 1.0 / len(delta))[None, None, :]
    UA, UB, DD, W = UA.ravel(), UB.ravel(), DD.ravel(), W.ravel()
    lam = ra[None, :] * UA[:, None] + rb[None, :] * UB[:, None]
    lam = lam + amp[None, :] * np.sqrt(UA * UB)[:, None] * np.cos(DD[:, None] + th[None, :])
    return np.maximum(lam, 0.0), W


# -- driver --------------------------------------------------------------------


def radial_phase_average_joint(
    array: DetectorArray, sources, grid=None, fixed=None, tol=1e-10, start=64
) -> JointDistribution:
    """(1/2pi) int d delta int int P_a P_b prod_m Poisson(n_m; nbar_m(r_a, r_b, delta))."""
    da, db = _densities(sources)
    referenced = isinstance(sources, ReferencedPhase)
    if da.kind == "delta" and db.kind == "delta" and not referenced:
        out = phase_average_joint(array, Independent(sources.a, sources.b), grid, fixed, tol=tol, start=start)
        return JointDistribution(out.log_probs, out.axes, "radial", out.fixed, {**out.meta, "method": "delta-nodes"})
    free, nmax, fixed = resolve_axes(len(array), fixed, grid, _peak_counts(array, da, db))
    fixed_phase = np.array([sources.delta]) if referenced else None
    gamma_path = _gamma_like(da) and _gamma_like(db)
    one_split = _is_vacuum(da) or _is_vacuum(db)
    # phase is irrelevant if either source is the vacuum
    phase_free = fixed_phase is None and not one_split

    def evaluate(n_r, n_d):
        delta = fixed_phase if fixed_phase is not None else (trapezoid_nodes(n_d) if phase_free else np.array([0.0]))
        if gamma_path:
            logw, logp0, logp, K = _negmult_nodes(array, da, db, delta, n_r)
            grid_vals = _negmult_grid(logw, logp0, logp, K, free, nmax, fixed)
            tail, mass = _negmult_tail(logw, logp0, logp, K, free, nmax)
            return grid_vals, tail, mass
        lam, W = _tensor_nodes(array, da, db, delta, n_r)
        with np.errstate(divide="ignore"):
            logw = np.log(W)
        return mixture_grid(logw, lam, free, nmax, fixed), mixture_tail(W, lam, free, nmax), float(W.sum())

    radial_adaptive = (gamma_path and not one_split) or (not gamma_path and not (da.singular and db.singular))
    max_r = MAX_SPLIT_ORDER if gamma_path else MAX_RADIAL_ORDER
    n_r, n_d = start, (start if phase_free else 1)
    cur, tail, mass = evaluate(n_r, n_d)
    change = 0.0
    while True:
        err_r = err_d = 0.0
        if radial_adaptive:
            alt_r = evaluate(2 * n_r, n_d)
            err_r = max_change(alt_r[0], cur)
        if phase_free:
            alt_d = evaluate(n_r, 2 * n_d)
            err_d = max_change(alt_d[0], cur)
        change = max(err_r, err_d)
        if change < tol:
            # report the finer of the two estimates actually computed
            if radial_adaptive and err_r >= err_d:
                cur, tail, mass = alt_r
                n_r *= 2
            elif phase_free:
                cur, tail, mass = alt_d
                n_d *= 2
            break
        grow_r = radial_adaptive and err_r >= tol
        grow_d = phase_free and err_d >= tol
        if (grow_r and 2 * n_r > max_r) or (grow_d and 2 * n_d > MAX_PHASE_ORDER):
            raise ConvergenceError(
                f"radial quadrature changed by {change:.3g} at orders ({n_r}, {n_d})",
                achieved=change,
                order=(n_r, n_d),
            )
        if grow_r:
            n_r *= 2
        if grow_d:
            n_d *= 2
        if grow_r and not grow_d:
            cur, tail, mass = alt_r
        elif grow_d and not grow_r:
            cur, tail, mass = alt_d
        else:
            cur, tail, mass = evaluate(n_r, n_d)
    meta = {
        "tail_bound": tail + abs(mass - 1.0) + change + ARITH_SLACK,
        "tail_mass": tail,
        "quadrature_order": [n_r, n_d],
        "achieved_tolerance": change,
        "tolerance": tol,
        "method": "negative-multinomial" if gamma_path else "tensor",
    }
    return JointDistribution(cur, free, "radial", fixed, meta)
