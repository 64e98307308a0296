"""Exact count statistics for Fock-diagonal and common-source inputs.

The isometric dilation of the detector array is realised as a chain of beam
splitters. Each detector row taps a fraction eta of one mode of the two modes
still in play. Before the tap the pair is rotated so that the tapped mode
comes first; on the basis |K, T-K> the rotation is the spin-T/2
representation of a 2x2 unitary, built from the exact spectrum of J_x. The tap
is the Kraus map |K> -> sqrt(C(K, n) eta^n (1-eta)^(K-n)) |K-n>. Whatever
survives all taps is the loss and is summed out as a squared norm.

Both maps are norm-preserving or positive, so no step cancels large terms
against each other (unlike a direct binomial expansion of the amplitudes).
Mixed inputs split into incoherent blocks of fixed total photon number, each
held as a matrix whose columns are weighted pure states.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy.linalg import eigh_tridiagonal
from scipy.special import xlog1py, xlogy

from .._logmath import NEG_INF, log_binom, lse
from .._thinning import log_binomial_weight
from ..detectors import DetectorArray, DetectorSpec, detector_rows, loss_matrix
from ..errors import ConfigError, ExpensiveComputation, UnsupportedRepresentation
from ..parallel import map_ordered
from ..sources import (
    Binomial,
    CommonDiagonal,
    CommonNumber,
    Independent,
    NumberDistribution,
    NumberState,
    common_log_amplitudes,
)
from .distribution import JointDistribution, resolve_axes
from .meanfield import ARITH_SLACK, peak_counts

COST_BUDGET = 5e10
POLYNOMIAL_MAX_PHOTONS = 40
BLOCK_CHUNKS = 4


# -- input decomposition -------------------------------------------------------


@dataclass(frozen=True)
class FockInput:
    """Either two independent number distributions or one common distribution."""

    kind: str  # "independent" | "common"
    a: NumberDistribution | None = None
    b: NumberDistribution | None = None
    common: NumberDistribution | None = None
    c: float = 1.0
    s: float = 0.0
    delta: float = 0.0

    @property
    def tail(self):
        if self.kind == "independent":
            return self.a.tail + self.b.tail
        return self.common.tail

    @property
    def max_total(self):
        if self.kind == "independent":
            return self.a.max_n + self.b.max_n
        return self.common.max_n

    def means(self):
        if self.kind == "independent":
            return self.a.mean, self.b.mean
        m = self.common.mean
        return self.c**2 * m, self.s**2 * m


def decompose(sources) -> FockInput:
    if isinstance(sources, Independent):
        try:
            return FockInput("independent", a=sources.a.number_distribution(), b=sources.b.number_distribution())
        except UnsupportedRepresentation as exc:
            raise UnsupportedRepresentation(f"Fock engine needs diagonal sources: {exc}") from None
    if isinstance(sources, CommonNumber):
        dist = NumberDistribution(sources.n, np.zeros(1))
        return FockInput("common", common=dist, c=sources.c, s=sources.s, delta=sources.delta)
    if isinstance(sources, CommonDiagonal):
        return FockInput("common", common=sources.dist, c=sources.c, s=sources.s, delta=sources.delta)
    raise UnsupportedRepresentation(f"Fock engine does not accept {type(sources).__name__}")


@dataclass
class _Block:
    T: int  # photons left in the two modes
    psi: np.ndarray  # (T + 1, r), column-normalised
    log_scale: np.ndarray  # (r,)


def _blocks(inp: FockInput):
    if inp.kind == "independent":
        a, b = inp.a, inp.b
        for T in range(a.offset + b.offset, a.max_n + b.max_n + 1):
            K = np.arange(max(a.offset, T - b.max_n), min(a.max_n, T - b.offset) + 1)
            lw = a.log_pmf(K) + b.log_pmf(T - K)
            keep = np.isfinite(lw)
            K, lw = K[keep], lw[keep]
            if K.size == 0:
                continue
            psi = np.zeros((T + 1, K.size), dtype=complex)
            psi[K, np.arange(K.size)] = 1.0
            yield _Block(T, psi, 0.5 * lw)
        return
    for T, lp in inp.common.items():
        mag, ph = common_log_amplitudes(T, inp.c, inp.s, inp.delta)
        top = np.max(mag)
        psi = (np.exp(mag - top) * np.exp(1j * ph))[:, None]
        yield _Block(T, psi, np.array([0.5 * lp + top]))


# -- beam-splitter chain ---------------------------------------------------------


@dataclass(frozen=True)
class _Step:
    eta: float
    theta: float
    alpha: tuple
    beta: tuple


def _plan(array: DetectorArray, order):
    """Tap parameters for every detector row, processed in ``order``.

    G maps the input modes onto the two modes still in play,
    r_l = sum_k conj(G_lk) a_k; a row v reads u = G^-T v in those modes.
    """
    G = np.eye(2, dtype=complex)
    plan = {}
    for m in order:
        steps = []
        for v in detector_rows(array[m]):
            u = np.linalg.lstsq(G.T, v, rcond=None)[0]
            norm2 = float(np.vdot(u, u).real)
            eta = min(norm2, 1.0)
            up = u / math.sqrt(norm2) if norm2 > 0 else np.array([1.0, 0.0], dtype=complex)
            phi1, phi2 = float(np.angle(up[0])), float(np.angle(up[1]))
            theta = math.atan2(abs(up[1]), abs(up[0]))
            steps.append(_Step(eta, theta, (-phi1, phi2), (0.0, phi1 - phi2)))
            other = np.array([-np.conj(up[1]), np.conj(up[0])])
            G = np.array([math.sqrt(max(1.0 - eta, 0.0)) * (up @ G), other @ G])
        plan[m] = steps
    return plan


@lru_cache(maxsize=64)
def _spin_basis(T):
    """Eigenvectors of the tridiagonal sqrt((K+1)(T-K)) matrix (twice J_x); eigenvalues are -T, -T+2, ..., T."""
    if T == 0:
        return np.ones((1, 1)), np.zeros(1)
    k = np.arange(T)
    _, W = eigh_tridiagonal(np.zeros(T + 1), np.sqrt((k + 1.0) * (T - k)))
    return W, np.arange(-T, T + 1, 2, dtype=float)


def _real_left(W, X):
    return W @ X.real + 1j * (W @ X.imag)


def _rotate(block: _Block, step: _Step) -> _Block:
    T = block.T
    K = np.arange(T + 1)
    b1, b2 = step.beta
    a1, a2 = step.alpha
    psi = block.psi * np.exp(1j * (K * b1 + (T - K) * b2))[:, None]
    if step.theta != 0.0 and T > 0:
        W, lam = _spin_basis(T)
        ph = np.exp(0.5j * math.pi * (K % 4))
        x = _real_left(W.T, np.conj(ph)[:, None] * psi)
        x *= np.exp(-1j * step.theta * lam)[:, None]
        psi = ph[:, None] * _real_left(W, x)
    psi = psi * np.exp(1j * (K * a1 + (T - K) * a2))[:, None]
    return _Block(T, psi, block.log_scale)


def _tap(block: _Block, n: int, eta: float):
    T = block.T
    if n > T:
        return None
    K = np.arange(n, T + 1)
    with np.errstate(divide="ignore", invalid="ignore"):
        logf = 0.5 * (log_binom(K, n) + xlogy(n, eta) + xlog1py(K - n, -eta))
    top = np.max(logf)
    if not np.isfinite(top):
        return None
    rows = block.psi[n:] * np.exp(logf - top)[:, None]
    peak = np.max(np.abs(rows), axis=0)
    live = peak > 0
    if not live.any():
        return None
    rows = rows[:, live] / peak[live]
    return _Block(T - n, rows, block.log_scale[live] + top + np.log(peak[live]))


def _log_norm(block: _Block):
    with np.errstate(divide="ignore"):
        col = np.log(np.sum(np.abs(block.psi) ** 2, axis=0))
    return float(lse(2.0 * block.log_scale + col))


def _final(block: _Block, step: _Step, nmax: int):
    """log P(n) for n = 0..nmax counted on the last row, loss summed out."""
    rot = _rotate(block, step)
    with np.errstate(divide="ignore"):
        logw = lse(2.0 * rot.log_scale[None, :] + 2.0 * np.log(np.abs(rot.psi)), axis=1)
    K = np.arange(rot.T + 1)
    n = np.arange(nmax + 1)
    return lse(logw[:, None] + log_binomial_weight(K[:, None], n[None, :], step.eta), axis=0)


def _taps(block: _Block, steps, n: int):
    """Blocks left after detector counts n (all sub-count splits for two-row detectors)."""
    first = _rotate(block, steps[0])
    if len(steps) == 1:
        out = _tap(first, n, steps[0].eta)
        return [out] if out is not None else []
    out = []
    for k in range(min(n, block.T) + 1):
        b1 = _tap(first, k, steps[0].eta)
        if b1 is None:
            continue
        b2 = _tap(_rotate(b1, steps[1]), n - k, steps[1].eta)
        if b2 is not None:
            out.append(b2)
    return out


def _last_detector(block: _Block, steps, nmax: int):
    if len(steps) == 1:
        return _final(block, steps[0], nmax)
    out = np.full(nmax + 1, NEG_INF)
    first = _rotate(block, steps[0])
    for k in range(min(nmax, block.T) + 1):
        b1 = _tap(first, k, steps[0].eta)
        if b1 is None:
            continue
        out[k:] = np.logaddexp(out[k:], _final(b1, steps[1], nmax - k))
    return out


def _log_matmul(A, B):
    """log(exp(A) @ exp(B)) with row and column shifts."""
    ra = np.max(A, axis=1, keepdims=True)
    ra = np.where(np.isfinite(ra), ra, 0.0)
    cb = np.max(B, axis=0, keepdims=True)
    cb = np.where(np.isfinite(cb), cb, 0.0)
    with np.errstate(divide="ignore", under="ignore"):
        return np.log(np.exp(A - ra) @ np.exp(B - cb)) + ra + cb


def _pair_grid(blocks, sa: _Step, na: int, sb: _Step, nb: int):
    """log P(n1, n2) for two single-row detectors processed last.

    States left with the same photon number after the first tap share one
    rotation, so the work is a few wide matrix products instead of one small
    product per (block, n1).
    """
    out = np.full((na + 1, nb + 1), NEG_INF)
    by_T = {}
    for b in blocks:
        by_T.setdefault(b.T, []).append(_rotate(b, sa))
    n2 = np.arange(nb + 1)
    for Tp in range(max(by_T) + 1):
        psis, scales, labels = [], [], []
        for T, group in by_T.items():
            n1 = T - Tp
            if not 0 <= n1 <= na:
                continue
            for r in group:
                t = _tap(r, n1, sa.eta)
                if t is not None:
                    psis.append(t.psi)
                    scales.append(t.log_scale)
                    labels.append(np.full(t.psi.shape[1], n1))
        if not psis:
            continue
        rot = _rotate(_Block(Tp, np.hstack(psis), np.concatenate(scales)), sb)
        with np.errstate(divide="ignore"):
            lw = 2.0 * rot.log_scale[None, :] + 2.0 * np.log(np.abs(rot.psi))
        lab = np.concatenate(labels)
        uniq = np.unique(lab)
        W = np.stack([lse(lw[:, lab == u], axis=1) for u in uniq])
        B = log_binomial_weight(np.arange(Tp + 1)[:, None], n2[None, :], sb.eta)
        out[uniq] = np.logaddexp(out[uniq], _log_matmul(W, B))
    return out


def _evaluate(blocks, ops, plan):
    """log P over the free axes remaining in ``ops``, summed over incoherent ``blocks``."""
    shape = tuple(v + 1 for kind, _, v in ops if kind == "free")
    if not blocks:
        return np.full(shape, NEG_INF) if shape else np.asarray(NEG_INF)
    if not ops:
        return np.asarray(lse(np.array([_log_norm(b) for b in blocks])))
    (kind, m, value), rest = ops[0], ops[1:]
    steps = plan[m]
    if kind == "fixed":
        return _evaluate([t for b in blocks for t in _taps(b, steps, value)], rest, plan)
    if not rest:
        return _lse_stack([_last_detector(b, steps, value) for b in blocks], shape)
    if len(rest) == 1 and len(steps) == 1 and len(plan[rest[0][1]]) == 1:
        return _pair_grid(blocks, steps[0], value, plan[rest[0][1]][0], rest[0][2])
    out = np.full(shape, NEG_INF)
    if len(steps) == 1:
        rotated = [_rotate(b, steps[0]) for b in blocks]
        split = lambda n: [t for t in (_tap(r, n, steps[0].eta) for r in rotated) if t is not None]
    else:
        split = lambda n: [t for b in blocks for t in _taps(b, steps, n)]
    for n in range(value + 1):
        out[n] = _evaluate(split(n), rest, plan)
    return out


def _lse_stack(parts, shape):
    if not parts:
        return np.full(shape, NEG_INF) if shape else np.asarray(NEG_INF)
    return lse(np.stack(parts), axis=0)


# -- public entry points ---------------------------------------------------------


def _number_state_form(sources):
    """(N, q) if ``sources`` is a number state seen through a beam splitter of transmissivity q."""
    if isinstance(sources, NumberState):
        return sources.n, 1.0
    if isinstance(sources, Binomial):
        return sources.cap, float(sources.q)
    return None


def reduce_thinned(array: DetectorArray, sources):
    """Rewrite binomial pairs as number states feeding a lossier array.

    Binomial(q, N q) is |N> behind a beam splitter of transmissivity q, which
    multiplies R_aa by q_a, R_bb by q_b and R_ab by sqrt(q_a q_b). The result
    is one incoherent block instead of one per total photon number.
    """
    if not isinstance(sources, Independent):
        return array, sources
    fa, fb = _number_state_form(sources.a), _number_state_form(sources.b)
    if fa is None or fb is None or (fa[1] == 1.0 and fb[1] == 1.0):
        return array, sources
    (na, qa), (nb, qb) = fa, fb
    specs = [DetectorSpec(qa * s.R_aa, qb * s.R_bb, s.xi, s.theta) for s in array]
    return DetectorArray(specs), Independent(NumberState(na), NumberState(nb))


def fock_joint(
    array: DetectorArray,
    sources,
    grid=None,
    fixed=None,
    method="sequential",
    allow_expensive=False,
    reduce_binomial=True,
) -> JointDistribution:
    """Exact P(n_1, ..., n_M) (or a slice with ``fixed`` counts) for Fock-diagonal or common-source inputs.

    ``method="polynomial"`` selects direct coefficient extraction, which is
    only reliable for small photon numbers and serves as a cross-check.
    ``reduce_binomial`` evaluates binomial sources as number states behind
    extra loss (exact, and much cheaper); switch it off to evaluate the
    binomial mixture block by block.
    """
    loss_matrix(array)
    reduced = False
    if reduce_binomial:
        new_array, new_sources = reduce_thinned(array, sources)
        reduced = new_sources is not sources
        array, sources = new_array, new_sources
    inp = decompose(sources)
    free, nmax, fixed = resolve_axes(len(array), fixed, grid, peak_counts(array, inp.means()), clamp=inp.max_total)
    shape = tuple(n + 1 for n in nmax)
    if method == "polynomial":
        logp = _polynomial_grid(array, inp, free, nmax, fixed, allow_expensive)
    elif method == "sequential":
        logp = _sequential_grid(array, inp, free, nmax, fixed, allow_expensive)
    else:
        raise ConfigError(f"unknown Fock method {method!r}")
    logp = np.asarray(logp, dtype=float).reshape(shape)
    holds_all = all(n >= inp.max_total for n in nmax)
    tail = inp.tail
    if not fixed and not holds_all:
        tail += max(0.0, 1.0 - float(np.exp(lse(logp))))
    meta = {
        "tail_bound": tail + ARITH_SLACK,
        "tail_mass": tail,
        "method": method,
        "grid_holds_all_photons": holds_all,
        "reduced_binomial": reduced,
    }
    return JointDistribution(logp, free, "fock", fixed, meta)


def _sequential_grid(array, inp, free, nmax, fixed, allow_expensive):
    order = list(fixed) + list(free)
    plan = _plan(array, order)
    ops = [("fixed", m, c) for m, c in fixed.items()] + [("free", m, n) for m, n in zip(free, nmax)]
    blocks = [b for b in _blocks(inp) if b.T >= sum(fixed.values())]
    outer = int(np.prod([n + 1 for n in nmax[:-1]])) if len(nmax) > 1 else 1
    splits = 1
    for kind, m, v in ops:
        if len(plan[m]) > 1:
            splits *= v + 1
    est = sum((b.T + 1) ** 2 * b.psi.shape[1] for b in blocks) * outer * splits
    if est > COST_BUDGET and not allow_expensive:
        raise ExpensiveComputation(
            f"Fock grid needs about {est:.2g} operations; fix all but one axis or pass allow_expensive"
        )
    shape = tuple(n + 1 for n in nmax)
    chunks = _chunks(blocks, BLOCK_CHUNKS)
    parts = map_ordered(lambda c: _evaluate(c, ops, plan), chunks, min_chunk=1)
    return _lse_stack(parts, shape)


def _chunks(blocks, k):
    """Split into ``k`` contiguous runs of similar cost; ``k`` is fixed so the reduction order never depends on the worker count."""
    if k <= 1 or len(blocks) <= 1:
        return [blocks]
    cost = np.cumsum([(b.T + 1) ** 2 * b.psi.shape[1] for b in blocks], dtype=float)
    cuts = np.searchsorted(cost, cost[-1] * np.arange(1, k) / k)
    bounds = [0, *cuts.tolist(), len(blocks)]
    return [blocks[i:j] for i, j in zip(bounds, bounds[1:]) if j > i]


def _polynomial_grid(array, inp, free, nmax, fixed, allow_expensive):
    from .polynomial import PolynomialEvaluator

    if inp.max_total > POLYNOMIAL_MAX_PHOTONS and not allow_expensive:
        raise ExpensiveComputation(
            f"coefficient extraction is unreliable beyond {POLYNOMIAL_MAX_PHOTONS} photons; use the sequential method"
        )
    ev = PolynomialEvaluator(array, inp)
    M = len(array)
    out = []
    for idx in itertools.product(*[range(n + 1) for n in nmax]):
        counts = [0] * M
        for m, c in fixed.items():
            counts[m] = c
        for m, i in zip(free, idx):
            counts[m] = i
        if sum(counts) > inp.max_total:
            out.append(NEG_INF)
            continue
        out.append(lse(np.array([ev.log_prob_rows(rc) for rc in ev.rows.splits(counts)])))
    return np.array(out)


def generating_function_fock(array: DetectorArray, n_a: int, n_b: int, z) -> complex:
    """F(z) = E[prod_m (1 + z_m)^n_m] for the input |n_a, n_b>."""
    z = np.atleast_1d(np.asarray(z, dtype=complex))
    if len(z) != len(array):
        raise ConfigError(f"need {len(array)} generating-function arguments, got {len(z)}")
    Mx = np.eye(2, dtype=complex) + sum(zm * s.matrix for zm, s in zip(z, array))
    out = 0j
    for k in range(min(n_a, n_b) + 1):
        out += (
            math.comb(n_a, k)
            * math.comb(n_b, k)
            * Mx[0, 0] ** (n_a - k)
            * Mx[1, 1] ** (n_b - k)
            * (Mx[0, 1] * Mx[1, 0]) ** k
        )
    return complex(out)
