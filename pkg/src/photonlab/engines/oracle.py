"""Dense-matrix reference for small photon numbers.

P(n) = < : prod_m I_m^n_m / n_m! exp(-I_m) : > is expanded as a finite series
of normal-ordered moments (moments of order above the photon number vanish).
The normal ordering is carried out on commuting symbols: the product of the
bilinear forms I_m = sum R_ll' a_l^+ a_l' is expanded as a polynomial in
(conj(alpha_a), conj(alpha_b), alpha_a, alpha_b) and each monomial is mapped to
< a^+^p b^+^q a^r b^s > = Tr[rho (A^p B^q)^+ A^r B^s].
"""

from __future__ import annotations

import itertools
import math
from collections import defaultdict

import numpy as np

from ..detectors import DetectorArray
from ..errors import ConfigError, UnsupportedRepresentation
from ..sources import CommonDiagonal, CommonNumber, Independent, common_source_amplitudes

MAX_PHOTONS = 12


def _index(na, nb, cutoff):
    return na * (cutoff + 1) + nb


def fock_density(sources, cutoff=None):
    """Density matrix of a Fock-diagonal or common-source pair on |n_a, n_b>."""
    if isinstance(sources, Independent):
        try:
            pa, pb = sources.a.number_distribution(), sources.b.number_distribution()
        except UnsupportedRepresentation:
            raise UnsupportedRepresentation("brute-force states need diagonal sources") from None
        top = pa.max_n + pb.max_n
        cutoff = top if cutoff is None else cutoff
        rho = np.zeros(((cutoff + 1) ** 2,) * 2, dtype=complex)
        for na, la in pa.items():
            for nb, lb in pb.items():
                i = _index(na, nb, cutoff)
                rho[i, i] += math.exp(la + lb)
        return rho, cutoff
    if isinstance(sources, CommonNumber):
        mix = [(sources.n, 1.0)]
    elif isinstance(sources, CommonDiagonal):
        mix = [(n, math.exp(lp)) for n, lp in sources.dist.items()]
    else:
        raise UnsupportedRepresentation(f"no Fock density for {type(sources).__name__}")
    top = max(n for n, _ in mix)
    cutoff = top if cutoff is None else cutoff
    rho = np.zeros(((cutoff + 1) ** 2,) * 2, dtype=complex)
    for n, w in mix:
        pair = CommonNumber(n, sources.c, sources.s, sources.delta)
        psi = np.zeros((cutoff + 1) ** 2, dtype=complex)
        for k, amp in common_source_amplitudes(pair):
            psi[_index(k, n - k, cutoff)] = amp
        rho += w * np.outer(psi, psi.conj())
    return rho, cutoff


def _lowering(cutoff):
    a1 = np.diag(np.sqrt(np.arange(1, cutoff + 1)), 1)
    eye = np.eye(cutoff + 1)
    return np.kron(a1, eye), np.kron(eye, a1)


def _symbol_power(R, p):
    """Monomials (p_a*, p_b*, p_a, p_b) -> coefficient of (sum R_ll' conj(al_l) al_l')^p."""
    terms = {(1, 0, 1, 0): R[0, 0], (1, 0, 0, 1): R[0, 1], (0, 1, 1, 0): R[1, 0], (0, 1, 0, 1): R[1, 1]}
    out = {(0, 0, 0, 0): 1.0 + 0j}
    for _ in range(p):
        nxt = defaultdict(complex)
        for m1, c1 in out.items():
            for m2, c2 in terms.items():
                if c2 != 0:
                    nxt[tuple(x + y for x, y in zip(m1, m2))] += c1 * c2
        out = dict(nxt)
    return out


def _symbol_mul(x, y):
    out = defaultdict(complex)
    for m1, c1 in x.items():
        for m2, c2 in y.items():
            out[tuple(u + v for u, v in zip(m1, m2))] += c1 * c2
    return out


def _photon_support(rho, cutoff):
    diag = np.real(np.diag(rho)).reshape(cutoff + 1, cutoff + 1)
    na, nb = np.nonzero(diag > 0)
    return int(np.max(na + nb)) if na.size else 0


def brute_force_oracle(array: DetectorArray, rho, n, cutoff) -> float:
    """P(n) for the state ``rho`` on the truncated two-mode space of ``cutoff``."""
    n = [int(v) for v in n]
    if len(n) != len(array):
        raise ConfigError(f"outcome needs {len(array)} counts")
    if rho.shape != (((cutoff + 1) ** 2),) * 2:
        raise ConfigError("density matrix does not match the cutoff")
    total = _photon_support(rho, cutoff)
    if total > MAX_PHOTONS:
        raise ConfigError(f"brute-force oracle handles at most {MAX_PHOTONS} photons (state has {total})")
    if total > cutoff:
        raise ConfigError("truncation too small for the state")
    if sum(n) > total:
        return 0.0
    A, B = _lowering(cutoff)
    mats = {}

    def lowered(r, s):
        key = (r, s)
        if key not in mats:
            mats[key] = np.linalg.matrix_power(A, r) @ np.linalg.matrix_power(B, s)
        return mats[key]

    moment_cache = {}

    def moment(p, q, r, s):
        key = (p, q, r, s)
        if key not in moment_cache:
            X, Y = lowered(p, q), lowered(r, s)
            moment_cache[key] = np.trace(rho @ X.conj().T @ Y)
        return moment_cache[key]

    spare = total - sum(n)
    prob = 0j
    for extra in itertools.product(range(spare + 1), repeat=len(n)):
        if sum(extra) > spare:
            continue
        coef = 1.0
        sym = {(0, 0, 0, 0): 1.0 + 0j}
        for spec, nm, jm in zip(array, n, extra):
            coef *= (-1) ** jm / (math.factorial(nm) * math.factorial(jm))
            sym = _symbol_mul(sym, _symbol_power(spec.matrix, nm + jm))
        prob += coef * sum(c * moment(*mono) for mono, c in sym.items())
    return float(prob.real)
