"""Detector matrices, mean-field counts and the isometric dilation.

Relative phase convention: ``delta`` is the phase of the b amplitude relative
to the a amplitude, so a detector with visibility ``xi`` and phase ``theta``
sees ``<n>_a + <n>_b + 2 xi sqrt(<n>_a <n>_b) cos(delta + theta)``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigError, PhysicalityError
from .sources import SourcePair


@dataclass(frozen=True)
class DetectorSpec:
    R_aa: float
    R_bb: float
    xi: float = 1.0
    theta: float = 0.0

    def __post_init__(self):
        if not (self.R_aa > 0 and self.R_bb > 0):
            raise ConfigError("detector efficiencies R_aa, R_bb must be positive")
        if not (0.0 <= self.xi <= 1.0):
            raise ConfigError(f"visibility must lie in [0, 1], got {self.xi}")

    @classmethod
    def from_matrix(cls, R, atol=1e-12):
        R = np.asarray(R, dtype=complex)
        if R.shape != (2, 2) or not np.allclose(R, R.conj().T, atol=atol, rtol=0):
            raise ConfigError("detector matrix must be a 2x2 Hermitian matrix")
        raa, rbb = float(R[0, 0].real), float(R[1, 1].real)
        if raa <= 0 or rbb <= 0:
            raise ConfigError("detector efficiencies R_aa, R_bb must be positive")
        bound = math.sqrt(raa * rbb)
        mag = abs(R[0, 1])
        if mag > bound * (1 + atol) + atol:
            raise ConfigError(f"|R_ab| = {mag} exceeds sqrt(R_aa R_bb) = {bound}")
        xi = min(mag / bound, 1.0)
        theta = float(np.angle(R[0, 1])) if mag > 0 else 0.0
        return cls(raa, rbb, xi, theta)

    @property
    def R_ab(self):
        return self.xi * np.exp(1j * self.theta) * math.sqrt(self.R_aa * self.R_bb)

    @property
    def matrix(self):
        rab = self.R_ab
        return np.array([[self.R_aa, rab], [np.conj(rab), self.R_bb]], dtype=complex)

    def scaled(self, factor):
        return DetectorSpec(self.R_aa * factor, self.R_bb * factor, self.xi, self.theta)

    def swapped(self):
        """The same detector seen with modes a and b exchanged."""
        return DetectorSpec(self.R_bb, self.R_aa, self.xi, -self.theta)


@dataclass(frozen=True)
class DetectorArray:
    specs: tuple = field(default_factory=tuple)

    def __post_init__(self):
        specs = tuple(self.specs)
        if not specs:
            raise ConfigError("a detector array needs at least one detector")
        object.__setattr__(self, "specs", specs)

    def __len__(self):
        return len(self.specs)

    def __iter__(self):
        return iter(self.specs)

    def __getitem__(self, i):
        return self.specs[i]

    @property
    def M(self):
        return len(self.specs)

    def total(self):
        return sum((s.matrix for s in self.specs), np.zeros((2, 2), dtype=complex))

    def subset(self, indices):
        return DetectorArray(tuple(self.specs[i] for i in indices))

    def scaled(self, factor):
        return DetectorArray(tuple(s.scaled(factor) for s in self.specs))

    def swapped(self):
        return DetectorArray(tuple(s.swapped() for s in self.specs))

    def max_eigenvalue(self):
        return float(np.linalg.eigvalsh(self.total())[-1])


@dataclass(frozen=True)
class MeanFieldTrajectory:
    delta_grid: np.ndarray
    points: np.ndarray  # shape (len(delta_grid), M)
    means: np.ndarray  # shape (M, 2): per detector (<n>_a, <n>_b)
    specs: tuple = ()

    def at(self, delta):
        """Exact curve value at arbitrary phases (shape (..., M))."""
        delta = np.asarray(delta, dtype=float)
        cols = [mean_count(s, m, delta) for s, m in zip(self.specs, self.means)]
        return np.stack(cols, axis=-1)


def _means_of(sources):
    if isinstance(sources, SourcePair):
        return sources.means()
    na, nb = sources
    return float(na), float(nb)


def expected_counts(array: DetectorArray, sources) -> np.ndarray:
    """Per detector (<n_m>_a, <n_m>_b) = (R_aa N_a, R_bb N_b)."""
    na, nb = _means_of(sources)
    return np.array([[s.R_aa * na, s.R_bb * nb] for s in array])


def mean_count(spec: DetectorSpec, means, delta):
    na, nb = means
    if na < 0 or nb < 0:
        raise ConfigError("mean counts must be non-negative")
    val = na + nb + 2.0 * spec.xi * np.sqrt(na * nb) * np.cos(np.asarray(delta) + spec.theta)
    # rounding can push the destructive minimum a hair below zero
    return np.maximum(val, 0.0)


def trajectory(array: DetectorArray, sources, grid_size: int = 256) -> MeanFieldTrajectory:
    if grid_size < 4:
        raise ConfigError("trajectory grid needs at least 4 points")
    counts = expected_counts(array, sources)
    delta = -math.pi + 2 * math.pi * np.arange(grid_size) / grid_size
    pts = np.stack([mean_count(s, m, delta) for s, m in zip(array, counts)], axis=1)
    return MeanFieldTrajectory(delta, pts, counts, tuple(array.specs))


def max_mean_count(spec: DetectorSpec, means):
    na, nb = means
    return na + nb + 2.0 * spec.xi * math.sqrt(na * nb)


# -- dilation ------------------------------------------------------------------


def _phase_fix(v):
    """Rotate so the first non-negligible component is real and positive."""
    for comp in v:
        if abs(comp) > 1e-15:
            return v * np.exp(-1j * np.angle(comp))
    return v


@dataclass(frozen=True)
class Dilation:
    """Rows v (v v^dagger summing to each R^(m)) plus loss rows completing the identity."""

    rows: np.ndarray  # (J, 2) complex
    detector_of_row: np.ndarray  # (J,) int
    loss_rows: np.ndarray  # (2, 2) complex, one loss vector per row

    def detector_matrix(self, m):
        sel = self.rows[self.detector_of_row == m]
        return sum((np.outer(v, v.conj()) for v in sel), np.zeros((2, 2), dtype=complex))

    def completeness(self):
        acc = sum((np.outer(v, v.conj()) for v in self.rows), np.zeros((2, 2), dtype=complex))
        return acc + sum((np.outer(w, w.conj()) for w in self.loss_rows), np.zeros((2, 2), dtype=complex))


def detector_rows(spec: DetectorSpec):
    """One row for unit visibility, otherwise the two weighted eigenvectors."""
    if spec.xi == 1.0:
        return [np.array([math.sqrt(spec.R_aa), math.sqrt(spec.R_bb) * np.exp(-1j * spec.theta)])]
    R = spec.matrix
    if spec.xi == 0.0:
        vals = [spec.R_aa, spec.R_bb]
        vecs = [np.array([1.0, 0.0], complex), np.array([0.0, 1.0], complex)]
        order = sorted(range(2), key=lambda i: (-vals[i], i))
        return [math.sqrt(vals[i]) * vecs[i] for i in order]
    vals, vecs = np.linalg.eigh(R)
    rows = []
    for i in (1, 0):
        lam = max(vals[i], 0.0)
        if lam <= 1e-15 * vals[1]:
            continue
        rows.append(math.sqrt(lam) * _phase_fix(vecs[:, i]))
    return rows


def loss_matrix(array: DetectorArray, atol=1e-12):
    """I - sum R, checked to be positive semidefinite."""
    rest = np.eye(2) - array.total()
    vals = np.linalg.eigvalsh(rest)
    if vals[0] < -atol:
        lam = 1.0 - vals[0]
        raise PhysicalityError(
            f"summed detector matrix has eigenvalue {lam:.6g} > 1; only quadrature engines apply",
            eigenvalue=lam,
        )
    return rest


def dilation(array: DetectorArray) -> Dilation:
    rest = loss_matrix(array)
    rows, owner = [], []
    for m, spec in enumerate(array):
        for v in detector_rows(spec):
            rows.append(v)
            owner.append(m)
    vals, vecs = np.linalg.eigh(rest)
    root = (vecs * np.sqrt(np.clip(vals, 0.0, None))) @ vecs.conj().T
    loss = np.array([root[:, 0], root[:, 1]])
    return Dilation(np.array(rows), np.array(owner), loss)
