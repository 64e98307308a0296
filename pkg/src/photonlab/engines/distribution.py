"""Joint count distributions on dense outcome grids."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .._logmath import NEG_INF, lse
from ..errors import ConfigError, ShapeMismatch


@dataclass(frozen=True, eq=False)
class JointDistribution:
    """log P over the grid ``prod_k [0, n_max_k]`` of the free detectors.

    ``axes`` lists the detector indices of the array axes. ``fixed`` maps
    detector indices that were pinned to a count (a slice); a slice is not
    normalised, its values are joint probabilities with the pinned counts.
    ``meta`` carries engine bookkeeping, always including ``tail_bound``.
    """

    log_probs: np.ndarray
    axes: tuple
    engine: str
    fixed: dict = field(default_factory=dict)
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        lp = np.asarray(self.log_probs, dtype=float)
        if lp.ndim != len(self.axes):
            raise ShapeMismatch(f"{lp.ndim}-d array for {len(self.axes)} axes")
        object.__setattr__(self, "log_probs", lp)
        object.__setattr__(self, "axes", tuple(int(a) for a in self.axes))
        object.__setattr__(self, "fixed", {int(k): int(v) for k, v in self.fixed.items()})
        meta = dict(self.meta)
        meta.setdefault("tail_bound", 0.0)
        object.__setattr__(self, "meta", meta)

    @property
    def shape(self):
        return self.log_probs.shape

    @property
    def ndim(self):
        return self.log_probs.ndim

    @property
    def probs(self):
        return np.exp(self.log_probs)

    @property
    def tail_bound(self):
        return float(self.meta["tail_bound"])

    def counts(self, axis=0):
        return np.arange(self.shape[axis])

    def total(self):
        return float(np.exp(lse(self.log_probs)))

    def log_total(self):
        return float(lse(self.log_probs))

    def axis_of(self, detector):
        try:
            return self.axes.index(int(detector))
        except ValueError:
            raise ConfigError(f"detector {detector} is not a free axis of this distribution") from None

    def log_prob(self, outcome):
        """log P at a full outcome dict {detector: count} or a tuple over the free axes."""
        if isinstance(outcome, dict):
            for d, c in self.fixed.items():
                if outcome.get(d, c) != c:
                    return NEG_INF
            idx = tuple(outcome[d] for d in self.axes)
        else:
            idx = tuple(outcome)
        if any(i < 0 or i >= s for i, s in zip(idx, self.shape)):
            return NEG_INF
        return float(self.log_probs[idx])

    def with_meta(self, **kw):
        meta = dict(self.meta)
        meta.update(kw)
        return JointDistribution(self.log_probs, self.axes, self.engine, self.fixed, meta)

    def records(self, floor=NEG_INF):
        """Yield (counts tuple, probability) for points with log P above ``floor``."""
        idx = np.argwhere(self.log_probs > floor)
        vals = np.exp(self.log_probs[tuple(idx.T)])
        return idx, vals


def same_grid(a: JointDistribution, b: JointDistribution):
    if a.axes != b.axes or a.fixed != b.fixed or a.shape != b.shape:
        raise ShapeMismatch(f"grids differ: {a.axes}{a.shape} vs {b.axes}{b.shape}")


# -- grid rule -----------------------------------------------------------------


def grid_extent(peak_mean):
    """Upper count kept for an axis whose largest mean count is ``peak_mean``."""
    peak_mean = max(float(peak_mean), 0.0)
    return int(math.ceil(peak_mean + 10.0 * math.sqrt(peak_mean) + 10.0))


def resolve_axes(M, fixed=None, grid=None, peaks=None, clamp=None):
    """Free detector indices and their n_max.

    ``grid`` may be ``None`` (use the rule on ``peaks``), an int for every axis
    or a per-detector sequence. ``clamp`` caps every axis (e.g. total photons).
    """
    fixed = {int(k): int(v) for k, v in (fixed or {}).items()}
    for d, c in fixed.items():
        if not 0 <= d < M:
            raise ConfigError(f"fixed detector index {d} out of range for {M} detectors")
        if c < 0:
            raise ConfigError("fixed counts must be non-negative")
    free = [m for m in range(M) if m not in fixed]
    if grid is None:
        if peaks is None:
            raise ConfigError("grid bounds needed")
        nmax = [grid_extent(peaks[m]) for m in range(M)]
    elif np.isscalar(grid):
        nmax = [int(grid)] * M
    else:
        grid = list(grid)
        if len(grid) != M:
            raise ConfigError(f"grid needs {M} bounds, got {len(grid)}")
        nmax = [int(g) for g in grid]
    if clamp is not None:
        nmax = [min(n, int(clamp)) for n in nmax]
    if any(n < 0 for n in nmax):
        raise ConfigError("grid bounds must be non-negative")
    return free, [nmax[m] for m in free], fixed
