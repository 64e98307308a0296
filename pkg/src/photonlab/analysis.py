"""Marginals, conditionals, phase inversion, peak manifolds, widths and sampling."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy import ndimage

from ._logmath import NEG_INF, lse
from .detectors import DetectorArray, DetectorSpec, MeanFieldTrajectory, expected_counts, mean_count
from .engines import compute_joint
from .engines.distribution import JointDistribution
from .errors import ConfigError, MultimodalSlice, NoPhaseSolution, ZeroProbabilityCondition

CONDITION_FLOOR = 1e-300
PHASE_CLAMP = 1e-12


def _wrap(x):
    """Map angles into [-pi, pi)."""
    return (np.asarray(x, dtype=float) + math.pi) % (2.0 * math.pi) - math.pi


# -- reductions ----------------------------------------------------------------


def marginal(dist: JointDistribution, keep) -> JointDistribution:
    """Sum out every free axis whose detector is not in ``keep``."""
    keep = [int(k) for k in np.atleast_1d(keep)]
    for k in keep:
        dist.axis_of(k)
    drop = tuple(i for i, d in enumerate(dist.axes) if d not in keep)
    logp = lse(dist.log_probs, axis=drop) if drop else dist.log_probs
    axes = [d for d in dist.axes if d in keep]
    # keep the caller's axis order
    order = [axes.index(k) for k in keep]
    logp = np.transpose(np.asarray(logp), order) if len(order) > 1 else np.asarray(logp)
    return JointDistribution(logp, tuple(keep), dist.engine, dist.fixed, dist.meta)


def conditional(dist: JointDistribution, fixed=None) -> JointDistribution:
    """Slice at the ``fixed`` counts and renormalise. ``fixed=None`` just normalises a slice."""
    fixed = {int(k): int(v) for k, v in (fixed or {}).items()}
    idx = [slice(None)] * dist.ndim
    for d, c in fixed.items():
        ax = dist.axis_of(d)
        if not 0 <= c < dist.shape[ax]:
            raise ZeroProbabilityCondition(f"count {c} of detector {d} lies outside the grid")
        idx[dist.axes.index(d)] = c
    logp = dist.log_probs[tuple(idx)]
    norm = lse(logp)
    if not norm > math.log(CONDITION_FLOOR):
        raise ZeroProbabilityCondition(f"P{fixed or dict(dist.fixed)} is below {CONDITION_FLOOR:g}")
    axes = tuple(d for d in dist.axes if d not in fixed)
    meta = {**dist.meta, "log_condition_probability": float(norm), "conditional": True}
    return JointDistribution(logp - norm, axes, dist.engine, {**dist.fixed, **fixed}, meta)


def slice_probs(dist: JointDistribution):
    """Normalised probabilities of a one-dimensional (conditional) distribution."""
    if dist.ndim != 1:
        raise ConfigError(f"expected a one-dimensional slice, got {dist.ndim} axes")
    lp = dist.log_probs - lse(dist.log_probs)
    return np.exp(lp)


# -- phase inversion -------------------------------------------------------------


@dataclass(frozen=True)
class PhaseEstimate:
    delta_plus: float
    delta_minus: float
    degenerate: bool

    @property
    def phases(self):
        return (self.delta_plus,) if self.degenerate else (self.delta_plus, self.delta_minus)


def estimate_phase(spec: DetectorSpec, means, n) -> PhaseEstimate:
    """Relative phases at which the mean-field count of ``spec`` equals ``n``.

    ``means`` are the detector's own (<n>_a, <n>_b).
    """
    na, nb = (float(x) for x in means)
    if spec.xi <= 0 or na <= 0 or nb <= 0:
        raise ConfigError("phase inversion needs visibility > 0 and both mean counts > 0")
    u = (float(n) - na - nb) / (2.0 * spec.xi * math.sqrt(na * nb))
    if abs(u) > 1.0 + PHASE_CLAMP:
        lo, hi = na + nb - 2 * spec.xi * math.sqrt(na * nb), na + nb + 2 * spec.xi * math.sqrt(na * nb)
        raise NoPhaseSolution(f"count {n} lies outside the mean-field range [{lo:.6g}, {hi:.6g}]")
    # counts within rounding of an extreme sit at the turning point
    u = math.copysign(1.0, u) if abs(u) > 1.0 - PHASE_CLAMP else u
    a = math.acos(u)
    plus, minus = float(_wrap(a - spec.theta)), float(_wrap(-a - spec.theta))
    return PhaseEstimate(plus, minus, abs(u) == 1.0)


def _source_means(means):
    if hasattr(means, "means"):
        return means.means()
    na, nb = means
    return float(na), float(nb)


def predict_counts(array: DetectorArray, means, estimate: PhaseEstimate):
    """Mean-field counts of every detector at delta_plus and at delta_minus.

    ``means`` are the source means (N_a, N_b) or a source pair.
    """
    counts = expected_counts(array, _source_means(means))
    plus = np.array([mean_count(s, m, estimate.delta_plus) for s, m in zip(array, counts)], dtype=float)
    minus = np.array([mean_count(s, m, estimate.delta_minus) for s, m in zip(array, counts)], dtype=float)
    return plus, minus


# -- modes -----------------------------------------------------------------------


@dataclass(frozen=True)
class Mode:
    index: int
    height: float
    weight: float
    lo: int  # basin bounds (inclusive)
    hi: int


def _plateau_maxima(p):
    """Centres of runs that are strictly higher than both neighbouring runs."""
    change = np.flatnonzero(np.diff(p) != 0) + 1
    starts = np.concatenate(([0], change))
    ends = np.concatenate((change, [len(p)])) - 1
    vals = p[starts]
    out = []
    for i, v in enumerate(vals):
        left = vals[i - 1] if i > 0 else -np.inf
        right = vals[i + 1] if i + 1 < len(vals) else -np.inf
        if v > left and v > right:
            out.append((starts[i] + ends[i]) // 2)
    return out


def find_modes(p, merge_distance=None, min_depth=0.0, floor=1e-8):
    """Modes of a one-dimensional distribution with watershed weights.

    Strict local maxima (plateaus merged) above ``floor`` times the highest
    value are kept; modes closer than ``merge_distance`` (default sqrt of the
    mode position) are merged into the higher one, as are neighbours whose
    separating valley is shallower than ``min_depth`` times the higher peak.
    """
    p = np.asarray(p, dtype=float)
    if p.ndim != 1 or p.size == 0:
        raise ConfigError("modes need a non-empty one-dimensional array")
    top = float(p.max())
    if not top > 0:
        return []
    peaks = [i for i in _plateau_maxima(p) if p[i] >= floor * top]

    def close(i, j):
        d = merge_distance if merge_distance is not None else math.sqrt(max(min(i, j), 1))
        return abs(i - j) < d

    def shallow(i, j):
        lo, hi = sorted((i, j))
        valley = float(p[lo : hi + 1].min())
        return min(p[i], p[j]) - valley < min_depth * max(p[i], p[j])

    changed = True
    while changed and len(peaks) > 1:
        changed = False
        for k in range(len(peaks) - 1):
            i, j = peaks[k], peaks[k + 1]
            if close(i, j) or shallow(i, j):
                peaks.pop(k + 1 if p[i] >= p[j] else k)
                changed = True
                break
    total = float(p.sum())
    bounds = [0]
    for i, j in zip(peaks, peaks[1:]):
        bounds.append(i + int(np.argmin(p[i : j + 1])) + 1)
    bounds.append(len(p))
    return [
        Mode(int(i), float(p[i]), float(p[lo:hi].sum() / total), int(lo), int(hi - 1))
        for i, lo, hi in zip(peaks, bounds, bounds[1:])
    ]


# -- shot noise ------------------------------------------------------------------


@dataclass(frozen=True)
class ShotNoiseReport:
    mode: int
    mean: float
    width: float
    gamma: float
    predicted_width: float | None = None
    basin: tuple = ()


def shot_noise(dist, peak=None, mean_photons=None, photon_std=0.0, **mode_kw) -> ShotNoiseReport:
    """Width of the peak nearest ``peak`` (inside its watershed basin).

    ``mean_photons`` (per source) and ``photon_std`` enable the estimate
    gamma sqrt(n) + (n / N) dN with gamma = 1 - sqrt(n / N).
    """
    p = slice_probs(dist) if isinstance(dist, JointDistribution) else np.asarray(dist, dtype=float)
    modes = find_modes(p, **mode_kw)
    if not modes:
        raise ZeroProbabilityCondition("slice carries no probability")
    if peak is None:
        if len(modes) > 1:
            raise MultimodalSlice(f"slice has {len(modes)} modes at {[m.index for m in modes]}; pass a peak")
        mode = modes[0]
    else:
        mode = min(modes, key=lambda m: abs(m.index - peak))
    n = np.arange(mode.lo, mode.hi + 1)
    w = p[mode.lo : mode.hi + 1]
    w = w / w.sum()
    mean = float(np.sum(n * w))
    width = float(math.sqrt(max(np.sum(w * (n - mean) ** 2), 0.0)))
    gamma = width / math.sqrt(mean) if mean > 0 else math.nan
    predicted = None
    if mean_photons:
        frac = mean / float(mean_photons)
        predicted = (1.0 - math.sqrt(min(frac, 1.0))) * math.sqrt(mean) + frac * float(photon_std)
    return ShotNoiseReport(mode.index, mean, width, gamma, predicted, (mode.lo, mode.hi))


# -- trajectory distance and peak manifold ----------------------------------------


GOLDEN = (math.sqrt(5.0) - 1.0) / 2.0


def _scaled_gap(points, traj: MeanFieldTrajectory, delta):
    """Squared normalised distance for every (point, phase) pair; shapes broadcast."""
    nbar = traj.at(delta)
    return np.sum((points - nbar) ** 2 / np.maximum(nbar, 1.0), axis=-1)


def trajectory_distance(points, traj: MeanFieldTrajectory, chunk=4096, iterations=40):
    """min over delta of sqrt(sum_m (n_m - nbar_m)^2 / nbar_m), nbar floored at one count.

    The coarse minimum on the trajectory's phase grid is refined by
    golden-section search inside the neighbouring grid cells.
    """
    points = np.atleast_2d(np.asarray(points, dtype=float))
    grid = traj.delta_grid
    h = 2.0 * math.pi / len(grid)
    out = np.empty(len(points))
    for s in range(0, len(points), chunk):
        pts = points[s : s + chunk]
        d2 = _scaled_gap(pts[:, None, :], traj, grid[None, :])
        best = grid[np.argmin(d2, axis=1)]
        a, b = best - h, best + h
        c, d = b - GOLDEN * (b - a), a + GOLDEN * (b - a)
        fc, fd = _scaled_gap(pts, traj, c), _scaled_gap(pts, traj, d)
        for _ in range(iterations):
            # minimum bracketed by [a, d] when f(c) < f(d), else by [c, b]
            left = fc < fd
            a = np.where(left, a, c)
            b = np.where(left, d, b)
            keep, fkeep = np.where(left, c, d), np.where(left, fc, fd)
            new = np.where(left, b - GOLDEN * (b - a), a + GOLDEN * (b - a))
            fnew = _scaled_gap(pts, traj, new)
            c, fc = np.where(left, new, keep), np.where(left, fnew, fkeep)
            d, fd = np.where(left, keep, new), np.where(left, fkeep, fnew)
        fine = np.minimum(fc, fd)
        out[s : s + chunk] = np.sqrt(np.minimum(fine, d2.min(axis=1)))
    return out


def p_min_rule(traj: MeanFieldTrajectory):
    """0.01 / nbar^2 with nbar the average of <n_m> over detectors."""
    nbar = float(np.mean(traj.means.sum(axis=1)))
    return 0.01 / nbar**2


@dataclass(frozen=True)
class PeakManifold:
    points: np.ndarray  # (K, M) full outcome vectors
    probs: np.ndarray
    p_min: float
    coverage: float
    max_distance: float
    distances: np.ndarray
    tube: float = 3.0
    tube_coverage: float = math.nan
    extra: dict = field(default_factory=dict)

    def components(self):
        """Number of face-and-edge connected clusters of the thresholded points."""
        if len(self.points) == 0:
            return 0
        lo = self.points.min(axis=0)
        box = np.zeros(tuple(self.points.max(axis=0) - lo + 1), dtype=bool)
        box[tuple((self.points - lo).T)] = True
        _, n = ndimage.label(box, structure=np.ones((3,) * box.ndim))
        return int(n)


def _full_points(dist: JointDistribution, idx, M):
    pts = np.zeros((len(idx), M), dtype=np.int64)
    for k, d in enumerate(dist.axes):
        pts[:, d] = idx[:, k]
    for d, c in dist.fixed.items():
        pts[:, d] = c
    return pts


def peak_manifold(
    dist: JointDistribution, traj: MeanFieldTrajectory, p_min=None, tube=3.0, tube_floor=1e-14
) -> PeakManifold:
    """Points with P >= p_min, their mass share and distance to the mean-field trajectory.

    ``tube_coverage`` is the share of mass within ``tube`` normalised units of
    the trajectory, counted over every point above ``tube_floor``.
    """
    M = len(traj.specs)
    if set(dist.axes) | set(dist.fixed) != set(range(M)):
        raise ConfigError("distribution and trajectory describe different detector arrays")
    p_min = p_min_rule(traj) if p_min is None else float(p_min)
    total = dist.total()
    idx, vals = dist.records(math.log(p_min) if p_min > 0 else NEG_INF)
    idx = idx[vals >= p_min] if p_min > 0 else idx
    vals = vals[vals >= p_min] if p_min > 0 else vals
    pts = _full_points(dist, idx, M)
    dists = trajectory_distance(pts, traj) if len(pts) else np.zeros(0)
    coverage = float(vals.sum() / total) if total > 0 else 0.0
    tidx, tvals = dist.records(math.log(tube_floor))
    tpts = _full_points(dist, tidx, M)
    tdist = trajectory_distance(tpts, traj) if len(tpts) else np.zeros(0)
    tube_cov = float(tvals[tdist <= tube].sum() / total) if total > 0 else 0.0
    return PeakManifold(
        pts, vals, p_min, min(coverage, 1.0), float(dists.max(initial=0.0)), dists, tube, min(tube_cov, 1.0)
    )


def peak_point_cloud(
    array: DetectorArray, sources, p_min=None, axis=0, engine="auto", tol=1e-10, traj=None, grid=None, progress=None
) -> PeakManifold:
    """Thresholded point set of the full joint distribution, built one slab (fixed count on ``axis``) at a time.

    Memory stays at one slab; the coverage is the retained mass over the
    summed slab masses.
    """
    from .detectors import trajectory as make_trajectory

    traj = make_trajectory(array, sources, 512) if traj is None else traj
    p_min = p_min_rule(traj) if p_min is None else float(p_min)
    first = compute_joint(array, sources, engine=engine, fixed={axis: 0}, tol=tol, grid=grid)
    n_top = _axis_extent(array, sources, axis, grid, first)
    pts, vals, mass = [], [], 0.0
    tails = [first.tail_bound]
    for n in range(n_top + 1):
        sl = first if n == 0 else compute_joint(array, sources, engine=engine, fixed={axis: n}, tol=tol, grid=grid)
        tails.append(sl.tail_bound)
        mass += sl.total()
        idx, v = sl.records(math.log(p_min))
        keep = v >= p_min
        pts.append(_full_points(sl, idx[keep], len(array)))
        vals.append(v[keep])
        if progress is not None:
            progress(n, n_top)
    pts = np.concatenate(pts) if pts else np.zeros((0, len(array)), dtype=np.int64)
    vals = np.concatenate(vals) if vals else np.zeros(0)
    dists = trajectory_distance(pts, traj) if len(pts) else np.zeros(0)
    return PeakManifold(
        pts,
        vals,
        p_min,
        float(min(vals.sum() / mass, 1.0)) if mass > 0 else 0.0,
        float(dists.max(initial=0.0)),
        dists,
        extra={"slab_axis": axis, "slab_mass": mass, "slabs": n_top + 1, "max_slab_tail_bound": max(tails)},
    )


def _axis_extent(array, sources, axis, grid, sample: JointDistribution):
    if grid is not None:
        return int(grid if np.isscalar(grid) else list(grid)[axis])
    from .engines.distribution import grid_extent
    from .detectors import max_mean_count

    counts = expected_counts(array, sources)
    return grid_extent(max_mean_count(array[axis], counts[axis]))


# -- sampling --------------------------------------------------------------------


@dataclass(frozen=True)
class MeanFieldSampler:
    """Generative mean-field model: phase uniform (or fixed), then independent Poisson counts."""

    array: DetectorArray
    means: tuple  # source means (N_a, N_b)
    delta: float | None = None


def _draw(logp, u):
    """Sequential inverse-CDF draws along the axes of ``logp``; ``u`` has one column per axis."""
    marg = lse(logp, axis=tuple(range(1, logp.ndim))) if logp.ndim > 1 else logp
    cdf = np.cumsum(np.exp(marg - lse(marg)))
    first = np.minimum(np.searchsorted(cdf, u[:, 0] * cdf[-1], side="right"), len(cdf) - 1)
    if logp.ndim == 1:
        return first[:, None]
    out = np.empty((len(u), logp.ndim), dtype=np.int64)
    out[:, 0] = first
    for v in np.unique(first):
        sel = first == v
        out[sel, 1:] = _draw(logp[v], u[sel, 1:])
    return out


def sample_outcomes(target, count, seed=None):
    """``count`` outcome vectors (full detector order) from a distribution or a MeanFieldSampler."""
    rng = np.random.Generator(np.random.PCG64(seed))
    count = int(count)
    if count < 0:
        raise ConfigError("sample count must be non-negative")
    if isinstance(target, MeanFieldSampler):
        counts = expected_counts(target.array, _source_means(target.means))
        if target.delta is None:
            delta = rng.uniform(-math.pi, math.pi, count)
        else:
            delta = np.full(count, float(target.delta))
        lam = np.stack([mean_count(s, m, delta) for s, m in zip(target.array, counts)], axis=1)
        return rng.poisson(lam).astype(np.int64)
    if not isinstance(target, JointDistribution):
        raise ConfigError("sample from a JointDistribution or a MeanFieldSampler")
    u = rng.random((count, target.ndim))
    idx = _draw(target.log_probs, u) if count else np.zeros((0, target.ndim), dtype=np.int64)
    M = max([*target.axes, *target.fixed]) + 1
    return _full_points(target, idx, M)
