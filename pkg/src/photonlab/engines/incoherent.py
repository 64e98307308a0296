"""Incoherent combination: counts of two sources that do not interfere add."""

from __future__ import annotations

import numpy as np
from scipy.signal import fftconvolve

from .._logmath import NEG_INF
from ..errors import ConfigError
from .distribution import JointDistribution, same_grid

# FFT round-off is relative to the largest value; anything below this is noise
FFT_FLOOR = 1e-15


def incoherent_joint(dist_a: JointDistribution, dist_b: JointDistribution, extent="same") -> JointDistribution:
    """P(n) = sum_k P_a(k) P_b(n - k) over all axes.

    ``extent="same"`` keeps the input grid and adds the mass pushed beyond it
    to the tail bound; ``extent="full"`` returns the whole convolution.
    """
    same_grid(dist_a, dist_b)
    if dist_a.fixed:
        raise ConfigError("incoherent combination needs full grids; pinned counts cannot be split between sources")
    if extent not in ("same", "full"):
        raise ConfigError("extent must be 'same' or 'full'")
    pa, pb = dist_a.probs, dist_b.probs
    conv = fftconvolve(pa, pb) if pa.size > 1 else pa * pb
    conv = np.where(conv > FFT_FLOOR * float(conv.max(initial=0.0)), conv, 0.0)
    tail = dist_a.tail_bound + dist_b.tail_bound
    if extent == "same":
        kept = conv[tuple(slice(0, s) for s in pa.shape)]
        # mass beyond the grid from the convolution itself (exact, no round-off from FFT)
        tail += max(0.0, float(pa.sum() * pb.sum() - kept.sum()))
        conv = kept
    with np.errstate(divide="ignore"):
        logp = np.where(conv > 0, np.log(np.where(conv > 0, conv, 1.0)), NEG_INF)
    meta = {
        "tail_bound": tail,
        "tail_mass": tail,
        "components": [dist_a.engine, dist_b.engine],
    }
    return JointDistribution(logp, dist_a.axes, "incoherent", {}, meta)
