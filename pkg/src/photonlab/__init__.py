"""Photon-count statistics for the interference of two U(1)-invariant sources."""

__version__ = "0.1.0"

from .detectors import DetectorArray, DetectorSpec, dilation, expected_counts, mean_count, trajectory  # noqa: E402
from .engines import compute_joint  # noqa: E402
from .sources import (  # noqa: E402
    Binomial,
    CommonDiagonal,
    CommonNumber,
    Independent,
    NumberState,
    Poissonian,
    ReferencedPhase,
    SuperPoissonian,
    Thermal,
    TwoNumberMixture,
)

__all__ = [
    "Binomial",
    "CommonDiagonal",
    "CommonNumber",
    "DetectorArray",
    "DetectorSpec",
    "Independent",
    "NumberState",
    "Poissonian",
    "ReferencedPhase",
    "SuperPoissonian",
    "Thermal",
    "TwoNumberMixture",
    "compute_joint",
    "dilation",
    "expected_counts",
    "mean_count",
    "trajectory",
]
