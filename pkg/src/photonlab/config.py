"""Run configuration (one JSON document) and the figure presets."""

from __future__ import annotations

import json
import math
from fractions import Fraction
from pathlib import Path
from typing import Annotated, Literal, Union

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, ValidationError, field_validator

from .detectors import DetectorArray, DetectorSpec
from .errors import ConfigError
from .sources import (
    Binomial,
    CommonDiagonal,
    CommonNumber,
    CustomDiagonal,
    CustomRadial,
    Independent,
    NumberDistribution,
    NumberState,
    Poissonian,
    RadialDensity,
    ReferencedPhase,
    SuperPoissonian,
    Thermal,
    TwoNumberMixture,
    as_fraction,
)


class _Strict(BaseModel):
    model_config = ConfigDict(extra="forbid", frozen=True)


Rational = Union[str, float, int]


class NumberSpec(_Strict):
    family: Literal["number"]
    n: int = Field(ge=0)

    def build(self):
        return NumberState(self.n)


class BinomialSpec(_Strict):
    family: Literal["binomial"]
    q: Rational
    mean: float = Field(ge=0)

    def build(self):
        return Binomial(as_fraction(self.q), self.mean)


class PoissonianSpec(_Strict):
    family: Literal["poissonian"]
    mean: float = Field(ge=0)

    def build(self):
        return Poissonian(self.mean)


class SuperPoissonianSpec(_Strict):
    family: Literal["super_poissonian"]
    Q: float = Field(ge=0)
    mean: float = Field(ge=0)

    def build(self):
        if self.Q == 0:
            return SuperPoissonian.limit(self.mean)
        return SuperPoissonian(self.Q, self.mean)


class ThermalSpec(_Strict):
    family: Literal["thermal"]
    mean: float = Field(ge=0)

    def build(self):
        return Thermal(self.mean)


class MixtureSpec(_Strict):
    family: Literal["two_number_mixture"]
    mean: int = Field(ge=0)
    spread: int = Field(ge=0)

    def build(self):
        return TwoNumberMixture(self.mean, self.spread)


class DiagonalSpec(_Strict):
    family: Literal["custom_diagonal"]
    offset: int = Field(default=0, ge=0)
    probabilities: list[float]

    def distribution(self):
        p = np.asarray(self.probabilities, dtype=float)
        if p.size == 0 or np.any(p < 0) or abs(p.sum() - 1.0) > 1e-9:
            raise ConfigError("custom probabilities must be non-negative and sum to one")
        with np.errstate(divide="ignore"):
            return NumberDistribution(self.offset, np.log(p / p.sum()))

    def build(self):
        return CustomDiagonal(self.distribution())


class RadialSpec(_Strict):
    family: Literal["custom_radial"]
    intensities: list[float]
    weights: list[float]

    def build(self):
        dens = RadialDensity("tabulated", nodes=np.asarray(self.intensities), weights=np.asarray(self.weights))
        return CustomRadial(dens)


SourceSpec = Annotated[
    Union[
        NumberSpec,
        BinomialSpec,
        PoissonianSpec,
        SuperPoissonianSpec,
        ThermalSpec,
        MixtureSpec,
        DiagonalSpec,
        RadialSpec,
    ],
    Field(discriminator="family"),
]


class IndependentPair(_Strict):
    kind: Literal["independent"]
    a: SourceSpec
    b: SourceSpec

    def build(self):
        return Independent(self.a.build(), self.b.build())


class ReferencedPair(_Strict):
    kind: Literal["referenced"]
    a: SourceSpec
    b: SourceSpec
    delta: float = 0.0

    def build(self):
        return ReferencedPhase(self.a.build(), self.b.build(), self.delta)


class CommonPair(_Strict):
    """A common source split into modes a and b; ``source`` must have a number distribution."""

    kind: Literal["common"]
    source: SourceSpec
    c: float
    s: float
    delta: float = 0.0

    def build(self):
        src = self.source.build()
        if isinstance(src, NumberState):
            return CommonNumber(src.n, self.c, self.s, self.delta)
        return CommonDiagonal(src.number_distribution(), self.c, self.s, self.delta)


PairSpec = Annotated[Union[IndependentPair, ReferencedPair, CommonPair], Field(discriminator="kind")]


class DetectorConfig(_Strict):
    R_aa: float
    R_bb: float
    xi: float = 1.0
    theta: float = 0.0  # radians

    def build(self):
        return DetectorSpec(self.R_aa, self.R_bb, self.xi, self.theta)


class ScalingConfig(_Strict):
    q: Rational


class RunConfig(_Strict):
    sources: PairSpec
    detectors: list[DetectorConfig] = Field(min_length=1, max_length=4)
    engine: Literal["meanfield", "phase", "radial", "fock", "auto"] = "auto"
    tolerance: float = Field(default=1e-10, gt=0)
    grid: Union[None, int, list[int]] = None
    delta: float | None = None  # mean-field phase
    axes: list[str] | None = None
    fix: dict[str, int] = Field(default_factory=dict)
    seed: int | None = Field(default=None, ge=0, lt=2**64)
    samples: int = Field(default=1000, ge=0)
    trajectory_points: int = Field(default=256, ge=4)
    allow_expensive: bool = False
    scaling: ScalingConfig | None = None
    labels: dict[str, str] = Field(default_factory=dict)

    @field_validator("axes")
    @classmethod
    def _names(cls, v):
        if v is not None:
            for name in v:
                parse_detector(name)
        return v

    def array(self) -> DetectorArray:
        return DetectorArray(tuple(d.build() for d in self.detectors))

    def source_pair(self):
        return self.sources.build()


def parse_detector(name: str) -> int:
    """'n2' -> detector index 1."""
    name = str(name).strip()
    if not (name.startswith("n") and name[1:].isdigit() and int(name[1:]) >= 1):
        raise ConfigError(f"detector names look like n1, n2, ...; got {name!r}")
    return int(name[1:]) - 1


def load_config(path) -> RunConfig:
    try:
        raw = json.loads(Path(path).read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from None
    return validate_config(raw)


def validate_config(raw) -> RunConfig:
    try:
        cfg = RunConfig.model_validate(raw)
    except ValidationError as exc:
        raise ConfigError(f"invalid config:\n{exc}") from None
    # re-check the physical invariants of the referenced types
    cfg.array()
    cfg.source_pair()
    return cfg


# -- presets -------------------------------------------------------------------

PRESET_DETECTORS = [
    {"R_aa": 0.3, "R_bb": 0.2, "xi": 1.0, "theta": 0.0},
    {"R_aa": 0.2, "R_bb": 0.3, "xi": 1.0, "theta": 0.7 * math.pi},
    {"R_aa": 0.2, "R_bb": 0.3, "xi": 1.0, "theta": -0.5 * math.pi},
]

FIG6_Q = ("1", "1/2", "1/5", "1/20")
FIG7_Q = (0.01, 0.1, 0.5, 1.0)


def _poisson_pair(mean):
    return {"kind": "independent", "a": {"family": "poissonian", "mean": mean}, "b": {"family": "poissonian", "mean": mean}}


def figure_presets(fig: int) -> RunConfig:
    """Configuration of figure ``fig`` (1..7)."""
    two, three = PRESET_DETECTORS[:2], PRESET_DETECTORS
    base = {"sources": _poisson_pair(500)}
    table = {
        1: {**base, "detectors": two, "axes": ["n1", "n2"], "labels": {"figure": "joint P(n1, n2)"}},
        2: {**base, "detectors": two, "axes": ["n1"], "labels": {"figure": "marginal P(n1)"}},
        3: {**base, "detectors": two, "fix": {"n1": 106}, "labels": {"figure": "conditional P(n2 | n1 = 106)"}},
        4: {
            **base,
            "detectors": three,
            "fix": {"n1": 106},
            "labels": {"figure": "conditionals P(n3 | n1 = 106, n2 = 174 and 495)", "n2_values": "174,495"},
        },
        5: {
            **base,
            "detectors": three,
            "allow_expensive": False,
            "labels": {"figure": "point cloud P(n1, n2, n3) >= P_min", "p_min_rule": "0.01 / nbar^2"},
        },
        6: {
            "sources": {
                "kind": "independent",
                "a": {"family": "number", "n": 200},
                "b": {"family": "number", "n": 200},
            },
            "detectors": two,
            "fix": {"n1": 42},
            "labels": {
                "figure": "conditional P(n2 | n1 = 42), binomial sources at mean 200",
                "q_values": ",".join(FIG6_Q),
                "q_values_origin": "preset choice (not stated as data)",
                "limit": "poissonian",
            },
        },
        7: {
            "sources": {
                "kind": "independent",
                "a": {"family": "super_poissonian", "Q": 1.0, "mean": 500},
                "b": {"family": "super_poissonian", "Q": 1.0, "mean": 500},
            },
            "detectors": two,
            "fix": {"n1": 106},
            "labels": {
                "figure": "conditional P(n2 | n1 = 106), super-Poissonian sources at mean 500",
                "Q_values": ",".join(str(q) for q in FIG7_Q),
                "Q_values_origin": "preset choice (not stated as data)",
            },
        },
    }
    if fig not in table:
        raise ConfigError(f"figures are numbered 1..7, got {fig}")
    return validate_config(table[fig])


def fraction_label(q) -> str:
    f = Fraction(str(q))
    return str(f.numerator) if f.denominator == 1 else f"{f.numerator}/{f.denominator}"
