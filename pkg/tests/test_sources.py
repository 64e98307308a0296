import math
from fractions import Fraction

import numpy as np
import pytest
from scipy import stats

from photonlab.errors import ConfigError, UnsupportedRepresentation
from photonlab.sources import (
    Binomial,
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
    common_source_amplitudes,
    moments,
    pmf,
    radial_density,
)

# mpmath at 50 digits: exp(-500) 500^500 / 500!
POISSON_500_AT_500 = 0.017838267869511779009


def test_vacuum_and_number_state_pmf():
    assert pmf(Poissonian(0), 0) == 1.0
    assert pmf(NumberState(200), 200) == 1.0
    assert pmf(NumberState(200), 199) == 0.0


def test_poisson_pmf_matches_arbitrary_precision():
    assert pmf(Poissonian(500), 500) == pytest.approx(POISSON_500_AT_500, rel=1e-12)


def test_radial_only_source_has_no_pmf():
    src = CustomRadial(RadialDensity("tabulated", nodes=np.array([1.0, 4.0]), weights=np.array([0.5, 0.5])))
    with pytest.raises(UnsupportedRepresentation):
        pmf(src, 1)


def test_thermal_radial_density_closed_form():
    for r in (0.0, 3.0, 17.5):
        assert radial_density(Thermal(40.0), r) == pytest.approx(2.0 / 40.0 * math.exp(-r * r / 40.0), rel=1e-12)


def test_q_one_super_poissonian_is_thermal():
    for r in (0.5, 10.0, 30.0):
        assert radial_density(SuperPoissonian(1.0, 500), r) == pytest.approx(radial_density(Thermal(500), r), rel=1e-14)


def test_poisson_limit_is_a_delta_node():
    node = radial_density(SuperPoissonian.limit(500), 1.0)
    assert node.kind == "delta" and node.u0 == 500
    assert radial_density(Poissonian(500), 1.0).u0 == 500


def test_number_states_have_no_radial_density():
    with pytest.raises(UnsupportedRepresentation):
        radial_density(NumberState(3), 1.0)


def test_radial_densities_are_normalised():
    for src in (Thermal(50.0), SuperPoissonian(0.3, 80.0)):
        assert src.radial().normalisation() == pytest.approx(1.0, abs=1e-9)


@pytest.mark.parametrize(
    "source, expected",
    [
        (Poissonian(500), (500, 500)),
        (SuperPoissonian(1.0, 500), (500, 250500)),
        (TwoNumberMixture(100, 50), (100, 2500)),
        (NumberState(7), (7, 0)),
        (Binomial("1/4", 5), (5, 3.75)),
    ],
)
def test_declared_moments(source, expected):
    mean, var = moments(source)
    assert mean == pytest.approx(expected[0], rel=1e-12)
    assert var == pytest.approx(expected[1], rel=1e-9)


@pytest.mark.parametrize(
    "source",
    [Poissonian(1000), Poissonian(3.5), Thermal(20), SuperPoissonian(0.1, 300), Binomial("1/3", 100), TwoNumberMixture(40, 10)],
)
def test_diagonal_families_normalised_and_consistent(source):
    d = source.number_distribution()
    assert abs(d.total() - 1.0) <= 1e-12
    mean, var = source.moments()
    assert d.mean == pytest.approx(mean, rel=1e-9)
    assert d.variance == pytest.approx(var, rel=1e-9)


def test_binomial_q_one_is_number_state():
    a, b = Binomial(1, 30).number_distribution(), NumberState(30).number_distribution()
    assert a.offset == b.offset and np.array_equal(a.probs, b.probs)


def test_binomial_approaches_poisson():
    n = np.arange(80)
    d = Binomial(Fraction(1, 1000), 20).number_distribution()
    assert np.max(np.abs(d.pmf(n) - stats.poisson.pmf(n, 20))) < 1e-2


def test_binomial_requires_integer_cap():
    with pytest.raises(ConfigError):
        Binomial("2/3", 5)


def test_invalid_parameters():
    with pytest.raises(ConfigError):
        SuperPoissonian(0.0, 10)
    with pytest.raises(ConfigError):
        TwoNumberMixture(10, 11)
    with pytest.raises(ConfigError):
        CommonNumber(3, 0.6, 0.6)
    with pytest.raises(ConfigError):
        CommonNumber(3, 0.6, 0.8, delta=math.pi)


def test_truncated_distribution_validation():
    with pytest.raises(ConfigError):
        NumberDistribution.from_probs([0.5, 0.4])
    with pytest.raises(ConfigError):
        NumberDistribution.from_probs([0.5, 0.5], declared_mean=0.6)


def test_common_amplitudes_single_photon():
    amps = dict(common_source_amplitudes(CommonNumber(1, 1 / math.sqrt(2), 1 / math.sqrt(2))))
    assert amps[0] == pytest.approx(1 / math.sqrt(2))
    assert amps[1] == pytest.approx(1 / math.sqrt(2))


def test_common_amplitudes_uncoupled():
    assert common_source_amplitudes(CommonNumber(2, 1.0, 0.0)) == [(2, 1.0)]


def test_common_amplitudes_binomial_weights():
    c = math.sqrt(0.5)
    amps = dict(common_source_amplitudes(CommonNumber(3, c, c, delta=0.4)))
    for k in range(4):
        assert abs(amps[k]) ** 2 == pytest.approx(math.comb(3, k) / 8, abs=1e-15)
    assert sum(abs(v) ** 2 for v in amps.values()) == pytest.approx(1.0, abs=1e-12)
    assert np.angle(amps[1]) == pytest.approx(2 * 0.4)


def test_pair_means():
    assert Independent(Poissonian(3), Thermal(4)).means() == (3, 4)
    assert CommonNumber(10, 0.6, 0.8).means() == pytest.approx((3.6, 6.4))
    with pytest.raises(UnsupportedRepresentation):
        ReferencedPhase(NumberState(2), Poissonian(3))


def test_custom_diagonal_passthrough():
    d = NumberDistribution.from_mapping({2: 0.25, 5: 0.75})
    assert CustomDiagonal(d).moments() == pytest.approx((4.25, 1.6875))
