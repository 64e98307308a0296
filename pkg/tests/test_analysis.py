import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy import stats

from photonlab.analysis import (
    MeanFieldSampler,
    conditional,
    estimate_phase,
    find_modes,
    marginal,
    p_min_rule,
    peak_manifold,
    predict_counts,
    sample_outcomes,
    shot_noise,
    trajectory_distance,
)
from photonlab.detectors import DetectorSpec, mean_count, trajectory
from photonlab.engines import fock_joint, meanfield_joint, phase_average_joint
from photonlab.errors import ConfigError, MultimodalSlice, NoPhaseSolution, ZeroProbabilityCondition
from photonlab.sources import Independent, NumberState, Poissonian


@pytest.fixture(scope="module")
def small_pair_dist():
    from conftest import PRESET
    from photonlab.detectors import DetectorArray

    arr = DetectorArray(tuple(PRESET[:2]))
    return arr, phase_average_joint(arr, Independent(Poissonian(60), Poissonian(60)))


def test_marginal_and_conditional_normalise(small_pair_dist):
    _, d = small_pair_dist
    m = marginal(d, [0])
    assert m.axes == (0,)
    assert np.allclose(m.probs, d.probs.sum(axis=1), atol=1e-15)
    c = conditional(d, {0: 12})
    assert c.total() == pytest.approx(1.0, abs=1e-12)
    assert c.fixed == {0: 12}


def test_conditional_on_impossible_outcome(two):
    d = fock_joint(two, Independent(NumberState(2), NumberState(1)), fixed={0: 4})
    with pytest.raises(ZeroProbabilityCondition):
        conditional(d)


def test_phase_estimate_preset_values(three):
    est = estimate_phase(three[0], (150, 100), 106)
    assert abs(est.delta_plus - 0.7 * math.pi) < 1e-3
    assert abs(est.delta_minus + 0.7 * math.pi) < 1e-3
    plus, minus = predict_counts(three, (500, 500), est)
    assert plus[1:] == pytest.approx([174.3, 448.2], abs=0.1)
    assert minus[1:] == pytest.approx([494.9, 51.8], abs=0.1)


def test_phase_estimate_out_of_range(three):
    with pytest.raises(NoPhaseSolution):
        estimate_phase(three[0], (150, 100), 600)
    assert estimate_phase(three[0], (150, 100), 250 + 2 * math.sqrt(15000)).degenerate


@given(
    st.floats(0.05, 1.0),
    st.floats(-math.pi, math.pi),
    st.floats(1.0, 500.0),
    st.floats(1.0, 500.0),
    st.floats(-math.pi + 1e-6, math.pi - 1e-6),
)
def test_phase_round_trip(xi, theta, na, nb, delta):
    spec = DetectorSpec(0.3, 0.3, xi, theta)
    n = float(mean_count(spec, (na, nb), delta))
    est = estimate_phase(spec, (na, nb), n)
    for phase in est.phases:
        assert float(mean_count(spec, (na, nb), phase)) == pytest.approx(n, abs=1e-6 * max(n, 1))
    assert min(abs(math.remainder(p - delta, 2 * math.pi)) for p in est.phases) < 1e-4 or est.degenerate or abs(
        math.sin(delta + theta)
    ) < 1e-3


def test_find_modes_two_gaussians():
    n = np.arange(300)
    p = 0.5 * stats.norm.pdf(n, 80, 10) + 0.5 * stats.norm.pdf(n, 200, 14)
    modes = find_modes(p)
    assert [m.index for m in modes] == [80, 200]
    assert sum(m.weight for m in modes) == pytest.approx(1.0, abs=1e-9)
    assert modes[0].weight == pytest.approx(0.5, abs=1e-3)


def test_find_modes_merges_close_bumps_and_plateaus():
    p = np.array([0, 1, 3, 3, 3, 1, 0], dtype=float)
    assert [m.index for m in find_modes(p)] == [3]
    n = np.arange(400)
    shoulder = stats.norm.pdf(n, 150, 20) + 0.2 * stats.norm.pdf(n, 215, 8)
    assert len(find_modes(shoulder)) == 2
    assert len(find_modes(shoulder, min_depth=0.5)) == 1
    with pytest.raises(ConfigError):
        find_modes(np.zeros((2, 2)))


def test_shot_noise_poisson_gamma_one():
    n = np.arange(2000)
    rep = shot_noise(stats.poisson.pmf(n, 400))
    assert rep.gamma == pytest.approx(1.0, abs=1e-6)
    two = stats.poisson.pmf(n, 100) + stats.poisson.pmf(n, 600)
    with pytest.raises(MultimodalSlice):
        shot_noise(two)
    assert shot_noise(two, peak=590).mode == 599 or shot_noise(two, peak=590).mode == 600


def test_shot_noise_prediction_number_states(two):
    d = fock_joint(two, Independent(NumberState(40), NumberState(40)), fixed={0: 8})
    rep = shot_noise(conditional(d), peak=35, mean_photons=40)
    assert rep.gamma < 1
    assert rep.predicted_width == pytest.approx((1 - math.sqrt(rep.mean / 40)) * math.sqrt(rep.mean))


def test_trajectory_distance_zero_on_curve(three):
    traj = trajectory(three, (500, 500), 64)
    delta = np.linspace(-3, 3, 7)
    on = np.stack([mean_count(s, m, delta) for s, m in zip(three, traj.means)], axis=1)
    assert np.all(trajectory_distance(on, traj) < 1e-6)
    off = on.copy()
    off[:, 0] += 300
    assert np.all(trajectory_distance(off, traj) > 1)


def test_p_min_rule_preset(three):
    assert p_min_rule(trajectory(three, (500, 500))) == pytest.approx(1.6e-7, rel=1e-12)


def test_peak_manifold_coverage_monotone(small_pair_dist):
    arr, d = small_pair_dist
    traj = trajectory(arr, (60, 60), 256)
    covs = [peak_manifold(d, traj, p_min=p).coverage for p in (1e-3, 1e-4, 1e-5, 1e-6)]
    assert all(a <= b for a, b in zip(covs, covs[1:]))
    man = peak_manifold(d, traj)
    assert man.components() == 1
    assert man.tube_coverage > 0.9


def test_peak_manifold_rejects_other_arrays(small_pair_dist, three):
    _, d = small_pair_dist
    with pytest.raises(ConfigError):
        peak_manifold(d, trajectory(three, (60, 60)))


def test_sampling_reproducible_and_faithful(two):
    d = meanfield_joint(two, (50, 50), 0.2)
    a = sample_outcomes(d, 20000, seed=7)
    b = sample_outcomes(d, 20000, seed=7)
    assert np.array_equal(a, b)
    lam = mean_count(two[0], (15, 10), 0.2)
    assert a[:, 0].mean() == pytest.approx(lam, abs=4 * math.sqrt(lam / 20000))
    sliced = sample_outcomes(meanfield_joint(two, (50, 50), 0.2, grid=60, fixed={1: 3}), 10, seed=1)
    assert np.all(sliced[:, 1] == 3)


def test_meanfield_sampler(two):
    s = MeanFieldSampler(two, (500, 500))
    x = sample_outcomes(s, 5000, seed=3)
    assert x.shape == (5000, 2)
    assert x[:, 0].mean() == pytest.approx(250, abs=5)
    fixed = sample_outcomes(MeanFieldSampler(two, (500, 500), delta=0.0), 5000, seed=3)
    assert fixed[:, 0].mean() == pytest.approx(float(mean_count(two[0], (150, 100), 0.0)), abs=2)
