"""One check per acceptance criterion; each prints a PASS/FAIL line with the measured values."""

import math

import numpy as np
import pytest
from scipy import stats

from conftest import PRESET
from photonlab.analysis import (
    conditional,
    estimate_phase,
    find_modes,
    peak_manifold,
    peak_point_cloud,
    predict_counts,
    shot_noise,
    slice_probs,
)
from photonlab.detectors import DetectorArray, DetectorSpec, trajectory
from photonlab.engines import (
    brute_force_oracle,
    fock_density,
    fock_joint,
    grid_extent,
    incoherent_joint,
    meanfield_joint,
    phase_average_joint,
    radial_phase_average_joint,
)
from photonlab.scaling import equivalence_check
from photonlab.sources import (
    Binomial,
    CommonNumber,
    Independent,
    NumberState,
    Poissonian,
    SuperPoissonian,
    Thermal,
    TwoNumberMixture,
)

POISSON_500 = Independent(Poissonian(500), Poissonian(500))
TWO = DetectorArray(tuple(PRESET[:2]))
THREE = DetectorArray(tuple(PRESET))


def _near(modes, target):
    return min(modes, key=lambda m: abs(m.index - target))


def test_criterion_01_meanfield_anchors(acceptance):
    est = estimate_phase(THREE[0], (150, 100), 106)
    plus, minus = predict_counts(THREE, (500, 500), est)
    phase_err = max(abs(est.delta_plus - 0.7 * math.pi), abs(est.delta_minus + 0.7 * math.pi))
    n2 = sorted([plus[1], minus[1]])
    n3 = sorted([plus[2], minus[2]])
    ok = phase_err < 1e-3 and abs(n2[0] - 174) <= 1 and abs(n2[1] - 495) <= 1 and abs(n3[0] - 52) <= 1 and abs(n3[1] - 448) <= 1
    detail = f"phase error {phase_err:.2e} rad, n2 {n2[0]:.2f}/{n2[1]:.2f}, n3 {n3[1]:.2f}/{n3[0]:.2f}"
    assert acceptance(1, ok, detail)


def test_criterion_02_conditional_bimodality(acceptance):
    p = slice_probs(conditional(phase_average_joint(TWO, POISSON_500, fixed={0: 106})))
    modes = find_modes(p)
    ok = len(modes) == 2
    parts = []
    for target in (174, 495):
        m = _near(modes, target)
        ok &= abs(m.index - target) <= math.sqrt(m.index) and 0.4 <= m.weight <= 0.6
        parts.append(f"{m.index} (w {m.weight:.3f})")
    assert acceptance(2, ok, f"{len(modes)} modes: {', '.join(parts)}")


def test_criterion_03_conditional_unimodality(acceptance):
    ok, parts = True, []
    for n2, target in ((174, 448), (495, 52)):
        p = slice_probs(conditional(phase_average_joint(THREE, POISSON_500, fixed={0: 106, 1: n2})))
        modes = find_modes(p)
        ok &= len(modes) == 1 and abs(modes[0].index - target) <= math.sqrt(modes[0].index)
        parts.append(f"n2={n2}: {len(modes)} mode(s) at {[m.index for m in modes]}")
    assert acceptance(3, ok, "; ".join(parts))


@pytest.mark.slow
def test_criterion_04_point_cloud(acceptance):
    man = peak_point_cloud(THREE, POISSON_500)
    ok = man.p_min == pytest.approx(1.6e-7, rel=1e-12) and man.max_distance <= 5.0
    detail = f"P_min {man.p_min:.3g}, {len(man.points)} points, max distance {man.max_distance:.3f}, coverage {man.coverage:.3f}"
    assert acceptance(4, ok, detail)


def test_criterion_05_sub_poissonian_anchors(acceptance):
    p = slice_probs(conditional(fock_joint(TWO, Independent(NumberState(200), NumberState(200)), fixed={0: 42})))
    modes = find_modes(p)
    lo, hi = _near(modes, 70), _near(modes, 198)
    rep = shot_noise(p, peak=198)
    ok = abs(lo.index - 70) <= math.sqrt(lo.index) and abs(hi.index - 198) <= math.sqrt(hi.index) and rep.gamma < 1
    assert acceptance(5, ok, f"modes {[m.index for m in modes]}, gamma at 198-peak {rep.gamma:.3f}")


def test_criterion_06_scaling_equivalence(acceptance):
    num = equivalence_check(TWO, Independent(NumberState(20), NumberState(20)), "1/2")
    poi = equivalence_check(TWO, Independent(Poissonian(20), Poissonian(20)), "1/2")
    ok = num.sup_norm < 1e-8 and poi.sup_norm < 1e-8
    assert acceptance(6, ok, f"binomial vs number {num.sup_norm:.2e}, poissonian {poi.sup_norm:.2e}")


def _random_array(rng):
    M = int(rng.integers(2, 4))
    specs = []
    for m in range(M):
        # traces summing below one keep the array physical
        raa, rbb = rng.uniform(0.02, 1.0 / (2 * M), size=2)
        xi = 1.0 if m == 0 else float(rng.uniform(0.0, 1.0))
        specs.append(DetectorSpec(float(raa), float(rbb), xi, float(rng.uniform(-math.pi, math.pi))))
    return DetectorArray(tuple(specs))


@pytest.mark.slow
def test_criterion_07_oracle_equivalence(acceptance):
    rng = np.random.Generator(np.random.PCG64(20240607))
    worst, cases = 0.0, 0
    for _ in range(20):
        arr = _random_array(rng)
        pairs = [Independent(NumberState(a), NumberState(b)) for a in range(7) for b in range(7 - a)]
        for n in range(1, 7):
            t = float(rng.uniform(0, math.pi / 2))
            pairs.append(CommonNumber(n, math.cos(t), math.sin(t), float(rng.uniform(-math.pi, math.pi))))
        for pair in pairs:
            rho, cutoff = fock_density(pair)
            d = fock_joint(arr, pair, grid=cutoff)
            for n in np.ndindex(d.shape):
                expect = brute_force_oracle(arr, rho, n, cutoff) if sum(n) <= cutoff else 0.0
                worst = max(worst, abs(d.probs[n] - expect))
            cases += 1
    assert acceptance(7, worst < 1e-10, f"{cases} input/array cases over 20 arrays, worst difference {worst:.2e}")


def test_criterion_08_conservation(acceptance):
    outputs = {
        "meanfield": meanfield_joint(TWO, (500, 500), 0.4),
        "phase": phase_average_joint(TWO, POISSON_500),
        "radial": radial_phase_average_joint(TWO, Independent(Thermal(40), SuperPoissonian(0.5, 60))),
        "fock": fock_joint(THREE, Independent(NumberState(30), NumberState(20))),
        "fock-binomial": fock_joint(TWO, Independent(Binomial("1/2", 40), TwoNumberMixture(40, 10))),
        "fock-common": fock_joint(TWO, CommonNumber(30, 0.6, 0.8, 0.3)),
    }
    g = grid_extent(250)
    outputs["incoherent"] = incoherent_joint(meanfield_joint(TWO, (500, 0), 0.0, grid=g), meanfield_joint(TWO, (0, 500), 0.0, grid=g))
    ok, worst = True, {}
    for name, d in outputs.items():
        gap = abs(d.total() - 1.0)
        ok &= gap <= d.tail_bound <= 1e-9
        worst[name] = gap
    moment_err = 0.0
    for d, means in (
        (outputs["fock"], (30, 20)),
        (outputs["fock-binomial"], (40, 40)),
    ):
        p = d.probs
        arr = THREE if d.ndim == 3 else TWO
        for axis, spec in enumerate(arr):
            other = tuple(i for i in range(d.ndim) if i != axis)
            first = float(np.arange(p.shape[axis]) @ p.sum(axis=other))
            moment_err = max(moment_err, abs(first - (spec.R_aa * means[0] + spec.R_bb * means[1])))
    ok &= moment_err < 1e-9
    detail = f"max |sum P - 1| {max(worst.values()):.1e} within tail bounds, first-moment error {moment_err:.1e}"
    assert acceptance(8, ok, detail)


@pytest.mark.slow
def test_criterion_09_super_poissonian_broadening(acceptance):
    widths, modes_at_one = [], None
    for Q in (0.01, 0.1, 0.5, 1.0):
        pair = Independent(SuperPoissonian(Q, 500), SuperPoissonian(Q, 500))
        p = slice_probs(conditional(radial_phase_average_joint(TWO, pair, fixed={0: 106})))
        n = np.arange(len(p))
        mean = float(n @ p)
        widths.append(math.sqrt(float(((n - mean) ** 2) @ p)))
        if Q == 1.0:
            modes_at_one = find_modes(p, min_depth=0.1)
    ok = all(a < b for a, b in zip(widths, widths[1:])) and len(modes_at_one) < 2
    detail = f"std {', '.join(f'{w:.1f}' for w in widths)}; Q=1 has {len(modes_at_one)} deep mode(s)"
    assert acceptance(9, ok, detail)


def test_criterion_10_incoherent_control(acceptance):
    g = grid_extent(250 + 2 * math.sqrt(15000))
    inc = incoherent_joint(meanfield_joint(TWO, (500, 0), 0.0, grid=g), meanfield_joint(TWO, (0, 500), 0.0, grid=g))
    n1, n2 = np.meshgrid(inc.counts(0), inc.counts(1), indexing="ij")
    err = float(np.max(np.abs(inc.probs - stats.poisson.pmf(n1, 250) * stats.poisson.pmf(n2, 250))))
    traj = trajectory(TWO, (500, 500), 256)
    tube = peak_manifold(inc, traj).tube_coverage
    ok = err < 1e-10 and tube < 0.5
    assert acceptance(10, ok, f"product-of-Poissons error {err:.1e}, tube coverage {tube:.2e}")
