import warnings

import numpy as np
import pytest
from conftest import REF_MU, REF_TAU

import oracles
from pargate._backend import kernels
from pargate.chain import ChainSpec, mhz_to_rad
from pargate.kernel import (
    US,
    AmplitudeVector,
    DegenerateDetuningError,
    KernelError,
    SegmentGrid,
    alpha_of,
    alphas,
    build_system,
    chi_of,
    trajectory,
)

pytestmark = pytest.mark.filterwarnings("ignore::scipy.integrate.IntegrationWarning")


def test_segment_boundaries_are_exact_multiples():
    grid = SegmentGrid(REF_TAU, 60)
    b = grid.boundaries
    np.testing.assert_array_equal(b, np.arange(61) * REF_TAU / 60)
    assert b[-1] == REF_TAU and np.all(np.diff(b) > 0)


@pytest.mark.parametrize("case", oracles.kernel_cases(seed=11, n=15))
def test_entries_match_quadrature(case):
    mu, w, a1, b1, a2, b2 = case
    c, g = kernels.mode_kernels(mu, np.array([w]), np.array([a1, b1, a2, b2]))
    ref = oracles.c_entry(mu, w, a1, b1)
    assert abs(c[0, 0] - ref) <= 1e-9 * abs(ref)
    assert abs(g[0, 0, 0] - oracles.d_triangle(mu, w, a1, b1)) < 1e-10
    assert abs(g[0, 0, 2] - oracles.d_rect(mu, w, a1, b1, a2, b2)) < 1e-10


@pytest.mark.parametrize("case", oracles.kernel_cases(seed=12, n=5))
def test_separable_rectangle_oracle_matches_double_quadrature(case):
    assert abs(oracles.d_rect_separable(*case) - oracles.d_rect(*case)) < 1e-11


def test_single_segment_hand_integral(chain):
    """One segment over [0, tau] against the antiderivative written out by hand."""
    grid = SegmentGrid(REF_TAU, 1)
    system = build_system(chain, (0, 3), REF_MU, grid)
    amps = AmplitudeVector([(0, 3)], [[2 * np.pi * 50e3]])
    mu, T = REF_MU * US, grid.tau_us
    for k, w in enumerate(chain.mode_freqs * US):
        # sin(mu t) e^{iwt} = (e^{i(w+mu)t} - e^{i(w-mu)t}) / 2i
        prim = lambda f: (np.exp(1j * f * T) - 1) / (1j * f)
        hand = (prim(w + mu) - prim(w - mu)) / 2j
        expect = chain.lamb_dicke[0, k] * amps.amps_us[0, 0] * hand
        assert alpha_of(system, amps, 0, k) == pytest.approx(expect, rel=1e-12)


def test_tiling_equals_unsegmented_integral():
    rng = np.random.default_rng(5)
    for _ in range(3):
        mu, w = 2 * np.pi * rng.uniform(2.9, 3.1, size=2)
        T, S = rng.uniform(5, 20), int(rng.integers(2, 9))
        _, g = kernels.mode_kernels(mu, np.array([w]), np.arange(S + 1) * T / S)
        ref = oracles.d_triangle(mu, w, 0.0, T)
        assert g.sum() == pytest.approx(ref, rel=1e-9)


def test_reference_chain_entries_include_lamb_dicke(chain):
    grid = SegmentGrid(REF_TAU, 60)
    system = build_system(chain, (0, 1, 3, 4), REF_MU, grid)
    b = grid.boundaries_us
    mu = REF_MU * US
    rng = np.random.default_rng(2)
    for _ in range(10):
        s, k = int(rng.integers(60)), int(rng.integers(5))
        w = chain.mode_freqs[k] * US
        ref = chain.lamb_dicke[3, k] * oracles.c_entry(mu, w, b[s], b[s + 1])
        assert abs(system.c(3)[s, k] - ref) <= 1e-9 * abs(ref)
    s, r = 7, 31
    ref = sum(chain.lamb_dicke[0, k] * chain.lamb_dicke[4, k]
              * oracles.d_rect(mu, chain.mode_freqs[k] * US, b[s], b[s + 1], b[r], b[r + 1])
              for k in range(5))
    assert abs(system.d(0, 4)[s, r] - ref) < 1e-10


def test_d_structure(chain):
    system = build_system(chain, (0, 1, 3), REF_MU, SegmentGrid(REF_TAU, 12))
    d = system.d(0, 3)
    assert np.all(np.tril(d, -1) == 0.0)
    assert system.d(3, 0) is d
    assert np.all(np.isfinite(d)) and all(np.all(np.isfinite(c)) for c in system.c_mats.values())


def test_identical_couplings_give_identical_kernels():
    eta = np.tile([0.05, 0.03], (2, 1))
    spec = ChainSpec(2, mhz_to_rad([3.0, 2.95]), eta, 0.0)
    system = build_system(spec, (0, 1), mhz_to_rad(2.97), SegmentGrid(100 * US, 5))
    np.testing.assert_array_equal(system.c(0), system.c(1))


def test_zero_pulse(chain):
    system = build_system(chain, (0, 3), REF_MU, SegmentGrid(REF_TAU, 1))
    amps = AmplitudeVector.zeros([(0, 3)], 1)
    assert np.all(alphas(system, amps) == 0)
    assert chi_of(system, amps, (0, 3)) == 0
    _, path = trajectory(system, amps, 0, 2, 11)
    assert np.all(path == 0)


def test_scaling(chain):
    system = build_system(chain, (0, 3, 1, 4), REF_MU, SegmentGrid(REF_TAU, 8))
    rng = np.random.default_rng(0)
    amps = AmplitudeVector([(0, 3), (1, 4)], rng.normal(size=(2, 8)) * 1e5)
    np.testing.assert_allclose(alphas(system, amps.scaled(2.0)), 2 * alphas(system, amps), rtol=1e-14)
    for pair in [(0, 3), (0, 1), (3, 4)]:
        assert chi_of(system, amps.scaled(3.0), pair) == pytest.approx(9 * chi_of(system, amps, pair),
                                                                       rel=1e-13)
    assert chi_of(system, amps, (0, 1)) == pytest.approx(chi_of(system, amps, (1, 0)), rel=1e-14)


def test_single_pair_reduction(chain):
    grid = SegmentGrid(REF_TAU, 10)
    row = np.random.default_rng(3).normal(size=10) * 1e5
    single = build_system(chain, (0, 3), REF_MU, grid)
    double = build_system(chain, (0, 3, 1, 4), REF_MU, grid)
    chi1 = chi_of(single, AmplitudeVector([(0, 3)], [row]), (0, 3))
    chi2 = chi_of(double, AmplitudeVector([(0, 3), (1, 4)], [row, row]), (0, 3))
    assert chi1 == pytest.approx(chi2, rel=1e-14)


def test_trajectory_ends_at_alpha(solved_14_25, chain):
    request, result = solved_14_25
    system = build_system(chain, request.ions, request.mu, request.grid)
    amps = result.solution
    peaks = np.zeros(5)
    for ion in request.ions:
        for k in range(5):
            t, path = trajectory(system, amps, ion, k, 601)
            assert t[0] == 0 and t[-1] == pytest.approx(REF_TAU, rel=1e-15)
            assert abs(path[-1] - alpha_of(system, amps, ion, k)) < 1e-12
            peaks[k] = max(peaks[k], np.max(np.abs(path)))
    # modes 4 and 5, closest to the detuning, carry the largest excursions
    assert set(np.argsort(peaks)[-2:]) == {3, 4}


def test_trajectory_interior_matches_quadrature(chain):
    grid = SegmentGrid(20 * US, 4)
    system = build_system(chain, (0, 3), REF_MU, grid)
    amps = AmplitudeVector([(0, 3)], [[1e5, -2e5, 1.5e5, 3e4]])
    t, path = trajectory(system, amps, 3, 1, 9)
    mu, w = REF_MU * US, chain.mode_freqs[1] * US
    b = grid.boundaries_us
    tt = t[5] / US
    ref = sum(amps.amps_us[0, s] * oracles.c_entry(mu, w, b[s], min(b[s + 1], tt))
              for s in range(4) if b[s] < tt)
    assert abs(path[5] - chain.lamb_dicke[3, 1] * ref) < 1e-12


def test_errors(chain):
    grid = SegmentGrid(REF_TAU, 4)
    with pytest.raises(DegenerateDetuningError):
        build_system(chain, (0, 1), chain.mode_freqs[2] + 5e-7, grid)
    with pytest.raises(KernelError):
        build_system(chain, (0, 0), REF_MU, grid)
    with pytest.raises(KernelError):
        build_system(chain, (0, 7), REF_MU, grid)
    system = build_system(chain, (0, 1), REF_MU, grid)
    amps = AmplitudeVector.zeros([(0, 1)], 4)
    with pytest.raises(KernelError):
        alpha_of(system, amps, 2, 0)
    with pytest.raises(KernelError):
        alphas(system, AmplitudeVector.zeros([(0, 1)], 5))
    with pytest.raises(KernelError):
        trajectory(system, amps, 0, 0, 1)
    with pytest.raises(KernelError):
        AmplitudeVector([(0, 1), (1, 2)], np.zeros((2, 4)))
    with pytest.raises(KernelError):
        SegmentGrid(0.0, 3)


def test_near_resonant_detuning_matches_quadrature(chain):
    grid = SegmentGrid(REF_TAU, 6)
    w = chain.mode_freqs[4]
    amps = AmplitudeVector([(0, 1)], [np.full(6, 1e5)])
    b = grid.boundaries_us
    for d in (2e-6, 1e-3, 1.0):
        got = alpha_of(build_system(chain, (0, 1), w + d, grid), amps, 0, 4)
        ref = chain.lamb_dicke[0, 4] * amps.amps_us[0, 0] * sum(
            oracles.c_entry((w + d) * US, w * US, b[s], b[s + 1]) for s in range(6))
        assert abs(got - ref) <= 1e-9 * abs(ref)
