import numpy as np
import pytest

import oracles
from pargate.fidelity import (
    FULL_PATTERNS,
    TERMS,
    InteractionSummary,
    ThermalSpec,
    _canonical,
    beta_of,
    evaluator_report,
    gamma,
    ghz_fidelity,
    parallel_fidelity,
    pattern_sum_fidelity,
    sum_fidelity,
)

P4 = np.pi / 4
IDEAL = [P4, 0, 0, 0, 0, P4]

# The 28 cosine terms of the two-pair fidelity, typed in by hand:
# (Gamma pattern, Gamma pattern, coefficients of (ij, im, in, jm, jn, mn)).
HAND_TERMS = [
    ("0+--", "+000", (1, -1, -1, 0, 0, 0)),
    ("0++-", "+000", (1, 1, -1, 0, 0, 0)),
    ("0+-+", "+000", (1, -1, 1, 0, 0, 0)),
    ("0+++", "+000", (1, 1, 1, 0, 0, 0)),
    ("0+00", "+0--", (1, 0, 0, -1, -1, 0)),
    ("0+00", "+0+-", (1, 0, 0, 1, -1, 0)),
    ("0+00", "+0-+", (1, 0, 0, -1, 1, 0)),
    ("0+00", "+0++", (1, 0, 0, 1, 1, 0)),
    ("00+0", "+-0+", (0, 1, 0, -1, 0, 1)),
    ("00+0", "++0+", (0, 1, 0, 1, 0, 1)),
    ("00+0", "+-0-", (0, 1, 0, -1, 0, -1)),
    ("00+0", "++0-", (0, 1, 0, 1, 0, -1)),
    ("000+", "+-+0", (0, 0, 1, 0, -1, 1)),
    ("000+", "+++0", (0, 0, 1, 0, 1, 1)),
    ("000+", "+--0", (0, 0, 1, 0, -1, -1)),
    ("000+", "++-0", (0, 0, 1, 0, 1, -1)),
    ("00++", "+-00", (0, 1, 1, -1, -1, 0)),
    ("00+-", "++00", (0, 1, -1, 1, -1, 0)),
    ("00+-", "+-00", (0, 1, -1, -1, 1, 0)),
    ("00++", "++00", (0, 1, 1, 1, 1, 0)),
    ("0+0-", "+0-0", (1, 0, -1, -1, 0, 1)),
    ("0+0+", "+0+0", (1, 0, 1, 1, 0, 1)),
    ("0+0+", "+0-0", (1, 0, 1, -1, 0, -1)),
    ("0+0-", "+0+0", (1, 0, -1, 1, 0, -1)),
    ("0+-0", "+00-", (1, -1, 0, 0, -1, 1)),
    ("0++0", "+00+", (1, 1, 0, 0, 1, 1)),
    ("0++0", "+00-", (1, 1, 0, 0, -1, -1)),
    ("0+-0", "+00+", (1, -1, 0, 0, 1, -1)),
]
HAND_FULL = ["+---", "+--+", "+-+-", "+-++", "++--", "++-+", "+++-", "++++"]


def _key(a, b, coeffs):
    c = np.array(coeffs)
    if c[np.flatnonzero(c)[0]] < 0:
        c = -c
    return frozenset((a, b)), tuple(int(v) for v in c)


def random_summary(rng, scale=0.01, dchi=0.02, ideals=IDEAL):
    alphas = scale * (rng.normal(size=(4, 5)) + 1j * rng.normal(size=(4, 5)))
    chis = np.array(ideals) + dchi * rng.normal(size=6)
    return InteractionSummary(alphas, chis, ideals)


def test_term_table_matches_hand_transcription():
    assert len(TERMS) == 28 and len(HAND_TERMS) == 28
    assert {_key(*t) for t in TERMS} == {_key(*t) for t in HAND_TERMS}
    assert sorted(FULL_PATTERNS) == sorted(HAND_FULL)


def test_canonical_patterns():
    assert _canonical([-1, 1, 0, 1]) == "+-0-"
    assert _canonical([0, 0, -1, 1]) == "00+-"


@pytest.mark.parametrize("nbar,beta", [(0, 1.0), (0.5, 2.0), (10, 21.0)])
def test_beta(nbar, beta):
    assert beta_of(nbar) == beta
    if nbar:
        assert 1 / np.tanh(0.5 * np.log(1 + 1 / nbar)) == pytest.approx(beta, rel=1e-14)


def test_beta_rejects_negative():
    with pytest.raises(ValueError):
        beta_of(-0.1)
    with pytest.raises(ValueError):
        ThermalSpec([0.5])


def test_gamma_trivial_cases():
    rng = np.random.default_rng(0)
    summary = random_summary(rng, scale=0.3)
    thermal = ThermalSpec.from_nbar(np.full(5, 0.2))
    assert gamma(summary, thermal, "0000") == 1.0
    zero = InteractionSummary(np.zeros((4, 5)), IDEAL, IDEAL)
    for p in FULL_PATTERNS:
        assert gamma(zero, thermal, p) == 1.0
    with pytest.raises(ValueError):
        gamma(summary, thermal, [2, 0, 0, 0])


@pytest.mark.parametrize("seed", range(5))
def test_gamma_against_fock_space(seed):
    rng = np.random.default_rng(seed)
    summary = random_summary(rng, scale=0.2)
    nbar = rng.uniform(0, 0.3, size=5)
    signs = rng.integers(-1, 2, size=4)
    ref = oracles.gamma_oracle(summary.alphas, nbar, signs)
    assert gamma(summary, ThermalSpec.from_nbar(nbar), signs) == pytest.approx(ref, abs=1e-6)


def test_ideal_points_are_exactly_one():
    thermal = ThermalSpec.from_nbar(np.full(5, 0.1))
    alphas = np.zeros((4, 5))
    assert abs(parallel_fidelity(InteractionSummary.parallel(alphas, IDEAL), thermal) - 1) < 1e-12
    ghz = InteractionSummary.ghz(alphas, np.full(6, P4))
    assert abs(ghz_fidelity(ghz, thermal) - 1) < 1e-12


@pytest.mark.parametrize("slot", range(6))
def test_single_angle_error_gives_cos_squared(slot):
    delta = 1e-3
    chis = np.array(IDEAL, dtype=float)
    chis[slot] += delta
    summary = InteractionSummary.parallel(np.zeros((4, 5)), chis)
    f = parallel_fidelity(summary, ThermalSpec.from_nbar(np.zeros(5)))
    assert f == pytest.approx(np.cos(delta) ** 2, abs=1e-15)


def test_ghz_uniform_shift_matches_state_overlap():
    delta = 0.01
    summary = InteractionSummary.ghz(np.zeros((4, 5)), np.full(6, P4 + delta))
    f = ghz_fidelity(summary, ThermalSpec.from_nbar(np.zeros(5)))
    ideal = oracles.ideal_state(oracles.chi_dict(np.full(6, P4)))
    shifted = oracles.ideal_state(oracles.chi_dict(np.full(6, P4 + delta)))
    assert f == pytest.approx(abs(np.vdot(ideal, shifted)) ** 2, abs=1e-14)


@pytest.mark.parametrize("seed", range(4))
def test_closed_form_equals_pattern_sum(seed):
    rng = np.random.default_rng(seed)
    thermal = ThermalSpec.from_nbar(rng.uniform(0, 0.3, size=5))
    for ideals in (IDEAL, np.full(6, P4)):
        summary = random_summary(rng, scale=0.1, dchi=0.1, ideals=ideals)
        closed = (parallel_fidelity if ideals is IDEAL else ghz_fidelity)(summary, thermal)
        assert closed == pytest.approx(pattern_sum_fidelity(summary, thermal), abs=1e-14)


@pytest.mark.slow
@pytest.mark.parametrize("seed,mode", [(1, "parallel"), (2, "ghz")])
def test_against_density_matrix_oracle(seed, mode):
    rng = np.random.default_rng(seed)
    ideals = IDEAL if mode == "parallel" else np.full(6, P4)
    alphas = 0.01 * (rng.normal(size=(4, 2)) + 1j * rng.normal(size=(4, 2)))
    chis = np.array(ideals) + 0.03 * rng.normal(size=6)
    nbar = rng.uniform(0, 0.3, size=2)
    ref = oracles.fidelity_oracle(alphas, oracles.chi_dict(chis), oracles.chi_dict(ideals), nbar)
    summary = InteractionSummary(alphas, chis, ideals)
    thermal = ThermalSpec.from_nbar(nbar)
    f = parallel_fidelity(summary, thermal) if mode == "parallel" else ghz_fidelity(summary, thermal)
    assert f == pytest.approx(ref, abs=1e-4)
    # the exact motional phase closes the remaining fourth-order gap
    assert pattern_sum_fidelity(summary, thermal, motional_phase=True) == pytest.approx(ref, abs=1e-7)


def test_pair_relabelling_symmetry():
    rng = np.random.default_rng(9)
    summary = random_summary(rng, scale=0.05, dchi=0.05, ideals=[P4, 0, 0, 0, 0, np.pi / 8])
    thermal = ThermalSpec.from_nbar(np.full(5, 0.1))
    # (i, j, m, n) -> (m, n, i, j) maps the pair order (ij, im, in, jm, jn, mn)
    # onto (mn, im, jm, in, jn, ij)
    perm = [5, 1, 3, 2, 4, 0]
    swapped = InteractionSummary(summary.alphas[[2, 3, 0, 1]], summary.chis[perm],
                                 summary.chi_ideals[perm])
    assert parallel_fidelity(swapped, thermal) == pytest.approx(parallel_fidelity(summary, thermal),
                                                                abs=1e-15)


def test_mode_checks():
    alphas = np.zeros((4, 5))
    thermal = ThermalSpec.from_nbar(np.zeros(5))
    with pytest.raises(ValueError):
        parallel_fidelity(InteractionSummary.ghz(alphas, np.full(6, P4)), thermal)
    with pytest.raises(ValueError):
        ghz_fidelity(InteractionSummary.parallel(alphas, IDEAL), thermal)
    with pytest.raises(ValueError):
        InteractionSummary(np.zeros((3, 5)), IDEAL, IDEAL)


def test_sum_fidelity_general_ion_count():
    # six ions, three pi/4 pairs, nothing else: ideal point is one
    dchi = np.zeros((6, 6))
    assert sum_fidelity(np.zeros((6, 3)), dchi, np.ones(3)) == pytest.approx(1.0, abs=1e-14)
    dchi[0, 3] = 0.01
    assert sum_fidelity(np.zeros((6, 3)), dchi, np.ones(3)) == pytest.approx(np.cos(0.01) ** 2, abs=1e-14)
    with pytest.raises(ValueError):
        sum_fidelity(np.zeros((11, 2)), np.zeros((11, 11)), np.ones(2))


def test_report_layout():
    rng = np.random.default_rng(4)
    summary = random_summary(rng)
    report = evaluator_report(summary, ThermalSpec.from_nbar(np.full(5, 0.1)), ions=(0, 3, 1, 4),
                              include_ghz=True)
    assert set(report) == {"F_parallel", "alpha_abs", "chi", "chi_ideal", "gamma", "F_ghz"}
    assert set(report["chi"]) == {"1-4", "1-2", "1-5", "2-4", "4-5", "2-5"}
    assert report["chi_ideal"]["1-4"] == P4 and report["chi_ideal"]["2-5"] == P4
    assert len(report["gamma"]) == 8 and len(report["alpha_abs"]["ion4"]) == 5
