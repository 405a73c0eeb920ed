import json

import numpy as np
import pytest

from pargate.chain import (
    AMU,
    HBAR,
    REFERENCE_MODE_FREQS_MHZ,
    ChainConfigError,
    ChainInstabilityError,
    compute_transverse_modes,
    critical_ratio,
    load_chain,
    mhz_to_rad,
    reference_chain_config,
    rad_to_mhz,
    transverse_mode_vectors,
)

YB = 170.936323 * AMU
K_EFF = 3.5e7


def explicit_doc(n=5, eta=None):
    freqs = list(REFERENCE_MODE_FREQS_MHZ[:n])
    return {
        "n_ions": n,
        "mode_freqs_mhz": freqs,
        "lamb_dicke": eta if eta is not None else (0.05 * np.eye(n)).tolist(),
        "nbar": 0.1,
    }


def test_explicit_five_ion_chain():
    spec = load_chain(explicit_doc())
    assert spec.n_ions == 5
    np.testing.assert_allclose(rad_to_mhz(spec.mode_freqs), REFERENCE_MODE_FREQS_MHZ, rtol=1e-15)
    np.testing.assert_array_equal(spec.nbar, np.full(5, 0.1))


def test_single_ion_chain():
    spec = load_chain({"n_ions": 1, "mode_freqs_mhz": [3.0], "lamb_dicke": [[0.1]]})
    assert spec.n_ions == 1 and spec.lamb_dicke[0, 0] == 0.1


@pytest.mark.parametrize("doc", [
    explicit_doc(eta=np.ones((4, 5)).tolist()),
    {"n_ions": 2, "mode_freqs_mhz": [3.0, -1.0], "lamb_dicke": np.eye(2).tolist()},
    {"n_ions": 2, "mode_freqs_mhz": [3.0], "lamb_dicke": np.eye(2).tolist()},
    {"n_ions": 2, "mode_freqs_mhz": [3.0, 2.9]},
    {"mode_freqs_mhz": [3.0]},
    {"n_ions": 1, "mode_freqs_mhz": [3.0], "lamb_dicke": [[0.1]], "nbar": -0.1},
    "not a mapping",
])
def test_invalid_documents(doc):
    with pytest.raises(ChainConfigError):
        load_chain(doc)


def test_single_ion_modes():
    wt = mhz_to_rad(3.0)
    freqs, eta = compute_transverse_modes(1, mhz_to_rad(0.5), wt, YB, K_EFF)
    assert freqs[0] == pytest.approx(wt, rel=1e-15)
    assert eta[0, 0] == pytest.approx(K_EFF * np.sqrt(HBAR / (2 * YB * wt)), rel=1e-14)


def test_two_ion_modes_by_hand():
    wz, wt = mhz_to_rad(0.5), mhz_to_rad(3.0)
    freqs, vecs = transverse_mode_vectors(2, wz, wt)
    np.testing.assert_allclose(freqs, [wt, np.sqrt(wt**2 - wz**2)], rtol=1e-12)
    np.testing.assert_allclose(np.abs(vecs), np.full((2, 2), 1 / np.sqrt(2)), atol=1e-12)
    assert vecs[0, 0] * vecs[1, 0] > 0 and vecs[0, 1] * vecs[1, 1] < 0


def test_five_ion_spectrum_matches_direct_diagonalisation():
    wz, wt = mhz_to_rad(0.31), mhz_to_rad(3.045)
    freqs, vecs = transverse_mode_vectors(5, wz, wt)
    assert np.all(np.diff(freqs) < 0)
    assert 0.05 < rad_to_mhz(freqs[0] - freqs[-1]) < 0.2
    np.testing.assert_allclose(vecs.T @ vecs, np.eye(5), atol=1e-10)
    np.testing.assert_allclose(vecs[:, 0], np.full(5, 1 / np.sqrt(5)), atol=1e-10)
    # reference: brute-force equilibrium by minimising the potential
    from scipy.optimize import minimize

    def energy(u):
        d = np.abs(u[:, None] - u[None, :])[np.triu_indices(5, 1)]
        return 0.5 * np.sum(u**2) + np.sum(1 / d)

    u = np.sort(minimize(energy, np.linspace(-2, 2, 5), tol=1e-14, method="BFGS").x)
    d = np.abs(u[:, None] - u[None, :])
    np.fill_diagonal(d, np.inf)
    k = 1 / d**3
    hess = k.copy()
    np.fill_diagonal(hess, (wt / wz) ** 2 - k.sum(axis=1))
    ref = np.sort(wz * np.sqrt(np.linalg.eigvalsh(hess)))[::-1]
    np.testing.assert_allclose(freqs, ref, rtol=1e-9)


def test_zigzag_rejected():
    wz = mhz_to_rad(1.0)
    with pytest.raises(ChainInstabilityError):
        transverse_mode_vectors(5, wz, 0.99 * critical_ratio(5) * wz)


def test_reference_chain_uses_measured_frequencies():
    spec = load_chain(reference_chain_config())
    np.testing.assert_allclose(rad_to_mhz(spec.mode_freqs), REFERENCE_MODE_FREQS_MHZ, rtol=1e-14)
    assert spec.lamb_dicke.shape == (5, 5)
    # common mode couples equally to every ion
    np.testing.assert_allclose(spec.lamb_dicke[:, 0], spec.lamb_dicke[0, 0], rtol=1e-10)
    assert 0.01 < abs(spec.lamb_dicke[0, 0]) < 0.2


def test_round_trip_through_json():
    spec = load_chain(reference_chain_config())
    again = load_chain(json.loads(json.dumps(spec.to_config())))
    np.testing.assert_allclose(again.mode_freqs, spec.mode_freqs, rtol=1e-15)
    np.testing.assert_array_equal(again.lamb_dicke, spec.lamb_dicke)


def test_deterministic_and_immutable():
    a = load_chain(reference_chain_config())
    b = load_chain(reference_chain_config())
    np.testing.assert_array_equal(a.lamb_dicke, b.lamb_dicke)
    with pytest.raises(ValueError):
        a.mode_freqs[0] = 1.0
