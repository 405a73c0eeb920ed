"""Ion-chain motional structure: transverse modes and Lamb-Dicke couplings."""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Any, Mapping

import numpy as np
from scipy import constants
from scipy.optimize import minimize_scalar

HBAR = constants.hbar
AMU = constants.atomic_mass
TWO_PI = 2.0 * np.pi

DEFAULT_NBAR = 0.1


class ChainConfigError(ValueError):
    """Raised for malformed or physically invalid chain descriptions."""


class ChainInstabilityError(ChainConfigError):
    """The requested trap would not hold a linear chain."""


def mhz_to_rad(f_mhz):
    return np.asarray(f_mhz, dtype=float) * TWO_PI * 1e6


def rad_to_mhz(w):
    return np.asarray(w, dtype=float) / (TWO_PI * 1e6)


def _frozen(a: np.ndarray) -> np.ndarray:
    a = np.array(a, dtype=float, copy=True)
    a.setflags(write=False)
    return a


@dataclass(frozen=True)
class ChainSpec:
    """Transverse motional structure of an ``n_ions`` chain.

    ``mode_freqs`` are angular frequencies in rad/s ordered from the common
    (highest) mode downwards. ``lamb_dicke[i, k]`` couples ion ``i`` to mode
    ``k``. Arrays are stored read-only.
    """

    n_ions: int
    mode_freqs: np.ndarray
    lamb_dicke: np.ndarray
    nbar: np.ndarray
    qubit_splitting: float | None = None
    source: dict = field(default_factory=dict, compare=False, repr=False)

    def __post_init__(self):
        n = int(self.n_ions)
        if n < 1:
            raise ChainConfigError(f"n_ions must be positive, got {self.n_ions}")
        freqs = np.atleast_1d(np.asarray(self.mode_freqs, dtype=float))
        eta = np.atleast_2d(np.asarray(self.lamb_dicke, dtype=float))
        nbar = np.asarray(self.nbar, dtype=float)
        if nbar.ndim == 0:
            nbar = np.full(n, float(nbar))
        if freqs.shape != (n,):
            raise ChainConfigError(f"expected {n} mode frequencies, got shape {freqs.shape}")
        if eta.shape != (n, n):
            raise ChainConfigError(f"expected a {n}x{n} Lamb-Dicke matrix, got shape {eta.shape}")
        if nbar.shape != (n,):
            raise ChainConfigError(f"expected {n} mean phonon numbers, got shape {nbar.shape}")
        if not np.all(np.isfinite(freqs)) or np.any(freqs <= 0):
            raise ChainConfigError("mode frequencies must be finite and strictly positive")
        if not np.all(np.isfinite(eta)):
            raise ChainConfigError("Lamb-Dicke matrix has non-finite entries")
        if np.any(nbar < 0) or not np.all(np.isfinite(nbar)):
            raise ChainConfigError("mean phonon numbers must be finite and non-negative")
        object.__setattr__(self, "n_ions", n)
        object.__setattr__(self, "mode_freqs", _frozen(freqs))
        object.__setattr__(self, "lamb_dicke", _frozen(eta))
        object.__setattr__(self, "nbar", _frozen(nbar))

    @property
    def n_modes(self) -> int:
        return self.n_ions

    def to_config(self) -> dict:
        """Explicit-form document that reloads to an identical chain."""
        doc = {
            "n_ions": self.n_ions,
            "mode_freqs_mhz": rad_to_mhz(self.mode_freqs).tolist(),
            "lamb_dicke": self.lamb_dicke.tolist(),
            "nbar": self.nbar.tolist(),
        }
        if self.qubit_splitting is not None:
            doc["qubit_splitting_mhz"] = float(rad_to_mhz(self.qubit_splitting))
        return doc


def critical_ratio(n_ions: int) -> float:
    """Transverse/axial frequency ratio below which the chain goes zigzag."""
    return 0.77 * n_ions**0.86


def equilibrium_positions(n_ions: int, tol: float = 1e-14, max_iter: int = 100) -> np.ndarray:
    """Dimensionless equilibrium positions of ``n_ions`` in a harmonic axial well.

    Lengths are in units of ``(e^2 / (4 pi eps0 m w_z^2))**(1/3)``.
    """
    if n_ions == 1:
        return np.zeros(1)
    # approximate spacing for the initial guess; Newton does the rest
    spacing = 2.018 / n_ions**0.559
    u = (np.arange(n_ions) - (n_ions - 1) / 2.0) * spacing
    for _ in range(max_iter):
        d = u[:, None] - u[None, :]
        np.fill_diagonal(d, np.inf)
        force = u - np.sum(np.sign(d) / d**2, axis=1)
        inv3 = 1.0 / np.abs(d) ** 3
        jac = -2.0 * inv3
        np.fill_diagonal(jac, 1.0 + 2.0 * inv3.sum(axis=1))
        step = np.linalg.solve(jac, force)
        u = u - step
        if np.max(np.abs(step)) < tol:
            return u
    raise ChainConfigError(f"equilibrium Newton iteration did not converge for {n_ions} ions")


def _fix_signs(vecs: np.ndarray) -> np.ndarray:
    # largest-magnitude component of each eigenvector made positive (first on ties)
    out = vecs.copy()
    for k in range(out.shape[1]):
        col = out[:, k]
        idx = int(np.argmax(np.round(np.abs(col), 12)))
        if col[idx] < 0:
            out[:, k] = -col
    return out


def transverse_mode_vectors(n_ions: int, axial_freq: float, transverse_freq: float):
    """Transverse normal-mode frequencies (rad/s, descending) and eigenvectors.

    Returns ``(freqs, vecs)`` with ``vecs[i, k]`` the participation of ion
    ``i`` in mode ``k``.
    """
    if axial_freq <= 0 or transverse_freq <= 0:
        raise ChainConfigError("trap frequencies must be positive")
    ratio = transverse_freq / axial_freq
    if n_ions > 1 and ratio <= critical_ratio(n_ions):
        raise ChainInstabilityError(
            f"transverse/axial ratio {ratio:.3f} below critical {critical_ratio(n_ions):.3f} "
            f"for {n_ions} ions"
        )
    u = equilibrium_positions(n_ions)
    d = np.abs(u[:, None] - u[None, :])
    np.fill_diagonal(d, np.inf)
    coul = 1.0 / d**3
    hess = coul.copy()
    np.fill_diagonal(hess, ratio**2 - coul.sum(axis=1))
    evals, evecs = np.linalg.eigh(hess)
    order = np.argsort(evals)[::-1]
    evals, evecs = evals[order], evecs[:, order]
    if np.any(evals <= 0):
        raise ChainInstabilityError("transverse Hessian not positive definite")
    freqs = axial_freq * np.sqrt(evals)
    return freqs, _fix_signs(evecs)


def lamb_dicke_from_vectors(vecs: np.ndarray, mode_freqs: np.ndarray, mass: float, k_eff: float):
    scale = k_eff * np.sqrt(HBAR / (2.0 * mass * np.asarray(mode_freqs, dtype=float)))
    return vecs * scale[None, :]


def compute_transverse_modes(n_ions: int, axial_freq: float, transverse_freq: float,
                             mass: float, k_eff: float):
    """Mode frequencies (rad/s) and Lamb-Dicke matrix for a linear chain.

    ``axial_freq`` and ``transverse_freq`` are angular frequencies, ``mass``
    in kg, ``k_eff`` the effective Raman wavevector in 1/m.
    """
    freqs, vecs = transverse_mode_vectors(n_ions, axial_freq, transverse_freq)
    return freqs, lamb_dicke_from_vectors(vecs, freqs, mass, k_eff)


def fit_axial_frequency(mode_freqs, bounds_frac=(1e-3, 0.5)) -> float:
    """Axial frequency whose computed transverse spectrum best matches ``mode_freqs``.

    The transverse frequency is pinned to the highest (common) mode.
    """
    target = np.sort(np.asarray(mode_freqs, dtype=float))[::-1]
    n = target.size
    wt = target[0]
    lo, hi = bounds_frac[0] * wt, min(bounds_frac[1], 0.999 / critical_ratio(n)) * wt

    def cost(wz):
        freqs, _ = transverse_mode_vectors(n, wz, wt)
        return float(np.sum((freqs - target) ** 2))

    res = minimize_scalar(cost, bounds=(lo, hi), method="bounded",
                          options={"xatol": 1e-6 * wt})
    return float(res.x)


def _as_float_list(doc, key, n=None):
    try:
        arr = np.asarray(doc[key], dtype=float)
    except (TypeError, ValueError) as exc:
        raise ChainConfigError(f"{key!r} is not numeric") from exc
    if n is not None and arr.ndim != 1:
        raise ChainConfigError(f"{key!r} must be a flat list")
    return arr


def load_chain(doc: Mapping[str, Any]) -> ChainSpec:
    """Validate a chain document and build a :class:`ChainSpec`.

    Accepted forms (frequencies in MHz, cyclic):

    * ``mode_freqs_mhz`` + ``lamb_dicke``: fully explicit;
    * ``trap`` only: modes and couplings computed from trap physics;
    * ``mode_freqs_mhz`` + ``trap``: measured frequencies, eigenvectors from
      the trap model, couplings scaled at the measured frequencies.
    """
    if not isinstance(doc, Mapping):
        raise ChainConfigError("chain document must be a mapping")
    try:
        n = int(doc["n_ions"])
    except (KeyError, TypeError, ValueError) as exc:
        raise ChainConfigError("chain document needs an integer 'n_ions'") from exc
    if n < 1:
        raise ChainConfigError("n_ions must be positive")

    nbar = doc.get("nbar", DEFAULT_NBAR)
    try:
        nbar = np.asarray(nbar, dtype=float)
    except (TypeError, ValueError) as exc:
        raise ChainConfigError("'nbar' is not numeric") from exc

    trap = doc.get("trap")
    freqs = None
    if "mode_freqs_mhz" in doc:
        freqs_mhz = _as_float_list(doc, "mode_freqs_mhz", n)
        if freqs_mhz.shape != (n,):
            raise ChainConfigError(f"expected {n} mode frequencies, got {freqs_mhz.size}")
        if np.any(freqs_mhz <= 0):
            raise ChainConfigError("mode frequencies must be strictly positive")
        freqs = mhz_to_rad(freqs_mhz)

    if doc.get("lamb_dicke") is not None:
        if freqs is None:
            raise ChainConfigError("explicit 'lamb_dicke' requires 'mode_freqs_mhz'")
        try:
            eta = np.asarray(doc["lamb_dicke"], dtype=float)
        except (TypeError, ValueError) as exc:
            raise ChainConfigError("'lamb_dicke' is not a numeric matrix") from exc
    elif trap is not None:
        try:
            wz = float(mhz_to_rad(trap["axial_mhz"]))
            wt = float(mhz_to_rad(trap["transverse_mhz"]))
            mass = float(trap["mass_amu"]) * AMU
            k_eff = float(trap["k_eff_per_m"])
        except (KeyError, TypeError, ValueError) as exc:
            raise ChainConfigError(
                "trap needs axial_mhz, transverse_mhz, mass_amu, k_eff_per_m"
            ) from exc
        model_freqs, vecs = transverse_mode_vectors(n, wz, wt)
        if freqs is None:
            freqs = model_freqs
        eta = lamb_dicke_from_vectors(vecs, freqs, mass, k_eff)
    else:
        raise ChainConfigError("chain document needs 'lamb_dicke' or 'trap'")

    if eta.shape != (n, n):
        raise ChainConfigError(f"expected a {n}x{n} Lamb-Dicke matrix, got shape {eta.shape}")

    splitting = doc.get("qubit_splitting_mhz")
    return ChainSpec(
        n_ions=n,
        mode_freqs=freqs,
        lamb_dicke=eta,
        nbar=nbar,
        qubit_splitting=None if splitting is None else float(mhz_to_rad(splitting)),
        source=dict(doc),
    )


# Five-ion 171Yb+ chain used for the desk-scale reproductions. Frequencies are
# the measured sideband values; the axial frequency is the least-squares fit
# of the model spectrum to them (see fit_axial_frequency).
REFERENCE_MODE_FREQS_MHZ = (3.045, 3.027, 3.005, 2.978, 2.946)
YB171_MASS_AMU = 170.936323
RAMAN_355_COUNTERPROP_K = 2.0 * TWO_PI / 355e-9


def reference_chain_config(nbar: float = DEFAULT_NBAR) -> dict:
    wz = fit_axial_frequency(mhz_to_rad(REFERENCE_MODE_FREQS_MHZ))
    return {
        "n_ions": 5,
        "mode_freqs_mhz": list(REFERENCE_MODE_FREQS_MHZ),
        "trap": {
            "axial_mhz": round(float(rad_to_mhz(wz)), 6),
            "transverse_mhz": REFERENCE_MODE_FREQS_MHZ[0],
            "mass_amu": YB171_MASS_AMU,
            "k_eff_per_m": RAMAN_355_COUNTERPROP_K,
        },
        "nbar": nbar,
    }


def reference_chain(nbar: float = DEFAULT_NBAR) -> ChainSpec:
    return load_chain(reference_chain_config(nbar))
