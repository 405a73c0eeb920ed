"""Analytic fidelity of two parallel XX gates (four ions) from alpha and chi.

The spin state is expanded in the sigma-x product basis. A sign pattern
``s`` in {+1,-1}^4 picks up the entangling phase ``sum_{a<b} chi_ab s_a s_b``
and displaces mode ``k`` by ``sum_a s_a alpha_{a,k}``. Starting from
``|0000>`` every pair of patterns contributes with a thermal overlap of the
two displacements, so the fidelity is a sum over 256 pattern pairs. Grouping
equal terms gives the 8 + 8 + 28 term closed form held in ``TERMS``.

Ion order is ``(i, j, m, n)`` with entangling pairs ``(i, j)`` and
``(m, n)``; the six chi values are always ordered ``ij, im, in, jm, jn, mn``.
"""
from __future__ import annotations

from dataclasses import dataclass
from itertools import combinations, product
from typing import NamedTuple

import numpy as np

ION_LABELS = ("i", "j", "m", "n")
PAIR_ORDER = tuple(combinations(range(4), 2))
PAIR_LABELS = tuple(ION_LABELS[a] + ION_LABELS[b] for a, b in PAIR_ORDER)
SIGN_PATTERNS = np.array(list(product((1, -1), repeat=4)))  # 16 x 4
# sign products s_a s_b for every pattern and pair, 16 x 6
PAIR_SIGNS = np.array([[s[a] * s[b] for a, b in PAIR_ORDER] for s in SIGN_PATTERNS])


def beta_of(nbar):
    """Inverse mode temperature ``coth(ln(1 + 1/nbar) / 2)``, which equals ``2 nbar + 1``."""
    nbar = np.asarray(nbar, dtype=float)
    if np.any(nbar < 0):
        raise ValueError("mean phonon number must be non-negative")
    out = 2.0 * nbar + 1.0
    return float(out) if out.ndim == 0 else out


@dataclass(frozen=True)
class ThermalSpec:
    beta: np.ndarray

    def __post_init__(self):
        beta = np.atleast_1d(np.asarray(self.beta, dtype=float))
        if np.any(beta < 1.0):
            raise ValueError("beta_k must be >= 1")
        object.__setattr__(self, "beta", beta)

    @classmethod
    def from_nbar(cls, nbar) -> "ThermalSpec":
        return cls(np.atleast_1d(beta_of(nbar)))


@dataclass(frozen=True)
class InteractionSummary:
    alphas: np.ndarray  # 4 x N complex
    chis: np.ndarray  # 6, ordered as PAIR_ORDER
    chi_ideals: np.ndarray  # 6

    def __post_init__(self):
        alphas = np.atleast_2d(np.asarray(self.alphas, dtype=complex))
        chis = np.asarray(self.chis, dtype=float).reshape(-1)
        ideals = np.asarray(self.chi_ideals, dtype=float).reshape(-1)
        if alphas.shape[0] != 4:
            raise ValueError(f"need displacements for exactly 4 ions, got {alphas.shape[0]}")
        if chis.shape != (6,) or ideals.shape != (6,):
            raise ValueError("need six chi values and six ideals")
        object.__setattr__(self, "alphas", alphas)
        object.__setattr__(self, "chis", chis)
        object.__setattr__(self, "chi_ideals", ideals)

    @property
    def dchi(self) -> np.ndarray:
        return self.chis - self.chi_ideals

    @classmethod
    def parallel(cls, alphas, chis, chi_ij: float = np.pi / 4, chi_mn: float = np.pi / 4):
        return cls(alphas, chis, [chi_ij, 0, 0, 0, 0, chi_mn])

    @classmethod
    def ghz(cls, alphas, chis):
        return cls(alphas, chis, np.full(6, np.pi / 4))


def _as_signs(pattern) -> np.ndarray:
    if isinstance(pattern, str):
        lookup = {"+": 1, "-": -1, "0": 0}
        return np.array([lookup[c] for c in pattern])
    signs = np.asarray(pattern)
    if signs.shape != (4,) or not np.all(np.isin(signs, (-1, 0, 1))):
        raise ValueError(f"sign pattern must be four values in {{-1, 0, 1}}, got {pattern}")
    return signs


def gamma(summary: InteractionSummary, thermal: ThermalSpec, signs) -> float:
    """``exp(-1/2 sum_k beta_k |2 sum_a A_a alpha_{a,k}|^2)`` for signs ``A``."""
    signs = _as_signs(signs)
    disp = 2.0 * (signs @ summary.alphas)
    return float(np.exp(-0.5 * np.sum(thermal.beta * np.abs(disp) ** 2)))


def _canonical(signs) -> str:
    """Sign pattern up to overall sign, first nonzero entry positive."""
    signs = np.asarray(signs)
    nz = np.flatnonzero(signs)
    if nz.size and signs[nz[0]] < 0:
        signs = -signs
    return "".join({1: "+", -1: "-", 0: "0"}[int(v)] for v in signs)


class CosineTerm(NamedTuple):
    gamma_a: str  # pattern flipping a single ion or the first half of a 2 + 2 split
    gamma_b: str  # complementary pattern
    coeffs: tuple  # coefficients of the six dchi values inside cos(2 * ...)


def _build_terms():
    """Group the 256 pattern pairs into the closed form.

    Pairs ``(s, s')`` that differ on an ion set ``T`` and on its complement
    share a cosine argument, so each term carries two Gamma factors.
    """
    full, terms = set(), {}
    for s in SIGN_PATTERNS:
        for t in SIGN_PATTERNS:
            diff = (s - t) // 2
            flipped = np.flatnonzero(diff)
            if flipped.size in (0, 4):
                if flipped.size == 4:
                    full.add(_canonical(diff))
                continue
            # argument of exp(i (Phi_s - Phi_t)) over 2
            arg = (PAIR_SIGNS[_index(s)] - PAIR_SIGNS[_index(t)]) // 2
            nz = np.flatnonzero(arg)
            if arg[nz[0]] < 0:
                arg = -arg
            comp = np.where(diff == 0, s, 0)
            a, b = _canonical(diff), _canonical(comp)
            # single-ion flips first, for 2 + 2 splits the half holding ion i
            if flipped.size == 3 or (flipped.size == 2 and diff[0] == 0):
                a, b = b, a
            terms[(a, b, tuple(int(v) for v in arg))] = None
    return tuple(sorted(full, reverse=True)), tuple(CosineTerm(*k) for k in terms)


def _index(s) -> int:
    return int(np.flatnonzero((SIGN_PATTERNS == s).all(axis=1))[0])


FULL_PATTERNS, TERMS = _build_terms()


def _closed_form(summary: InteractionSummary, thermal: ThermalSpec) -> float:
    g = {}

    def gam(p):
        if p not in g:
            g[p] = gamma(summary, thermal, p)
        return g[p]

    dchi = summary.dchi
    total = 8.0 + sum(gam(p) for p in FULL_PATTERNS)
    for term in TERMS:
        arg = 2.0 * float(np.dot(term.coeffs, dchi))
        total += 2.0 * (gam(term.gamma_a) + gam(term.gamma_b)) * np.cos(arg)
    return total / 128.0


def parallel_fidelity(summary: InteractionSummary, thermal: ThermalSpec) -> float:
    """Fidelity of two simultaneous XX gates on ``(i, j)`` and ``(m, n)``."""
    if np.any(summary.chi_ideals[1:5] != 0.0):
        raise ValueError("parallel mode needs zero crosstalk ideals")
    return _closed_form(summary, thermal)


def ghz_fidelity(summary: InteractionSummary, thermal: ThermalSpec) -> float:
    """Fidelity against the all-pairs pi/4 interaction that makes a 4-ion GHZ state.

    A commonly quoted form of this expression has one Gamma with coefficient 2
    where every sibling term has 1; the symmetric coefficient is used, which
    is what the pattern-pair sum produces.
    """
    if not np.allclose(summary.chi_ideals, np.pi / 4, rtol=0, atol=1e-15):
        raise ValueError("GHZ mode needs all six ideals equal to pi/4")
    return _closed_form(summary, thermal)


def sum_fidelity(alphas, dchi, beta, motional_phase: bool = False) -> float:
    """Fidelity as a direct sum over all sigma-x pattern pairs, any ion count.

    ``alphas`` is ``n x N``; ``dchi`` is an ``n x n`` matrix whose upper
    triangle holds ``chi - chi_ideal``. With ``motional_phase`` the overlap of
    two displaced thermal states keeps the phase ``Im(conj(b_t) b_s)`` of
    their displacements, which the closed form drops; the difference is
    fourth order in alpha.
    """
    alphas = np.atleast_2d(np.asarray(alphas, dtype=complex))
    n = alphas.shape[0]
    if n > 10:
        raise ValueError("pattern sum limited to 10 ions")
    beta = np.asarray(beta, dtype=float)
    signs = np.array(list(product((1, -1), repeat=n)))
    upper = np.triu(np.asarray(dchi, dtype=float), k=1)
    phase = np.einsum("pa,ab,pb->p", signs, upper, signs)
    disp = signs @ alphas
    # ||b_s - b_t||^2_beta expanded to stay 2-D
    w = disp * np.sqrt(beta)
    sq = np.sum(np.abs(w) ** 2, axis=1)
    cross = w @ w.conj().T
    overlap = np.exp(-0.5 * (sq[:, None] + sq[None, :] - 2.0 * cross.real)).astype(complex)
    if motional_phase:
        overlap *= np.exp(1j * (disp @ disp.conj().T).imag)
    amp = np.exp(1j * phase)
    total = amp @ overlap @ amp.conj()
    return float(total.real / len(signs) ** 2)


def pattern_sum_fidelity(summary: InteractionSummary, thermal: ThermalSpec,
                         motional_phase: bool = False) -> float:
    """``sum_fidelity`` for a four-ion summary."""
    dchi = np.zeros((4, 4))
    for (a, b), d in zip(PAIR_ORDER, summary.dchi):
        dchi[a, b] = d
    return sum_fidelity(summary.alphas, dchi, thermal.beta, motional_phase)


def _pair_label(ions, a, b) -> str:
    lo, hi = sorted((ions[a] + 1, ions[b] + 1))
    return f"{lo}-{hi}"


def evaluator_report(summary: InteractionSummary, thermal: ThermalSpec,
                     ions=None, include_ghz: bool = False) -> dict:
    ions = tuple(ions) if ions is not None else tuple(range(4))
    report = {
        "F_parallel": parallel_fidelity(
            InteractionSummary(summary.alphas, summary.chis,
                               [summary.chi_ideals[0], 0, 0, 0, 0, summary.chi_ideals[5]]),
            thermal,
        ),
        "alpha_abs": {
            f"ion{ion + 1}": [float(v) for v in np.abs(row)]
            for ion, row in zip(ions, summary.alphas)
        },
        "chi": {_pair_label(ions, a, b): float(c) for (a, b), c in zip(PAIR_ORDER, summary.chis)},
        "chi_ideal": {
            _pair_label(ions, a, b): float(c) for (a, b), c in zip(PAIR_ORDER, summary.chi_ideals)
        },
        "gamma": {p: gamma(summary, thermal, p) for p in FULL_PATTERNS},
    }
    if include_ghz:
        report["F_ghz"] = ghz_fidelity(InteractionSummary.ghz(summary.alphas, summary.chis), thermal)
    return report
