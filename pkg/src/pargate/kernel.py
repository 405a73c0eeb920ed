"""Spin-motion (C) and spin-spin (D) constraint matrices for segmented pulses.

Internally every time is in microseconds and every angular frequency or
Rabi rate in rad/us, which keeps C, D and the pulse amplitudes of order one.
Public types take SI values (s, rad/s) and convert once.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from itertools import combinations
from typing import Iterable, Sequence

import numpy as np

from ._backend import kernels
from .chain import ChainSpec

US = 1e-6  # seconds per internal time unit
DEGENERACY_TOL = 1e-6  # rad/s


class KernelError(ValueError):
    pass


class DegenerateDetuningError(KernelError):
    """Detuning coincides with a motional sideband; closed forms not used there."""


def _frozen(a):
    a = np.array(a, copy=True)
    a.setflags(write=False)
    return a


@dataclass(frozen=True)
class SegmentGrid:
    tau: float  # s
    n_segments: int

    def __post_init__(self):
        if not self.tau > 0:
            raise KernelError("gate time must be positive")
        if int(self.n_segments) < 1:
            raise KernelError("need at least one segment")
        object.__setattr__(self, "n_segments", int(self.n_segments))

    @property
    def tau_us(self) -> float:
        return self.tau / US

    @property
    def boundaries(self) -> np.ndarray:
        """Segment edges in seconds, ``s * tau / S`` (never accumulated)."""
        return np.arange(self.n_segments + 1) * self.tau / self.n_segments

    @property
    def boundaries_us(self) -> np.ndarray:
        return np.arange(self.n_segments + 1) * self.tau_us / self.n_segments


@dataclass(frozen=True)
class AmplitudeVector:
    """Signed per-segment Rabi frequencies (rad/s), one row per entangling pair.

    Both ions of a pair see the same row. A negative value is a pi phase
    flip of the beatnote.
    """

    pairs: tuple
    amps: np.ndarray

    def __post_init__(self):
        pairs = tuple(tuple(int(i) for i in p) for p in self.pairs)
        amps = np.atleast_2d(np.asarray(self.amps, dtype=float))
        if amps.shape[0] != len(pairs):
            raise KernelError(f"{len(pairs)} pairs but {amps.shape[0]} amplitude rows")
        flat = [i for p in pairs for i in p]
        if any(len(p) != 2 for p in pairs) or len(set(flat)) != len(flat):
            raise KernelError(f"pairs must be disjoint ion pairs, got {pairs}")
        object.__setattr__(self, "pairs", pairs)
        object.__setattr__(self, "amps", _frozen(amps))

    @property
    def n_segments(self) -> int:
        return self.amps.shape[1]

    @property
    def ions(self) -> tuple:
        return tuple(i for p in self.pairs for i in p)

    def pair_index(self, ion: int) -> int:
        for n, p in enumerate(self.pairs):
            if ion in p:
                return n
        raise KernelError(f"ion {ion} is not driven by this pulse")

    def for_ion(self, ion: int) -> np.ndarray:
        return self.amps[self.pair_index(ion)]

    def scaled(self, factor: float) -> "AmplitudeVector":
        return AmplitudeVector(self.pairs, self.amps * factor)

    @property
    def amps_us(self) -> np.ndarray:
        """Amplitudes in rad/us."""
        return self.amps * US

    @classmethod
    def zeros(cls, pairs, n_segments: int) -> "AmplitudeVector":
        return cls(pairs, np.zeros((len(pairs), n_segments)))


@dataclass(frozen=True)
class ConstraintSystem:
    """Pre-computed C and D matrices for one detuning and segment grid.

    ``c_mats[i]`` is ``S x N`` complex (us) with ``alpha_{i,k} = sum_s
    Omega_s C[s, k]``; ``d_mats[(i, j)]`` is ``S x S`` real (us^2), nonzero
    only for ``a <= b`` where ``a`` holds the earlier time.
    """

    mu: float  # rad/s
    grid: SegmentGrid
    ions: tuple
    lamb_dicke: np.ndarray  # rows follow ``ions``
    seg_c: np.ndarray  # N x S, per-mode segment integrals without eta
    seg_g: np.ndarray  # N x S x S, per-mode ordered kernels without eta
    mode_freqs: np.ndarray
    c_mats: dict = field(repr=False)
    d_mats: dict = field(repr=False)

    @property
    def mu_us(self) -> float:
        return self.mu * US

    @property
    def n_modes(self) -> int:
        return self.seg_c.shape[0]

    def row(self, ion: int) -> int:
        try:
            return self.ions.index(ion)
        except ValueError:
            raise KernelError(f"ion {ion} not in this constraint system") from None

    def c(self, ion: int) -> np.ndarray:
        return self.c_mats[ion]

    def d(self, i: int, j: int) -> np.ndarray:
        if (i, j) not in self.d_mats:
            raise KernelError(f"ion pair {(i, j)} not in this constraint system")
        return self.d_mats[(i, j)]

    def d_sym(self, i: int, j: int) -> np.ndarray:
        """``D + D^T``: the kernel of chi for arbitrary (possibly distinct) pulses."""
        d = self.d(i, j)
        return d + d.T


def check_detuning(mu: float, mode_freqs: Iterable[float], tol: float = DEGENERACY_TOL):
    for k, w in enumerate(mode_freqs):
        if abs(mu - w) < tol or abs(mu + w) < tol:
            raise DegenerateDetuningError(
                f"detuning {mu:.9g} rad/s within {tol} rad/s of mode {k + 1} ({w:.9g} rad/s)"
            )


def build_system(chain: ChainSpec, involved_ions: Sequence[int], mu: float,
                 grid: SegmentGrid) -> ConstraintSystem:
    """Compute C for every involved ion and D for every ordered ion pair.

    ``involved_ions`` are 0-based chain indices; ``mu`` is in rad/s.
    """
    ions = tuple(int(i) for i in involved_ions)
    if len(set(ions)) != len(ions):
        raise KernelError(f"duplicate ions in {ions}")
    for i in ions:
        if not 0 <= i < chain.n_ions:
            raise KernelError(f"ion {i} outside a {chain.n_ions}-ion chain")
    check_detuning(mu, chain.mode_freqs)

    omegas = chain.mode_freqs * US
    seg_c, seg_g = kernels.mode_kernels(mu * US, omegas, grid.boundaries_us)
    eta = chain.lamb_dicke[list(ions), :]

    c_mats = {}
    for r, i in enumerate(ions):
        c_mats[i] = _frozen((seg_c * eta[r][:, None]).T)
    d_mats = {}
    for (r1, i), (r2, j) in combinations(enumerate(ions), 2):
        d = _frozen(np.tensordot(eta[r1] * eta[r2], seg_g, axes=1))
        d_mats[(i, j)] = d
        d_mats[(j, i)] = d
    return ConstraintSystem(
        mu=float(mu), grid=grid, ions=ions, lamb_dicke=_frozen(eta),
        seg_c=_frozen(seg_c), seg_g=_frozen(seg_g), mode_freqs=_frozen(chain.mode_freqs),
        c_mats=c_mats, d_mats=d_mats,
    )


def _check_grid(system: ConstraintSystem, amps: AmplitudeVector):
    if amps.n_segments != system.grid.n_segments:
        raise KernelError(
            f"pulse has {amps.n_segments} segments, system expects {system.grid.n_segments}"
        )


def alpha_of(system: ConstraintSystem, amps: AmplitudeVector, ion: int, mode: int) -> complex:
    """Final displacement of ``mode`` conditioned on ``ion``."""
    _check_grid(system, amps)
    return complex(amps.for_ion(ion) * US @ system.c(ion)[:, mode])


def alphas(system: ConstraintSystem, amps: AmplitudeVector) -> np.ndarray:
    """All final displacements, shape ``(len(amps.ions), n_modes)`` in ``amps.ions`` order."""
    _check_grid(system, amps)
    return np.array([amps.for_ion(i) * US @ system.c(i) for i in amps.ions])


def chi_of(system: ConstraintSystem, amps: AmplitudeVector, pair) -> float:
    """Spin-spin phase between two driven ions.

    Each ion contributes its own pair's pulse; summing both time orderings
    makes this symmetric in the two ions.
    """
    i, j = pair
    _check_grid(system, amps)
    oi = amps.for_ion(i) * US
    oj = amps.for_ion(j) * US
    return float(oi @ system.d_sym(i, j) @ oj)


def chis(system: ConstraintSystem, amps: AmplitudeVector) -> dict:
    return {(i, j): chi_of(system, amps, (i, j)) for i, j in combinations(amps.ions, 2)}


def trajectory(system: ConstraintSystem, amps: AmplitudeVector, ion: int, mode: int,
               n_samples: int):
    """Displacement ``alpha_{ion,mode}(t)`` on ``n_samples`` evenly spaced times.

    Returns ``(times_s, path)``; the last sample is the final displacement.
    """
    if n_samples < 2:
        raise KernelError("need at least two trajectory samples")
    _check_grid(system, amps)
    grid = system.grid
    bounds = grid.boundaries_us
    n_seg = grid.n_segments
    omega = amps.for_ion(ion) * US
    eta = system.lamb_dicke[system.row(ion), mode]
    seg = system.seg_c[mode] * eta * omega
    cum = np.concatenate([[0.0], np.cumsum(seg)])

    times = np.linspace(0.0, grid.tau_us, n_samples)
    idx = np.minimum((times * n_seg / grid.tau_us).astype(int), n_seg - 1)
    partial = kernels.interval_integrals(
        system.mu_us, [system.mode_freqs[mode] * US], bounds[idx], times
    )[0]
    path = cum[idx] + eta * omega[idx] * partial
    # sample on the final edge is the full sum exactly
    path[-1] = cum[-1]
    return times * US, path
