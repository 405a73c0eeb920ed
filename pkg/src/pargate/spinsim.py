"""Exact statevector simulation of R, Rz and XX circuits.

Qubit 1 is the leftmost ket label and the most significant bit of a basis
index, so ``|x y C 0>`` with x = 1 is index 8 on four qubits.

Gate conventions::

    R(theta, phi) = [[cos(theta/2), -i e^{-i phi} sin(theta/2)],
                     [-i e^{i phi} sin(theta/2), cos(theta/2)]]
    Rz(theta)     = diag(e^{-i theta/2}, e^{i theta/2})
    XX(chi)       = exp(-i chi X X)       (cos chi on the diagonal)

with ``Ry(theta) = R(theta, pi/2)`` and ``Rx(theta) = R(theta, 0)``.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from functools import reduce
from itertools import combinations, product
from typing import Sequence

import numpy as np

NORM_TOL = 1e-12


class CircuitError(ValueError):
    pass


# -- single and two-qubit matrices -----------------------------------------

def r_matrix(theta: float, phi: float) -> np.ndarray:
    c, s = np.cos(theta / 2), np.sin(theta / 2)
    return np.array([[c, -1j * np.exp(-1j * phi) * s], [-1j * np.exp(1j * phi) * s, c]])


def rz_matrix(theta: float) -> np.ndarray:
    return np.diag([np.exp(-0.5j * theta), np.exp(0.5j * theta)])


def xx_matrix(chi: float) -> np.ndarray:
    c, s = np.cos(chi), -1j * np.sin(chi)
    return np.array([[c, 0, 0, s], [0, c, s, 0], [0, s, c, 0], [s, 0, 0, c]])


@dataclass(frozen=True)
class Gate:
    """One gate on 1-based qubits; angles in rad."""

    name: str  # "R", "Rz" or "XX"
    qubits: tuple
    theta: float = 0.0
    phi: float = 0.0
    chi: float = 0.0

    def __post_init__(self):
        qubits = tuple(int(q) for q in self.qubits)
        need = {"R": 1, "Rz": 1, "XX": 2}.get(self.name)
        if need is None:
            raise CircuitError(f"unknown gate {self.name!r}")
        if len(qubits) != need:
            raise CircuitError(f"{self.name} acts on {need} qubit(s), got {qubits}")
        if len(set(qubits)) != len(qubits):
            raise CircuitError(f"{self.name} needs distinct qubits, got {qubits}")
        object.__setattr__(self, "qubits", qubits)

    def matrix(self) -> np.ndarray:
        if self.name == "R":
            return r_matrix(self.theta, self.phi)
        if self.name == "Rz":
            return rz_matrix(self.theta)
        return xx_matrix(self.chi)


def R(q, theta, phi=0.0):
    return Gate("R", (q,), theta=theta, phi=phi)


def Rx(q, theta):
    return R(q, theta, 0.0)


def Ry(q, theta):
    return R(q, theta, np.pi / 2)


def Rz(q, theta):
    return Gate("Rz", (q,), theta=theta)


def XX(q1, q2, chi):
    return Gate("XX", (q1, q2), chi=chi)


@dataclass
class Circuit:
    n_qubits: int
    gates: list = field(default_factory=list)
    # lists of gate indices that run at the same time; depth bookkeeping only
    groups: list = field(default_factory=list)

    def __post_init__(self):
        for g in self.gates:
            self._check(g)

    def _check(self, gate: Gate):
        for q in gate.qubits:
            if not 1 <= q <= self.n_qubits:
                raise CircuitError(f"qubit {q} outside 1..{self.n_qubits}")

    def append(self, *gates: Gate) -> "Circuit":
        for g in gates:
            self._check(g)
            self.gates.append(g)
        return self

    def extend(self, other: "Circuit", parallel: bool = False) -> "Circuit":
        start = len(self.gates)
        self.append(*other.gates)
        self.groups.extend([[start + i for i in grp] for grp in other.groups])
        return self

    def mark_parallel(self, indices: Sequence[int]):
        self.groups.append(list(indices))

    def two_qubit_depth(self) -> int:
        """XX layers when each marked group counts once."""
        grouped = {i for grp in self.groups for i in grp}
        xx = [i for i, g in enumerate(self.gates) if g.name == "XX"]
        depth = sum(1 for i in xx if i not in grouped)
        depth += sum(1 for grp in self.groups if any(self.gates[i].name == "XX" for i in grp))
        return depth

    def unitary(self) -> np.ndarray:
        dim = 2**self.n_qubits
        u = np.eye(dim, dtype=complex)
        for col in range(dim):
            state = StateVector(self.n_qubits, u[:, col])
            run(state, self)
            u[:, col] = state.amplitudes
        return u


# -- state ----------------------------------------------------------------

class StateVector:
    def __init__(self, n_qubits: int, amplitudes=None):
        self.n_qubits = int(n_qubits)
        if amplitudes is None:
            amplitudes = np.zeros(2**self.n_qubits, dtype=complex)
            amplitudes[0] = 1.0
        amps = np.array(amplitudes, dtype=complex).reshape(-1)
        if amps.size != 2**self.n_qubits:
            raise CircuitError(f"{amps.size} amplitudes for {self.n_qubits} qubits")
        if abs(np.vdot(amps, amps).real - 1.0) > NORM_TOL:
            raise CircuitError("state is not normalised")
        self.amplitudes = amps

    @classmethod
    def basis(cls, bits: str) -> "StateVector":
        n = len(bits)
        amps = np.zeros(2**n, dtype=complex)
        amps[int(bits, 2)] = 1.0
        return cls(n, amps)

    def copy(self) -> "StateVector":
        return StateVector(self.n_qubits, self.amplitudes.copy())

    def norm(self) -> float:
        return float(np.sqrt(np.vdot(self.amplitudes, self.amplitudes).real))

    def probabilities(self) -> np.ndarray:
        return np.abs(self.amplitudes) ** 2

    def overlap(self, other: "StateVector") -> complex:
        return complex(np.vdot(self.amplitudes, other.amplitudes))


def apply(state: StateVector, gate: Gate) -> StateVector:
    """Apply ``gate`` in place and return the state."""
    n = state.n_qubits
    for q in gate.qubits:
        if not 1 <= q <= n:
            raise CircuitError(f"qubit {q} outside 1..{n}")
    axes = [q - 1 for q in gate.qubits]
    k = len(axes)
    psi = state.amplitudes.reshape((2,) * n)
    psi = np.moveaxis(psi, axes, range(k))
    shape = psi.shape
    psi = (gate.matrix() @ psi.reshape(2**k, -1)).reshape(shape)
    state.amplitudes = np.moveaxis(psi, range(k), axes).reshape(-1).copy()
    return state


def run(state: StateVector, circuit: Circuit) -> StateVector:
    if circuit.n_qubits != state.n_qubits:
        raise CircuitError("circuit and state sizes differ")
    for g in circuit.gates:
        apply(state, g)
    return state


def global_phase_distance(a: np.ndarray, b: np.ndarray) -> float:
    """Max entrywise deviation after aligning ``b``'s global phase to ``a``
    on the largest-magnitude entry of ``a``."""
    a = np.asarray(a)
    b = np.asarray(b)
    idx = np.unravel_index(np.argmax(np.abs(a)), a.shape)
    if abs(b[idx]) == 0:
        return float(np.max(np.abs(a - b)))
    phase = a[idx] / b[idx]
    phase /= abs(phase)
    return float(np.max(np.abs(a - phase * b)))


# -- parity analysis --------------------------------------------------------

@dataclass(frozen=True)
class ParityFit:
    offset: float  # 2 A_12 cos(phi_12)
    amplitude: float  # A_Pi
    phase: float  # phi_03
    periods: int  # dominant oscillation count over [0, 2 pi)

    def model(self, phi):
        return self.offset - self.amplitude * np.cos(2 * np.asarray(phi) - self.phase)


@dataclass(frozen=True)
class ParityScan:
    phases: np.ndarray
    parities: np.ndarray
    fit: ParityFit
    populations: np.ndarray  # |00>, |01>, |10>, |11> right after the XX gate


def sk1_rotation(q: int, theta: float, phi: float, error: float = 0.0) -> list:
    """SK1 composite rotation; every pulse over-rotates by the fraction ``error``."""
    phi1 = np.arccos(-theta / (4 * np.pi))
    scale = 1.0 + error
    return [
        R(q, theta * scale, phi),
        R(q, 2 * np.pi * scale, phi - phi1),
        R(q, 2 * np.pi * scale, phi + phi1),
    ]


def analysis_rotation(q: int, theta: float, phi: float, analysis: str = "plain",
                      error: float = 0.0) -> list:
    if analysis == "plain":
        return [R(q, theta * (1.0 + error), phi)]
    if analysis == "sk1":
        return sk1_rotation(q, theta, phi, error)
    raise CircuitError(f"unknown analysis {analysis!r}")


def fit_parity(phases, parities) -> ParityFit:
    """Least-squares ``c - A cos(2 phi - phi0)`` through linear cos/sin terms."""
    phases = np.asarray(phases, dtype=float)
    parities = np.asarray(parities, dtype=float)
    design = np.column_stack([np.ones_like(phases), np.cos(2 * phases), np.sin(2 * phases)])
    (c, a, b), *_ = np.linalg.lstsq(design, parities, rcond=None)
    amplitude = float(np.hypot(a, b))
    phase = float(np.arctan2(-b, -a)) if amplitude > 0 else 0.0
    spectrum = np.abs(np.fft.rfft(parities - parities.mean()))
    periods = int(np.argmax(spectrum)) if spectrum[1:].max(initial=0) > 1e-9 else 0
    return ParityFit(float(c), amplitude, phase, periods)


def parity_scan(chi: float, n_points: int = 24, analysis: str = "plain",
                error: float = 0.0) -> ParityScan:
    """XX(chi) on |00>, then a pi/2 analysis rotation of phase phi on both qubits."""
    if n_points < 5:
        raise CircuitError("parity scan needs at least 5 points")
    prepared = apply(StateVector(2), XX(1, 2, chi))
    phases = 2 * np.pi * np.arange(n_points) / n_points
    sign = np.array([1, -1, -1, 1])
    parities = np.empty(n_points)
    for n, phi in enumerate(phases):
        state = prepared.copy()
        for q in (1, 2):
            for g in analysis_rotation(q, np.pi / 2, phi, analysis, error):
                apply(state, g)
        parities[n] = sign @ state.probabilities()
    return ParityScan(phases, parities, fit_parity(phases, parities), prepared.probabilities())


def fidelity_from_parity(rho00: float, rho33: float, a_pi: float, chi: float) -> float:
    """Two-qubit XX(chi) fidelity from |00>, |11> populations and parity amplitude."""
    for p in (rho00, rho33):
        if not -1e-12 <= p <= 1 + 1e-12:
            raise CircuitError("populations must lie in [0, 1]")
    return float(rho00 * np.cos(chi) ** 2 + rho33 * np.sin(chi) ** 2
                 + a_pi * np.cos(chi) * np.sin(chi))


# -- compiled circuits -------------------------------------------------------

def compile_cnot(control: int, target: int, n_qubits: int = None) -> Circuit:
    """CNOT from one XX(pi/4) and single-qubit rotations (exact up to global phase)."""
    if control == target:
        raise CircuitError("control and target must differ")
    n = n_qubits or max(control, target)
    return Circuit(n, [
        Ry(control, np.pi / 2),
        XX(control, target, np.pi / 4),
        Rx(control, -np.pi / 2),
        Rx(target, -np.pi / 2),
        Ry(control, -np.pi / 2),
    ])


def hadamard(q: int) -> list:
    """H up to global phase: pi about z, then pi/2 about y."""
    return [Rz(q, np.pi), Ry(q, np.pi / 2)]


def compile_toffoli(c1: int, c2: int, target: int, n_qubits: int) -> Circuit:
    """Standard six-CNOT Toffoli with T gates as Rz(pi/4)."""
    t, tdg = np.pi / 4, -np.pi / 4
    circ = Circuit(n_qubits)

    def cx(a, b):
        circ.extend(compile_cnot(a, b, n_qubits))

    circ.append(*hadamard(target))
    cx(c2, target)
    circ.append(Rz(target, tdg))
    cx(c1, target)
    circ.append(Rz(target, t))
    cx(c2, target)
    circ.append(Rz(target, tdg))
    cx(c1, target)
    circ.append(Rz(c2, t), Rz(target, t))
    circ.append(*hadamard(target))
    cx(c1, c2)
    circ.append(Rz(c1, t), Rz(c2, tdg))
    cx(c1, c2)
    return circ


def _unitary_of(n: int, gates: list) -> np.ndarray:
    return Circuit(n, list(gates)).unitary()


def feynman_adder() -> Circuit:
    circ = Circuit(4)
    circ.extend(compile_toffoli(1, 2, 4, 4))
    circ.extend(compile_cnot(1, 2, 4))
    circ.extend(compile_toffoli(2, 3, 4, 4))
    circ.extend(compile_cnot(2, 3, 4))
    return circ


def optimized_adder() -> Circuit:
    """Depth-4 adder on |x, y, C_in, 0> built from two parallel XX layers."""
    p4, p8 = np.pi / 4, np.pi / 8
    circ = Circuit(4, [
        Rz(1, -3 * p4), Rz(2, -p4), Rz(3, p4), Rx(4, -2 * p4),
        Ry(1, 2 * p4), Ry(2, 2 * p4), Ry(3, 2 * p4),
        XX(2, 4, p8),
        Ry(2, -2 * p4),
        XX(1, 2, p4), XX(3, 4, p8),
        Rz(2, -2 * p4), Rz(3, -2 * p4),
        XX(1, 4, p8), XX(2, 3, p4),
        Ry(1, -2 * p4), Ry(2, 2 * p4), Ry(3, 2 * p4),
        XX(3, 4, -p8),
        Rz(2, np.pi), Ry(3, -2 * p4),
        Rz(3, p4),
    ])
    circ.mark_parallel([9, 10])
    circ.mark_parallel([13, 14])
    return circ


def parallel_cnots() -> Circuit:
    circ = Circuit(4)
    circ.extend(compile_cnot(1, 4, 4))
    circ.extend(compile_cnot(2, 3, 4))
    circ.mark_parallel([1, 6])
    return circ


# -- truth tables -------------------------------------------------------------

def bitstrings(n: int) -> list:
    return ["".join(b) for b in product("01", repeat=n)]


def truth_table(circuit: Circuit, inputs: Sequence[str]) -> np.ndarray:
    """Output probabilities (rows follow ``inputs``, columns all bitstrings)."""
    table = np.empty((len(inputs), 2**circuit.n_qubits))
    for r, bits in enumerate(inputs):
        table[r] = run(StateVector.basis(bits), circuit).probabilities()
    return table


def run_parallel_cnots():
    inputs = bitstrings(4)
    return inputs, truth_table(parallel_cnots(), inputs)


def adder_inputs() -> list:
    return [bits + "0" for bits in bitstrings(3)]


def run_adder(variant: str = "optimized"):
    if variant == "optimized":
        circ = optimized_adder()
    elif variant == "feynman":
        circ = feynman_adder()
    else:
        raise CircuitError(f"unknown adder variant {variant!r}")
    inputs = adder_inputs()
    return inputs, truth_table(circ, inputs)


def classical_adder(bits: str) -> str:
    """Expected ``x, x^y, S, C_out`` for an input ``x y C_in 0``."""
    x, y, c = (int(b) for b in bits[:3])
    s = x ^ y ^ c
    carry = (x & y) ^ (c & (x ^ y))
    return f"{x}{x ^ y}{s}{carry}"


def classical_parallel_cnots(bits: str) -> str:
    q = [int(b) for b in bits]
    q[3] ^= q[0]
    q[2] ^= q[1]
    return "".join(str(b) for b in q)


def truth_table_fidelity(table, expected: Sequence[str], tol: float = 1e-9) -> float:
    """Mean probability of the expected output over all input rows."""
    table = np.atleast_2d(np.asarray(table, dtype=float))
    if len(expected) != table.shape[0]:
        raise CircuitError("one expected output per row needed")
    if np.any(np.abs(table.sum(axis=1) - 1.0) > tol) or np.any(table < -tol):
        raise CircuitError("rows must be probability distributions")
    return float(np.mean([table[r, int(bits, 2)] for r, bits in enumerate(expected)]))


# -- GHZ -------------------------------------------------------------------

def ghz_interaction(n_qubits: int = 4, chi: float = np.pi / 4) -> Circuit:
    """All-pairs interaction ``exp(+i chi sum_{a<b} X_a X_b)``.

    The entangling interaction generated by the pulses carries the opposite
    sign to the XX(chi) gate matrix, so each pair is XX(-chi) here.
    """
    return Circuit(n_qubits, [XX(a, b, -chi) for a, b in combinations(range(1, n_qubits + 1), 2)])


def ghz_ideal_unitary(n_qubits: int = 4) -> np.ndarray:
    x = np.array([[0, 1], [1, 0]])
    xs = reduce(np.kron, [x] * n_qubits)
    return (np.eye(2**n_qubits) - 1j * xs) / np.sqrt(2)


def run_ghz() -> StateVector:
    """Six pairwise pi/4 interactions then Rz(pi/2) on qubit 1 from |0000>."""
    interaction = ghz_interaction(4)
    dist = global_phase_distance(ghz_ideal_unitary(4), interaction.unitary())
    if dist > 1e-12:
        raise AssertionError(f"all-pairs interaction differs from the GHZ unitary by {dist:.2e}")
    state = run(StateVector(4), interaction)
    return apply(state, Rz(1, np.pi / 2))


# -- circuit documents -------------------------------------------------------

def circuit_from_config(doc) -> Circuit:
    """Gate list with angles in units of pi and 1-based qubits."""
    gates_doc = doc["gates"] if isinstance(doc, dict) else doc
    try:
        gates = []
        groups = []
        for n, g in enumerate(gates_doc):
            kind = g["gate"]
            if kind == "XX":
                gates.append(XX(*g["qubits"], chi=np.pi * float(g["chi_pi"])))
            elif kind in ("R", "Rx", "Ry"):
                phi = {"Rx": 0.0, "Ry": 0.5}.get(kind, g.get("phi_pi", 0.0))
                gates.append(R(g["qubit"], np.pi * float(g["theta_pi"]), np.pi * float(phi)))
            elif kind == "Rz":
                gates.append(Rz(g["qubit"], np.pi * float(g["theta_pi"])))
            else:
                raise CircuitError(f"unknown gate {kind!r}")
            if "group" in g:
                groups.append((g["group"], n))
    except (KeyError, TypeError) as exc:
        raise CircuitError(f"malformed circuit: {exc!r}") from exc
    n_qubits = doc.get("n_qubits") if isinstance(doc, dict) else None
    n_qubits = int(n_qubits or max(q for g in gates for q in g.qubits))
    circ = Circuit(n_qubits, gates)
    for key in dict.fromkeys(k for k, _ in groups):
        circ.mark_parallel([n for k, n in groups if k == key])
    return circ
