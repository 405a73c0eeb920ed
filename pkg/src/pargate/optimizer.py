"""Penalty-method pulse solver for M parallel XX gates.

Unknowns are the signed segment amplitudes of each pair (rad/us inside the
objective). The closure conditions alpha = 0 are linear in them and the
spin-spin targets quadratic, so the problem is a non-convex QCQP; it is
turned into one smooth unconstrained objective and handed to L-BFGS-B with
an analytic gradient and box bounds at the power cap.
"""
from __future__ import annotations

import logging
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from itertools import combinations
from typing import Optional

import numpy as np
from scipy.optimize import minimize

from ._backend import kernels
from .chain import ChainSpec, mhz_to_rad, rad_to_mhz
from .fidelity import (
    InteractionSummary,
    ThermalSpec,
    parallel_fidelity,
    sum_fidelity,
)
from .kernel import (
    US,
    AmplitudeVector,
    ConstraintSystem,
    DegenerateDetuningError,
    SegmentGrid,
    alphas,
    build_system,
    chi_of,
)

log = logging.getLogger(__name__)

DEFAULT_POWER_CAP_KHZ = 500.0
DEFAULT_TOLERANCES = {"alpha": 1e-6, "chi": 1e-6}
MAX_ITER = 5000
STALL_WINDOW = 5
STALL_DECREASE = 1e-12
# power weight relative to (pi/4)^2 / cap^2 / S; small enough that the solver
# settles on the feasible pulse nearest its start instead of drifting
POWER_WEIGHT_SCALE = 1e-6
SCHEDULE_ROUNDS = 3


class RequestError(ValueError):
    pass


class PowerCapError(RequestError):
    """The starting pulse already needs more than the allowed Rabi frequency."""


@dataclass(frozen=True)
class GateRequest:
    """Pairs are 0-based ion indices; angles in rad, times in s, rates in rad/s."""

    pairs: tuple
    chi_targets: tuple
    tau: float
    n_segments: int
    mu: Optional[float] = None
    mu_grid: tuple = ()
    power_cap: float = 2 * np.pi * DEFAULT_POWER_CAP_KHZ * 1e3
    tolerances: dict = field(default_factory=lambda: dict(DEFAULT_TOLERANCES))
    blacklist: tuple = ()  # crosstalk ion pairs left unconstrained
    schedule: bool = True
    restarts: int = 0

    def __post_init__(self):
        pairs = tuple(tuple(int(i) for i in p) for p in self.pairs)
        if not pairs:
            raise RequestError("need at least one pair")
        flat = [i for p in pairs for i in p]
        if any(len(p) != 2 for p in pairs) or len(set(flat)) != len(flat):
            raise RequestError(f"pairs must be disjoint ion pairs, got {pairs}")
        targets = tuple(float(c) for c in self.chi_targets)
        if len(targets) != len(pairs):
            raise RequestError(f"{len(pairs)} pairs but {len(targets)} chi targets")
        if not all(np.isfinite(targets)):
            raise RequestError("chi targets must be finite")
        if int(self.n_segments) < 1:
            raise RequestError("need at least one segment")
        if not self.tau > 0:
            raise RequestError("gate time must be positive")
        if not self.power_cap > 0:
            raise RequestError("power cap must be positive")
        grid = tuple(float(m) for m in np.atleast_1d(self.mu_grid)) if self.mu_grid is not None else ()
        if self.mu is None and not grid:
            raise RequestError("need a detuning or a non-empty detuning grid")
        blacklist = tuple(tuple(sorted(int(i) for i in p)) for p in self.blacklist)
        object.__setattr__(self, "pairs", pairs)
        object.__setattr__(self, "chi_targets", targets)
        object.__setattr__(self, "n_segments", int(self.n_segments))
        object.__setattr__(self, "mu_grid", grid)
        object.__setattr__(self, "blacklist", blacklist)
        object.__setattr__(self, "tolerances", {**DEFAULT_TOLERANCES, **dict(self.tolerances)})

    @property
    def ions(self) -> tuple:
        return tuple(i for p in self.pairs for i in p)

    @property
    def grid(self) -> SegmentGrid:
        return SegmentGrid(self.tau, self.n_segments)

    def detunings(self) -> tuple:
        return self.mu_grid if self.mu_grid else (float(self.mu),)

    def at(self, mu: float) -> "GateRequest":
        return replace(self, mu=float(mu), mu_grid=())

    def chi_target_map(self) -> dict:
        """Target for every constrained ion pair, crosstalk pairs at 0."""
        targets = {}
        for a, b in combinations(self.ions, 2):
            key = tuple(sorted((a, b)))
            if key in self.blacklist:
                continue
            targets[(a, b)] = 0.0
        for p, t in zip(self.pairs, self.chi_targets):
            targets[p] = t
        return targets


@dataclass(frozen=True)
class PenaltyWeights:
    w_alpha: float = 1.0
    w_chi: float = 10.0
    w_power: float = 0.0

    def __post_init__(self):
        if not (self.w_alpha > 0 and self.w_chi > 0 and self.w_power >= 0):
            raise RequestError("w_alpha and w_chi must be positive, w_power non-negative")

    @classmethod
    def default_for(cls, request: GateRequest, **overrides) -> "PenaltyWeights":
        cap = request.power_cap * US
        w_power = POWER_WEIGHT_SCALE * (np.pi / 4) ** 2 / cap**2 / request.n_segments
        return cls(**{"w_power": w_power, **overrides})


@dataclass(frozen=True)
class SolveResult:
    mu: float
    solution: Optional[AmplitudeVector]
    residual_alpha: float = np.inf
    residual_chi: float = np.inf
    predicted_fidelity: float = 0.0
    objective_value: float = np.inf
    iterations: int = 0
    converged: bool = False
    chis: dict = field(default_factory=dict)
    error: Optional[str] = None

    @property
    def power(self) -> float:
        """Sum of squared segment amplitudes, (rad/s)^2."""
        if self.solution is None:
            return np.inf
        return float(np.sum(self.solution.amps**2))

    def rank_key(self):
        return (not self.converged, -self.predicted_fidelity, self.power, self.mu)


class PenaltyProblem:
    """Packs a constraint system into the arrays the backend objective needs."""

    def __init__(self, system: ConstraintSystem, request: GateRequest):
        self.system = system
        self.request = request
        self.n_pairs = len(request.pairs)
        self.n_seg = request.n_segments
        pair_of = {i: n for n, p in enumerate(request.pairs) for i in p}
        self.amat = np.stack([
            np.concatenate([system.c(i).T for i in p], axis=0) for p in request.pairs
        ])
        targets = request.chi_target_map()
        self.chi_pairs = tuple(targets)
        self.targets = np.array([targets[p] for p in self.chi_pairs])
        self.kmat = np.stack([system.d_sym(a, b) for a, b in self.chi_pairs])
        self.p_idx = np.array([pair_of[a] for a, _ in self.chi_pairs], dtype=np.int64)
        self.q_idx = np.array([pair_of[b] for _, b in self.chi_pairs], dtype=np.int64)

    def __call__(self, x, weights: PenaltyWeights):
        return kernels.penalty_objective(
            np.ascontiguousarray(x, dtype=float), self.amat, self.kmat, self.p_idx,
            self.q_idx, self.targets, weights.w_alpha, weights.w_chi, weights.w_power,
        )

    def amplitudes(self, x) -> AmplitudeVector:
        return AmplitudeVector(self.request.pairs, np.reshape(x, (self.n_pairs, self.n_seg)) / US)

    def initial_guess(self) -> np.ndarray:
        """One pair all positive, the next flipping sign at mid-gate, further
        pairs with more sign changes; each scaled so its own pair phase alone
        reaches the target magnitude."""
        s = (np.arange(self.n_seg) + 0.5) / self.n_seg
        x = np.empty((self.n_pairs, self.n_seg))
        for n, (a, b) in enumerate(self.request.pairs):
            shape = np.where(np.cos(np.pi * n * s) >= 0, 1.0, -1.0)
            own = shape @ self.system.d_sym(a, b) @ shape
            target = abs(self.request.chi_targets[n]) or np.pi / 4
            scale = np.sqrt(target / abs(own)) if own != 0 else 1.0
            x[n] = scale * shape
        return x.reshape(-1)


def objective(system: ConstraintSystem, request: GateRequest, weights: PenaltyWeights,
              amps: AmplitudeVector):
    """Penalty value and gradient with respect to the amplitudes in rad/us."""
    problem = PenaltyProblem(system, request)
    return problem(amps.amps_us.reshape(-1), weights)


def predicted_fidelity(system: ConstraintSystem, request: GateRequest, amps: AmplitudeVector,
                       nbar) -> float:
    """Analytic fidelity from fresh alpha and chi; closed form for two pairs."""
    thermal = ThermalSpec.from_nbar(nbar)
    al = alphas(system, amps)
    ions = amps.ions
    targets = dict(zip(request.pairs, request.chi_targets))
    if len(request.pairs) == 2:
        chis = [chi_of(system, amps, (ions[a], ions[b])) for a, b in combinations(range(4), 2)]
        summary = InteractionSummary.parallel(al, chis, targets[request.pairs[0]],
                                              targets[request.pairs[1]])
        return float(np.clip(parallel_fidelity(summary, thermal), 0.0, 1.0))
    n = len(ions)
    dchi = np.zeros((n, n))
    for a, b in combinations(range(n), 2):
        pair = (ions[a], ions[b])
        dchi[a, b] = chi_of(system, amps, pair) - targets.get(pair, 0.0)
    return float(np.clip(sum_fidelity(al, dchi, thermal.beta), 0.0, 1.0))


def evaluate(system: ConstraintSystem, request: GateRequest, amps: AmplitudeVector,
             nbar) -> dict:
    al = alphas(system, amps)
    chis = {p: chi_of(system, amps, p) for p in combinations(request.ions, 2)}
    targets = request.chi_target_map()
    dchi = [abs(chis[p] - t) for p, t in targets.items()]
    return {
        "residual_alpha": float(np.max(np.abs(al))),
        "residual_chi": float(max(dchi)),
        "chis": chis,
        "predicted_fidelity": predicted_fidelity(system, request, amps, nbar),
    }


def _minimize(problem: PenaltyProblem, x0, weights: PenaltyWeights, bound: float):
    history = []

    def stall(intermediate_result):
        history.append(intermediate_result.fun)
        if len(history) > STALL_WINDOW and history[-STALL_WINDOW - 1] - history[-1] < STALL_DECREASE:
            raise StopIteration

    _, g0 = problem(x0, weights)
    gtol = 1e-9 * max(float(np.max(np.abs(g0))), np.finfo(float).tiny)
    res = minimize(
        problem, x0, args=(weights,), jac=True, method="L-BFGS-B",
        bounds=[(-bound, bound)] * len(x0), callback=stall,
        options={"maxiter": MAX_ITER, "maxcor": 30, "ftol": 0.0, "gtol": gtol, "maxls": 40},
    )
    return res.x, float(res.fun), int(res.nit)


def solve(chain: ChainSpec, request: GateRequest, weights: Optional[PenaltyWeights] = None,
          seed: int = 0) -> SolveResult:
    """Solve one detuning; ``request.mu`` must be set."""
    if request.mu is None:
        raise RequestError("solve needs a single detuning")
    weights = weights or PenaltyWeights.default_for(request)
    for i in request.ions:
        if not 0 <= i < chain.n_ions:
            raise RequestError(f"ion {i + 1} outside a {chain.n_ions}-ion chain")
    system = build_system(chain, request.ions, request.mu, request.grid)
    problem = PenaltyProblem(system, request)
    bound = request.power_cap * US
    x0 = problem.initial_guess()
    if np.max(np.abs(x0)) > bound:
        raise PowerCapError(
            f"initial pulse needs {np.max(np.abs(x0)) / US / (2e3 * np.pi):.1f} kHz, "
            f"cap is {request.power_cap / (2e3 * np.pi):.1f} kHz"
        )
    rng = np.random.default_rng(seed)
    starts = [x0] + [
        np.clip(x0 * (1.0 + 0.1 * rng.standard_normal(x0.shape)), -bound, bound)
        for _ in range(request.restarts)
    ]
    tol = request.tolerances
    best = None
    for start in starts:
        x, w, nit = start, weights, 0
        rounds = 1 + SCHEDULE_ROUNDS if request.schedule else 1
        for r in range(rounds):
            x, fun, it = _minimize(problem, x, w, bound)
            nit += it
            amps = problem.amplitudes(x)
            metrics = evaluate(system, request, amps, chain.nbar)
            if metrics["residual_alpha"] < tol["alpha"] and metrics["residual_chi"] < tol["chi"]:
                break
            if r + 1 < rounds:
                w = replace(w, w_alpha=w.w_alpha * 10, w_chi=w.w_chi * 10)
        value = float(problem(x, weights)[0])
        if best is None or value < best[0]:
            best = (value, x, nit, metrics)
    value, x, nit, metrics = best
    converged = metrics["residual_alpha"] < tol["alpha"] and metrics["residual_chi"] < tol["chi"]
    if not converged:
        log.warning("mu/2pi=%.6f MHz not converged: |alpha|=%.3g |dchi|=%.3g",
                    rad_to_mhz(request.mu), metrics["residual_alpha"], metrics["residual_chi"])
    return SolveResult(
        mu=float(request.mu), solution=problem.amplitudes(x),
        residual_alpha=metrics["residual_alpha"], residual_chi=metrics["residual_chi"],
        predicted_fidelity=metrics["predicted_fidelity"], objective_value=value,
        iterations=nit, converged=converged, chis=metrics["chis"],
    )


def thread_count() -> int:
    try:
        return max(1, int(os.environ.get("PARGATE_THREADS", "1")))
    except ValueError:
        return 1


def solve_scan(chain: ChainSpec, request: GateRequest, weights: Optional[PenaltyWeights] = None,
               seed: int = 0) -> list:
    """One solve per detuning, best first: converged, then fidelity, then power, then mu."""
    grid = request.detunings()
    if not grid:
        raise RequestError("empty detuning grid")

    def one(mu):
        try:
            return solve(chain, request.at(mu), weights, seed)
        except DegenerateDetuningError as exc:
            return SolveResult(mu=float(mu), solution=None, error=str(exc))

    workers = min(thread_count(), len(grid))
    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(one, grid))
    else:
        results = [one(mu) for mu in grid]
    return sorted(results, key=SolveResult.rank_key)


def power_ratio(parallel: SolveResult, single_a: SolveResult, single_b: SolveResult):
    """Mean-square amplitude of each parallel pair over its stand-alone gate."""
    for r in (parallel, single_a, single_b):
        if not r.converged or r.solution is None:
            raise RequestError("power ratio needs converged solutions")
    ratios = []
    for single in (single_a, single_b):
        if len(single.solution.pairs) != 1:
            raise RequestError("stand-alone result must drive exactly one pair")
        pair = single.solution.pairs[0]
        if pair not in parallel.solution.pairs:
            raise RequestError(f"pair {pair} not in the parallel solution")
        par = parallel.solution.amps[parallel.solution.pairs.index(pair)]
        ratios.append(float(np.mean(par**2) / np.mean(single.solution.amps[0] ** 2)))
    return tuple(ratios)


# -- config documents -------------------------------------------------------

def request_from_config(doc: dict) -> GateRequest:
    """Parse a request document: 1-based pairs, chi in units of pi, us, MHz, kHz."""
    try:
        pairs = [tuple(int(i) - 1 for i in p) for p in doc["pairs"]]
        chi = [float(c) * np.pi for c in doc.get("chi_targets", [0.25] * len(pairs))]
        mu = mhz_to_rad(float(doc["mu_mhz"])) if doc.get("mu_mhz") is not None else None
        grid = ()
        if doc.get("mu_scan_mhz") is not None:
            scan = doc["mu_scan_mhz"]
            steps = int(scan["steps"])
            if steps < 1:
                raise RequestError("detuning scan needs at least one step")
            grid = tuple(mhz_to_rad(np.linspace(float(scan["start"]), float(scan["stop"]), steps)))
        if any(i < 0 for p in pairs for i in p):
            raise RequestError("ion indices are 1-based")
        return GateRequest(
            pairs=pairs, chi_targets=chi, tau=float(doc["tau_us"]) * US,
            n_segments=int(doc["n_segments"]), mu=mu, mu_grid=grid,
            power_cap=2 * np.pi * 1e3 * float(doc.get("power_cap_rabi_khz", DEFAULT_POWER_CAP_KHZ)),
            tolerances=doc.get("tolerances", {}),
            blacklist=[tuple(int(i) - 1 for i in p) for p in doc.get("blacklist", [])],
            schedule=bool(doc.get("schedule", True)),
            restarts=int(doc.get("restarts", 0)),
        )
    except (KeyError, TypeError) as exc:
        raise RequestError(f"malformed request: {exc!r}") from exc


def weights_from_config(doc: dict, request: GateRequest) -> PenaltyWeights:
    return PenaltyWeights.default_for(request, **{
        k: float(v) for k, v in (doc.get("weights") or {}).items()
        if k in ("w_alpha", "w_chi", "w_power")
    })


def solution_to_json(result: SolveResult, request: GateRequest) -> dict:
    amps = result.solution
    return {
        "mu_mhz": rad_to_mhz(result.mu),
        "tau_us": request.tau / US,
        "n_segments": request.n_segments,
        "pairs": [[i + 1 for i in p] for p in amps.pairs],
        "chi_targets_pi": [t / np.pi for t in request.chi_targets],
        "amplitudes_khz": [[float(v) for v in row / (2e3 * np.pi)] for row in amps.amps],
        "residual_alpha": result.residual_alpha,
        "residual_chi": result.residual_chi,
        "predicted_fidelity": result.predicted_fidelity,
        "objective_value": result.objective_value,
        "iterations": result.iterations,
        "converged": result.converged,
    }


def solution_from_json(doc: dict):
    """Rebuild ``(request, amplitudes)`` from a stored solution document."""
    try:
        pairs = [tuple(int(i) - 1 for i in p) for p in doc["pairs"]]
        request = GateRequest(
            pairs=pairs, chi_targets=[float(c) * np.pi for c in doc["chi_targets_pi"]],
            tau=float(doc["tau_us"]) * US, n_segments=int(doc["n_segments"]),
            mu=mhz_to_rad(float(doc["mu_mhz"])),
        )
        amps = AmplitudeVector(pairs, np.array(doc["amplitudes_khz"], dtype=float) * 2e3 * np.pi)
    except (KeyError, TypeError, ValueError) as exc:
        raise RequestError(f"malformed solution: {exc!r}") from exc
    if amps.n_segments != request.n_segments:
        raise RequestError("amplitude rows do not match n_segments")
    return request, amps
