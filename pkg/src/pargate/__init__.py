"""Pulse design, analytic fidelity and circuit checks for parallel XX gates on ion chains."""
from ._backend import BACKEND
from .chain import ChainSpec, load_chain, reference_chain
from .fidelity import (
    InteractionSummary,
    ThermalSpec,
    gamma,
    ghz_fidelity,
    parallel_fidelity,
)
from .kernel import AmplitudeVector, SegmentGrid, build_system
from .optimizer import GateRequest, PenaltyWeights, SolveResult, solve, solve_scan

__version__ = "0.1.0"

__all__ = [
    "BACKEND",
    "AmplitudeVector",
    "ChainSpec",
    "GateRequest",
    "InteractionSummary",
    "PenaltyWeights",
    "SegmentGrid",
    "SolveResult",
    "ThermalSpec",
    "build_system",
    "gamma",
    "ghz_fidelity",
    "load_chain",
    "reference_chain",
    "parallel_fidelity",
    "solve",
    "solve_scan",
]
