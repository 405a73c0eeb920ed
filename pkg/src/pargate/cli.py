"""Command-line pipeline: solve pulses, evaluate stored solutions, simulate circuits.

Every command assembles its outputs in memory and writes them at the end
through temp-file-and-rename, so a failed run leaves no partial files.
Payloads are byte-deterministic for a fixed config and seed; only the
manifest's duration varies.

Exit codes: 0 ok, 2 config error, 3 solver not converged, 4 I/O error.
"""
from __future__ import annotations

import argparse
import io
import json
import logging
import os
import sys
import tempfile
import time
from importlib import resources
from itertools import combinations
from pathlib import Path

import numpy as np

from . import __version__
from ._backend import BACKEND
from .chain import ChainConfigError, load_chain, reference_chain_config
from .fidelity import InteractionSummary, ThermalSpec, evaluator_report, sum_fidelity
from .kernel import KernelError, alphas, build_system, chi_of, trajectory
from .optimizer import (
    RequestError,
    request_from_config,
    solution_from_json,
    solution_to_json,
    solve,
    solve_scan,
    weights_from_config,
)
from . import spinsim

log = logging.getLogger("pargate")

EXIT_OK, EXIT_CONFIG, EXIT_NOT_CONVERGED, EXIT_IO = 0, 2, 3, 4
SAMPLES_PER_SEGMENT = 10
BUILTINS = ("parallel-cnots", "adder-feynman", "adder-optimized", "ghz", "parity")
FIDELITY_LABEL = "mean correct-output population"


class ConfigError(Exception):
    pass


# -- serialisation ----------------------------------------------------------

def _clean(obj):
    """JSON-ready copy with numpy scalars unwrapped and -0.0 folded to 0.0."""
    if isinstance(obj, dict):
        return {str(k): _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _clean(obj.tolist())
    if isinstance(obj, (np.bool_, bool)):
        return bool(obj)
    if isinstance(obj, (np.integer, int)):
        return int(obj)
    if isinstance(obj, (np.floating, float)):
        v = float(obj)
        return 0.0 if v == 0.0 else v
    return obj


def dumps(doc) -> str:
    return json.dumps(_clean(doc), indent=2, sort_keys=True, allow_nan=True) + "\n"


def csv_text(header, rows) -> str:
    buf = io.StringIO()
    buf.write(",".join(header) + "\n")
    for row in rows:
        buf.write(",".join(row) + "\n")
    return buf.getvalue()


class Outputs:
    """Files collected in memory, written atomically on commit."""

    def __init__(self):
        self.files = {}

    def add(self, relpath: str, text: str):
        self.files[relpath] = text

    def commit(self, root: Path) -> list:
        root = Path(root)
        written = []
        for rel, text in self.files.items():
            target = root / rel
            target.parent.mkdir(parents=True, exist_ok=True)
            fd, tmp = tempfile.mkstemp(dir=target.parent, prefix=f".{target.name}.", suffix=".tmp")
            try:
                with os.fdopen(fd, "w", newline="\n") as fh:
                    fh.write(text)
                os.replace(tmp, target)
            except BaseException:
                if os.path.exists(tmp):
                    os.unlink(tmp)
                raise
            written.append(str(target))
        return written


def read_json(path):
    try:
        with open(path) as fh:
            return json.load(fh)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: invalid JSON ({exc})") from exc


def _chain_doc(path):
    if path is None:
        return reference_chain_config()
    return read_json(path)


def write_manifest(out: Outputs, root: Path, name: str, command: str, config: dict,
                   seed, started: float):
    paths = [str(Path(root) / rel) for rel in out.files]
    manifest = {
        "command": command,
        "config": config,
        "seed": seed,
        "version": __version__,
        "backend": BACKEND,
        "outputs": sorted(paths),
        "duration_s": time.perf_counter() - started,
    }
    out.add(name, dumps(manifest))
    return manifest


# -- report ------------------------------------------------------------------

def build_report(chain, request, amps) -> dict:
    """Evaluator report recomputed from the chain and the amplitudes alone."""
    for i in amps.ions:
        if not 0 <= i < chain.n_ions:
            raise RequestError(f"solution drives ion {i + 1} but the chain has {chain.n_ions}")
    system = build_system(chain, amps.ions, request.mu, request.grid)
    thermal = ThermalSpec.from_nbar(chain.nbar)
    al = alphas(system, amps)
    ions = amps.ions
    targets = request.chi_target_map()
    if len(amps.pairs) == 2:
        chis = [chi_of(system, amps, (ions[a], ions[b])) for a, b in combinations(range(4), 2)]
        target = dict(zip(request.pairs, request.chi_targets))
        summary = InteractionSummary.parallel(al, chis, target[amps.pairs[0]], target[amps.pairs[1]])
        report = evaluator_report(summary, thermal, ions=ions)
    else:
        n = len(ions)
        dchi = np.zeros((n, n))
        chi_map, ideal_map = {}, {}
        for a, b in combinations(range(n), 2):
            pair = (ions[a], ions[b])
            chi = chi_of(system, amps, pair)
            ideal = targets.get(pair, targets.get(pair[::-1], 0.0))
            dchi[a, b] = chi - ideal
            label = "-".join(str(i + 1) for i in sorted(pair))
            chi_map[label] = chi
            ideal_map[label] = ideal
        report = {
            "F_parallel": sum_fidelity(al, dchi, thermal.beta),
            "alpha_abs": {f"ion{i + 1}": np.abs(row) for i, row in zip(ions, al)},
            "chi": chi_map,
            "chi_ideal": ideal_map,
        }
    dchi_vals = [abs(report["chi"][k] - report["chi_ideal"][k]) for k in report["chi"]]
    report["residual_alpha"] = float(np.max(np.abs(al)))
    report["residual_chi"] = float(max(dchi_vals))
    report["mu_mhz"] = request.mu / (2e6 * np.pi)
    report["nbar"] = np.atleast_1d(chain.nbar)
    return report


def trajectory_files(out: Outputs, chain, request, amps, samples_per_segment=SAMPLES_PER_SEGMENT):
    system = build_system(chain, amps.ions, request.mu, request.grid)
    n_samples = samples_per_segment * request.n_segments + 1
    for ion in amps.ions:
        for mode in range(system.n_modes):
            t, path = trajectory(system, amps, ion, mode, n_samples)
            rows = (
                (f"{ts * 1e6:.9f}", repr(float(z.real)), repr(float(z.imag)), str(ion + 1), str(mode + 1))
                for ts, z in zip(t, path)
            )
            out.add(f"trajectories/ion{ion + 1}_mode{mode + 1}.csv",
                    csv_text(("t_us", "re_alpha", "im_alpha", "ion", "mode"), rows))


# -- commands -----------------------------------------------------------------

def parse_mu_scan(text: str) -> dict:
    try:
        start, stop, steps = text.split(":")
        return {"start": float(start), "stop": float(stop), "steps": int(steps)}
    except ValueError as exc:
        raise ConfigError(f"--mu-scan expects START:STOP:STEPS in MHz, got {text!r}") from exc


def cmd_solve(args) -> int:
    started = time.perf_counter()
    chain_doc = _chain_doc(args.chain)
    chain = load_chain(chain_doc)
    req_doc = dict(read_json(args.request))
    if args.mu_scan:
        req_doc["mu_scan_mhz"] = parse_mu_scan(args.mu_scan)
        req_doc.pop("mu_mhz", None)
    request = request_from_config(req_doc)
    weights = weights_from_config(req_doc, request)

    out = Outputs()
    if request.mu_grid:
        results = solve_scan(chain, request, weights, seed=args.seed)
        out.add("scan.json", dumps({"points": [
            {
                "mu_mhz": r.mu / (2e6 * np.pi),
                "converged": r.converged,
                "predicted_fidelity": r.predicted_fidelity,
                "residual_alpha": r.residual_alpha,
                "residual_chi": r.residual_chi,
                "power": r.power,
                "error": r.error,
            }
            for r in results
        ]}))
        best = results[0]
        if best.solution is None:
            raise RequestError("every detuning in the scan was degenerate")
        request = request.at(best.mu)
    else:
        best = solve(chain, request, weights, seed=args.seed)

    out.add("solution.json", dumps(solution_to_json(best, request)))
    out.add("report.json", dumps(build_report(chain, request, best.solution)))
    trajectory_files(out, chain, request, best.solution)
    config = {"chain": chain_doc, "request": req_doc}
    write_manifest(out, args.out, "manifest.json", "solve", config, args.seed, started)
    out.commit(args.out)
    log.info("mu/2pi=%.6f MHz converged=%s F=%.9f", best.mu / (2e6 * np.pi), best.converged,
             best.predicted_fidelity)
    return EXIT_OK if best.converged else EXIT_NOT_CONVERGED


def cmd_evaluate(args) -> int:
    started = time.perf_counter()
    chain_doc = _chain_doc(args.chain)
    chain = load_chain(chain_doc)
    sol_doc = read_json(args.solution)
    request, amps = solution_from_json(sol_doc)
    report = build_report(chain, request, amps)
    out_path = Path(args.out)
    if out_path.suffix == ".json":
        root, name = out_path.parent, out_path.name
    else:
        root, name = out_path, "report.json"
    out = Outputs()
    out.add(name, dumps(report))
    config = {"chain": chain_doc, "solution": sol_doc}
    write_manifest(out, root, Path(name).stem + ".manifest.json", "evaluate", config, args.seed,
                   started)
    out.commit(root)
    log.info("F_parallel=%.9f", report["F_parallel"])
    return EXIT_OK


def truth_table_csv(inputs, table) -> str:
    cols = spinsim.bitstrings(int(np.log2(table.shape[1])))
    rows = ([bits] + [f"{p:.12f}" for p in row] for bits, row in zip(inputs, table))
    return csv_text(["input"] + cols, rows)


def state_doc(state: spinsim.StateVector) -> dict:
    return {
        "n_qubits": state.n_qubits,
        "bit_order": "qubit 1 is the leftmost, most significant bit",
        "amplitudes": {
            bits: [float(np.round(a.real, 15)), float(np.round(a.imag, 15))]
            for bits, a in zip(spinsim.bitstrings(state.n_qubits), state.amplitudes)
        },
    }


def _table_outputs(out: Outputs, inputs, table, expected=None):
    out.add("truth_table.csv", truth_table_csv(inputs, table))
    if expected is not None:
        out.add("summary.json", dumps({
            "truth_table_fidelity": spinsim.truth_table_fidelity(table, expected),
            "fidelity_definition": FIDELITY_LABEL,
            "expected": dict(zip(inputs, expected)),
        }))


def cmd_simulate(args) -> int:
    started = time.perf_counter()
    out = Outputs()
    config = {"points": args.points, "analysis": args.analysis, "rotation_error": args.rotation_error}
    if args.circuit:
        doc = read_json(args.circuit)
        config["circuit"] = doc
        circ = spinsim.circuit_from_config(doc)
        inputs = spinsim.bitstrings(circ.n_qubits)
        _table_outputs(out, inputs, spinsim.truth_table(circ, inputs))
        state = spinsim.run(spinsim.StateVector(circ.n_qubits), circ)
        out.add("state.json", dumps(state_doc(state)))
    else:
        name, _, arg = args.builtin.partition(":")
        config["builtin"] = args.builtin
        if name not in BUILTINS:
            raise ConfigError(f"unknown builtin {args.builtin!r}; choose from {', '.join(BUILTINS)}")
        if name == "parallel-cnots":
            inputs, table = spinsim.run_parallel_cnots()
            _table_outputs(out, inputs, table, [spinsim.classical_parallel_cnots(b) for b in inputs])
        elif name.startswith("adder"):
            inputs, table = spinsim.run_adder(name.split("-")[1])
            _table_outputs(out, inputs, table, [spinsim.classical_adder(b) for b in inputs])
        elif name == "ghz":
            out.add("state.json", dumps(state_doc(spinsim.run_ghz())))
        else:
            try:
                chi = np.pi * float(arg or 0.25)
            except ValueError as exc:
                raise ConfigError(f"parity builtin expects parity:CHI_PI, got {args.builtin!r}") from exc
            scan = spinsim.parity_scan(chi, args.points, args.analysis, args.rotation_error)
            rows = ((repr(float(p)), repr(float(v))) for p, v in zip(scan.phases, scan.parities))
            out.add("parity.csv", csv_text(("phi", "parity"), rows))
            p = scan.populations
            out.add("parity_fit.json", dumps({
                "chi_pi": chi / np.pi,
                "offset": scan.fit.offset,
                "amplitude": scan.fit.amplitude,
                "phase": scan.fit.phase,
                "periods": scan.fit.periods,
                "populations": {"00": p[0], "01": p[1], "10": p[2], "11": p[3]},
                "fidelity": spinsim.fidelity_from_parity(p[0], p[3], scan.fit.amplitude, chi),
            }))
    write_manifest(out, args.out, "manifest.json", "simulate", config, args.seed, started)
    out.commit(args.out)
    return EXIT_OK


# -- entry point ---------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="pargate", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"pargate {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--out", required=True, help="output directory (evaluate: directory or .json file)")
        p.add_argument("--seed", type=int, default=0)
        p.add_argument("--verbose", "-v", action="store_true")

    p = sub.add_parser("solve", help="design pulses for parallel XX gates")
    p.add_argument("--chain", help="chain JSON (default: bundled five-ion chain)")
    p.add_argument("--request", required=True, help="gate request JSON")
    p.add_argument("--mu-scan", help="detuning scan START:STOP:STEPS in MHz, overrides the request")
    common(p)
    p.set_defaults(func=cmd_solve)

    p = sub.add_parser("evaluate", help="recompute the fidelity report for a stored solution")
    p.add_argument("--chain", help="chain JSON (default: bundled five-ion chain)")
    p.add_argument("--solution", required=True)
    common(p)
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("simulate", help="run a circuit through the statevector simulator")
    src = p.add_mutually_exclusive_group(required=True)
    src.add_argument("--circuit", help="circuit JSON")
    src.add_argument("--builtin", help=f"one of {', '.join(BUILTINS)}; parity takes parity:CHI_PI")
    p.add_argument("--points", type=int, default=24, help="parity scan points")
    p.add_argument("--analysis", choices=("plain", "sk1"), default="plain")
    p.add_argument("--rotation-error", type=float, default=0.0,
                   help="fractional over-rotation of the analysis pulses")
    common(p)
    p.set_defaults(func=cmd_simulate)
    return parser


def bundled(name: str) -> str:
    """Path of a bundled data file (chain, requests, circuits)."""
    return str(resources.files("pargate") / "data" / name)


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except (ConfigError, ChainConfigError, RequestError, KernelError, spinsim.CircuitError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except OSError as exc:
        print(f"I/O error: {exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
