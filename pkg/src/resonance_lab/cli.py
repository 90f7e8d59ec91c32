"""``resonance-lab`` command line.

    resonance-lab <check|fourier|simulate|find-periodic|escape|counterexample|verify-lemmas>
                  --config CONFIG.json [--out DIR]

Exit codes: 0 success, 2 configuration/schema error, 3 integration failure
during ``simulate`` (partial CSV written), 4 shooting failure during
``find-periodic``.  ``check --exit-by-class`` instead exits 10/11/12/13 for
PeriodicExists/Unbounded/NecessaryHoldsOnly/NecessaryFailsNoEscapeGuarantee.
"""

from __future__ import annotations

import argparse
import copy
import csv
import datetime as _dt
import json
import logging
import math
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .conditions import Classification, build_counterexample, check_conditions
from .fourier import coefficient_table, sign_set_integral
from .model import TWO_PI, ConfigurationError, PreconditionError, problem_from_dict
from .odeint import fmt, integrate, write_trajectory_csv
from .poincare import escape_diagnostic, find_periodic, default_radius, write_orbit_csv

log = logging.getLogger("resonance_lab")

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_BLOWUP = 3
EXIT_SHOOTING = 4
CLASS_EXIT = {
    Classification.PERIODIC_EXISTS: 10,
    Classification.UNBOUNDED: 11,
    Classification.NECESSARY_HOLDS_ONLY: 12,
    Classification.NECESSARY_FAILS_NO_ESCAPE_GUARANTEE: 13,
}

COMMANDS = ("check", "fourier", "simulate", "find-periodic", "escape", "counterexample", "verify-lemmas")

# defaults per command block; None means "derived from the problem"
DEFAULTS = {
    "check": {},
    "fourier": {"n": None},
    "simulate": {"xi0": [0.0, 0.0], "t0": 0.0, "t1": TWO_PI, "rtol": 1e-10, "atol": 1e-12,
                 "output": "trajectory.csv", "samples": None, "max_norm": None},
    "find-periodic": {"R": None, "grid_size": 9, "tol": 1e-9, "max_iter": 60, "rtol": 1e-10, "atol": 1e-12,
                      "output": "fixed_point.json", "trajectory_output": "periodic_solution.csv"},
    "escape": {"xi0": None, "random_starts": 0, "seed": 0, "radius": 10.0, "K": 200, "threshold": 100.0,
               "directions": ["forward", "backward"], "rtol": 1e-10, "atol": 1e-12, "output": "escape.json"},
    "counterexample": {"epsilon": None, "n": None, "output": "counterexample.json"},
    "verify-lemmas": {"n": [1, 2, 3, 4, 5, 6], "phi_count": 20, "tolerance": 1e-8, "seed": 0,
                      "output": "lemmas.csv"},
}
TOP_KEYS = {"problem", "output_dir", *COMMANDS}


def _json_safe(obj):
    if isinstance(obj, dict):
        return {k: _json_safe(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_json_safe(v) for v in obj]
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        x = float(obj)
        return x if math.isfinite(x) else str(x)
    return obj


def write_json(path: Path, doc) -> None:
    path.write_text(json.dumps(_json_safe(doc), indent=2, sort_keys=True) + "\n", encoding="utf-8")


def load_config(path: Path) -> dict:
    try:
        doc = json.loads(path.read_text(encoding="utf-8"))
    except FileNotFoundError as exc:
        raise ConfigurationError(f"config file not found: {path}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigurationError(f"malformed JSON in {path}: {exc}") from exc
    if not isinstance(doc, dict):
        raise ConfigurationError("config must be a JSON object")
    extra = set(doc) - TOP_KEYS
    if extra:
        raise ConfigurationError(f"unknown top-level keys: {sorted(extra)}")
    return doc


def resolve_block(config: dict, command: str) -> dict:
    """Command block with every default filled in; unknown keys rejected."""
    block = config.get(command, {})
    if not isinstance(block, dict):
        raise ConfigurationError(f"'{command}' block must be an object")
    extra = set(block) - set(DEFAULTS[command])
    if extra:
        raise ConfigurationError(f"unknown keys in '{command}': {sorted(extra)}")
    resolved = copy.deepcopy(DEFAULTS[command])
    resolved.update(copy.deepcopy(block))
    return resolved


def _number(block: dict, key: str, positive: bool = False) -> float:
    val = block[key]
    if isinstance(val, bool) or not isinstance(val, (int, float)) or not math.isfinite(val):
        raise ConfigurationError(f"'{key}' must be a finite number")
    if positive and val <= 0:
        raise ConfigurationError(f"'{key}' must be positive")
    return float(val)


def _integer(block: dict, key: str, minimum: int = 0) -> int:
    val = block[key]
    if isinstance(val, bool) or not isinstance(val, int) or val < minimum:
        raise ConfigurationError(f"'{key}' must be an integer >= {minimum}")
    return val


def _pair(val, key: str) -> list[float]:
    if (not isinstance(val, (list, tuple)) or len(val) != 2
            or not all(isinstance(v, (int, float)) and not isinstance(v, bool) and math.isfinite(v) for v in val)):
        raise ConfigurationError(f"'{key}' must be a [zeta, eta] pair of finite numbers")
    return [float(val[0]), float(val[1])]


class Run:
    """One CLI invocation: resolved config, output directory, manifest."""

    def __init__(self, command: str, config_path: Path, out: str | None):
        self.command = command
        self.config_path = config_path
        self.config = load_config(config_path)
        base = config_path.parent
        if out is not None:
            self.out_dir = Path(out)
        else:
            self.out_dir = base / self.config.get("output_dir", ".")
        self.block = resolve_block(self.config, command)
        self.outputs: list[str] = []
        self.problem = None
        if "problem" in self.config:
            self.problem = problem_from_dict(self.config["problem"])
        elif command != "verify-lemmas":
            raise ConfigurationError("config needs a 'problem' block")

    def path(self, name: str) -> Path:
        p = self.out_dir / name
        self.outputs.append(name)
        return p

    def write_manifest(self, summary: dict) -> None:
        manifest = {
            "tool": "resonance-lab",
            "version": __version__,
            "command": self.command,
            "config_file": str(self.config_path),
            "problem": None if self.problem is None else self.problem.to_dict(),
            "resolved": {self.command: self.block},
            "outputs": self.outputs,
            "summary": summary,
            "timestamp": _dt.datetime.now(_dt.timezone.utc).isoformat(),
        }
        write_json(self.out_dir / f"{self.command}.manifest.json", manifest)


# ---------------------------------------------------------------------------
# commands
# ---------------------------------------------------------------------------


def cmd_check(run: Run, args) -> int:
    report = check_conditions(run.problem)
    for line in report.summary_lines():
        print(line)
    write_json(run.path("check.json"), report.to_dict())
    run.write_manifest({"classification": report.classification.value})
    return CLASS_EXIT[report.classification] if args.exit_by_class else EXIT_OK


def cmd_fourier(run: Run, args) -> int:
    b = run.block
    modes = b["n"]
    if modes is None:
        modes = [run.problem.n]
        b["n"] = modes
    elif isinstance(modes, int) and not isinstance(modes, bool):
        modes = [modes]
    if not all(isinstance(m, int) and not isinstance(m, bool) and m >= 1 for m in modes):
        raise ConfigurationError("'n' must be a positive integer or a list of them")
    rows = coefficient_table(run.problem.e, modes)
    print(f"{'n':>3}  {'A_n':>24}  {'B_n':>24}  {'magnitude':>24}  {'delta':>24}")
    for r in rows:
        delta = "undefined" if r["delta"] is None else fmt(r["delta"])
        print(f"{r['n']:>3}  {fmt(r['A_n']):>24}  {fmt(r['B_n']):>24}  {fmt(r['magnitude']):>24}  {delta:>24}")
    write_json(run.path("fourier.json"), {"rows": rows})
    run.write_manifest({"modes": modes})
    return EXIT_OK


def cmd_simulate(run: Run, args) -> int:
    b = run.block
    xi0 = _pair(b["xi0"], "xi0")
    t0, t1 = _number(b, "t0"), _number(b, "t1")
    rtol, atol = _number(b, "rtol", True), _number(b, "atol", True)
    if t0 == t1:
        raise ConfigurationError("t0 and t1 must differ")
    t_eval = None
    if b["samples"] is not None:
        m = _integer(b, "samples", 2)
        t_eval = np.linspace(t0, t1, m)
    max_norm = None if b["max_norm"] is None else _number(b, "max_norm", True)
    traj = integrate(run.problem, xi0, t0, t1, rtol=rtol, atol=atol, t_eval=t_eval, max_norm=max_norm)
    write_trajectory_csv(traj, run.path(b["output"]))
    summary = {"status": traj.status, "message": traj.message, "accepted_steps": traj.n_accepted,
               "rejected_steps": traj.n_rejected, "final": [float(v) for v in traj.states[-1]],
               "t_reached": traj.t1}
    write_json(run.path("simulate.json"), summary)
    run.write_manifest(summary)
    print(f"status: {traj.status}; {traj.n_accepted} accepted / {traj.n_rejected} rejected steps")
    print(f"final state at t={fmt(traj.t1)}: x={fmt(traj.states[-1, 0])}, x'={fmt(traj.states[-1, 1])}")
    if not traj.success:
        print(f"integration failure: {traj.message} (partial trajectory written)")
        return EXIT_BLOWUP
    return EXIT_OK


def cmd_find_periodic(run: Run, args) -> int:
    b = run.block
    if b["R"] is None:
        b["R"] = default_radius(run.problem)
    R = _number(b, "R", True)
    size = _integer(b, "grid_size", 1)
    tol = _number(b, "tol", True)
    res = find_periodic(run.problem, R=R, grid_size=size, tol=tol, max_iter=_integer(b, "max_iter", 1),
                        rtol=_number(b, "rtol", True), atol=_number(b, "atol", True))
    write_json(run.path(b["output"]), res.to_dict())
    if res.found:
        traj = integrate(run.problem, res.xi_star, 0.0, TWO_PI, rtol=b["rtol"], atol=b["atol"],
                         t_eval=np.linspace(0.0, TWO_PI, 257))
        write_trajectory_csv(traj, run.path(b["trajectory_output"]))
        print(f"found 2*pi-periodic solution: xi* = ({fmt(res.xi_star.zeta)}, {fmt(res.xi_star.eta)})")
        print(f"residual {res.residual_norm:.3e}, ODE residual {res.ode_residual:.3e}, "
              f"start {res.starts_tried}/{size * size}")
    else:
        print(f"no fixed point found after {res.starts_tried} starts; best residual {res.residual_norm:.6g}")
    run.write_manifest(res.to_dict())
    return EXIT_OK if res.found else EXIT_SHOOTING


def cmd_escape(run: Run, args) -> int:
    b = run.block
    starts = []
    if b["xi0"] is not None:
        if not isinstance(b["xi0"], list):
            raise ConfigurationError("'xi0' must be a list of [zeta, eta] pairs")
        starts = [_pair(p, "xi0") for p in b["xi0"]]
    count = _integer(b, "random_starts", 0)
    if count:
        rng = np.random.default_rng(_integer(b, "seed", 0))
        radius = _number(b, "radius", True)
        starts += rng.uniform(-radius, radius, size=(count, 2)).tolist()
    if not starts:
        starts = [[0.0, 0.0]]
        b["xi0"] = starts
    K = _integer(b, "K", 1)
    threshold = _number(b, "threshold", True)
    dirs = b["directions"]
    if not isinstance(dirs, list) or not dirs or any(d not in ("forward", "backward") for d in dirs):
        raise ConfigurationError("'directions' must be a non-empty subset of ['forward', 'backward']")
    rtol, atol = _number(b, "rtol", True), _number(b, "atol", True)
    report = check_conditions(run.problem)
    print(f"classification: {report.classification.value}")
    docs = []
    for i, xi0 in enumerate(starts):
        esc = escape_diagnostic(run.problem, xi0, K=K, norm_threshold=threshold, directions=dirs,
                                rtol=rtol, atol=atol)
        for d, orbit in esc.orbits.items():
            write_orbit_csv(orbit, run.path(f"orbit_{i:03d}_{d}.csv"))
        docs.append(esc.to_dict())
        print(f"start {i} ({fmt(xi0[0])}, {fmt(xi0[1])}): {esc.summary()}")
    doc = {"classification": report.classification.value, "starts": docs,
           "all_escaped": all(d["escaped_both"] if len(dirs) == 2 else
                              all(d[x]["verdict"] != "inconclusive" for x in dirs) for d in docs)}
    write_json(run.path(b["output"]), doc)
    run.write_manifest({"all_escaped": doc["all_escaped"], "starts": len(starts)})
    return EXIT_OK


def cmd_counterexample(run: Run, args) -> int:
    b = run.block
    if b["n"] is None:
        b["n"] = run.problem.n
    n = _integer(b, "n", 1)
    if b["epsilon"] is None:
        b["epsilon"] = 0.1 * run.problem.g.limit_span
    eps = _number(b, "epsilon")
    try:
        problem = build_counterexample(run.problem.F, run.problem.g, n, eps)
    except PreconditionError as exc:
        raise ConfigurationError(str(exc)) from exc
    report = check_conditions(problem)
    amplitude = problem.e.terms[0][1]
    doc = {"E": amplitude, "epsilon": eps, "n": n, "problem": problem.to_dict(), "report": report.to_dict(),
           "margin": report.margin,
           "note": "evidence, not proof: non-existence can only be reported as exhaustive shooting failure"}
    write_json(run.path(b["output"]), doc)
    print(f"E = {fmt(amplitude)} (E*pi = rhs - epsilon); margin = {fmt(report.margin)}")
    for line in report.summary_lines():
        print(line)
    run.write_manifest({"E": amplitude, "margin": report.margin})
    return EXIT_OK


def cmd_verify_lemmas(run: Run, args) -> int:
    b = run.block
    ns = b["n"]
    if not isinstance(ns, list) or not all(isinstance(m, int) and not isinstance(m, bool) and m >= 1 for m in ns):
        raise ConfigurationError("'n' must be a list of positive integers")
    count = _integer(b, "phi_count", 1)
    tol = _number(b, "tolerance", True)
    rng = np.random.default_rng(_integer(b, "seed", 0))
    rows = []
    for n in ns:
        for phi in rng.uniform(0.0, TWO_PI, count):
            for kind in ("cos", "sin"):
                for sign, target in (("positive", 2.0), ("negative", -2.0)):
                    val = sign_set_integral(n, float(phi), kind, sign)
                    rows.append((n, float(phi), kind, sign, val, abs(val - target)))
    with open(run.path(b["output"]), "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["n", "phi", "kind", "sign", "value", "error"])
        for n, phi, kind, sign, val, err in rows:
            w.writerow([n, fmt(phi), kind, sign, fmt(val), fmt(err)])
    # one "check" is one (n, phi) pair with all four sign-set integrals within tolerance
    groups = {}
    for n, phi, _, _, _, err in rows:
        groups.setdefault((n, phi), []).append(err)
    passed = sum(all(e < tol for e in errs) for errs in groups.values())
    integrals_ok = sum(r[5] < tol for r in rows)
    print(f"{passed}/{len(groups)} within {tol:g} ({integrals_ok}/{len(rows)} sign-set integrals)")
    summary = {"phases_passed": passed, "phases": len(groups), "integrals_passed": integrals_ok,
               "integrals": len(rows), "max_error": max(r[5] for r in rows)}
    run.write_manifest(summary)
    return EXIT_OK if integrals_ok == len(rows) else 1


HANDLERS = {
    "check": cmd_check,
    "fourier": cmd_fourier,
    "simulate": cmd_simulate,
    "find-periodic": cmd_find_periodic,
    "escape": cmd_escape,
    "counterexample": cmd_counterexample,
    "verify-lemmas": cmd_verify_lemmas,
}


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="resonance-lab",
                                description="Periodic solutions and escape for x'' + f(x)x' + g(x) + n^2 x = e(t)")
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        sp = sub.add_parser(name)
        sp.add_argument("--config", required=True, type=Path)
        sp.add_argument("--out", default=None, help="output directory (default: config output_dir)")
        if name == "check":
            sp.add_argument("--exit-by-class", action="store_true",
                            help="exit 10-13 according to the classification")
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        run = Run(args.command, args.config, args.out)
        run.out_dir.mkdir(parents=True, exist_ok=True)
        return HANDLERS[args.command](run, args)
    except ConfigurationError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
