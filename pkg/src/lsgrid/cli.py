"""Command-line entry point.

Exit codes: 0 success, 2 input error, 3 infeasible, 4 validation failure,
5 backend failure.
"""

from __future__ import annotations

import argparse
import json
import sys
from dataclasses import dataclass, replace
from pathlib import Path

from .analysis import (
    compute_metrics, dispatch_csv, find_dominant_topologies, run_sweep,
    sweep_metrics_csv, sweep_topologies_csv, timelines_csv,
)
from .backends import get_backend, solve
from .errors import LsgridError
from .feeder import load_feeder, validate_feeder
from .formulation import assemble_model
from .loops import enumerate_loops
from .milp import STATUS_INFEASIBLE, Solution
from .mps import emit_model_file
from .profiles import load_profiles
from .scenario import load_scenario
from .synth import generate_profiles
from .validation import check_operational, check_radiality, extract_snapshots

EXIT_OK = 0
EXIT_INPUT = 2
EXIT_INFEASIBLE = 3
EXIT_VALIDATION = 4
EXIT_BACKEND = 5


@dataclass(frozen=True)
class RunManifest:
    feeder: str
    scenario: str
    profiles: str
    backend: str
    out: str
    seed: int

    def to_dict(self) -> dict:
        return {
            "feeder": self.feeder, "scenario": self.scenario,
            "profiles": self.profiles, "backend": self.backend,
            "out": self.out, "seed": self.seed,
        }


def _load_inputs(args):
    feeder = load_feeder(args.feeder)
    scenario = load_scenario(args.scenario)
    if getattr(args, "mode", None):
        scenario = replace(scenario, mode=args.mode)
    if getattr(args, "gap", None) is not None:
        scenario = replace(scenario, solver=replace(scenario.solver, rel_gap=args.gap))
    if getattr(args, "time_limit", None) is not None:
        scenario = replace(
            scenario, solver=replace(scenario.solver, time_limit_s=args.time_limit)
        )
    if args.profiles == "synth":
        profiles = generate_profiles(feeder, scenario, seed=args.seed)
    else:
        if not Path(args.profiles).exists():
            raise LsgridError(f"profile file not found: {args.profiles}")
        profiles = load_profiles(args.profiles, scenario)
    return feeder, scenario, profiles


def cmd_solve(args) -> int:
    try:
        feeder, scenario, profiles = _load_inputs(args)
    except (LsgridError, OSError, json.JSONDecodeError, ValueError) as exc:
        print(f"input error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    report = validate_feeder(feeder)
    if not report.passed:
        for f in report.findings:
            print(f"feeder: [{f.code}] {f.message}", file=sys.stderr)
        return EXIT_INPUT

    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    manifest = RunManifest(
        feeder=str(args.feeder), scenario=str(args.scenario),
        profiles=str(args.profiles), backend=args.backend or "scipy",
        out=str(out), seed=args.seed,
    )
    (out / "manifest.json").write_text(
        json.dumps(manifest.to_dict(), indent=2) + "\n", encoding="utf-8"
    )

    build = assemble_model(feeder, scenario, profiles)
    doc = emit_model_file(build.model)
    (out / "model.mps").write_text(doc.text, encoding="utf-8")
    if doc.name_map:
        (out / "model_name_map.json").write_text(
            json.dumps(doc.name_map, indent=2, sort_keys=True) + "\n", encoding="utf-8"
        )

    try:
        backend = get_backend(args.backend)
        solution = solve(build.model, backend, scenario.solver)
    except LsgridError as exc:
        print(f"backend error: {exc}", file=sys.stderr)
        return EXIT_BACKEND
    (out / "solution.json").write_text(
        json.dumps(solution.to_dict(), indent=2, sort_keys=True) + "\n",
        encoding="utf-8",
    )
    if solution.status == STATUS_INFEASIBLE:
        print("infeasible", file=sys.stderr)
        return EXIT_INFEASIBLE
    if not solution.feasible:
        print(f"backend failure: {solution.diagnostic}", file=sys.stderr)
        return EXIT_BACKEND

    snaps = extract_snapshots(solution, feeder)
    graph = feeder.lsg_graph()
    radial = [check_radiality(s, graph) for s in snaps]
    operational = check_operational(solution, feeder, scenario, profiles)
    validation = {
        "radiality": [r.to_dict() for r in radial],
        "operational": operational.to_dict(),
    }
    (out / "validation.json").write_text(
        json.dumps(validation, indent=2, sort_keys=True) + "\n", encoding="utf-8"
    )
    metrics = compute_metrics(solution, feeder, scenario, profiles)
    lines = ["metric,value"]
    lines += [f"{k},{v}" for k, v in metrics.rows()]
    dominant = find_dominant_topologies(snaps)
    for i, d in enumerate(dominant, start=1):
        lines.append(
            f"dominant_topology_{i},"
            f"{'+'.join(d.closed_switches) or '-'}|{'+'.join(d.roots)}|{d.occupancy_steps}"
        )
    (out / "metrics.csv").write_text("\n".join(lines) + "\n", encoding="utf-8")
    (out / "timelines.csv").write_text(timelines_csv(metrics), encoding="utf-8")
    (out / "dispatch.csv").write_text(
        dispatch_csv(solution, feeder, scenario), encoding="utf-8"
    )

    if not all(r.passed for r in radial) or not operational.passed:
        for r in radial:
            for f in r.findings:
                print(f"radiality: t={f.t} [{f.code}] {f.message}", file=sys.stderr)
        for f in operational.findings:
            print(f"operational: t={f.t} [{f.code}] {f.message}", file=sys.stderr)
        return EXIT_VALIDATION
    print(f"objective {solution.objective_value:.6f}, "
          f"served {metrics.served_demand_kwh:.1f} kWh, "
          f"{metrics.switching_actions} switching actions")
    return EXIT_OK


def cmd_validate(args) -> int:
    try:
        feeder = load_feeder(args.feeder)
        scenario = load_scenario(args.scenario)
        if args.profiles == "synth":
            profiles = generate_profiles(feeder, scenario, seed=args.seed)
        else:
            profiles = load_profiles(args.profiles, scenario)
        with open(args.solution, "r", encoding="utf-8") as fh:
            raw = json.load(fh)
        solution = Solution(
            status=raw["status"], objective_value=raw.get("objective"),
            values=raw.get("values", {}), diagnostic=raw.get("diagnostic", ""),
        )
    except (LsgridError, OSError, json.JSONDecodeError, KeyError, ValueError) as exc:
        print(f"input error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    try:
        snaps = extract_snapshots(solution, feeder)
        graph = feeder.lsg_graph()
        failures = 0
        for s in snaps:
            rep = check_radiality(s, graph)
            for f in rep.findings:
                failures += 1
                print(f"radiality: t={f.t} [{f.code}] {f.message}", file=sys.stderr)
        op = check_operational(solution, feeder, scenario, profiles)
        for f in op.findings:
            failures += 1
            print(f"operational: t={f.t} [{f.code}] {f.message}", file=sys.stderr)
    except LsgridError as exc:
        print(f"validation error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    if failures:
        print(f"{failures} violation(s)", file=sys.stderr)
        return EXIT_VALIDATION
    print("all checks passed")
    return EXIT_OK


def cmd_sweep(args) -> int:
    try:
        axis, values = _parse_axis(args.axis)
        feeder, scenario, profiles = _load_inputs(args)
    except (LsgridError, OSError, json.JSONDecodeError, ValueError) as exc:
        print(f"input error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    try:
        backend = get_backend(args.backend)
        result = run_sweep(feeder, scenario, profiles, axis, values, backend)
    except LsgridError as exc:
        print(f"backend error: {exc}", file=sys.stderr)
        return EXIT_BACKEND
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    (out / f"sweep_{axis}_metrics.csv").write_text(
        sweep_metrics_csv(result), encoding="utf-8"
    )
    (out / f"sweep_{axis}_topologies.csv").write_text(
        sweep_topologies_csv(result), encoding="utf-8"
    )
    bad = [r for r in result.runs if r.metrics is None or not r.validation_passed]
    for r in result.runs:
        tag = r.status if r.metrics is None else (
            "ok" if r.validation_passed else "validation-failed"
        )
        print(f"{axis}={r.axis_value:g}: {tag}")
    return EXIT_VALIDATION if bad else EXIT_OK


def cmd_loops(args) -> int:
    try:
        feeder = load_feeder(args.feeder)
    except (LsgridError, OSError, json.JSONDecodeError, ValueError) as exc:
        print(f"input error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    loop_set = enumerate_loops(feeder.lsg_graph())
    print(f"{len(loop_set)} loops")
    for loop in loop_set.loops:
        print("  " + " ".join(loop))
    return EXIT_OK


def _parse_axis(spec: str) -> tuple[str, list[float]]:
    if not spec or "=" not in spec:
        raise LsgridError("axis must look like msd=0.5,1,2,3 or pv=0.5,1,1.5,2")
    axis, _, rest = spec.partition("=")
    axis = axis.strip()
    values = [float(v) for v in rest.split(",") if v.strip() != ""]
    if axis not in ("msd", "pv") or not values:
        raise LsgridError("axis must look like msd=0.5,1,2,3 or pv=0.5,1,1.5,2")
    return axis, values


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="lsgrid",
        description="Feeder-level microgrid scheduler over load switching groups",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, with_out=True):
        p.add_argument("--feeder", required=True)
        p.add_argument("--scenario", required=True)
        p.add_argument("--profiles", required=True,
                       help="profile CSV path, or 'synth' for seeded synthetic data")
        p.add_argument("--backend", default=None,
                       help="'scipy' (default), 'external', or a solver executable path")
        p.add_argument("--mode", choices=["flexible", "legacy"], default=None)
        p.add_argument("--gap", type=float, default=None)
        p.add_argument("--time-limit", type=float, default=None)
        p.add_argument("--seed", type=int, default=0)
        if with_out:
            p.add_argument("--out", required=True)

    p_solve = sub.add_parser("solve", help="build, solve, validate, report")
    common(p_solve)
    p_solve.set_defaults(func=cmd_solve)

    p_val = sub.add_parser("validate", help="re-check a stored solution")
    p_val.add_argument("--solution", required=True)
    p_val.add_argument("--feeder", required=True)
    p_val.add_argument("--scenario", required=True)
    p_val.add_argument("--profiles", required=True)
    p_val.add_argument("--seed", type=int, default=0)
    p_val.set_defaults(func=cmd_validate)

    p_sweep = sub.add_parser("sweep", help="solve across msd or pv axis values")
    common(p_sweep)
    p_sweep.add_argument("--axis", required=True, help="msd=0.5,1,2,3 or pv=0.5,1,1.5,2")
    p_sweep.set_defaults(func=cmd_sweep)

    p_loops = sub.add_parser("loops", help="list supply loops of the LSG graph")
    p_loops.add_argument("--feeder", required=True)
    p_loops.set_defaults(func=cmd_loops)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
