"""Schedule metrics, dominant-topology identification, and parameter sweeps."""

from __future__ import annotations

import io
from dataclasses import dataclass, replace

from .backends import ScipyMilpBackend, solve
from .errors import LsgridError
from .feeder import DER_PV, FeederModel
from .formulation import DecisionIndex, assemble_model
from .milp import Solution
from .profiles import Profile
from .scenario import ScenarioConfig
from .validation import check_operational, check_radiality, extract_snapshots

DOMINANCE_THRESHOLD_STEPS = 5  # 2.5 h of 30-minute intervals


@dataclass(frozen=True)
class Metrics:
    served_demand_kwh: float
    served_hours_per_critical_node: dict[str, float]
    nodes_served_in_window: dict[str, int]
    switching_actions: int
    lsg_served_timeline: dict[str, tuple[int, ...]]

    def rows(self) -> list[tuple[str, object]]:
        out: list[tuple[str, object]] = [
            ("served_demand_kwh", round(self.served_demand_kwh, 3))
        ]
        for nid in sorted(self.served_hours_per_critical_node):
            out.append((
                f"served_hours_critical_{nid}",
                self.served_hours_per_critical_node[nid],
            ))
        for label in sorted(self.nodes_served_in_window):
            out.append((f"nodes_served_window_{label}", self.nodes_served_in_window[label]))
        out.append(("switching_actions", self.switching_actions))
        return out


@dataclass(frozen=True)
class DominantTopology:
    closed_switches: tuple[str, ...]
    roots: tuple[str, ...]
    occupancy_steps: int

    @property
    def key(self) -> tuple:
        return (self.closed_switches, self.roots)


def compute_metrics(solution: Solution, feeder: FeederModel,
                    scenario: ScenarioConfig,
                    profiles: dict[str, Profile]) -> Metrics:
    idx = DecisionIndex(feeder)
    T = scenario.horizon_steps
    dt = scenario.dt_hours
    on = {
        (lsg.id, t): int(round(solution.values[idx.ulsg(lsg.id, t)]))
        for lsg in feeder.lsgs for t in range(1, T + 1)
    }
    served = 0.0
    for lsg in feeder.lsgs:
        for t in range(1, T + 1):
            if on[(lsg.id, t)]:
                served += sum(
                    profiles[n].values_kw[t - 1] for n in lsg.node_ids
                ) * dt

    critical_hours = {}
    for node in feeder.nodes:
        if node.is_critical:
            critical_hours[node.id] = dt * sum(
                on[(node.lsg_id, t)] for t in range(1, T + 1)
            )

    window_counts: dict[str, int] = {}
    for node in feeder.nodes:
        for w in scenario.schedule_for(node.id).windows:
            label = f"t{w.start_step}-{w.end_step}"
            window_counts.setdefault(label, 0)
            if any(on[(node.lsg_id, t)] for t in range(w.start_step, w.end_step + 1)):
                window_counts[label] += 1

    actions = sum(
        int(round(solution.values[idx.uso(sw.id, t)]))
        for sw in feeder.switches for t in range(1, T + 1)
    )
    timeline = {
        lsg.id: tuple(on[(lsg.id, t)] for t in range(1, T + 1))
        for lsg in feeder.lsgs
    }
    return Metrics(
        served_demand_kwh=served,
        served_hours_per_critical_node=critical_hours,
        nodes_served_in_window=window_counts,
        switching_actions=actions,
        lsg_served_timeline=timeline,
    )


def find_dominant_topologies(snapshots, threshold_steps: int = DOMINANCE_THRESHOLD_STEPS):
    """Group steps by canonical topology (closed switch set + root set) and
    keep configurations occupying at least the threshold, longest first."""
    occupancy: dict[tuple, int] = {}
    for snap in snapshots:
        key = (tuple(sorted(snap.closed_switches)), tuple(sorted(snap.roots)))
        occupancy[key] = occupancy.get(key, 0) + 1
    out = [
        DominantTopology(closed, roots, n)
        for (closed, roots), n in occupancy.items()
        if n >= threshold_steps
    ]
    out.sort(key=lambda d: (-d.occupancy_steps, d.key))
    return out


def scale_pv(feeder: FeederModel, profiles: dict[str, Profile],
             factor: float) -> tuple[FeederModel, dict[str, Profile]]:
    """Scale every PV farm's capacity and generation profile by `factor`."""
    new_ders = []
    new_profiles = dict(profiles)
    for der in feeder.ders:
        if der.kind != DER_PV:
            new_ders.append(der)
            continue
        new_ders.append(replace(
            der, rated_kw=der.rated_kw * factor,
            inverter_kva=der.inverter_kva * factor,
        ))
        prof = profiles.get(der.id)
        if prof is not None:
            new_profiles[der.id] = replace(
                prof, values_kw=tuple(v * factor for v in prof.values_kw)
            )
    return replace(feeder, ders=tuple(new_ders)), new_profiles


@dataclass(frozen=True)
class SweepRun:
    axis_value: float
    status: str
    metrics: Metrics | None
    dominant: tuple[DominantTopology, ...]
    objective: float | None
    validation_passed: bool


@dataclass(frozen=True)
class SweepResult:
    axis: str
    runs: tuple[SweepRun, ...]


def run_sweep(feeder: FeederModel, scenario: ScenarioConfig,
              profiles: dict[str, Profile], axis: str, values,
              backend=None) -> SweepResult:
    """Solve one scenario per axis value (msd hours or pv scale factor);
    infeasible runs are flagged and the sweep continues."""
    if axis not in ("msd", "pv"):
        raise LsgridError(f"unknown sweep axis {axis!r} (use 'msd' or 'pv')")
    backend = backend or ScipyMilpBackend()
    runs = []
    for value in values:
        fd, prof, sc = feeder, profiles, scenario
        if axis == "msd":
            sc = replace(scenario, msd_hours=float(value))
        else:
            fd, prof = scale_pv(feeder, profiles, float(value))
        build = assemble_model(fd, sc, prof)
        sol = solve(build.model, backend, sc.solver)
        if not sol.feasible:
            runs.append(SweepRun(float(value), sol.status, None, (), None, False))
            continue
        snaps = extract_snapshots(sol, fd)
        graph = fd.lsg_graph()
        ok = all(check_radiality(s, graph).passed for s in snaps)
        ok = ok and check_operational(sol, fd, sc, prof).passed
        runs.append(SweepRun(
            float(value), sol.status, compute_metrics(sol, fd, sc, prof),
            tuple(find_dominant_topologies(snaps)), sol.objective_value, ok,
        ))
    return SweepResult(axis, tuple(runs))


def sweep_metrics_csv(result: SweepResult) -> str:
    """Metric-per-row comparison table, one column per axis value."""
    out = io.StringIO()
    feasible = [r for r in result.runs if r.metrics is not None]
    header = ["metric"] + [_fmt_axis(r.axis_value) for r in result.runs]
    out.write(",".join(header) + "\n")
    rows: dict[str, dict[float, object]] = {}
    order: list[str] = []
    for r in feasible:
        for key, val in r.metrics.rows():
            if key not in rows:
                rows[key] = {}
                order.append(key)
            rows[key][r.axis_value] = val
    for key in order:
        cells = [key]
        for r in result.runs:
            cells.append(str(rows[key].get(r.axis_value, "infeasible")))
        out.write(",".join(cells) + "\n")
    return out.getvalue()


def sweep_topologies_csv(result: SweepResult) -> str:
    """Dominant-topology occupancy table: topology rows, axis columns; the
    legend column spells out the closed switches and roots."""
    keys: list[tuple] = []
    for r in result.runs:
        for d in r.dominant:
            if d.key not in keys:
                keys.append(d.key)
    out = io.StringIO()
    out.write(
        ",".join(["topology", "closed_switches", "roots"]
                 + [_fmt_axis(r.axis_value) for r in result.runs]) + "\n"
    )
    for i, key in enumerate(keys, start=1):
        closed, roots = key
        cells = [str(i), "+".join(closed) if closed else "-", "+".join(roots)]
        for r in result.runs:
            occ = next((d.occupancy_steps for d in r.dominant if d.key == key), 0)
            cells.append(str(occ) if occ else "-")
        out.write(",".join(cells) + "\n")
    return out.getvalue()


def timelines_csv(metrics: Metrics) -> str:
    out = io.StringIO()
    any_timeline = next(iter(metrics.lsg_served_timeline.values()), ())
    out.write("lsg," + ",".join(f"t{t}" for t in range(1, len(any_timeline) + 1)) + "\n")
    for lsg_id in metrics.lsg_served_timeline:
        row = metrics.lsg_served_timeline[lsg_id]
        out.write(lsg_id + "," + ",".join(str(x) for x in row) + "\n")
    return out.getvalue()


def dispatch_csv(solution: Solution, feeder: FeederModel,
                 scenario: ScenarioConfig) -> str:
    """Per-DER dispatch and SOC series, one row per quantity."""
    from .feeder import DER_BESS, DER_DG

    idx = DecisionIndex(feeder)
    T = scenario.horizon_steps
    out = io.StringIO()
    out.write("series," + ",".join(f"t{t}" for t in range(1, T + 1)) + "\n")

    def row(label, namer):
        values = [f"{solution.values[namer(t)]:.3f}" for t in range(1, T + 1)]
        out.write(label + "," + ",".join(values) + "\n")

    for der in feeder.ders:
        if der.kind == DER_PV:
            row(f"{der.id}_p_kw", lambda t, d=der.id: idx.ppv(d, t))
            row(f"{der.id}_q_kvar", lambda t, d=der.id: idx.qpv(d, t))
        elif der.kind == DER_DG:
            row(f"{der.id}_p_kw", lambda t, d=der.id: idx.pdg(d, t))
            row(f"{der.id}_q_kvar", lambda t, d=der.id: idx.qdg(d, t))
        elif der.kind == DER_BESS:
            row(f"{der.id}_charge_kw", lambda t, d=der.id: idx.pch(d, t))
            row(f"{der.id}_discharge_kw", lambda t, d=der.id: idx.pdis(d, t))
            row(f"{der.id}_q_kvar", lambda t, d=der.id: idx.qbs(d, t))
            row(f"{der.id}_soc_kwh", lambda t, d=der.id: idx.soc(d, t))
    return out.getvalue()


def _fmt_axis(x: float) -> str:
    return f"{x:g}"
