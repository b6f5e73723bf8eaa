"""Backend-independent solution verification.

Everything here recomputes from raw data and solution values; nothing trusts
the row set that produced the solution. The brute-force oracle enumerates
every admissible single-step topology outright and certifies the novel
topology constraints by set equality.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field

from .errors import SolutionFormatError
from .feeder import (
    DER_BESS, DER_DG, DER_PV, LSG_KIND_LOAD, LSG_KIND_PV, FeederModel, LsgGraph,
)
from .formulation import (
    DG_MAX_FRAC, DG_MIN_FRAC, DecisionIndex, FormulationBuild,
    build_topology_constraints, declare_status_variables,
)
from .milp import Solution
from .profiles import Profile
from .scenario import MODE_FLEXIBLE, MODE_LEGACY, ScenarioConfig, SolverParams

BIN_TOL = 1e-5
OP_TOL = 1e-6
ANCHOR_TOL = 1e-4

ORACLE_MAX_LSGS = 10
ORACLE_MAX_SWITCHES = 14

# a single-step topology configuration, canonical form
Config = tuple[frozenset, frozenset, frozenset]  # closed, energized, roots


@dataclass(frozen=True)
class TopologySnapshot:
    t: int
    closed_switches: frozenset[str]
    energized_lsgs: frozenset[str]
    roots: frozenset[str]
    parent_map: dict[str, str] = field(default_factory=dict)

    def config(self) -> Config:
        return (self.closed_switches, self.energized_lsgs, self.roots)


@dataclass(frozen=True)
class CheckFinding:
    code: str
    t: int
    message: str


@dataclass(frozen=True)
class CheckReport:
    findings: tuple[CheckFinding, ...]

    @property
    def passed(self) -> bool:
        return not self.findings

    def to_dict(self) -> dict:
        return {
            "passed": self.passed,
            "findings": [
                {"code": f.code, "t": f.t, "message": f.message}
                for f in self.findings
            ],
        }


def _binary(values: dict[str, float], name: str) -> int:
    try:
        x = values[name]
    except KeyError:
        raise SolutionFormatError(f"solution has no value for {name!r}") from None
    if min(abs(x), abs(x - 1.0)) > BIN_TOL:
        raise SolutionFormatError(f"{name} = {x} is not 0/1 within {BIN_TOL}")
    return int(round(x))


def extract_snapshots(solution: Solution, feeder: FeederModel) -> list[TopologySnapshot]:
    """One topology snapshot per step, with cross-field consistency checks."""
    if not solution.feasible:
        raise SolutionFormatError(f"solution status is {solution.status!r}")
    idx = DecisionIndex(feeder)
    values = solution.values
    candidates = set(feeder.root_candidate_ids)
    snapshots = []
    t = 1
    while idx.ulsg(feeder.lsgs[0].id, t) in values:
        energized = frozenset(
            l.id for l in feeder.lsgs if _binary(values, idx.ulsg(l.id, t))
        )
        closed = frozenset(
            s.id for s in feeder.switches if _binary(values, idx.usw(s.id, t))
        )
        roots = frozenset(
            m for m in candidates if _binary(values, idx.ur(m, t))
        )
        parent: dict[str, str] = {}
        for sw in feeder.switches:
            fwd = _binary(values, idx.beta(sw.id, sw.from_lsg, sw.to_lsg, t))
            rev = _binary(values, idx.beta(sw.id, sw.to_lsg, sw.from_lsg, t))
            is_closed = sw.id in closed
            if fwd + rev != (1 if is_closed else 0):
                raise SolutionFormatError(
                    f"t={t}: switch {sw.id} direction flags inconsistent with its status"
                )
            if is_closed and (sw.from_lsg not in energized or sw.to_lsg not in energized):
                raise SolutionFormatError(
                    f"t={t}: switch {sw.id} closed into an unenergized LSG"
                )
            if fwd:
                child, par = sw.to_lsg, sw.from_lsg
            elif rev:
                child, par = sw.from_lsg, sw.to_lsg
            else:
                continue
            if child in parent:
                raise SolutionFormatError(f"t={t}: LSG {child} has two parents")
            parent[child] = par
        for child in parent:
            if child in roots:
                raise SolutionFormatError(f"t={t}: root {child} has a parent")
        snapshots.append(TopologySnapshot(t, closed, energized, roots, parent))
        t += 1
    if not snapshots:
        raise SolutionFormatError("no status variables found in solution")
    return snapshots


def check_radiality(snapshot: TopologySnapshot, graph: LsgGraph) -> CheckReport:
    """Connected-component audit of one step's topology: forest shape, one
    root per energized component, closed switches only between energized
    LSGs, directions forming an arborescence, and the count identity."""
    findings: list[CheckFinding] = []
    t = snapshot.t
    edge_by_id = {sid: (a, b) for sid, a, b in graph.edges}
    energized = snapshot.energized_lsgs
    closed = snapshot.closed_switches

    for sid in sorted(closed):
        if sid not in edge_by_id:
            findings.append(CheckFinding("unknown-switch", t, f"switch {sid} not in graph"))
            continue
        a, b = edge_by_id[sid]
        if a not in energized or b not in energized:
            findings.append(CheckFinding(
                "switch-endpoint-off", t, f"switch {sid} closed but {a}/{b} not both energized"
            ))
    for m in sorted(snapshot.roots):
        if m not in energized:
            findings.append(CheckFinding("root-off", t, f"root {m} is not energized"))
        if m not in graph.root_candidate_ids:
            findings.append(CheckFinding("root-not-candidate", t, f"{m} cannot be a root"))

    # components over energized LSGs joined by valid closed switches
    adj: dict[str, list[str]] = {m: [] for m in energized}
    n_edges = 0
    for sid in closed:
        a, b = edge_by_id.get(sid, (None, None))
        if a in energized and b in energized:
            adj[a].append(b)
            adj[b].append(a)
            n_edges += 1
    seen: set[str] = set()
    for start in sorted(energized):
        if start in seen:
            continue
        comp = {start}
        stack = [start]
        comp_edges = 0
        while stack:
            x = stack.pop()
            for y in adj[x]:
                comp_edges += 1
                if y not in comp:
                    comp.add(y)
                    stack.append(y)
        seen |= comp
        comp_edges //= 2
        roots_here = sorted(snapshot.roots & comp)
        if comp_edges >= len(comp):
            findings.append(CheckFinding(
                "cycle", t, f"component {sorted(comp)} has {comp_edges} closed switches"
            ))
        if not roots_here:
            findings.append(CheckFinding(
                "orphan-component", t, f"component {sorted(comp)} has no root"
            ))
        elif len(roots_here) > 1:
            findings.append(CheckFinding(
                "multi-root-component", t, f"component {sorted(comp)} has roots {roots_here}"
            ))

    # directions: every energized non-root has exactly one parent and walks
    # up to a root; parents must sit on closed switches
    for child in sorted(energized - snapshot.roots):
        if child not in snapshot.parent_map:
            findings.append(CheckFinding("no-parent", t, f"LSG {child} has no parent"))
    for child, par in sorted(snapshot.parent_map.items()):
        ok = any(
            sid in closed and {a, b} == {child, par}
            for sid, (a, b) in edge_by_id.items()
        )
        if not ok:
            findings.append(CheckFinding(
                "bad-parent", t, f"parent edge {par}->{child} is not a closed switch"
            ))
    for start in sorted(snapshot.parent_map):
        hops = 0
        cur = start
        while cur in snapshot.parent_map and hops <= len(graph.lsg_ids):
            cur = snapshot.parent_map[cur]
            hops += 1
        if cur not in snapshot.roots:
            findings.append(CheckFinding(
                "no-root-path", t, f"parent chain from {start} does not reach a root"
            ))

    if len(closed) + len(snapshot.roots) != len(energized):
        findings.append(CheckFinding(
            "count-identity", t,
            f"{len(closed)} closed + {len(snapshot.roots)} roots != {len(energized)} served",
        ))
    return CheckReport(tuple(findings))


def brute_force_topology_oracle(
    graph: LsgGraph, root_candidates=None
) -> frozenset[Config]:
    """Exhaustive set of admissible single-step configurations.

    A configuration is admissible when closed switches join only energized
    LSGs, the closed subgraph is a forest, and every energized component
    contains exactly one root drawn from the candidates.
    """
    if len(graph.lsg_ids) > ORACLE_MAX_LSGS:
        raise ValueError(f"oracle capped at {ORACLE_MAX_LSGS} LSGs")
    if len(graph.edges) > ORACLE_MAX_SWITCHES:
        raise ValueError(f"oracle capped at {ORACLE_MAX_SWITCHES} switches")
    candidates = tuple(root_candidates) if root_candidates is not None \
        else graph.root_candidate_ids
    lsgs = list(graph.lsg_ids)
    configs: set[Config] = set()

    for r in range(len(lsgs) + 1):
        for energized_tuple in itertools.combinations(lsgs, r):
            energized = frozenset(energized_tuple)
            allowed = [
                (sid, a, b) for sid, a, b in graph.edges
                if a in energized and b in energized
            ]
            pos = {m: i for i, m in enumerate(energized_tuple)}

            # enumerate forests over `allowed` with incremental union-find
            def forests(k: int, parent: list[int]):
                if k == len(allowed):
                    yield []
                    return
                for rest in forests(k + 1, parent):
                    yield rest
                sid, a, b = allowed[k]

                def find(p, i):
                    while p[i] != i:
                        i = p[i]
                    return i

                ra, rb = find(parent, pos[a]), find(parent, pos[b])
                if ra != rb:
                    child = parent.copy()
                    child[ra] = rb
                    for rest in forests(k + 1, child):
                        yield [sid] + rest

            for forest in forests(0, list(range(len(energized_tuple)))):
                closed = frozenset(forest)
                # component split under this forest
                adj = {m: [] for m in energized}
                lookup = {sid: (a, b) for sid, a, b in allowed}
                for sid in forest:
                    a, b = lookup[sid]
                    adj[a].append(b)
                    adj[b].append(a)
                comps = []
                seen: set[str] = set()
                for s in energized_tuple:
                    if s in seen:
                        continue
                    comp = {s}
                    stack = [s]
                    while stack:
                        x = stack.pop()
                        for y in adj[x]:
                            if y not in comp:
                                comp.add(y)
                                stack.append(y)
                    seen |= comp
                    comps.append(comp)
                per_comp = [sorted(c for c in comp if c in candidates) for comp in comps]
                if any(not options for options in per_comp):
                    continue
                for combo in itertools.product(*per_comp):
                    configs.add((closed, energized, frozenset(combo)))
    return frozenset(configs)


def enumerate_topology_configs(
    feeder: FeederModel, mode: str = MODE_FLEXIBLE, backend=None,
    max_configs: int = 100000,
) -> frozenset[Config]:
    """Integer-feasible set of the single-step topology constraints,
    extracted from the MILP itself by iterated no-good cuts over the
    status variables (switch, LSG, root)."""
    from .backends import ScipyMilpBackend, solve

    backend = backend or ScipyMilpBackend()
    scenario = ScenarioConfig(
        horizon_steps=1, step_minutes=30, msd_hours=0.5, mode=mode,
    )
    build = FormulationBuild(feeder, scenario)
    declare_status_variables(build)
    build_topology_constraints(build)
    model = build.model
    idx = build.index
    status_vars = (
        [idx.usw(s.id, 1) for s in feeder.switches]
        + [idx.ulsg(l.id, 1) for l in feeder.lsgs]
        + [idx.ur(m, 1) for m in feeder.root_candidate_ids]
    )
    params = SolverParams(rel_gap=0.0)
    configs: set[Config] = set()
    for k in range(max_configs):
        sol = solve(model, backend, params)
        if sol.status == "infeasible":
            return frozenset(configs)
        if not sol.feasible:
            raise SolutionFormatError(f"enumeration solve failed: {sol.diagnostic}")
        closed = frozenset(
            s.id for s in feeder.switches if round(sol.values[idx.usw(s.id, 1)])
        )
        energized = frozenset(
            l.id for l in feeder.lsgs if round(sol.values[idx.ulsg(l.id, 1)])
        )
        roots = frozenset(
            m for m in feeder.root_candidate_ids if round(sol.values[idx.ur(m, 1)])
        )
        configs.add((closed, energized, roots))
        ones = [v for v in status_vars if round(sol.values[v])]
        zeros = [v for v in status_vars if not round(sol.values[v])]
        model.add_constraint(
            f"nogood.{k}",
            [(v, 1.0) for v in ones] + [(v, -1.0) for v in zeros],
            "<=", float(len(ones) - 1),
        )
    raise SolutionFormatError(f"more than {max_configs} feasible configurations")


def check_operational(solution: Solution, feeder: FeederModel,
                      scenario: ScenarioConfig,
                      profiles: dict[str, Profile]) -> CheckReport:
    """Recompute nodal balance, voltage physics, storage accounting, reserve,
    generator limits and service-duration runs directly from the data."""
    values = solution.values
    idx = DecisionIndex(feeder)
    findings: list[CheckFinding] = []
    T = scenario.horizon_steps
    dt = scenario.dt_hours
    kappa = 2.0 / (feeder.z_base_ohm * feeder.base_kva)

    def val(name: str) -> float:
        try:
            return values[name]
        except KeyError:
            raise SolutionFormatError(f"solution has no value for {name!r}") from None

    elements = [
        (idx.pbr, idx.qbr, b.id, b.from_node, b.to_node, b.r_ohm, b.x_ohm,
         lambda t, m=b.lsg_id: _binary(values, idx.ulsg(m, t)))
        for b in feeder.branches
    ] + [
        (idx.psw, idx.qsw, s.id, s.from_node, s.to_node, s.r_ohm, s.x_ohm,
         lambda t, n=s.id: _binary(values, idx.usw(n, t)))
        for s in feeder.switches
    ]

    for t in range(1, T + 1):
        # nodal balance
        inj_p = {n.id: 0.0 for n in feeder.nodes}
        inj_q = {n.id: 0.0 for n in feeder.nodes}
        for pfn, qfn, eid, u, v, *_ in elements:
            p, q = val(pfn(eid, t)), val(qfn(eid, t))
            inj_p[v] += p
            inj_p[u] -= p
            inj_q[v] += q
            inj_q[u] -= q
        for der in feeder.ders:
            if der.kind == DER_PV:
                inj_p[der.node_id] += val(idx.ppv(der.id, t))
                inj_q[der.node_id] += val(idx.qpv(der.id, t))
            elif der.kind == DER_DG:
                inj_p[der.node_id] += val(idx.pdg(der.id, t))
                inj_q[der.node_id] += val(idx.qdg(der.id, t))
            elif der.kind == DER_BESS:
                inj_p[der.node_id] += val(idx.pdis(der.id, t)) - val(idx.pch(der.id, t))
                inj_q[der.node_id] += val(idx.qbs(der.id, t))
        for node in feeder.nodes:
            on = _binary(values, idx.ulsg(node.lsg_id, t))
            load = profiles[node.id].values_kw[t - 1] * on
            if abs(inj_p[node.id] - load) > OP_TOL:
                findings.append(CheckFinding(
                    "node-balance", t,
                    f"node {node.id}: P imbalance {inj_p[node.id] - load:.3e} kW",
                ))
            if abs(inj_q[node.id] - load * node.qp_ratio) > OP_TOL:
                findings.append(CheckFinding(
                    "node-balance", t,
                    f"node {node.id}: Q imbalance {inj_q[node.id] - load * node.qp_ratio:.3e} kvar",
                ))

        # voltage physics
        for pfn, qfn, eid, u, v, r, x, status_fn in elements:
            if not status_fn(t):
                continue
            resid = (
                val(idx.vsq(u, t)) - val(idx.vsq(v, t))
                - kappa * (r * val(pfn(eid, t)) + x * val(qfn(eid, t)))
            )
            if abs(resid) > OP_TOL:
                findings.append(CheckFinding(
                    "voltage-drop", t, f"element {eid}: drop residual {resid:.3e}",
                ))
        for node in feeder.nodes:
            if not _binary(values, idx.ulsg(node.lsg_id, t)):
                continue
            v_pu = val(idx.vsq(node.id, t)) ** 0.5
            if not scenario.v_min_pu - OP_TOL <= v_pu <= scenario.v_max_pu + OP_TOL:
                findings.append(CheckFinding(
                    "voltage-bound", t, f"node {node.id}: {v_pu:.6f} p.u.",
                ))
        for lsg in feeder.lsgs:
            if lsg.kind == LSG_KIND_LOAD:
                continue
            if not _binary(values, idx.ur(lsg.id, t)):
                continue
            wanted = DER_PV if lsg.kind == LSG_KIND_PV else DER_DG
            anchor = next(
                d.node_id for d in feeder.ders
                if feeder.lsg_of_node(d.node_id) == lsg.id and d.kind == wanted
            )
            v_pu = val(idx.vsq(anchor, t)) ** 0.5
            if abs(v_pu - scenario.v_rate_pu) > ANCHOR_TOL:
                findings.append(CheckFinding(
                    "root-anchor", t,
                    f"root {lsg.id} node {anchor}: {v_pu:.6f} p.u. != {scenario.v_rate_pu}",
                ))
        if scenario.mode != MODE_LEGACY:
            for lsg in feeder.lsgs:
                if lsg.kind == LSG_KIND_PV:
                    if _binary(values, idx.ur(lsg.id, t)) != _binary(values, idx.ulsg(lsg.id, t)):
                        findings.append(CheckFinding(
                            "pv-root-tie", t, f"PV LSG {lsg.id}: root != served",
                        ))

        # DER accounting
        reserve = 0.0
        served = 0.0
        for der in feeder.ders:
            host_on = _binary(values, idx.ulsg(feeder.lsg_of_node(der.node_id), t))
            if der.kind == DER_PV:
                p = val(idx.ppv(der.id, t))
                avail = profiles[der.id].values_kw[t - 1] * host_on
                if p < -OP_TOL or p > avail + OP_TOL:
                    findings.append(CheckFinding(
                        "pv-limits", t, f"{der.id}: {p:.3f} kW vs available {avail:.3f}",
                    ))
                reserve += avail - p
            elif der.kind == DER_DG:
                on = _binary(values, idx.udg(der.id, t))
                p = val(idx.pdg(der.id, t))
                lo = DG_MIN_FRAC * der.rated_kw * on
                hi = DG_MAX_FRAC * der.rated_kw * on
                if p < lo - OP_TOL or p > hi + OP_TOL:
                    findings.append(CheckFinding(
                        "dg-limits", t, f"{der.id}: {p:.3f} kW outside [{lo:.1f}, {hi:.1f}]",
                    ))
                if on and not host_on:
                    findings.append(CheckFinding(
                        "dg-limits", t, f"{der.id}: committed while its LSG is off",
                    ))
                reserve += hi - p
            elif der.kind == DER_BESS:
                cap = der.energy_kwh
                soc = val(idx.soc(der.id, t))
                prev = val(idx.soc(der.id, t - 1)) if t > 1 else der.soc_init_frac * cap
                pch = val(idx.pch(der.id, t))
                pdis = val(idx.pdis(der.id, t))
                step = der.efficiency * pch * dt - pdis * dt / der.efficiency
                if abs(soc - prev - step) > OP_TOL:
                    findings.append(CheckFinding(
                        "soc-recursion", t, f"{der.id}: SOC residual {soc - prev - step:.3e} kWh",
                    ))
                if soc < der.soc_min_frac * cap - OP_TOL or soc > der.soc_max_frac * cap + OP_TOL:
                    findings.append(CheckFinding(
                        "soc-bound", t, f"{der.id}: SOC {soc:.3f} kWh outside band",
                    ))
                if _binary(values, idx.uch(der.id, t)) + _binary(values, idx.udis(der.id, t)) > host_on:
                    findings.append(CheckFinding(
                        "bess-mode", t, f"{der.id}: charge/discharge flags exceed host status",
                    ))
                reserve += der.discharge_kw_max * host_on - pdis + pch
        for lsg in feeder.lsgs:
            on = _binary(values, idx.ulsg(lsg.id, t))
            if on:
                served += sum(
                    profiles[n].values_kw[t - 1] for n in lsg.node_ids
                )
        if reserve + OP_TOL < scenario.reserve_fraction * served:
            findings.append(CheckFinding(
                "reserve", t,
                f"headroom {reserve:.3f} kW < {scenario.reserve_fraction} x {served:.3f} kW served",
            ))

    # minimum service duration over the whole horizon
    K = scenario.msd_steps
    for lsg in feeder.lsgs:
        series = [_binary(values, idx.ulsg(lsg.id, t)) for t in range(1, T + 1)]
        t = 0
        while t < T:
            if series[t] and (t == 0 or not series[t - 1]):
                run = 0
                while t + run < T and series[t + run]:
                    run += 1
                need = min(K, T - t)
                if run < need:
                    findings.append(CheckFinding(
                        "msd-run", t + 1,
                        f"LSG {lsg.id}: on-run of {run} step(s) from t={t + 1}, need {need}",
                    ))
                t += run
            else:
                t += 1
    return CheckReport(tuple(findings))
