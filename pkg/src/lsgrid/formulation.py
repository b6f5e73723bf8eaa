"""MILP assembly: decision variables, topology rules, comfort constraints,
linearized power flow, DER scheduling, and the service objective.

Status aliasing: a node or internal branch has no status variable of its
own; it is on exactly when its LSG is on. Likewise an edge of the LSG graph
shares the status of its switch. The aliasing lives in `DecisionIndex`, so
those identities cost zero rows.

Sign convention for the objective: served weighted energy enters negatively
(the model minimizes), switching actions enter positively with weight k1,
so the optimum trades maximum weighted service against switching.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

from .errors import ModelBuildError
from .feeder import (
    DER_BESS, DER_DG, DER_PV, LSG_KIND_DG, LSG_KIND_LOAD, LSG_KIND_PV,
    DerAsset, FeederModel,
)
from .loops import enumerate_loops
from .milp import MilpModel
from .profiles import Profile, preference_weight
from .scenario import MODE_LEGACY, ScenarioConfig

# operating band of a committed generator, as fractions of rated power
DG_MIN_FRAC = 0.25
DG_MAX_FRAC = 1.00

# inner-octagon inverter capability: eight half-planes tangent to the
# octagon inscribed in the apparent-power circle; the active-power axis
# crosses an edge midpoint, so radius shrinks by cos(pi/8). Normals use
# exact components so offline units produce clean zero coefficients.
_OCTAGON_SHRINK = math.cos(math.pi / 8.0)
_HALF_SQRT2 = math.sqrt(0.5)
_OCTAGON_NORMALS = [
    (1.0, 0.0), (_HALF_SQRT2, _HALF_SQRT2), (0.0, 1.0),
    (-_HALF_SQRT2, _HALF_SQRT2), (-1.0, 0.0), (-_HALF_SQRT2, -_HALF_SQRT2),
    (0.0, -1.0), (_HALF_SQRT2, -_HALF_SQRT2),
]


class DecisionIndex:
    """Canonical variable names: SYMBOL.<ids>.<t>, t running 1..T."""

    def __init__(self, feeder: FeederModel):
        self._feeder = feeder

    # binary statuses
    def ulsg(self, m: str, t: int) -> str:
        return f"ULSG.{m}.{t}"

    def usw(self, n: str, t: int) -> str:
        return f"USW.{n}.{t}"

    def ur(self, m: str, t: int) -> str:
        return f"UR.{m}.{t}"

    def uso(self, n: str, t: int) -> str:
        return f"USO.{n}.{t}"

    def beta(self, n: str, parent_lsg: str, child_lsg: str, t: int) -> str:
        return f"B.{n}.{parent_lsg}.{child_lsg}.{t}"

    # aliasing per the status identities: nodes/branches follow their LSG,
    # edges follow their switch
    def node_status(self, node_id: str, t: int) -> str:
        return self.ulsg(self._feeder.lsg_of_node(node_id), t)

    def branch_status(self, branch_id: str, t: int) -> str:
        lsg = next(b.lsg_id for b in self._feeder.branches if b.id == branch_id)
        return self.ulsg(lsg, t)

    def edge_status(self, switch_id: str, t: int) -> str:
        return self.usw(switch_id, t)

    # continuous network quantities
    def vsq(self, node_id: str, t: int) -> str:
        return f"V2.{node_id}.{t}"

    def pbr(self, branch_id: str, t: int) -> str:
        return f"PBR.{branch_id}.{t}"

    def qbr(self, branch_id: str, t: int) -> str:
        return f"QBR.{branch_id}.{t}"

    def psw(self, switch_id: str, t: int) -> str:
        return f"PSW.{switch_id}.{t}"

    def qsw(self, switch_id: str, t: int) -> str:
        return f"QSW.{switch_id}.{t}"

    # DER dispatch
    def ppv(self, der: str, t: int) -> str:
        return f"PPV.{der}.{t}"

    def qpv(self, der: str, t: int) -> str:
        return f"QPV.{der}.{t}"

    def pdg(self, der: str, t: int) -> str:
        return f"PDG.{der}.{t}"

    def qdg(self, der: str, t: int) -> str:
        return f"QDG.{der}.{t}"

    def udg(self, der: str, t: int) -> str:
        return f"UDG.{der}.{t}"

    def pch(self, der: str, t: int) -> str:
        return f"PCH.{der}.{t}"

    def pdis(self, der: str, t: int) -> str:
        return f"PDIS.{der}.{t}"

    def qbs(self, der: str, t: int) -> str:
        return f"QBS.{der}.{t}"

    def uch(self, der: str, t: int) -> str:
        return f"UCH.{der}.{t}"

    def udis(self, der: str, t: int) -> str:
        return f"UDIS.{der}.{t}"

    def soc(self, der: str, t: int) -> str:
        return f"SOC.{der}.{t}"


@dataclass
class FormulationBuild:
    """Mutable assembly context shared by the block builders."""

    feeder: FeederModel
    scenario: ScenarioConfig
    profiles: dict[str, Profile] | None = None
    model: MilpModel = field(default_factory=MilpModel)
    index: DecisionIndex = None
    audit: dict[str, dict[str, int]] = field(default_factory=dict)

    def __post_init__(self):
        if self.index is None:
            self.index = DecisionIndex(self.feeder)

    def steps(self) -> range:
        return range(1, self.scenario.horizon_steps + 1)

    def _record(self, block: str, vars_before: int, rows_before: int) -> None:
        self.audit[block] = {
            "variables": len(self.model.variables) - vars_before,
            "rows": len(self.model.constraints) - rows_before,
        }

    def load_kw(self, node_id: str, t: int) -> float:
        prof = (self.profiles or {}).get(node_id)
        if prof is None:
            raise ModelBuildError(f"no load profile for node {node_id!r}")
        return prof.values_kw[t - 1]

    def lsg_load_kw(self, lsg_id: str, t: int) -> float:
        return sum(
            self.load_kw(n, t) for n in self.feeder.lsg_by_id[lsg_id].node_ids
        )


def build_status_identities(build: FormulationBuild) -> list:
    """Node/branch/edge statuses are aliases of LSG/switch variables; the
    identities are realized in the index and emit no rows."""
    nv, nr = len(build.model.variables), len(build.model.constraints)
    build._record("status-identities", nv, nr)
    return []


def declare_status_variables(build: FormulationBuild) -> None:
    m, fd = build.model, build.feeder
    nv, nr = len(m.variables), len(m.constraints)
    candidates = fd.root_candidate_ids
    for t in build.steps():
        for lsg in fd.lsgs:
            m.add_binary(build.index.ulsg(lsg.id, t))
        for sw in fd.switches:
            m.add_binary(build.index.usw(sw.id, t))
        for cid in candidates:
            m.add_binary(build.index.ur(cid, t))
        for sw in fd.switches:
            m.add_binary(build.index.beta(sw.id, sw.from_lsg, sw.to_lsg, t))
            m.add_binary(build.index.beta(sw.id, sw.to_lsg, sw.from_lsg, t))
    build._record("status-variables", nv, nr)


def build_topology_constraints(build: FormulationBuild) -> list:
    """Multi-root radial topology rules.

    Per step: each closed switch carries exactly one supply direction; a
    load-only LSG is served iff it has exactly one parent; a root candidate
    either anchors its microgrid (no parent) or is served through one
    parent; switches touching an unserved LSG stay open; no supply loop
    closes; served count = closed switches + roots. Legacy mode pins every
    energized candidate as a root, which forbids source pooling.
    """
    m, fd, idx = build.model, build.feeder, build.index
    nv, nr = len(m.variables), len(m.constraints)
    graph = fd.lsg_graph()
    candidates = set(graph.root_candidate_ids)
    if not candidates:
        raise ModelBuildError("feeder has no root candidate LSG")
    loops = enumerate_loops(graph)
    inbound: dict[str, list[tuple[str, str]]] = {l.id: [] for l in fd.lsgs}
    for sw in fd.switches:
        inbound[sw.to_lsg].append((sw.id, sw.from_lsg))
        inbound[sw.from_lsg].append((sw.id, sw.to_lsg))
    legacy = build.scenario.mode == MODE_LEGACY
    rows = []
    for t in build.steps():
        for sw in fd.switches:
            rows.append(m.add_constraint(
                f"dir.{sw.id}.{t}",
                [(idx.beta(sw.id, sw.from_lsg, sw.to_lsg, t), 1.0),
                 (idx.beta(sw.id, sw.to_lsg, sw.from_lsg, t), 1.0),
                 (idx.usw(sw.id, t), -1.0)],
                "=", 0.0,
            ))
        for lsg in fd.lsgs:
            beta_in = [(idx.beta(n, other, lsg.id, t), 1.0)
                       for n, other in inbound[lsg.id]]
            if lsg.id not in candidates:
                rows.append(m.add_constraint(
                    f"parent.{lsg.id}.{t}",
                    beta_in + [(idx.ulsg(lsg.id, t), -1.0)],
                    "=", 0.0,
                ))
                continue
            if legacy:
                rows.append(m.add_constraint(
                    f"noparent.{lsg.id}.{t}", beta_in, "=", 0.0,
                ))
                rows.append(m.add_constraint(
                    f"rooteq.{lsg.id}.{t}",
                    [(idx.ur(lsg.id, t), 1.0), (idx.ulsg(lsg.id, t), -1.0)],
                    "=", 0.0,
                ))
            else:
                rows.append(m.add_constraint(
                    f"rootlo.{lsg.id}.{t}",
                    beta_in + [(idx.ulsg(lsg.id, t), -1.0), (idx.ur(lsg.id, t), 1.0)],
                    ">=", 0.0,
                ))
                rows.append(m.add_constraint(
                    f"roothi.{lsg.id}.{t}",
                    beta_in + [(idx.ulsg(lsg.id, t), -0.5), (idx.ur(lsg.id, t), 0.5)],
                    "<=", 0.5,
                ))
            rows.append(m.add_constraint(
                f"rootsrv.{lsg.id}.{t}",
                [(idx.ur(lsg.id, t), 1.0), (idx.ulsg(lsg.id, t), -1.0)],
                "<=", 0.0,
            ))
        for sw in fd.switches:
            rows.append(m.add_constraint(
                f"endpt.{sw.id}.{t}",
                [(idx.usw(sw.id, t), 1.0),
                 (idx.ulsg(sw.from_lsg, t), -0.5),
                 (idx.ulsg(sw.to_lsg, t), -0.5)],
                "<=", 0.0,
            ))
        for c, loop in enumerate(loops.loops):
            rows.append(m.add_constraint(
                f"loop.{c}.{t}",
                [(idx.usw(n, t), 1.0) for n in loop],
                "<=", float(len(loop) - 1),
            ))
        count_terms = [(idx.usw(sw.id, t), 1.0) for sw in fd.switches]
        count_terms += [(idx.ur(cid, t), 1.0) for cid in fd.root_candidate_ids]
        count_terms += [(idx.ulsg(lsg.id, t), -1.0) for lsg in fd.lsgs]
        rows.append(m.add_constraint(f"count.{t}", count_terms, "=", 0.0))
    build._record("topology", nv, nr)
    return rows


def build_switching_action_constraints(build: FormulationBuild) -> list:
    """Switching-action indicators: USO bounds |USW_t - USW_{t-1}| from
    above through the two linear inequalities; all switches open at t=0."""
    m, fd, idx = build.model, build.feeder, build.index
    nv, nr = len(m.variables), len(m.constraints)
    for t in build.steps():
        for sw in fd.switches:
            m.add_binary(idx.uso(sw.id, t))
    rows = []
    for t in build.steps():
        for sw in fd.switches:
            cur = (idx.usw(sw.id, t), 1.0)
            act = (idx.uso(sw.id, t), -1.0)
            if t == 1:
                rows.append(m.add_constraint(
                    f"swon.{sw.id}.{t}", [cur, act], "<=", 0.0))
                rows.append(m.add_constraint(
                    f"swoff.{sw.id}.{t}", [(cur[0], -1.0), act], "<=", 0.0))
            else:
                prev = idx.usw(sw.id, t - 1)
                rows.append(m.add_constraint(
                    f"swon.{sw.id}.{t}", [cur, (prev, -1.0), act], "<=", 0.0))
                rows.append(m.add_constraint(
                    f"swoff.{sw.id}.{t}", [(prev, 1.0), (cur[0], -1.0), act], "<=", 0.0))
    build._record("switching", nv, nr)
    return rows


def build_msd_constraints(build: FormulationBuild) -> list:
    """Minimum service duration: switching an LSG on at step t keeps it on
    for min(K, steps remaining) consecutive steps. K = 1 needs no rows.

    Each (LSG, t) gets the windowed-sum row plus the per-offset rows
    U_{t+z} >= U_t - U_{t-1}; the latter are integer-equivalent but tighten
    the LP relaxation considerably.
    """
    m, fd, idx = build.model, build.feeder, build.index
    nv, nr = len(m.variables), len(m.constraints)
    K = build.scenario.msd_steps
    T = build.scenario.horizon_steps
    rows = []
    if K > 1:
        for lsg in fd.lsgs:
            for t in build.steps():
                k_hat = min(K, T - t + 1)
                terms: dict[str, float] = {}
                for z in range(k_hat):
                    name = idx.ulsg(lsg.id, t + z)
                    terms[name] = terms.get(name, 0.0) + 1.0
                on_t = idx.ulsg(lsg.id, t)
                terms[on_t] = terms.get(on_t, 0.0) - float(k_hat)
                if t > 1:
                    prev = idx.ulsg(lsg.id, t - 1)
                    terms[prev] = terms.get(prev, 0.0) + float(k_hat)
                rows.append(m.add_constraint(
                    f"msd.{lsg.id}.{t}", list(terms.items()), ">=", 0.0,
                ))
                for z in range(1, k_hat):
                    step_terms = [
                        (idx.ulsg(lsg.id, t + z), 1.0),
                        (idx.ulsg(lsg.id, t), -1.0),
                    ]
                    if t > 1:
                        step_terms.append((idx.ulsg(lsg.id, t - 1), 1.0))
                    rows.append(m.add_constraint(
                        f"msdz.{lsg.id}.{t}.{z}", step_terms, ">=", 0.0,
                    ))
    build._record("msd", nv, nr)
    return rows


def _octagon_rows(m: MilpModel, name_prefix: str, p_terms, q_var: str,
                  s_kva: float, gate_var: str, t: int) -> list:
    """Eight capability half-planes scaled by the gating binary, so an
    offline unit is pinned to the origin."""
    radius = s_kva * _OCTAGON_SHRINK
    rows = []
    for k, (cp, cq) in enumerate(_OCTAGON_NORMALS):
        terms = [(v, cp * coef) for v, coef in p_terms]
        terms.append((q_var, cq))
        terms.append((gate_var, -radius))
        rows.append(m.add_constraint(f"{name_prefix}{k}.{t}", terms, "<=", 0.0))
    return rows


def build_der_constraints(build: FormulationBuild) -> list:
    """DER scheduling: PV with curtailment under its forecast, DG commitment
    with a 25-100% band, BESS with exclusive charge/discharge, 95% one-way
    efficiency and a 20-100% SOC band starting full, octagonal inverter
    capability without reactive absorption, and a system-wide spinning
    reserve of 15% of served load."""
    m, fd, idx, sc = build.model, build.feeder, build.index, build.scenario
    nv, nr = len(m.variables), len(m.constraints)
    dt = sc.dt_hours
    rows = []

    def forecast(der: DerAsset, t: int) -> float:
        prof = (build.profiles or {}).get(der.id)
        if prof is None:
            raise ModelBuildError(f"no generation profile for PV {der.id!r}")
        return prof.values_kw[t - 1]

    for der in fd.ders:
        host = fd.lsg_of_node(der.node_id)
        if der.kind == DER_PV:
            for t in build.steps():
                m.add_continuous(idx.ppv(der.id, t), 0.0, 1.1 * der.rated_kw)
                m.add_continuous(idx.qpv(der.id, t), 0.0, der.inverter_kva)
            for t in build.steps():
                rows.append(m.add_constraint(
                    f"pvcap.{der.id}.{t}",
                    [(idx.ppv(der.id, t), 1.0),
                     (idx.ulsg(host, t), -forecast(der, t))],
                    "<=", 0.0,
                ))
                rows += _octagon_rows(
                    m, f"pvpoly.{der.id}.", [(idx.ppv(der.id, t), 1.0)],
                    idx.qpv(der.id, t), der.inverter_kva, idx.ulsg(host, t), t,
                )
        elif der.kind == DER_DG:
            for t in build.steps():
                m.add_binary(idx.udg(der.id, t))
                m.add_continuous(idx.pdg(der.id, t), 0.0, DG_MAX_FRAC * der.rated_kw)
                m.add_continuous(idx.qdg(der.id, t), 0.0, der.inverter_kva)
            for t in build.steps():
                rows.append(m.add_constraint(
                    f"dgon.{der.id}.{t}",
                    [(idx.udg(der.id, t), 1.0), (idx.ulsg(host, t), -1.0)],
                    "<=", 0.0,
                ))
                rows.append(m.add_constraint(
                    f"dgmin.{der.id}.{t}",
                    [(idx.pdg(der.id, t), 1.0),
                     (idx.udg(der.id, t), -DG_MIN_FRAC * der.rated_kw)],
                    ">=", 0.0,
                ))
                rows.append(m.add_constraint(
                    f"dgmax.{der.id}.{t}",
                    [(idx.pdg(der.id, t), 1.0),
                     (idx.udg(der.id, t), -DG_MAX_FRAC * der.rated_kw)],
                    "<=", 0.0,
                ))
                rows += _octagon_rows(
                    m, f"dgpoly.{der.id}.", [(idx.pdg(der.id, t), 1.0)],
                    idx.qdg(der.id, t), der.inverter_kva, idx.udg(der.id, t), t,
                )
        elif der.kind == DER_BESS:
            cap = der.energy_kwh
            if cap <= 0:
                raise ModelBuildError(f"BESS {der.id!r} has no energy capacity")
            s_kva = der.inverter_kva
            if s_kva <= 0:
                s_kva = 1.1 * max(der.charge_kw_max, der.discharge_kw_max)
            for t in build.steps():
                m.add_binary(idx.uch(der.id, t))
                m.add_binary(idx.udis(der.id, t))
                m.add_continuous(idx.pch(der.id, t), 0.0, der.charge_kw_max)
                m.add_continuous(idx.pdis(der.id, t), 0.0, der.discharge_kw_max)
                m.add_continuous(idx.qbs(der.id, t), 0.0, s_kva)
                m.add_continuous(
                    idx.soc(der.id, t),
                    der.soc_min_frac * cap, der.soc_max_frac * cap,
                )
            eta = der.efficiency
            for t in build.steps():
                rows.append(m.add_constraint(
                    f"bxor.{der.id}.{t}",
                    [(idx.uch(der.id, t), 1.0), (idx.udis(der.id, t), 1.0),
                     (idx.ulsg(host, t), -1.0)],
                    "<=", 0.0,
                ))
                rows.append(m.add_constraint(
                    f"bchcap.{der.id}.{t}",
                    [(idx.pch(der.id, t), 1.0),
                     (idx.uch(der.id, t), -der.charge_kw_max)],
                    "<=", 0.0,
                ))
                rows.append(m.add_constraint(
                    f"bdiscap.{der.id}.{t}",
                    [(idx.pdis(der.id, t), 1.0),
                     (idx.udis(der.id, t), -der.discharge_kw_max)],
                    "<=", 0.0,
                ))
                # SOC_t - SOC_{t-1} = eta*dt*PCH - dt/eta*PDIS
                terms = [(idx.soc(der.id, t), 1.0),
                         (idx.pch(der.id, t), -eta * dt),
                         (idx.pdis(der.id, t), dt / eta)]
                if t == 1:
                    rows.append(m.add_constraint(
                        f"bsoc.{der.id}.{t}", terms, "=", der.soc_init_frac * cap,
                    ))
                else:
                    rows.append(m.add_constraint(
                        f"bsoc.{der.id}.{t}",
                        terms + [(idx.soc(der.id, t - 1), -1.0)],
                        "=", 0.0,
                    ))
                rows += _octagon_rows(
                    m, f"bpoly.{der.id}.",
                    [(idx.pdis(der.id, t), 1.0), (idx.pch(der.id, t), -1.0)],
                    idx.qbs(der.id, t), s_kva, idx.ulsg(host, t), t,
                )

    # spinning reserve: headroom of online sources covers a fraction of
    # the served load, system-wide
    rho = sc.reserve_fraction
    for t in build.steps():
        terms: list[tuple[str, float]] = []
        for der in fd.ders:
            host = fd.lsg_of_node(der.node_id)
            if der.kind == DER_PV:
                terms.append((idx.ulsg(host, t), forecast(der, t)))
                terms.append((idx.ppv(der.id, t), -1.0))
            elif der.kind == DER_DG:
                terms.append((idx.udg(der.id, t), DG_MAX_FRAC * der.rated_kw))
                terms.append((idx.pdg(der.id, t), -1.0))
            elif der.kind == DER_BESS:
                terms.append((idx.ulsg(host, t), der.discharge_kw_max))
                terms.append((idx.pdis(der.id, t), -1.0))
                terms.append((idx.pch(der.id, t), 1.0))
        for lsg in fd.lsgs:
            load = build.lsg_load_kw(lsg.id, t)
            if load:
                terms.append((idx.ulsg(lsg.id, t), -rho * load))
        rows.append(m.add_constraint(f"reserve.{t}", terms, ">=", 0.0))
    build._record("der", nv, nr)
    return rows


def build_power_flow_constraints(build: FormulationBuild) -> list:
    """Linearized branch flow: lossless nodal balance, squared-voltage drop
    along closed elements (released by big-M when open), flow capacity times
    status, voltage floor for energized nodes, and the rated-voltage anchor
    at each root's grid-forming node."""
    m, fd, idx, sc = build.model, build.feeder, build.index, build.scenario
    nv, nr = len(m.variables), len(m.constraints)
    kappa = 2.0 / (fd.z_base_ohm * fd.base_kva)  # p.u.^2 per (ohm*kW)
    v_max2 = sc.v_max_pu**2
    v_min2 = sc.v_min_pu**2
    v_rate2 = sc.v_rate_pu**2
    m_volt = sc.big_m_voltage
    rows = []

    # elements: (flow p name fn, q name fn, element id, from, to, r, x, cap, status fn)
    elements = []
    for br in fd.branches:
        elements.append((
            idx.pbr, idx.qbr, br.id, br.from_node, br.to_node, br.r_ohm,
            br.x_ohm, br.capacity_kva,
            lambda t, lsg=br.lsg_id: idx.ulsg(lsg, t),
        ))
    for sw in fd.switches:
        elements.append((
            idx.psw, idx.qsw, sw.id, sw.from_node, sw.to_node, sw.r_ohm,
            sw.x_ohm, sw.capacity_kva,
            lambda t, n=sw.id: idx.usw(n, t),
        ))

    def flow_limit(cap: float) -> float:
        if sc.big_m_flow_kva is None:
            return cap
        return min(cap, sc.big_m_flow_kva)  # override may only tighten

    for t in build.steps():
        for node in fd.nodes:
            m.add_continuous(idx.vsq(node.id, t), 0.0, v_max2)
        for pfn, qfn, eid, *_rest in elements:
            flow_m = flow_limit(_rest[4])
            m.add_continuous(pfn(eid, t), -flow_m, flow_m)
            m.add_continuous(qfn(eid, t), -flow_m, flow_m)

    for t in build.steps():
        # nodal balance, real then reactive
        inj_p: dict[str, list[tuple[str, float]]] = {n.id: [] for n in fd.nodes}
        inj_q: dict[str, list[tuple[str, float]]] = {n.id: [] for n in fd.nodes}
        for pfn, qfn, eid, u, v, *_ in elements:
            inj_p[v].append((pfn(eid, t), 1.0))
            inj_p[u].append((pfn(eid, t), -1.0))
            inj_q[v].append((qfn(eid, t), 1.0))
            inj_q[u].append((qfn(eid, t), -1.0))
        for der in fd.ders:
            if der.kind == DER_PV:
                inj_p[der.node_id].append((idx.ppv(der.id, t), 1.0))
                inj_q[der.node_id].append((idx.qpv(der.id, t), 1.0))
            elif der.kind == DER_DG:
                inj_p[der.node_id].append((idx.pdg(der.id, t), 1.0))
                inj_q[der.node_id].append((idx.qdg(der.id, t), 1.0))
            elif der.kind == DER_BESS:
                inj_p[der.node_id].append((idx.pdis(der.id, t), 1.0))
                inj_p[der.node_id].append((idx.pch(der.id, t), -1.0))
                inj_q[der.node_id].append((idx.qbs(der.id, t), 1.0))
        for node in fd.nodes:
            load = build.load_kw(node.id, t)
            status = idx.ulsg(node.lsg_id, t)
            rows.append(m.add_constraint(
                f"pbal.{node.id}.{t}",
                inj_p[node.id] + [(status, -load)],
                "=", 0.0,
            ))
            rows.append(m.add_constraint(
                f"qbal.{node.id}.{t}",
                inj_q[node.id] + [(status, -load * node.qp_ratio)],
                "=", 0.0,
            ))

        for pfn, qfn, eid, u, v, r, x, cap, status_fn in elements:
            status = status_fn(t)
            flow_m = flow_limit(cap)
            for tag, var in (("p", pfn(eid, t)), ("q", qfn(eid, t))):
                rows.append(m.add_constraint(
                    f"{tag}fub.{eid}.{t}",
                    [(var, 1.0), (status, -flow_m)], "<=", 0.0,
                ))
                rows.append(m.add_constraint(
                    f"{tag}flb.{eid}.{t}",
                    [(var, -1.0), (status, -flow_m)], "<=", 0.0,
                ))
            # v_u - v_v = kappa*(r*P + x*Q) when the element is in service
            drop = [
                (idx.vsq(u, t), 1.0), (idx.vsq(v, t), -1.0),
                (pfn(eid, t), -kappa * r), (qfn(eid, t), -kappa * x),
            ]
            rows.append(m.add_constraint(
                f"vdhi.{eid}.{t}", drop + [(status, m_volt)], "<=", m_volt,
            ))
            rows.append(m.add_constraint(
                f"vdlo.{eid}.{t}", drop + [(status, -m_volt)], ">=", -m_volt,
            ))

        for node in fd.nodes:
            rows.append(m.add_constraint(
                f"vmin.{node.id}.{t}",
                [(idx.vsq(node.id, t), 1.0), (idx.ulsg(node.lsg_id, t), -v_min2)],
                ">=", 0.0,
            ))

        # each root candidate anchors its grid-forming node at rated voltage
        # while it is the root; the PV plant is the root whenever served
        for lsg in fd.lsgs:
            if lsg.kind == LSG_KIND_LOAD:
                continue
            wanted = DER_PV if lsg.kind == LSG_KIND_PV else DER_DG
            anchor_node = next(
                d.node_id for d in fd.ders
                if fd.lsg_of_node(d.node_id) == lsg.id and d.kind == wanted
            )
            root = idx.ur(lsg.id, t)
            rows.append(m.add_constraint(
                f"anchlo.{lsg.id}.{t}",
                [(idx.vsq(anchor_node, t), 1.0), (root, -v_rate2)],
                ">=", 0.0,
            ))
            rows.append(m.add_constraint(
                f"anchhi.{lsg.id}.{t}",
                [(idx.vsq(anchor_node, t), 1.0), (root, m_volt - v_rate2)],
                "<=", m_volt,
            ))
            if lsg.kind == LSG_KIND_PV:
                rows.append(m.add_constraint(
                    f"pvroot.{lsg.id}.{t}",
                    [(root, 1.0), (idx.ulsg(lsg.id, t), -1.0)],
                    "=", 0.0,
                ))
    build._record("power-flow", nv, nr)
    return rows


def build_objective(build: FormulationBuild) -> list[tuple[str, float]]:
    """Served weighted energy (negative) plus k1 times switching actions."""
    fd, idx, sc = build.feeder, build.index, build.scenario
    dt = sc.dt_hours
    terms: list[tuple[str, float]] = []
    for t in build.steps():
        for lsg in fd.lsgs:
            coef = 0.0
            for nid in lsg.node_ids:
                node = fd.node_by_id[nid]
                w_pref = preference_weight(sc.schedule_for(nid), t)
                coef += node.priority_weight * w_pref * build.load_kw(nid, t) * dt
            if coef:
                terms.append((idx.ulsg(lsg.id, t), -coef))
        for sw in fd.switches:
            terms.append((idx.uso(sw.id, t), sc.switch_penalty))
    build.model.set_objective(terms)
    return terms


def assemble_model(feeder: FeederModel, scenario: ScenarioConfig,
                   profiles: dict[str, Profile],
                   name: str = "lsgrid") -> FormulationBuild:
    """Build the full scheduling MILP in a fixed block order."""
    for node in feeder.nodes:
        if node.id not in profiles:
            raise ModelBuildError(f"no load profile for node {node.id!r}")
    build = FormulationBuild(feeder, scenario, profiles, MilpModel(name=name))
    declare_status_variables(build)
    build_status_identities(build)
    build_topology_constraints(build)
    build_switching_action_constraints(build)
    build_msd_constraints(build)
    build_der_constraints(build)
    build_power_flow_constraints(build)
    build_objective(build)
    return build
