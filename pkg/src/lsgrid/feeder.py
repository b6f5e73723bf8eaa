"""Feeder domain model.

A feeder is described as a set of load switching groups (LSGs): islands of
load nodes tied together by internal radial branches, interconnected only
through remotely operable switches. Grid-forming DERs (hybrid PV plant, DG)
make their host LSG a root candidate, i.e. an LSG that may anchor a
microgrid.
"""

from __future__ import annotations

import json
import re
from dataclasses import dataclass, field

from .errors import FeederDefinitionError

# identifiers become components of dotted variable names, so dots and
# whitespace are banned
_ID_RE = re.compile(r"^[A-Za-z0-9_\-]+$")

LSG_KIND_PV = "pv-plant"
LSG_KIND_DG = "dg"
LSG_KIND_LOAD = "load-only"

DER_PV = "pv-farm"
DER_BESS = "bess"
DER_DG = "dg"


@dataclass(frozen=True)
class LoadNode:
    id: str
    lsg_id: str
    priority_weight: float = 1.0
    is_critical: bool = False
    peak_kw: float = 0.0
    qp_ratio: float = 0.33  # kvar drawn per kW of load


@dataclass(frozen=True)
class Branch:
    from_node: str
    to_node: str
    r_ohm: float
    x_ohm: float
    lsg_id: str
    capacity_kva: float = 5000.0

    @property
    def id(self) -> str:
        return f"{self.from_node}_{self.to_node}"


@dataclass(frozen=True)
class Switch:
    id: str
    from_node: str
    to_node: str
    from_lsg: str
    to_lsg: str
    r_ohm: float
    x_ohm: float
    capacity_kva: float = 5000.0


@dataclass(frozen=True)
class Lsg:
    id: str
    node_ids: tuple[str, ...]
    branch_ids: tuple[str, ...]
    kind: str = LSG_KIND_LOAD


@dataclass(frozen=True)
class DerAsset:
    id: str
    node_id: str
    kind: str
    rated_kw: float
    inverter_kva: float = 0.0
    energy_kwh: float = 0.0
    charge_kw_max: float = 0.0
    discharge_kw_max: float = 0.0
    efficiency: float = 0.95
    soc_min_frac: float = 0.2
    soc_max_frac: float = 1.0
    soc_init_frac: float = 1.0


@dataclass(frozen=True)
class LsgGraph:
    """Undirected multigraph over LSGs; one edge per switch."""

    lsg_ids: tuple[str, ...]
    edges: tuple[tuple[str, str, str], ...]  # (switch_id, from_lsg, to_lsg)
    root_candidate_ids: tuple[str, ...]

    def adjacency(self) -> dict[str, list[tuple[str, str]]]:
        """Neighbors per LSG as (switch_id, other_lsg) pairs."""
        adj: dict[str, list[tuple[str, str]]] = {m: [] for m in self.lsg_ids}
        for sid, a, b in self.edges:
            adj[a].append((sid, b))
            adj[b].append((sid, a))
        return adj


@dataclass(frozen=True)
class FeederModel:
    base_kv: float
    base_kva: float
    nodes: tuple[LoadNode, ...]
    branches: tuple[Branch, ...]
    switches: tuple[Switch, ...]
    lsgs: tuple[Lsg, ...]
    ders: tuple[DerAsset, ...]
    node_by_id: dict[str, LoadNode] = field(repr=False, default_factory=dict)
    lsg_by_id: dict[str, Lsg] = field(repr=False, default_factory=dict)
    switch_by_id: dict[str, Switch] = field(repr=False, default_factory=dict)

    @property
    def z_base_ohm(self) -> float:
        return self.base_kv**2 * 1000.0 / self.base_kva

    def lsg_of_node(self, node_id: str) -> str:
        return self.node_by_id[node_id].lsg_id

    def ders_in_lsg(self, lsg_id: str) -> tuple[DerAsset, ...]:
        return tuple(d for d in self.ders if self.lsg_of_node(d.node_id) == lsg_id)

    @property
    def root_candidate_ids(self) -> tuple[str, ...]:
        return tuple(m.id for m in self.lsgs if m.kind != LSG_KIND_LOAD)

    def lsg_graph(self) -> LsgGraph:
        return LsgGraph(
            lsg_ids=tuple(m.id for m in self.lsgs),
            edges=tuple((s.id, s.from_lsg, s.to_lsg) for s in self.switches),
            root_candidate_ids=self.root_candidate_ids,
        )


@dataclass(frozen=True)
class Finding:
    code: str
    message: str
    severity: str = "error"  # or "warning"


@dataclass(frozen=True)
class ValidationReport:
    findings: tuple[Finding, ...]

    @property
    def passed(self) -> bool:
        return not any(f.severity == "error" for f in self.findings)

    def to_dict(self) -> dict:
        return {
            "passed": self.passed,
            "findings": [
                {"code": f.code, "message": f.message, "severity": f.severity}
                for f in self.findings
            ],
        }


def _check_id(kind: str, value) -> str:
    if not isinstance(value, str) or not _ID_RE.match(value):
        raise FeederDefinitionError(
            f"{kind} id {value!r} is not a plain identifier (letters, digits, _ or -)"
        )
    return value


def _take(record: dict, context: str, required: dict, optional: dict) -> dict:
    unknown = set(record) - set(required) - set(optional)
    if unknown:
        raise FeederDefinitionError(f"unknown field(s) {sorted(unknown)} in {context}")
    out = {}
    for key, conv in required.items():
        if key not in record:
            raise FeederDefinitionError(f"missing field {key!r} in {context}")
        out[key] = conv(record[key])
    for key, (conv, default) in optional.items():
        out[key] = conv(record[key]) if key in record else default
    return out


def build_feeder(definition: dict) -> FeederModel:
    """Resolve a parsed feeder definition into a cross-referenced model.

    The LSG kind partition (pv-plant / dg / load-only) is derived from DER
    placement; a PV plant takes precedence over a DG sharing the LSG since
    it is the voltage-regulating source.
    """
    if not isinstance(definition, dict):
        raise FeederDefinitionError("feeder definition must be a JSON object")
    top_unknown = set(definition) - {
        "base_kv", "base_kva", "nodes", "branches", "switches", "lsgs", "ders",
    }
    if top_unknown:
        raise FeederDefinitionError(f"unknown top-level field(s) {sorted(top_unknown)}")
    try:
        base_kv = float(definition["base_kv"])
        base_kva = float(definition["base_kva"])
    except KeyError as exc:
        raise FeederDefinitionError(f"missing top-level field {exc}") from exc
    if base_kv <= 0 or base_kva <= 0:
        raise FeederDefinitionError("base_kv and base_kva must be positive")

    # LSG membership is declared on the LSG side; every node must land in
    # exactly one LSG
    node_lsg: dict[str, str] = {}
    lsg_records = []
    for rec in definition.get("lsgs", []):
        r = _take(rec, "lsg record", {"id": lambda v: _check_id("lsg", v)},
                  {"nodes": (list, [])})
        for nid in r["nodes"]:
            _check_id("node", nid)
            if nid in node_lsg:
                raise FeederDefinitionError(
                    f"node {nid!r} assigned to two LSGs ({node_lsg[nid]!r} and {r['id']!r})"
                )
            node_lsg[nid] = r["id"]
        if r["id"] in {x["id"] for x in lsg_records}:
            raise FeederDefinitionError(f"duplicate lsg id {r['id']!r}")
        lsg_records.append(r)
    lsg_ids = [r["id"] for r in lsg_records]

    nodes: list[LoadNode] = []
    for rec in definition.get("nodes", []):
        r = _take(
            rec, "node record",
            {"id": lambda v: _check_id("node", v)},
            {
                "peak_kw": (float, 0.0),
                "priority_weight": (float, 1.0),
                "is_critical": (bool, False),
                "qp_ratio": (float, 0.33),
            },
        )
        if r["id"] not in node_lsg:
            raise FeederDefinitionError(f"node {r['id']!r} belongs to no LSG")
        if r["priority_weight"] < 1.0:
            raise FeederDefinitionError(f"node {r['id']!r}: priority_weight < 1")
        if any(n.id == r["id"] for n in nodes):
            raise FeederDefinitionError(f"duplicate node id {r['id']!r}")
        nodes.append(LoadNode(
            id=r["id"], lsg_id=node_lsg[r["id"]],
            priority_weight=r["priority_weight"], is_critical=r["is_critical"],
            peak_kw=r["peak_kw"], qp_ratio=r["qp_ratio"],
        ))
    node_by_id = {n.id: n for n in nodes}
    declared_missing = set(node_lsg) - set(node_by_id)
    if declared_missing:
        raise FeederDefinitionError(
            f"LSG member node(s) {sorted(declared_missing)} have no node record"
        )

    branches: list[Branch] = []
    for rec in definition.get("branches", []):
        r = _take(
            rec, "branch record",
            {"from": str, "to": str, "r_ohm": float, "x_ohm": float},
            {"capacity_kva": (float, 5000.0)},
        )
        for end in (r["from"], r["to"]):
            if end not in node_by_id:
                raise FeederDefinitionError(f"branch endpoint {end!r} is not a node")
        la, lb = node_lsg[r["from"]], node_lsg[r["to"]]
        if la != lb:
            raise FeederDefinitionError(
                f"branch {r['from']}-{r['to']} crosses LSGs {la!r}/{lb!r}; "
                "inter-LSG connections must be switches"
            )
        branches.append(Branch(
            from_node=r["from"], to_node=r["to"], r_ohm=r["r_ohm"],
            x_ohm=r["x_ohm"], lsg_id=la, capacity_kva=r["capacity_kva"],
        ))

    switches: list[Switch] = []
    for rec in definition.get("switches", []):
        r = _take(
            rec, "switch record",
            {"id": lambda v: _check_id("switch", v), "from": str, "to": str},
            {
                "r_ohm": (float, 0.0),
                "x_ohm": (float, 0.0),
                "capacity_kva": (float, 5000.0),
            },
        )
        for end in (r["from"], r["to"]):
            if end not in node_by_id:
                raise FeederDefinitionError(f"switch endpoint {end!r} is not a node")
        la, lb = node_lsg[r["from"]], node_lsg[r["to"]]
        if la == lb:
            raise FeederDefinitionError(
                f"switch {r['id']!r} has both endpoints in LSG {la!r}"
            )
        if any(s.id == r["id"] for s in switches):
            raise FeederDefinitionError(f"duplicate switch id {r['id']!r}")
        switches.append(Switch(
            id=r["id"], from_node=r["from"], to_node=r["to"],
            from_lsg=la, to_lsg=lb, r_ohm=r["r_ohm"], x_ohm=r["x_ohm"],
            capacity_kva=r["capacity_kva"],
        ))

    ders: list[DerAsset] = []
    for rec in definition.get("ders", []):
        r = _take(
            rec, "der record",
            {
                "id": lambda v: _check_id("der", v),
                "node": str,
                "kind": str,
                "rated_kw": float,
            },
            {
                "inverter_kva": (float, 0.0),
                "energy_kwh": (float, 0.0),
                "charge_kw_max": (float, 0.0),
                "discharge_kw_max": (float, 0.0),
                "efficiency": (float, 0.95),
                "soc_min_frac": (float, 0.2),
                "soc_max_frac": (float, 1.0),
                "soc_init_frac": (float, 1.0),
            },
        )
        if r["node"] not in node_by_id:
            raise FeederDefinitionError(f"DER {r['id']!r} sits at unknown node {r['node']!r}")
        if r["kind"] not in (DER_PV, DER_BESS, DER_DG):
            raise FeederDefinitionError(f"DER {r['id']!r} has unknown kind {r['kind']!r}")
        if r["rated_kw"] <= 0:
            raise FeederDefinitionError(f"DER {r['id']!r}: rated_kw must be positive")
        if not 0.0 < r["efficiency"] <= 1.0:
            raise FeederDefinitionError(f"DER {r['id']!r}: efficiency outside (0, 1]")
        if not 0.0 <= r["soc_min_frac"] < r["soc_max_frac"] <= 1.0:
            raise FeederDefinitionError(f"DER {r['id']!r}: SOC fractions out of order")
        inverter = r["inverter_kva"]
        if inverter <= 0:
            # inverters oversized at 110% of the power rating, so the inner
            # octagon still admits full rated active power
            if r["kind"] in (DER_PV, DER_DG):
                inverter = 1.1 * r["rated_kw"]
            else:
                inverter = 1.1 * max(
                    r["charge_kw_max"], r["discharge_kw_max"], r["rated_kw"]
                )
        if any(d.id == r["id"] for d in ders):
            raise FeederDefinitionError(f"duplicate der id {r['id']!r}")
        ders.append(DerAsset(
            id=r["id"], node_id=r["node"], kind=r["kind"], rated_kw=r["rated_kw"],
            inverter_kva=inverter, energy_kwh=r["energy_kwh"],
            charge_kw_max=r["charge_kw_max"], discharge_kw_max=r["discharge_kw_max"],
            efficiency=r["efficiency"], soc_min_frac=r["soc_min_frac"],
            soc_max_frac=r["soc_max_frac"], soc_init_frac=r["soc_init_frac"],
        ))

    # kind partition: PV plant outranks DG when both share an LSG
    lsg_kinds = {}
    for lid in lsg_ids:
        kinds = {d.kind for d in ders if node_lsg[d.node_id] == lid}
        if DER_PV in kinds:
            lsg_kinds[lid] = LSG_KIND_PV
        elif DER_DG in kinds:
            lsg_kinds[lid] = LSG_KIND_DG
        else:
            lsg_kinds[lid] = LSG_KIND_LOAD

    lsgs = []
    for r in lsg_records:
        member_branches = tuple(b.id for b in branches if b.lsg_id == r["id"])
        lsgs.append(Lsg(
            id=r["id"], node_ids=tuple(r["nodes"]), branch_ids=member_branches,
            kind=lsg_kinds[r["id"]],
        ))

    return FeederModel(
        base_kv=base_kv, base_kva=base_kva,
        nodes=tuple(nodes), branches=tuple(branches), switches=tuple(switches),
        lsgs=tuple(lsgs), ders=tuple(ders),
        node_by_id=node_by_id,
        lsg_by_id={m.id: m for m in lsgs},
        switch_by_id={s.id: s for s in switches},
    )


def load_feeder(path) -> FeederModel:
    with open(path, "r", encoding="utf-8") as fh:
        return build_feeder(json.load(fh))


def validate_feeder(model: FeederModel) -> ValidationReport:
    """Structural checks: each LSG interior must be a connected tree and,
    switches all closed, every LSG should be reachable from a root candidate.
    """
    findings: list[Finding] = []
    for lsg in model.lsgs:
        nodes = set(lsg.node_ids)
        adj: dict[str, list[str]] = {n: [] for n in nodes}
        nb = 0
        for b in model.branches:
            if b.lsg_id != lsg.id:
                continue
            adj[b.from_node].append(b.to_node)
            adj[b.to_node].append(b.from_node)
            nb += 1
        if not nodes:
            findings.append(Finding("empty-lsg", f"LSG {lsg.id} has no nodes"))
            continue
        seen = set()
        stack = [next(iter(sorted(nodes)))]
        while stack:
            x = stack.pop()
            if x in seen:
                continue
            seen.add(x)
            stack.extend(adj[x])
        if len(seen) < len(nodes):
            findings.append(Finding(
                "disconnected-lsg",
                f"LSG {lsg.id} interior is disconnected ({len(seen)}/{len(nodes)} nodes reachable)",
            ))
        if nb > len(nodes) - 1:
            findings.append(Finding(
                "intra-lsg-cycle",
                f"LSG {lsg.id} interior has {nb} branches over {len(nodes)} nodes (cycle)",
            ))

    graph = model.lsg_graph()
    candidates = set(graph.root_candidate_ids)
    adj2 = graph.adjacency()
    reach = set(candidates)
    stack = sorted(candidates)
    while stack:
        x = stack.pop()
        for _, y in adj2[x]:
            if y not in reach:
                reach.add(y)
                stack.append(y)
    for m in graph.lsg_ids:
        if m not in reach:
            findings.append(Finding(
                "unreachable-lsg",
                f"LSG {m} cannot be reached from any root candidate even with all switches closed",
                severity="warning",
            ))
    return ValidationReport(tuple(findings))
