#!/usr/bin/env python3
"""Regenerate the bundled fixtures (feeders, scenarios, profile CSVs).

The 33-bus feeder splits the classic radial test system into 7 LSGs by
turning six line sections into sectionalizing switches; together with the
five tie switches the switch-level graph has exactly 21 simple loops. The
PV plant sits at node 2 and the DG at node 16, so those two LSGs are the
root candidates.

Profiles are synthetic stand-ins (seeded, committed); regenerating with the
same seed is byte-stable.
"""

import json
import sys
from pathlib import Path

sys.path.insert(0, str(Path(__file__).resolve().parents[1] / "src"))

from lsgrid.feeder import build_feeder  # noqa: E402
from lsgrid.profiles import Profile, write_profiles_csv  # noqa: E402
from lsgrid.scenario import build_scenario  # noqa: E402
from lsgrid.synth import generate_profiles  # noqa: E402

OUT = Path(__file__).resolve().parents[1] / "src" / "lsgrid" / "fixtures"

# classic 33-node radial system: (from, to, r_ohm, x_ohm), 1-indexed buses
BUS33_LINES = [
    (1, 2, 0.0922, 0.0470), (2, 3, 0.4930, 0.2511), (3, 4, 0.3660, 0.1864),
    (4, 5, 0.3811, 0.1941), (5, 6, 0.8190, 0.7070), (6, 7, 0.1872, 0.6188),
    (7, 8, 0.7114, 0.2351), (8, 9, 1.0300, 0.7400), (9, 10, 1.0440, 0.7400),
    (10, 11, 0.1966, 0.0650), (11, 12, 0.3744, 0.1238), (12, 13, 1.4680, 1.1550),
    (13, 14, 0.5416, 0.7129), (14, 15, 0.5910, 0.5260), (15, 16, 0.7463, 0.5450),
    (16, 17, 1.2890, 1.7210), (17, 18, 0.7320, 0.5740), (2, 19, 0.1640, 0.1565),
    (19, 20, 1.5042, 1.3554), (20, 21, 0.4095, 0.4784), (21, 22, 0.7089, 0.9373),
    (3, 23, 0.4512, 0.3083), (23, 24, 0.8980, 0.7091), (24, 25, 0.8960, 0.7011),
    (6, 26, 0.2030, 0.1034), (26, 27, 0.2842, 0.1447), (27, 28, 1.0590, 0.9337),
    (28, 29, 0.8042, 0.7006), (29, 30, 0.5075, 0.2585), (30, 31, 0.9744, 0.9630),
    (31, 32, 0.3105, 0.3619), (32, 33, 0.3410, 0.5302),
]

# (P kW, Q kvar) nameplate loads per node
BUS33_LOADS = {
    2: (100, 60), 3: (90, 40), 4: (120, 80), 5: (60, 30), 6: (60, 20),
    7: (200, 100), 8: (200, 100), 9: (60, 20), 10: (60, 20), 11: (45, 30),
    12: (60, 35), 13: (60, 35), 14: (120, 80), 15: (60, 10), 16: (60, 20),
    17: (60, 20), 18: (90, 40), 19: (90, 40), 20: (90, 40), 21: (90, 40),
    22: (90, 40), 23: (90, 50), 24: (420, 200), 25: (420, 200), 26: (60, 25),
    27: (60, 25), 28: (60, 20), 29: (120, 70), 30: (200, 600), 31: (150, 70),
    32: (210, 100), 33: (60, 40),
}

# line sections replaced by sectionalizing switches (the LSG boundaries);
# this cut yields 7 LSGs and, with the 5 ties below, exactly 21 supply loops
BUS33_CUTS = [(2, 3), (3, 4), (5, 6), (9, 10), (13, 14), (27, 28)]
BUS33_TIES = [
    (8, 21, 2.0, 2.0), (9, 15, 2.0, 2.0), (12, 22, 2.0, 2.0),
    (18, 33, 0.5, 0.5), (25, 29, 0.5, 0.5),
]

BUS33_LSG_NODES = {
    "L1": [1, 2, 19, 20, 21, 22],
    "L2": [3, 23, 24, 25],
    "L3": [4, 5],
    "L4": [6, 7, 8, 9, 26, 27],
    "L5": [10, 11, 12, 13],
    "L6": [14, 15, 16, 17, 18],
    "L7": [28, 29, 30, 31, 32, 33],
}

# critical customers: industry at node 5, medical center at node 10
BUS33_CRITICAL = {5: 68.2, 10: 48.5}


def bus33_feeder() -> dict:
    nodes = []
    for i in range(1, 34):
        p, q = BUS33_LOADS.get(i, (0.0, 0.0))
        rec = {"id": f"n{i}"}
        if i in BUS33_CRITICAL:
            rec.update({
                "peak_kw": BUS33_CRITICAL[i],
                "qp_ratio": round(q / p, 4),
                "priority_weight": 2.0,
                "is_critical": True,
            })
        elif p:
            rec.update({"peak_kw": float(p), "qp_ratio": round(q / p, 4)})
        else:
            rec.update({"peak_kw": 0.0, "qp_ratio": 0.0})
        nodes.append(rec)

    cuts = set(BUS33_CUTS)
    branches = []
    switches = []
    sn = 0
    for u, v, r, x in BUS33_LINES:
        if (u, v) in cuts:
            sn += 1
            switches.append({
                "id": f"s{sn}", "from": f"n{u}", "to": f"n{v}",
                "r_ohm": r, "x_ohm": x, "capacity_kva": 5000.0,
            })
        else:
            branches.append({
                "from": f"n{u}", "to": f"n{v}", "r_ohm": r, "x_ohm": x,
                "capacity_kva": 5000.0,
            })
    for u, v, r, x in BUS33_TIES:
        sn += 1
        switches.append({
            "id": f"s{sn}", "from": f"n{u}", "to": f"n{v}",
            "r_ohm": r, "x_ohm": x, "capacity_kva": 5000.0,
        })

    lsgs = [
        {"id": lid, "nodes": [f"n{i}" for i in members]}
        for lid, members in BUS33_LSG_NODES.items()
    ]
    ders = [
        {"id": "pv1", "node": "n2", "kind": "pv-farm", "rated_kw": 2200.0,
         "inverter_kva": 2420.0},
        {"id": "bat1", "node": "n2", "kind": "bess", "rated_kw": 1000.0,
         "energy_kwh": 4000.0, "charge_kw_max": 1000.0,
         "discharge_kw_max": 1000.0, "efficiency": 0.95,
         "soc_min_frac": 0.2, "soc_max_frac": 1.0, "soc_init_frac": 1.0},
        {"id": "dg1", "node": "n16", "kind": "dg", "rated_kw": 400.0,
         "inverter_kva": 440.0},
    ]
    return {
        "base_kv": 12.66, "base_kva": 10000.0,
        "nodes": nodes, "branches": branches, "switches": switches,
        "lsgs": lsgs, "ders": ders,
    }


def bus33_scenario() -> dict:
    return {
        "horizon_steps": 48,
        "step_minutes": 30,
        "start_time": "2021-07-15T00:00:00",
        "mode": "flexible",
        "switch_penalty": 1.0,
        "msd_hours": 2.0,
        "voltage_min_pu": 0.95,
        "voltage_max_pu": 1.05,
        "voltage_rate_pu": 1.0,
        "reserve_fraction": 0.15,
        "big_m_voltage": 2.0,
        "preferred_windows": [
            {"start_clock": "07:00", "end_clock": "09:00", "weight": 1.5},
            {"start_clock": "18:00", "end_clock": "20:00", "weight": 1.5},
        ],
        "solver": {"rel_gap": 0.01, "time_limit_s": 600},
    }


def fig1_feeder() -> dict:
    """Six-LSG schematic feeder: one loop of five switches plus a spur."""
    nodes = [
        {"id": "f1", "peak_kw": 0.0, "qp_ratio": 0.0},
        {"id": "f2", "peak_kw": 80.0, "qp_ratio": 0.3},
        {"id": "f10", "peak_kw": 60.0, "qp_ratio": 0.3, "priority_weight": 2.0,
         "is_critical": True},
        {"id": "f11", "peak_kw": 40.0, "qp_ratio": 0.3},
        {"id": "f12", "peak_kw": 50.0, "qp_ratio": 0.3},
        {"id": "f13", "peak_kw": 30.0, "qp_ratio": 0.3},
        {"id": "f20", "peak_kw": 70.0, "qp_ratio": 0.3},
        {"id": "f21", "peak_kw": 50.0, "qp_ratio": 0.3},
        {"id": "f30", "peak_kw": 90.0, "qp_ratio": 0.3},
        {"id": "f40", "peak_kw": 60.0, "qp_ratio": 0.3},
        {"id": "f41", "peak_kw": 40.0, "qp_ratio": 0.3},
        {"id": "f50", "peak_kw": 40.0, "qp_ratio": 0.3},
        {"id": "f51", "peak_kw": 30.0, "qp_ratio": 0.3},
    ]
    branches = [
        {"from": "f1", "to": "f2", "r_ohm": 0.2, "x_ohm": 0.15},
        {"from": "f10", "to": "f11", "r_ohm": 0.2, "x_ohm": 0.15},
        {"from": "f11", "to": "f12", "r_ohm": 0.2, "x_ohm": 0.15},
        {"from": "f11", "to": "f13", "r_ohm": 0.2, "x_ohm": 0.15},
        {"from": "f20", "to": "f21", "r_ohm": 0.2, "x_ohm": 0.15},
        {"from": "f40", "to": "f41", "r_ohm": 0.2, "x_ohm": 0.15},
        {"from": "f50", "to": "f51", "r_ohm": 0.2, "x_ohm": 0.15},
    ]
    switches = [
        {"id": "s1", "from": "f2", "to": "f10", "r_ohm": 0.3, "x_ohm": 0.3},
        {"id": "s2", "from": "f13", "to": "f20", "r_ohm": 0.3, "x_ohm": 0.3},
        {"id": "s3", "from": "f1", "to": "f30", "r_ohm": 0.3, "x_ohm": 0.3},
        {"id": "s4", "from": "f30", "to": "f40", "r_ohm": 0.3, "x_ohm": 0.3},
        {"id": "s5", "from": "f41", "to": "f21", "r_ohm": 0.3, "x_ohm": 0.3},
        {"id": "s6", "from": "f50", "to": "f20", "r_ohm": 0.3, "x_ohm": 0.3},
    ]
    lsgs = [
        {"id": "L1", "nodes": ["f1", "f2"]},
        {"id": "L2", "nodes": ["f10", "f11", "f12", "f13"]},
        {"id": "L3", "nodes": ["f20", "f21"]},
        {"id": "L4", "nodes": ["f30"]},
        {"id": "L5", "nodes": ["f40", "f41"]},
        {"id": "L6", "nodes": ["f50", "f51"]},
    ]
    ders = [
        {"id": "pv1", "node": "f2", "kind": "pv-farm", "rated_kw": 500.0},
        {"id": "bat1", "node": "f2", "kind": "bess", "rated_kw": 500.0,
         "energy_kwh": 2000.0, "charge_kw_max": 500.0,
         "discharge_kw_max": 500.0},
        {"id": "dg1", "node": "f51", "kind": "dg", "rated_kw": 250.0},
    ]
    return {
        "base_kv": 12.66, "base_kva": 10000.0,
        "nodes": nodes, "branches": branches, "switches": switches,
        "lsgs": lsgs, "ders": ders,
    }


def fig1_scenario() -> dict:
    sc = bus33_scenario()
    sc["solver"] = {"rel_gap": 0.01, "time_limit_s": 120}
    return sc


def twosource_feeder() -> dict:
    """Pooling fixture: the middle LSG's load exceeds what either source can
    carry alone, so serving it needs both grid-forming DERs in one microgrid."""
    nodes = [
        {"id": "a1", "peak_kw": 50.0, "qp_ratio": 0.3},
        {"id": "b1", "peak_kw": 500.0, "qp_ratio": 0.3},
        {"id": "c1", "peak_kw": 50.0, "qp_ratio": 0.3},
    ]
    switches = [
        {"id": "sab", "from": "a1", "to": "b1", "r_ohm": 0.05, "x_ohm": 0.05},
        {"id": "sbc", "from": "b1", "to": "c1", "r_ohm": 0.05, "x_ohm": 0.05},
    ]
    lsgs = [
        {"id": "A", "nodes": ["a1"]},
        {"id": "B", "nodes": ["b1"]},
        {"id": "C", "nodes": ["c1"]},
    ]
    ders = [
        {"id": "pv1", "node": "a1", "kind": "pv-farm", "rated_kw": 300.0},
        {"id": "bat1", "node": "a1", "kind": "bess", "rated_kw": 200.0,
         "energy_kwh": 1000.0, "charge_kw_max": 200.0,
         "discharge_kw_max": 200.0},
        {"id": "dg1", "node": "c1", "kind": "dg", "rated_kw": 300.0},
    ]
    return {
        "base_kv": 12.66, "base_kva": 10000.0,
        "nodes": nodes, "branches": [], "switches": switches,
        "lsgs": lsgs, "ders": ders,
    }


def twosource_scenario() -> dict:
    return {
        "horizon_steps": 4,
        "step_minutes": 30,
        "start_time": "2021-07-15T10:00:00",
        "mode": "flexible",
        "switch_penalty": 1.0,
        "msd_hours": 0.5,
        "voltage_min_pu": 0.95,
        "voltage_max_pu": 1.05,
        "voltage_rate_pu": 1.0,
        "reserve_fraction": 0.15,
        "big_m_voltage": 2.0,
        "solver": {"rel_gap": 0.0, "time_limit_s": 60},
    }


def twosource_profiles(scenario) -> dict:
    flat = {"a1": 50.0, "b1": 500.0, "c1": 50.0, "pv1": 300.0}
    return {
        sid: Profile(
            subject_id=sid, start_time=scenario.start_time,
            step_minutes=scenario.step_minutes,
            values_kw=(kw,) * scenario.horizon_steps,
        )
        for sid, kw in flat.items()
    }


def main():
    OUT.mkdir(parents=True, exist_ok=True)

    jobs = [
        ("bus33", bus33_feeder(), bus33_scenario(), 11),
        ("fig1", fig1_feeder(), fig1_scenario(), 7),
    ]
    for name, feeder_def, scenario_def, seed in jobs:
        (OUT / f"{name}_feeder.json").write_text(
            json.dumps(feeder_def, indent=2) + "\n", encoding="utf-8")
        (OUT / f"{name}_scenario.json").write_text(
            json.dumps(scenario_def, indent=2) + "\n", encoding="utf-8")
        feeder = build_feeder(feeder_def)
        scenario = build_scenario(scenario_def)
        profiles = generate_profiles(feeder, scenario, seed=seed)
        write_profiles_csv(profiles, OUT / f"{name}_profiles.csv")

    (OUT / "twosource_feeder.json").write_text(
        json.dumps(twosource_feeder(), indent=2) + "\n", encoding="utf-8")
    (OUT / "twosource_scenario.json").write_text(
        json.dumps(twosource_scenario(), indent=2) + "\n", encoding="utf-8")
    scenario = build_scenario(twosource_scenario())
    write_profiles_csv(twosource_profiles(scenario), OUT / "twosource_profiles.csv")
    print(f"fixtures written to {OUT}")


if __name__ == "__main__":
    main()
