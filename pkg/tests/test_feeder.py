import pytest

from lsgrid import build_feeder, validate_feeder
from lsgrid.errors import FeederDefinitionError


def minimal_definition():
    return {
        "base_kv": 12.66,
        "base_kva": 10000.0,
        "nodes": [
            {"id": "a", "peak_kw": 10.0},
            {"id": "b", "peak_kw": 20.0},
        ],
        "branches": [],
        "switches": [{"id": "s1", "from": "a", "to": "b", "r_ohm": 0.1, "x_ohm": 0.1}],
        "lsgs": [{"id": "M1", "nodes": ["a"]}, {"id": "M2", "nodes": ["b"]}],
        "ders": [{"id": "pv", "node": "a", "kind": "pv-farm", "rated_kw": 50.0}],
    }


def test_fig1_fixture_resolves(fig1_feeder):
    assert len(fig1_feeder.lsgs) == 6
    assert len(fig1_feeder.switches) == 6
    assert set(fig1_feeder.root_candidate_ids) == {"L1", "L6"}


def test_single_lsg_no_switches_is_valid():
    d = minimal_definition()
    d["switches"] = []
    d["lsgs"] = [{"id": "M1", "nodes": ["a", "b"]}]
    d["branches"] = [{"from": "a", "to": "b", "r_ohm": 0.1, "x_ohm": 0.1}]
    model = build_feeder(d)
    assert len(model.lsgs) == 1
    assert validate_feeder(model).passed


def test_bus33_fixture_shape(bus33_feeder):
    assert len(bus33_feeder.lsgs) == 7
    assert len(bus33_feeder.switches) == 11
    pv_lsg = bus33_feeder.lsg_of_node("n2")
    dg_lsg = bus33_feeder.lsg_of_node("n16")
    assert set(bus33_feeder.root_candidate_ids) == {pv_lsg, dg_lsg}
    assert bus33_feeder.lsg_by_id[pv_lsg].kind == "pv-plant"
    assert bus33_feeder.lsg_by_id[dg_lsg].kind == "dg"


def test_bus33_validates_clean(bus33_feeder):
    report = validate_feeder(bus33_feeder)
    assert report.passed
    assert report.findings == ()


def test_node_in_two_lsgs_rejected():
    d = minimal_definition()
    d["lsgs"] = [{"id": "M1", "nodes": ["a", "b"]}, {"id": "M2", "nodes": ["b"]}]
    with pytest.raises(FeederDefinitionError, match="two LSGs"):
        build_feeder(d)


def test_node_in_no_lsg_rejected():
    d = minimal_definition()
    d["lsgs"] = [{"id": "M1", "nodes": ["a"]}, {"id": "M2", "nodes": []}]
    with pytest.raises(FeederDefinitionError, match="belongs to no LSG"):
        build_feeder(d)


def test_dangling_membership_rejected():
    d = minimal_definition()
    d["lsgs"][0]["nodes"] = ["a", "ghost"]
    with pytest.raises(FeederDefinitionError, match="ghost"):
        build_feeder(d)


def test_switch_within_one_lsg_rejected():
    d = minimal_definition()
    d["lsgs"] = [{"id": "M1", "nodes": ["a", "b"]}]
    with pytest.raises(FeederDefinitionError, match="both endpoints"):
        build_feeder(d)


def test_branch_crossing_lsgs_rejected():
    d = minimal_definition()
    d["branches"] = [{"from": "a", "to": "b", "r_ohm": 0.1, "x_ohm": 0.1}]
    with pytest.raises(FeederDefinitionError, match="crosses LSGs"):
        build_feeder(d)


def test_unknown_fields_rejected():
    d = minimal_definition()
    d["nodes"][0]["voltage"] = 1.0
    with pytest.raises(FeederDefinitionError, match="unknown field"):
        build_feeder(d)
    d = minimal_definition()
    d["frequency_hz"] = 60
    with pytest.raises(FeederDefinitionError, match="unknown top-level"):
        build_feeder(d)


def test_der_at_unknown_node_rejected():
    d = minimal_definition()
    d["ders"][0]["node"] = "zz"
    with pytest.raises(FeederDefinitionError, match="unknown node"):
        build_feeder(d)


def test_priority_weight_below_one_rejected():
    d = minimal_definition()
    d["nodes"][0]["priority_weight"] = 0.5
    with pytest.raises(FeederDefinitionError, match="priority_weight"):
        build_feeder(d)


def test_soc_fraction_order_enforced():
    d = minimal_definition()
    d["ders"] = [{
        "id": "b1", "node": "a", "kind": "bess", "rated_kw": 100.0,
        "energy_kwh": 400.0, "charge_kw_max": 100.0, "discharge_kw_max": 100.0,
        "soc_min_frac": 0.9, "soc_max_frac": 0.5,
    }]
    with pytest.raises(FeederDefinitionError, match="SOC fractions"):
        build_feeder(d)


def test_pv_outranks_dg_for_lsg_kind():
    d = minimal_definition()
    d["ders"].append({"id": "g", "node": "a", "kind": "dg", "rated_kw": 30.0})
    model = build_feeder(d)
    assert model.lsg_by_id["M1"].kind == "pv-plant"


def test_pv_inverter_defaults_to_110_percent():
    model = build_feeder(minimal_definition())
    pv = model.ders[0]
    assert pv.inverter_kva == pytest.approx(55.0)


def test_intra_lsg_cycle_reported():
    d = minimal_definition()
    d["lsgs"] = [{"id": "M1", "nodes": ["a", "b"]}]
    d["switches"] = []
    d["branches"] = [
        {"from": "a", "to": "b", "r_ohm": 0.1, "x_ohm": 0.1},
        {"from": "b", "to": "a", "r_ohm": 0.1, "x_ohm": 0.1},
    ]
    report = validate_feeder(build_feeder(d))
    assert not report.passed
    assert any(f.code == "intra-lsg-cycle" for f in report.findings)


def test_disconnected_interior_reported():
    d = minimal_definition()
    d["nodes"].append({"id": "c", "peak_kw": 5.0})
    d["lsgs"] = [{"id": "M1", "nodes": ["a", "c"]}, {"id": "M2", "nodes": ["b"]}]
    report = validate_feeder(build_feeder(d))
    assert any(f.code == "disconnected-lsg" for f in report.findings)


def test_isolated_lsg_warns_unreachable():
    d = minimal_definition()
    d["nodes"].append({"id": "c", "peak_kw": 5.0})
    d["lsgs"].append({"id": "M3", "nodes": ["c"]})
    report = validate_feeder(build_feeder(d))
    unreachable = [f for f in report.findings if f.code == "unreachable-lsg"]
    assert len(unreachable) == 1
    assert unreachable[0].severity == "warning"
    assert "M3" in unreachable[0].message
    assert report.passed  # warning only
