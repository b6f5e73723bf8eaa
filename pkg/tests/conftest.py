import json
from pathlib import Path

import pytest

from lsgrid import build_feeder, load_feeder, load_profiles, load_scenario

FIXTURES = Path(__file__).resolve().parents[1] / "src" / "lsgrid" / "fixtures"


def fixture_path(name: str) -> Path:
    return FIXTURES / name


def make_graph_feeder(lsg_ids, edges, candidates, loads=None):
    """Synthetic one-node-per-LSG feeder for topology-level testing.

    edges: iterable of (switch_id, from_lsg, to_lsg). Candidate LSGs get a
    grid-forming DER so they become root candidates.
    """
    loads = loads or {}
    definition = {
        "base_kv": 12.66,
        "base_kva": 10000.0,
        "nodes": [
            {"id": f"nd_{m}", "peak_kw": float(loads.get(m, 10.0)), "qp_ratio": 0.2}
            for m in lsg_ids
        ],
        "branches": [],
        "switches": [
            {"id": sid, "from": f"nd_{a}", "to": f"nd_{b}",
             "r_ohm": 0.1, "x_ohm": 0.1}
            for sid, a, b in edges
        ],
        "lsgs": [{"id": m, "nodes": [f"nd_{m}"]} for m in lsg_ids],
        "ders": [
            {"id": f"dg_{m}", "node": f"nd_{m}", "kind": "dg", "rated_kw": 100.0}
            for m in candidates
        ],
    }
    return build_feeder(definition)


@pytest.fixture(scope="session")
def fig1_feeder():
    return load_feeder(fixture_path("fig1_feeder.json"))


@pytest.fixture(scope="session")
def fig1_scenario():
    return load_scenario(fixture_path("fig1_scenario.json"))


@pytest.fixture(scope="session")
def fig1_profiles(fig1_scenario):
    return load_profiles(fixture_path("fig1_profiles.csv"), fig1_scenario)


@pytest.fixture(scope="session")
def bus33_feeder():
    return load_feeder(fixture_path("bus33_feeder.json"))


@pytest.fixture(scope="session")
def bus33_scenario():
    return load_scenario(fixture_path("bus33_scenario.json"))


@pytest.fixture(scope="session")
def bus33_profiles(bus33_scenario):
    return load_profiles(fixture_path("bus33_profiles.csv"), bus33_scenario)


@pytest.fixture(scope="session")
def twosource_feeder():
    return load_feeder(fixture_path("twosource_feeder.json"))


@pytest.fixture(scope="session")
def twosource_scenario():
    return load_scenario(fixture_path("twosource_scenario.json"))


@pytest.fixture(scope="session")
def twosource_profiles(twosource_scenario):
    return load_profiles(fixture_path("twosource_profiles.csv"), twosource_scenario)


@pytest.fixture()
def fig1_definition():
    with open(fixture_path("fig1_feeder.json"), "r", encoding="utf-8") as fh:
        return json.load(fh)
