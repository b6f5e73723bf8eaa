"""Feeder-level microgrid scheduling over load switching groups."""

from .backends import ExternalMpsBackend, ScipyMilpBackend, get_backend, solve
from .feeder import (
    Branch, DerAsset, FeederModel, LoadNode, Lsg, LsgGraph, Switch,
    build_feeder, load_feeder, validate_feeder,
)
from .formulation import DecisionIndex, FormulationBuild, assemble_model
from .loops import LoopSet, enumerate_loops
from .milp import (
    LinearConstraint, MilpModel, Solution, Variable,
    recompute_objective, verify_solution,
)
from .mps import MpsDocument, emit_model_file
from .profiles import (
    PreferenceSchedule, PreferenceWindow, Profile,
    load_profiles, preference_weight, resample,
)
from .scenario import ScenarioConfig, SolverParams, build_scenario, load_scenario
from .validation import (
    TopologySnapshot, brute_force_topology_oracle, check_operational,
    check_radiality, enumerate_topology_configs, extract_snapshots,
)

__version__ = "0.1.0"

__all__ = [
    "Branch", "DerAsset", "DecisionIndex", "ExternalMpsBackend", "FeederModel",
    "FormulationBuild", "LinearConstraint", "LoadNode", "LoopSet", "Lsg",
    "LsgGraph", "MilpModel", "MpsDocument", "PreferenceSchedule",
    "PreferenceWindow", "Profile", "ScenarioConfig", "ScipyMilpBackend",
    "Solution", "SolverParams", "Switch", "TopologySnapshot", "Variable",
    "assemble_model", "brute_force_topology_oracle", "build_feeder",
    "build_scenario", "check_operational", "check_radiality",
    "emit_model_file", "enumerate_loops", "enumerate_topology_configs",
    "extract_snapshots", "get_backend", "load_feeder", "load_profiles",
    "load_scenario", "preference_weight", "recompute_objective", "resample",
    "solve", "validate_feeder", "verify_solution",
]
