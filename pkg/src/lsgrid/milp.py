"""Solver-agnostic MILP container: variables, rows, objective, solutions.

The model records insertion order so emitted documents are reproducible
byte-for-byte. Feasibility of any returned solution is re-checked here,
independently of whichever backend produced it.
"""

from __future__ import annotations

from dataclasses import dataclass, field

from .errors import ModelBuildError, SolutionFormatError

BINARY = "binary"
CONTINUOUS = "continuous"

SENSE_LE = "<="
SENSE_EQ = "="
SENSE_GE = ">="

BINARY_TOL = 1e-5        # max distance from {0, 1} before a solve is rejected
FEASIBILITY_TOL = 1e-6   # absolute row/bound violation allowance


@dataclass(frozen=True)
class Variable:
    name: str
    kind: str
    lower: float
    upper: float


@dataclass(frozen=True)
class LinearConstraint:
    name: str
    terms: tuple[tuple[str, float], ...]
    sense: str
    rhs: float


@dataclass
class MilpModel:
    """Single-writer model builder; minimization only."""

    name: str = "lsgrid"
    variables: list[Variable] = field(default_factory=list)
    constraints: list[LinearConstraint] = field(default_factory=list)
    objective: list[tuple[str, float]] = field(default_factory=list)
    _var_index: dict[str, int] = field(default_factory=dict, repr=False)
    _row_names: set[str] = field(default_factory=set, repr=False)

    def add_variable(self, name: str, kind: str, lower: float, upper: float) -> str:
        if name in self._var_index:
            raise ModelBuildError(f"variable {name!r} declared twice")
        if kind == BINARY and (lower, upper) != (0.0, 1.0):
            raise ModelBuildError(f"binary {name!r} must have bounds [0, 1]")
        if lower > upper:
            raise ModelBuildError(f"variable {name!r} has lower > upper")
        self._var_index[name] = len(self.variables)
        self.variables.append(Variable(name, kind, lower, upper))
        return name

    def add_binary(self, name: str) -> str:
        return self.add_variable(name, BINARY, 0.0, 1.0)

    def add_continuous(self, name: str, lower: float, upper: float) -> str:
        return self.add_variable(name, CONTINUOUS, lower, upper)

    def has_variable(self, name: str) -> bool:
        return name in self._var_index

    def add_constraint(self, name: str, terms, sense: str, rhs: float) -> LinearConstraint:
        if name in self._row_names:
            raise ModelBuildError(f"constraint {name!r} declared twice")
        if sense not in (SENSE_LE, SENSE_EQ, SENSE_GE):
            raise ModelBuildError(f"unknown sense {sense!r}")
        merged: dict[str, float] = {}
        order: list[str] = []
        for var, coef in terms:
            if var not in self._var_index:
                raise ModelBuildError(f"constraint {name!r} uses undeclared {var!r}")
            if var not in merged:
                merged[var] = 0.0
                order.append(var)
            merged[var] += coef
        row = LinearConstraint(
            name,
            tuple((v, merged[v]) for v in order if merged[v] != 0.0),
            sense, rhs,
        )
        self._row_names.add(name)
        self.constraints.append(row)
        return row

    def set_objective(self, terms) -> None:
        merged: dict[str, float] = {}
        order: list[str] = []
        for var, coef in terms:
            if var not in self._var_index:
                raise ModelBuildError(f"objective uses undeclared {var!r}")
            if var not in merged:
                merged[var] = 0.0
                order.append(var)
            merged[var] += coef
        self.objective = [(v, merged[v]) for v in order]

    @property
    def binary_names(self) -> list[str]:
        return [v.name for v in self.variables if v.kind == BINARY]


STATUS_OPTIMAL = "optimal"
STATUS_FEASIBLE = "feasible"
STATUS_INFEASIBLE = "infeasible"
STATUS_ERROR = "error"


@dataclass(frozen=True)
class Solution:
    status: str
    objective_value: float | None
    values: dict[str, float]
    diagnostic: str = ""

    @property
    def feasible(self) -> bool:
        return self.status in (STATUS_OPTIMAL, STATUS_FEASIBLE)

    def to_dict(self) -> dict:
        return {
            "status": self.status,
            "objective": self.objective_value,
            "values": self.values,
            "diagnostic": self.diagnostic,
        }


def recompute_objective(model: MilpModel, solution: Solution) -> float:
    """Dot product of the objective with solution values."""
    total = 0.0
    for var, coef in model.objective:
        if var not in solution.values:
            raise SolutionFormatError(f"solution is missing a value for {var!r}")
        total += coef * solution.values[var]
    return total


def row_activity(row: LinearConstraint, values: dict[str, float]) -> float:
    return sum(coef * values[var] for var, coef in row.terms)


def verify_solution(model: MilpModel, solution: Solution,
                    tol: float = FEASIBILITY_TOL) -> list[str]:
    """Backend-independent feasibility audit; returns violation messages."""
    problems: list[str] = []
    values = solution.values
    for v in model.variables:
        if v.name not in values:
            problems.append(f"missing value for {v.name}")
            continue
        x = values[v.name]
        if x < v.lower - tol or x > v.upper + tol:
            problems.append(f"{v.name}={x} outside bounds [{v.lower}, {v.upper}]")
        if v.kind == BINARY and min(abs(x), abs(x - 1.0)) > tol:
            problems.append(f"binary {v.name}={x} is not 0/1")
    if problems:
        return problems
    for row in model.constraints:
        act = row_activity(row, values)
        if row.sense == SENSE_LE and act > row.rhs + tol:
            problems.append(f"{row.name}: {act} > {row.rhs}")
        elif row.sense == SENSE_GE and act < row.rhs - tol:
            problems.append(f"{row.name}: {act} < {row.rhs}")
        elif row.sense == SENSE_EQ and abs(act - row.rhs) > tol:
            problems.append(f"{row.name}: {act} != {row.rhs}")
    return problems
