"""Solver backends behind a common contract.

Two implementations:

* ``ScipyMilpBackend`` -- in-process branch-and-bound via scipy (HiGHS);
  the default and the reference backend for tests.
* ``ExternalMpsBackend`` -- file-based contract: the model is written as an
  MPS document, a solver executable is invoked with the document path and
  writes a JSON solution document. The executable path comes from the
  ``LSGRID_SOLVER`` environment variable or an explicit backend spec.

External solution document schema::

    {"status": "optimal" | "feasible" | "infeasible" | "error",
     "objective": <number or null>,
     "values": {"<variable>": <number>, ...},
     "diagnostic": "<free text>"}
"""

from __future__ import annotations

import json
import os
import subprocess
import tempfile
from dataclasses import dataclass
from pathlib import Path
from typing import Protocol

import numpy as np
from scipy import sparse
from scipy.optimize import Bounds
from scipy.optimize import LinearConstraint as _SciRow
from scipy.optimize import milp as _scipy_milp

from .errors import SolveError
from .milp import (
    BINARY, BINARY_TOL, SENSE_EQ, SENSE_GE, SENSE_LE,
    STATUS_ERROR, STATUS_FEASIBLE, STATUS_INFEASIBLE, STATUS_OPTIMAL,
    MilpModel, Solution, recompute_objective, verify_solution,
)
from .mps import emit_model_file
from .scenario import SolverParams

SOLVER_ENV_VAR = "LSGRID_SOLVER"


class SolverBackend(Protocol):
    name: str

    def solve_model(self, model: MilpModel, params: SolverParams) -> Solution: ...


class ScipyMilpBackend:
    """HiGHS through scipy. Presolve is off by default: the vendored
    presolve has misdeclared feasible switched-network models infeasible
    and produced unsound dual bounds, and plain branch-and-bound stays
    fast enough at this scale. Any infeasibility claim is re-checked with
    the opposite presolve setting before being reported."""

    name = "scipy"

    def __init__(self, presolve: bool = False):
        self.presolve = presolve

    def solve_model(self, model: MilpModel, params: SolverParams) -> Solution:
        n = len(model.variables)
        index = {v.name: i for i, v in enumerate(model.variables)}
        c = np.zeros(n)
        for var, coef in model.objective:
            c[index[var]] += coef
        integrality = np.array(
            [1 if v.kind == BINARY else 0 for v in model.variables], dtype=np.uint8
        )
        bounds = Bounds(
            np.array([v.lower for v in model.variables]),
            np.array([v.upper for v in model.variables]),
        )
        constraints = []
        if model.constraints:
            rows, cols, vals = [], [], []
            lo = np.empty(len(model.constraints))
            hi = np.empty(len(model.constraints))
            for r, row in enumerate(model.constraints):
                for var, coef in row.terms:
                    rows.append(r)
                    cols.append(index[var])
                    vals.append(coef)
                if row.sense == SENSE_LE:
                    lo[r], hi[r] = -np.inf, row.rhs
                elif row.sense == SENSE_GE:
                    lo[r], hi[r] = row.rhs, np.inf
                else:
                    lo[r], hi[r] = row.rhs, row.rhs
            mat = sparse.csr_matrix(
                (vals, (rows, cols)), shape=(len(model.constraints), n)
            )
            constraints = [_SciRow(mat, lo, hi)]

        options = {
            "disp": False, "mip_rel_gap": params.rel_gap,
            "presolve": self.presolve,
        }
        if params.time_limit_s is not None:
            options["time_limit"] = params.time_limit_s
        res = _scipy_milp(
            c=c, constraints=constraints, integrality=integrality, bounds=bounds,
            options=options,
        )
        if res.status == 2 or res.x is None:
            # get a second opinion before reporting infeasibility, and give
            # a stalled search (no incumbent within its budget) another shot
            res = _scipy_milp(
                c=c, constraints=constraints, integrality=integrality,
                bounds=bounds,
                options={**options, "presolve": not self.presolve},
            )
        if res.status == 2:
            return Solution(STATUS_INFEASIBLE, None, {}, res.message)
        if res.x is None:
            return Solution(STATUS_ERROR, None, {}, res.message)
        values = {v.name: float(res.x[i]) for i, v in enumerate(model.variables)}
        status = STATUS_OPTIMAL if res.status == 0 else STATUS_FEASIBLE
        return Solution(status, float(res.fun), values, res.message)


class ExternalMpsBackend:
    name = "external"

    def __init__(self, executable: str):
        self.executable = executable

    def solve_mps(self, mps_path, params: SolverParams) -> dict:
        """Invoke the executable on an MPS document; return the raw solution
        document. This is the wire contract; name mapping is the caller's job.
        """
        out_path = Path(str(mps_path)).with_suffix(".sol.json")
        cmd = [self.executable, str(mps_path), str(out_path),
               "--rel-gap", repr(params.rel_gap)]
        if params.time_limit_s is not None:
            cmd += ["--time-limit", repr(params.time_limit_s)]
        try:
            proc = subprocess.run(cmd, capture_output=True, text=True, timeout=None)
        except OSError as exc:
            raise SolveError(f"cannot run solver {self.executable!r}: {exc}") from exc
        if proc.returncode != 0:
            raise SolveError(
                f"solver exited with {proc.returncode}: {proc.stderr.strip()[:500]}"
            )
        try:
            with open(out_path, "r", encoding="utf-8") as fh:
                doc = json.load(fh)
        except (OSError, json.JSONDecodeError) as exc:
            raise SolveError(f"unreadable solution document: {exc}") from exc
        if not isinstance(doc, dict) or "status" not in doc:
            raise SolveError("solution document lacks a status field")
        return doc

    def solve_model(self, model: MilpModel, params: SolverParams) -> Solution:
        doc = emit_model_file(model)
        emitted_to_orig = {short: orig for orig, short in doc.name_map.items()}
        with tempfile.TemporaryDirectory(prefix="lsgrid_") as tmp:
            mps_path = Path(tmp) / "model.mps"
            mps_path.write_text(doc.text, encoding="utf-8")
            try:
                raw = self.solve_mps(mps_path, params)
            except SolveError as exc:
                return Solution(STATUS_ERROR, None, {}, str(exc))
        status = raw.get("status")
        if status not in (STATUS_OPTIMAL, STATUS_FEASIBLE, STATUS_INFEASIBLE, STATUS_ERROR):
            return Solution(STATUS_ERROR, None, {}, f"unknown status {status!r}")
        values = {
            emitted_to_orig.get(name, name): float(val)
            for name, val in raw.get("values", {}).items()
        }
        objective = raw.get("objective")
        return Solution(
            status,
            float(objective) if objective is not None else None,
            values,
            str(raw.get("diagnostic", "")),
        )


def get_backend(spec: str | None = None) -> SolverBackend:
    """Resolve a backend id: 'scipy' (default), 'external', or an executable path."""
    if spec in (None, "", "scipy"):
        return ScipyMilpBackend()
    if spec == "external":
        exe = os.environ.get(SOLVER_ENV_VAR)
        if not exe:
            raise SolveError(f"backend 'external' needs {SOLVER_ENV_VAR} set")
        return ExternalMpsBackend(exe)
    return ExternalMpsBackend(spec)


def _repair_continuous(model: MilpModel, backend: SolverBackend,
                       params: SolverParams, rounded: Solution) -> Solution | None:
    """Re-solve the continuous part with every binary pinned at its rounded
    value. Cleans up solver roundoff that the rounding step amplified; the
    pinned binaries keep the schedule (and a binary-cost objective) intact.
    """
    repair = MilpModel(name=model.name + "_repair")
    for v in model.variables:
        if v.kind == BINARY:
            val = rounded.values[v.name]
            repair.add_continuous(v.name, val, val)
        else:
            repair.add_continuous(v.name, v.lower, v.upper)
    for row in model.constraints:
        repair.add_constraint(row.name, list(row.terms), row.sense, row.rhs)
    repair.set_objective(list(model.objective))
    res = backend.solve_model(repair, params)
    if not res.feasible:
        return None
    values = dict(res.values)
    for v in model.variables:
        if v.kind == BINARY:
            values[v.name] = rounded.values[v.name]
    return Solution(rounded.status, rounded.objective_value, values,
                    (rounded.diagnostic + " (after continuous repair)").strip())


def solve(model: MilpModel, backend: SolverBackend | None = None,
          params: SolverParams | None = None) -> Solution:
    """Solve and post-process: binaries checked and rounded, feasibility
    re-verified independently of the backend; marginal roundoff triggers a
    pinned-binary continuous repair before anything is rejected."""
    backend = backend or ScipyMilpBackend()
    params = params or SolverParams()
    raw = backend.solve_model(model, params)
    if not raw.feasible:
        return raw

    values = dict(raw.values)
    missing = [v.name for v in model.variables if v.name not in values]
    if missing:
        return Solution(
            STATUS_ERROR, raw.objective_value, {},
            f"backend omitted {len(missing)} variables (first: {missing[0]})",
        )
    for v in model.variables:
        x = values[v.name]
        if v.kind == BINARY:
            if min(abs(x), abs(x - 1.0)) > BINARY_TOL:
                return Solution(
                    STATUS_ERROR, raw.objective_value, {},
                    f"binary {v.name}={x} beyond rounding tolerance {BINARY_TOL}",
                )
            values[v.name] = float(round(x))
        elif v.lower - BINARY_TOL <= x <= v.upper + BINARY_TOL:
            # absorb solver roundoff only; larger excursions go through
            # verification and the continuous repair
            values[v.name] = min(max(x, v.lower), v.upper)

    candidate = Solution(raw.status, raw.objective_value, values, raw.diagnostic)
    problems = verify_solution(model, candidate)
    if problems:
        repaired = _repair_continuous(model, backend, params, candidate)
        if repaired is not None:
            candidate = repaired
            problems = verify_solution(model, candidate)
    if problems:
        return Solution(
            STATUS_ERROR, raw.objective_value, {},
            "backend solution fails verification: " + "; ".join(problems[:5]),
        )
    if candidate.objective_value is None:
        candidate = Solution(
            candidate.status, recompute_objective(model, candidate),
            candidate.values, candidate.diagnostic,
        )
    return candidate
