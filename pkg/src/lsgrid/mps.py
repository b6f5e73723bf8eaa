"""Free-format MPS emission.

Emission order follows model insertion order exactly, so two structurally
identical models produce byte-identical documents. Names longer than the
format limit are shortened deterministically and reported in a sidecar map.
"""

from __future__ import annotations

from dataclasses import dataclass, field

from .milp import BINARY, SENSE_EQ, SENSE_GE, SENSE_LE, MilpModel

MAX_NAME_LEN = 255
OBJ_ROW = "COST"

_SENSE_TAG = {SENSE_LE: "L", SENSE_EQ: "E", SENSE_GE: "G"}


@dataclass(frozen=True)
class MpsDocument:
    text: str
    name_map: dict[str, str] = field(default_factory=dict)  # original -> emitted


def _num(x: float) -> str:
    if x == int(x) and abs(x) < 1e15:
        return str(int(x))
    return repr(x)


def _shorten(names, limit: int) -> dict[str, str]:
    """Deterministic collision-free shortening for names beyond `limit`."""
    mapping: dict[str, str] = {}
    used = {n for n in names if len(n) <= limit}
    serial = 0
    for n in names:
        if len(n) <= limit:
            mapping[n] = n
            continue
        while True:
            tag = f"_s{serial}"
            serial += 1
            cand = n[: limit - len(tag)] + tag
            if cand not in used:
                break
        used.add(cand)
        mapping[n] = cand
    return mapping


def emit_model_file(model: MilpModel, max_name_len: int = MAX_NAME_LEN) -> MpsDocument:
    """Render the model as a free-format MPS document (minimization)."""
    all_names = [v.name for v in model.variables] + [c.name for c in model.constraints]
    mapping = _shorten(all_names, max_name_len)
    vname = {v.name: mapping[v.name] for v in model.variables}
    rname = {c.name: mapping[c.name] for c in model.constraints}

    # column entries in (variable, then row-insertion) order
    col_entries: dict[str, list[tuple[str, float]]] = {v.name: [] for v in model.variables}
    for var, coef in model.objective:
        col_entries[var].append((OBJ_ROW, coef))
    for row in model.constraints:
        for var, coef in row.terms:
            col_entries[var].append((rname[row.name], coef))

    lines: list[str] = []
    lines.append(f"NAME {model.name}")
    lines.append("ROWS")
    lines.append(f" N {OBJ_ROW}")
    for row in model.constraints:
        lines.append(f" {_SENSE_TAG[row.sense]} {rname[row.name]}")

    lines.append("COLUMNS")
    in_integer = False
    marker = 0
    for v in model.variables:
        want_integer = v.kind == BINARY
        if want_integer != in_integer:
            tag = "INTORG" if want_integer else "INTEND"
            lines.append(f" MARKER{marker} 'MARKER' '{tag}'")
            marker += 1
            in_integer = want_integer
        entries = col_entries[v.name]
        if not entries:
            entries = [(OBJ_ROW, 0.0)]  # declare otherwise-unused columns
        for rn, coef in entries:
            lines.append(f" {vname[v.name]} {rn} {_num(coef)}")
    if in_integer:
        lines.append(f" MARKER{marker} 'MARKER' 'INTEND'")

    lines.append("RHS")
    for row in model.constraints:
        if row.rhs != 0.0:
            lines.append(f" RHS {rname[row.name]} {_num(row.rhs)}")

    lines.append("BOUNDS")
    for v in model.variables:
        n = vname[v.name]
        if v.kind == BINARY:
            lines.append(f" BV BND {n}")
            continue
        if v.lower == float("-inf") and v.upper == float("inf"):
            lines.append(f" FR BND {n}")
            continue
        if v.lower == float("-inf"):
            lines.append(f" MI BND {n}")
        elif v.lower != 0.0:
            lines.append(f" LO BND {n} {_num(v.lower)}")
        if v.upper != float("inf"):
            lines.append(f" UP BND {n} {_num(v.upper)}")

    lines.append("ENDATA")
    name_map = {orig: short for orig, short in mapping.items() if orig != short}
    return MpsDocument(text="\n".join(lines) + "\n", name_map=name_map)
