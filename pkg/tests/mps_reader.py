"""Minimal free-format MPS reader used as an independent round-trip oracle.

Deliberately written against the MPS conventions (sections, markers, bound
types), not against the writer's implementation.
"""

from dataclasses import dataclass, field


@dataclass
class ParsedMps:
    name: str = ""
    objective_row: str = ""
    row_sense: dict[str, str] = field(default_factory=dict)  # name -> L/G/E
    row_order: list[str] = field(default_factory=list)
    entries: dict[tuple[str, str], float] = field(default_factory=dict)
    integer_vars: set[str] = field(default_factory=set)
    var_order: list[str] = field(default_factory=list)
    rhs: dict[str, float] = field(default_factory=dict)
    lower: dict[str, float] = field(default_factory=dict)
    upper: dict[str, float] = field(default_factory=dict)

    def bounds_of(self, var: str) -> tuple[float, float]:
        lo = self.lower.get(var, 0.0)
        hi = self.upper.get(var, float("inf"))
        return lo, hi


def parse_mps(text: str) -> ParsedMps:
    out = ParsedMps()
    section = None
    in_integer = False
    seen_vars = set()
    for raw in text.splitlines():
        line = raw.rstrip()
        if not line or line.startswith("*"):
            continue
        head = line.split()
        if line[0] not in " \t":
            if head[0] == "NAME":
                out.name = head[1] if len(head) > 1 else ""
                continue
            section = head[0]
            if section == "ENDATA":
                break
            continue
        tokens = head
        if section == "ROWS":
            sense, name = tokens
            if sense == "N":
                out.objective_row = name
            else:
                out.row_sense[name] = sense
                out.row_order.append(name)
        elif section == "COLUMNS":
            if len(tokens) >= 3 and tokens[1] == "'MARKER'":
                in_integer = tokens[2] == "'INTORG'"
                continue
            var = tokens[0]
            if var not in seen_vars:
                seen_vars.add(var)
                out.var_order.append(var)
                if in_integer:
                    out.integer_vars.add(var)
            pairs = tokens[1:]
            for i in range(0, len(pairs), 2):
                out.entries[(var, pairs[i])] = float(pairs[i + 1])
        elif section == "RHS":
            pairs = tokens[1:]
            for i in range(0, len(pairs), 2):
                out.rhs[pairs[i]] = float(pairs[i + 1])
        elif section == "RANGES":
            raise ValueError("RANGES not supported by this reader")
        elif section == "BOUNDS":
            btype, _bnd, var = tokens[0], tokens[1], tokens[2]
            val = float(tokens[3]) if len(tokens) > 3 else None
            if btype == "BV":
                out.lower[var] = 0.0
                out.upper[var] = 1.0
                out.integer_vars.add(var)
            elif btype == "LO":
                out.lower[var] = val
            elif btype == "UP":
                out.upper[var] = val
            elif btype == "FX":
                out.lower[var] = val
                out.upper[var] = val
            elif btype == "MI":
                out.lower[var] = float("-inf")
            elif btype == "FR":
                out.lower[var] = float("-inf")
                out.upper[var] = float("inf")
            else:
                raise ValueError(f"bound type {btype} not supported")
    return out
