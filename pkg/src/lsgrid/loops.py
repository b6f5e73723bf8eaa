"""Enumeration of supply loops in the switch-level LSG graph.

A supply loop is a set of switches that, all closed, would connect a cycle of
LSGs. Loops are edge-simple and vertex-simple cycles of the multigraph; two
parallel switches between the same LSG pair form a 2-switch loop.
"""

from __future__ import annotations

from dataclasses import dataclass

from .feeder import LsgGraph


@dataclass(frozen=True)
class LoopSet:
    """All simple cycles, each as a sorted tuple of switch ids."""

    loops: tuple[tuple[str, ...], ...]

    def __len__(self) -> int:
        return len(self.loops)

    def as_sets(self) -> list[frozenset[str]]:
        return [frozenset(loop) for loop in self.loops]


def enumerate_loops(graph: LsgGraph) -> LoopSet:
    """Enumerate every simple cycle of the LSG multigraph as a switch set.

    Each cycle is discovered exactly once, anchored at its lowest-ranked
    edge: for anchor edge e = (a, b) we search vertex-simple paths from b
    back to a using only strictly higher-ranked edges. Output ordering is
    canonical (loop size, then lexicographic switch ids) and therefore
    independent of input edge order.
    """
    edges = sorted(graph.edges)  # rank by switch id: input-order invariant
    incident: dict[str, list[int]] = {m: [] for m in graph.lsg_ids}
    for idx, (_, a, b) in enumerate(edges):
        incident[a].append(idx)
        incident[b].append(idx)

    loops: list[tuple[str, ...]] = []
    for anchor, (sid, a, b) in enumerate(edges):
        if a == b:
            continue  # self-loops cannot occur across LSGs
        # DFS over (vertex, used-edge set) from b toward a
        stack: list[tuple[str, list[int]]] = [(b, [anchor])]
        while stack:
            vertex, used = stack.pop()
            for idx in incident[vertex]:
                if idx <= anchor or idx in used:
                    continue
                _, u, v = edges[idx]
                nxt = v if u == vertex else u
                if nxt == a:
                    loops.append(tuple(sorted(edges[i][0] for i in used + [idx])))
                    continue
                if any(nxt in (edges[i][1], edges[i][2]) for i in used):
                    continue  # vertex already on the path
                stack.append((nxt, used + [idx]))
    loops.sort(key=lambda loop: (len(loop), loop))
    return LoopSet(tuple(loops))
