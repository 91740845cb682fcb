"""Directed communication graphs.

The protocol requires a strongly connected digraph with no self-loops.
Node indices are 0-based internally; user-facing output labels agents 1..n.
"""

from __future__ import annotations

from dataclasses import dataclass, field

from .errors import (
    DuplicateEdgeError,
    NotStronglyConnectedError,
    SelfLoopError,
    TooFewNodesError,
)


@dataclass(frozen=True)
class DirectedGraph:
    """Immutable digraph with out/in adjacency. Build via build_graph()."""

    n: int
    edges: tuple[tuple[int, int], ...]
    out_neighbors: tuple[tuple[int, ...], ...] = field(repr=False)
    in_neighbors: tuple[tuple[int, ...], ...] = field(repr=False)

    def out_degree(self, i: int) -> int:
        return len(self.out_neighbors[i])

    def in_edges(self, j: int) -> list[tuple[int, int]]:
        """Directed edges (i, j) arriving at node j."""
        return [(i, j) for i in self.in_neighbors[j]]

    def reversed(self) -> "DirectedGraph":
        return build_graph(self.n, [(j, i) for (i, j) in self.edges])


def _reachable_from(start: int, n: int, adj: list[list[int]]) -> bool:
    seen = [False] * n
    seen[start] = True
    stack = [start]
    while stack:
        u = stack.pop()
        for v in adj[u]:
            if not seen[v]:
                seen[v] = True
                stack.append(v)
    return all(seen)


def build_graph(n: int, edges) -> DirectedGraph:
    """Validate and build a DirectedGraph.

    Raises SelfLoopError, DuplicateEdgeError, NotStronglyConnectedError,
    or TooFewNodesError (n < 2: an isolated node has nobody to learn from).
    """
    if n < 2:
        raise TooFewNodesError(f"need at least 2 nodes, got {n}")
    seen = set()
    for i, j in edges:
        if not (0 <= i < n and 0 <= j < n):
            raise ValueError(f"edge ({i}, {j}) out of range for n={n}")
        if i == j:
            raise SelfLoopError(f"self-loop at node {i}")
        if (i, j) in seen:
            raise DuplicateEdgeError(f"duplicate edge ({i}, {j})")
        seen.add((i, j))
    edge_list = sorted(seen)
    out_adj: list[list[int]] = [[] for _ in range(n)]
    in_adj: list[list[int]] = [[] for _ in range(n)]
    for i, j in edge_list:
        out_adj[i].append(j)
        in_adj[j].append(i)
    if not _reachable_from(0, n, out_adj) or not _reachable_from(0, n, in_adj):
        raise NotStronglyConnectedError("graph is not strongly connected")
    return DirectedGraph(
        n=n,
        edges=tuple(edge_list),
        out_neighbors=tuple(tuple(v) for v in out_adj),
        in_neighbors=tuple(tuple(v) for v in in_adj),
    )


def standard_topology(kind: str, n: int) -> DirectedGraph:
    """Build one of the base topologies: 'path', 'star', or 'cycle'.

    Path and star are bidirectional (a one-way path is not strongly
    connected); the cycle is the directed ring 0 -> 1 -> ... -> 0.
    Node 0 is the star hub.
    """
    if n < 2:
        raise TooFewNodesError(f"{kind} needs n >= 2, got {n}")
    if kind == "path":
        edges = [(i, i + 1) for i in range(n - 1)]
        edges += [(j, i) for (i, j) in list(edges)]
    elif kind == "star":
        edges = [(0, i) for i in range(1, n)] + [(i, 0) for i in range(1, n)]
    elif kind == "cycle":
        edges = [(i, (i + 1) % n) for i in range(n)]
    else:
        raise ValueError(f"unknown topology kind {kind!r}")
    return build_graph(n, edges)


def parse_graph_file(text: str) -> DirectedGraph:
    """Parse the graph file format: `n=<count>` then one `i j` pair per line."""
    lines = [ln.strip() for ln in text.splitlines() if ln.strip()]
    if not lines or not lines[0].startswith("n="):
        raise ValueError("graph file must start with 'n=<count>'")
    n = int(lines[0][2:])
    edges = []
    for ln in lines[1:]:
        parts = ln.split()
        if len(parts) != 2:
            raise ValueError(f"bad edge line: {ln!r}")
        edges.append((int(parts[0]), int(parts[1])))
    return build_graph(n, edges)
