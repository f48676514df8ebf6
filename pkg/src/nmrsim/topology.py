"""Undirected communication graphs for process networks and robot swarms."""

from __future__ import annotations

import itertools
import math
import random
from collections import deque
from dataclasses import dataclass
from typing import Iterable, Sequence

Point2D = tuple[float, float]


class GraphError(ValueError):
    """Raised for malformed graphs or out-of-range node ids."""


@dataclass(frozen=True)
class Graph:
    node_count: int
    adjacency: tuple[frozenset[int], ...]

    @classmethod
    def from_edges(cls, k: int, edges: Iterable[Sequence[int]], require_connected: bool = True) -> "Graph":
        if k < 1:
            raise GraphError(f"node count must be positive, got {k}")
        adj: list[set[int]] = [set() for _ in range(k)]
        for e in edges:
            i, j = int(e[0]), int(e[1])
            if not (0 <= i < k and 0 <= j < k):
                raise GraphError(f"edge ({i}, {j}) out of range for k={k}")
            if i == j:
                raise GraphError(f"self-loop at node {i}")
            adj[i].add(j)
            adj[j].add(i)
        g = cls(k, tuple(frozenset(a) for a in adj))
        if require_connected and not g.is_connected():
            raise GraphError("graph is not connected")
        return g

    @property
    def edges(self) -> list[tuple[int, int]]:
        return [(i, j) for i in range(self.node_count) for j in sorted(self.adjacency[i]) if i < j]

    def neighbors(self, i: int) -> frozenset[int]:
        self._check(i)
        return self.adjacency[i]

    def degree(self, i: int) -> int:
        return len(self.neighbors(i))

    def is_connected(self) -> bool:
        return len(self.component_of(0)) == self.node_count

    def component_of(self, i: int) -> set[int]:
        self._check(i)
        seen = {i}
        todo = [i]
        while todo:
            u = todo.pop()
            for v in self.adjacency[u]:
                if v not in seen:
                    seen.add(v)
                    todo.append(v)
        return seen

    def components(self) -> list[set[int]]:
        left = set(range(self.node_count))
        out = []
        while left:
            c = self.component_of(min(left))
            out.append(c)
            left -= c
        return out

    def _check(self, i: int) -> None:
        if not (0 <= i < self.node_count):
            raise GraphError(f"node id {i} out of range 0..{self.node_count - 1}")


def closed_neighborhood(g: Graph, i: int) -> frozenset[int]:
    """N[i]: the neighbors of ``i`` together with ``i`` itself."""
    return g.neighbors(i) | {i}


def max_degree(g: Graph) -> int:
    return max(len(a) for a in g.adjacency)


def max_closed_size(g: Graph, i: int) -> int:
    """max |N[j]| over j in N[i]; the value MaxN_i converges to."""
    return max(len(g.adjacency[j]) + 1 for j in closed_neighborhood(g, i))


def bfs_distances(g: Graph, src: int) -> dict[int, int]:
    dist = {src: 0}
    q = deque([src])
    while q:
        u = q.popleft()
        for v in g.adjacency[u]:
            if v not in dist:
                dist[v] = dist[u] + 1
                q.append(v)
    return dist


def diameter(g: Graph) -> int:
    best = 0
    for s in range(g.node_count):
        dist = bfs_distances(g, s)
        if len(dist) != g.node_count:
            raise GraphError("diameter undefined: graph is disconnected")
        best = max(best, max(dist.values()))
    return best


def distance(p: Point2D, q: Point2D) -> float:
    return math.hypot(p[0] - q[0], p[1] - q[1])


def geometric_graph(positions: Sequence[Point2D], radius: float) -> Graph:
    """Unit-disk graph: ``i`` and ``j`` adjacent iff their distance is at most ``radius``.

    The result may be disconnected.
    """
    if not radius > 0:
        raise GraphError(f"radius must be positive, got {radius}")
    for p in positions:
        if not (math.isfinite(p[0]) and math.isfinite(p[1])):
            raise GraphError(f"non-finite position {p}")
    k = len(positions)
    edges = [
        (i, j)
        for i in range(k)
        for j in range(i + 1, k)
        if distance(positions[i], positions[j]) <= radius
    ]
    return Graph.from_edges(k, edges, require_connected=False)


# -- named generators ------------------------------------------------------


def path_graph(k: int) -> Graph:
    return Graph.from_edges(k, [(i, i + 1) for i in range(k - 1)])


def cycle_graph(k: int) -> Graph:
    if k < 3:
        raise GraphError("a cycle needs at least 3 nodes")
    return Graph.from_edges(k, [(i, (i + 1) % k) for i in range(k)])


def star_graph(leaves: int) -> Graph:
    return Graph.from_edges(leaves + 1, [(0, i) for i in range(1, leaves + 1)])


def complete_graph(k: int) -> Graph:
    return Graph.from_edges(k, itertools.combinations(range(k), 2))


def random_connected_graph(k: int, seed: int, extra_edge_prob: float = 0.3) -> Graph:
    """Random spanning tree by uniform attachment plus independent extra edges."""
    rng = random.Random(seed)
    order = list(range(k))
    rng.shuffle(order)
    edges = {tuple(sorted((order[i], order[rng.randrange(i)]))) for i in range(1, k)}
    for i, j in itertools.combinations(range(k), 2):
        if (i, j) not in edges and rng.random() < extra_edge_prob:
            edges.add((i, j))
    return Graph.from_edges(k, sorted(edges))


def connected_graphs(k: int, up_to_isomorphism: bool = True) -> list[Graph]:
    """Every connected graph on ``k`` labelled nodes, optionally one per isomorphism class."""
    pairs = list(itertools.combinations(range(k), 2))
    seen: set[tuple] = set()
    out = []
    perms = list(itertools.permutations(range(k))) if up_to_isomorphism else []
    for mask in range(1 << len(pairs)):
        edges = [pairs[b] for b in range(len(pairs)) if mask >> b & 1]
        g = Graph.from_edges(k, edges, require_connected=False)
        if not g.is_connected():
            continue
        if up_to_isomorphism:
            canon = min(tuple(sorted(tuple(sorted((p[a], p[b]))) for a, b in edges)) for p in perms)
            if canon in seen:
                continue
            seen.add(canon)
        out.append(g)
    return out


def graph_from_spec(spec: dict) -> Graph:
    """Build a graph from a scenario stanza (``kind`` plus parameters)."""
    kind = spec.get("kind", "edges")
    try:
        if kind == "edges":
            return Graph.from_edges(int(spec["k"]), spec.get("edges", []))
        if kind == "path":
            return path_graph(int(spec["k"]))
        if kind == "cycle":
            return cycle_graph(int(spec["k"]))
        if kind == "star":
            return star_graph(int(spec["leaves"]))
        if kind == "complete":
            return complete_graph(int(spec["k"]))
        if kind == "random-connected":
            return random_connected_graph(int(spec["k"]), int(spec.get("seed", 0)), float(spec.get("p", 0.3)))
    except KeyError as exc:
        raise GraphError(f"graph spec of kind {kind!r} is missing {exc}") from None
    raise GraphError(f"unknown graph kind {kind!r}")
