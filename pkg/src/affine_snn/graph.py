"""Network graphs: validated DAGs with input/output sets, depth and layering."""

from __future__ import annotations

import heapq
import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

from .errors import CycleDetected, DuplicateEdge, GraphError, IsolatedNode

Edge = tuple[int, int]


@dataclass(frozen=True)
class NetworkGraph:
    """Immutable directed acyclic graph with no isolated nodes.

    ``input_nodes`` are exactly the nodes of in-degree 0 and ``output_nodes``
    exactly those of out-degree 0. Their order is the enumeration used for
    realization vectors (ascending node id unless the caller chose otherwise).
    """

    node_count: int
    edges: tuple[Edge, ...]
    input_nodes: tuple[int, ...]
    output_nodes: tuple[int, ...]
    topo_order: tuple[int, ...]
    depth: int
    node_levels: tuple[int, ...]
    in_edges: tuple[tuple[int, ...], ...] = field(repr=False)
    out_edges: tuple[tuple[int, ...], ...] = field(repr=False)

    @property
    def d_in(self) -> int:
        return len(self.input_nodes)

    @property
    def d_out(self) -> int:
        return len(self.output_nodes)

    @property
    def n_edges(self) -> int:
        return len(self.edges)

    def edge_index(self) -> dict[Edge, int]:
        return {e: i for i, e in enumerate(self.edges)}

    def to_dict(self) -> dict:
        return {
            "nodes": self.node_count,
            "edges": [list(e) for e in self.edges],
            "inputs": list(self.input_nodes),
            "outputs": list(self.output_nodes),
        }


@dataclass(frozen=True)
class Layering:
    """Partition of the edge set into depth-1 subgraphs by longest-path level.

    ``layers[i]`` holds the indices (into ``graph.edges``) of all edges entering
    nodes of level ``i + 1``.
    """

    graph: NetworkGraph
    layers: tuple[tuple[int, ...], ...]
    node_levels: tuple[int, ...]

    def layer_edges(self, i: int) -> list[Edge]:
        return [self.graph.edges[k] for k in self.layers[i]]


def _topological_order(node_count: int, edges: Sequence[Edge], out_edges) -> list[int]:
    # Kahn elimination, smallest ready node first.
    indeg = [0] * node_count
    for _, v in edges:
        indeg[v] += 1
    ready = [v for v in range(node_count) if indeg[v] == 0]
    heapq.heapify(ready)
    order = []
    while ready:
        u = heapq.heappop(ready)
        order.append(u)
        for k in out_edges[u]:
            v = edges[k][1]
            indeg[v] -= 1
            if indeg[v] == 0:
                heapq.heappush(ready, v)
    if len(order) != node_count:
        stuck = sorted(v for v in range(node_count) if indeg[v] > 0)
        raise CycleDetected(f"directed cycle through nodes {stuck}")
    return order


def build_graph(
    edges: Iterable[Sequence[int]],
    node_count: int,
    inputs: Sequence[int] | None = None,
    outputs: Sequence[int] | None = None,
) -> NetworkGraph:
    """Validate ``edges`` over nodes ``0..node_count-1`` and derive the DAG data.

    ``inputs``/``outputs`` optionally fix the enumeration of the input/output
    nodes; they must be permutations of the derived sets.
    """
    edge_list: list[Edge] = []
    seen: set[Edge] = set()
    for e in edges:
        u, v = int(e[0]), int(e[1])
        if not (0 <= u < node_count and 0 <= v < node_count):
            raise GraphError(f"edge {(u, v)} references a node outside 0..{node_count - 1}")
        if u == v:
            raise CycleDetected(f"self-loop at node {u}")
        if (u, v) in seen:
            raise DuplicateEdge(f"edge {(u, v)} listed twice")
        seen.add((u, v))
        edge_list.append((u, v))

    in_edges: list[list[int]] = [[] for _ in range(node_count)]
    out_edges: list[list[int]] = [[] for _ in range(node_count)]
    for k, (u, v) in enumerate(edge_list):
        out_edges[u].append(k)
        in_edges[v].append(k)

    isolated = [v for v in range(node_count) if not in_edges[v] and not out_edges[v]]
    if isolated:
        raise IsolatedNode(f"isolated nodes {isolated}")

    order = _topological_order(node_count, edge_list, out_edges)

    levels = [0] * node_count
    for v in order:
        for k in in_edges[v]:
            levels[v] = max(levels[v], levels[edge_list[k][0]] + 1)

    derived_in = [v for v in range(node_count) if not in_edges[v]]
    derived_out = [v for v in range(node_count) if not out_edges[v]]
    input_nodes = _check_enumeration(inputs, derived_in, "inputs")
    output_nodes = _check_enumeration(outputs, derived_out, "outputs")

    return NetworkGraph(
        node_count=node_count,
        edges=tuple(edge_list),
        input_nodes=tuple(input_nodes),
        output_nodes=tuple(output_nodes),
        topo_order=tuple(order),
        depth=max(levels) if node_count else 0,
        node_levels=tuple(levels),
        in_edges=tuple(tuple(x) for x in in_edges),
        out_edges=tuple(tuple(x) for x in out_edges),
    )


def _check_enumeration(given, derived, what):
    if given is None:
        return derived
    given = [int(v) for v in given]
    if sorted(given) != sorted(derived) or len(set(given)) != len(given):
        raise GraphError(f"declared {what} {given} do not match derived {derived}")
    return given


def layering(g: NetworkGraph) -> Layering:
    """Split the edges by the longest-path level of their head node."""
    buckets: list[list[int]] = [[] for _ in range(g.depth)]
    for k, (_, v) in enumerate(g.edges):
        buckets[g.node_levels[v] - 1].append(k)
    return Layering(graph=g, layers=tuple(tuple(b) for b in buckets), node_levels=g.node_levels)


def graph_from_dict(data: dict) -> NetworkGraph:
    return build_graph(
        data["edges"],
        int(data["nodes"]),
        inputs=data.get("inputs"),
        outputs=data.get("outputs"),
    )


def load_graph(path: str | Path) -> NetworkGraph:
    with open(path) as fh:
        return graph_from_dict(json.load(fh))


def bipartite_graph(n_in: int, n_out: int) -> NetworkGraph:
    """Complete depth-1 graph: inputs ``0..n_in-1`` all feed outputs ``n_in..``."""
    edges = [(u, n_in + v) for u in range(n_in) for v in range(n_out)]
    return build_graph(edges, n_in + n_out)


def chain_graph(n: int) -> NetworkGraph:
    return build_graph([(i, i + 1) for i in range(n - 1)], n)
