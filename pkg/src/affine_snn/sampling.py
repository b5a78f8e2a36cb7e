"""Seeded generators of random graphs and networks for audits and tests."""

from __future__ import annotations

import numpy as np

from .codec import AffineMap, AffineSnn
from .graph import NetworkGraph, build_graph
from .spike import SnnParams


def random_dag(rng: np.random.Generator, n_nodes: int, edge_prob: float = 0.4) -> NetworkGraph:
    """Random DAG on ``n_nodes >= 2`` nodes; edges only go from lower to higher id."""
    edges = {(u, v) for u in range(n_nodes) for v in range(u + 1, n_nodes) if rng.random() < edge_prob}
    touched = {x for e in edges for x in e}
    for v in range(n_nodes):
        if v not in touched:
            u = int(rng.integers(0, v)) if v > 0 else int(rng.integers(1, n_nodes))
            edges.add((min(u, v), max(u, v)))
            touched.update((u, v))
    return build_graph(sorted(edges), n_nodes)


def random_affine_snn(
    rng: np.random.Generator,
    n_nodes: int | None = None,
    d0: int | None = None,
    d1: int | None = None,
    weight_range: tuple[float, float] = (0.2, 2.0),
    delay_max: float = 1.0,
    zero_delays: bool = False,
    graph: NetworkGraph | None = None,
) -> AffineSnn:
    g = graph if graph is not None else random_dag(rng, n_nodes or int(rng.integers(3, 9)))
    d0 = d0 or int(rng.integers(1, 4))
    d1 = d1 or int(rng.integers(1, 3))
    w = rng.uniform(*weight_range, size=g.n_edges)
    d = np.zeros(g.n_edges) if zero_delays else rng.uniform(0.0, delay_max, size=g.n_edges)
    enc = AffineMap(rng.uniform(-1, 1, (g.d_in, d0)), rng.uniform(-1, 1, g.d_in))
    dec = AffineMap(rng.uniform(-1, 1, (d1, g.d_out)), rng.uniform(-1, 1, d1))
    return AffineSnn(enc, SnnParams(g, w, d), dec)
