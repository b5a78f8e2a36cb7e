"""Exact time-to-first-spike semantics for ReLU-response spiking networks.

A non-input neuron ``v`` integrates the potential

    P_v(t) = sum_u w_(u,v) * max(t - t_u - d_(u,v), 0)

and fires at the first instant ``P_v(t) = 1``. Between consecutive arrivals the
potential is affine, so the spike time has the closed form

    t_v = (1 + sum_{u in C_v} w_u a_u) / sum_{u in C_v} w_u

over the causal set ``C_v`` of arrivals ``a_u = t_u + d_(u,v) <= t_v``.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import DimensionMismatch, NoSpike
from .graph import NetworkGraph


@dataclass(frozen=True)
class SnnParams:
    """Synaptic weights and delays, one entry per edge of ``graph``."""

    graph: NetworkGraph
    weights: np.ndarray
    delays: np.ndarray
    positive_mode: bool = True

    def __post_init__(self):
        w = np.array(self.weights, dtype=np.float64).reshape(-1)
        d = np.array(self.delays, dtype=np.float64).reshape(-1)
        ne = self.graph.n_edges
        if w.shape != (ne,) or d.shape != (ne,):
            raise DimensionMismatch(f"expected {ne} weights and delays, got {w.shape}, {d.shape}")
        if not (np.all(np.isfinite(w)) and np.all(np.isfinite(d))):
            raise ValueError("weights and delays must be finite")
        if np.any(d < 0):
            raise ValueError("synaptic delays must be nonnegative")
        if self.positive_mode:
            if np.any(w <= 0):
                raise ValueError("positive SNN requires strictly positive weights")
        else:
            for v in range(self.graph.node_count):
                ks = self.graph.in_edges[v]
                if ks and not np.any(w[list(ks)] > 0):
                    raise ValueError(f"node {v} has no incoming edge with positive weight")
        w.flags.writeable = False
        d.flags.writeable = False
        object.__setattr__(self, "weights", w)
        object.__setattr__(self, "delays", d)

    def replace(self, weights=None, delays=None) -> "SnnParams":
        return SnnParams(
            self.graph,
            self.weights if weights is None else weights,
            self.delays if delays is None else delays,
            self.positive_mode,
        )


@dataclass(frozen=True)
class ForwardTrace:
    """Spike times of every node plus the causal data of every non-input node.

    ``causal_sets[v]`` lists the incoming edge indices counted in ``C_v``;
    it is empty for input nodes.
    """

    params: SnnParams
    spike_times: np.ndarray
    causal_sets: tuple[tuple[int, ...], ...]
    causal_weight_sums: np.ndarray

    @property
    def outputs(self) -> np.ndarray:
        return self.spike_times[list(self.params.graph.output_nodes)]


def _solve_sorted(a: np.ndarray, w: np.ndarray, positive: bool) -> tuple[float, int]:
    """Spike time for arrivals ``a`` (ascending) with weights ``w``.

    Returns ``(t, k)`` where the first ``k`` arrivals form the causal prefix.
    An arrival that coincides with the spike time is counted as causal, as
    long as the enlarged prefix keeps a positive weight sum.
    """
    a = [float(x) for x in a]
    w = [float(x) for x in w]
    n = len(a)
    W = 0.0
    S = 0.0
    for k in range(n):
        W += w[k]
        S += w[k] * a[k]
        if W <= 0.0:
            continue
        t = (1.0 + S) / W
        if k == n - 1 or t <= a[k + 1]:
            kk = k + 1
            while kk < n and a[kk] <= t and W + w[kk] > 0.0:
                W += w[kk]
                S += w[kk] * a[kk]
                kk += 1
            if positive and kk > k + 1:
                t = (1.0 + S) / W
            return t, kk
    raise NoSpike()


def neuron_spike_time(
    arrivals: Sequence[tuple[float, float]], positive_mode: bool = True
) -> tuple[float, int]:
    """Spike time of one neuron given ``(arrival_time, weight)`` pairs.

    Arrivals are sorted ascending (ties keep the given order). Returns the
    spike time and the length of the causal prefix of the sorted arrivals.
    Raises :class:`NoSpike` in general-weight mode when the potential never
    reaches 1.
    """
    if len(arrivals) == 0:
        raise NoSpike("neuron has no incoming synapses")
    arr = np.asarray(arrivals, dtype=np.float64).reshape(-1, 2)
    order = np.argsort(arr[:, 0], kind="stable")
    a = arr[order, 0]
    w = arr[order, 1]
    if positive_mode and np.any(w <= 0):
        raise ValueError("positive mode requires strictly positive weights")
    return _solve_sorted(a, w, positive_mode)


def oracle_spike_time(arrivals: Sequence[float], weights: Sequence[float], tol: float = 1e-12) -> float:
    """Bisection on the monotone potential; positive weights only."""
    a = [float(x) for x in arrivals]
    w = [float(x) for x in weights]
    if min(w) <= 0:
        raise ValueError("oracle requires positive weights")
    pairs = list(zip(a, w))

    def potential(t):
        return sum(wi * (t - ai) for ai, wi in pairs if t > ai)

    lo = min(a)
    hi = lo + 1.0 / min(w) + (max(a) - lo)
    while potential(hi) < 1.0:
        hi = lo + 2.0 * (hi - lo)
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        if mid <= lo or mid >= hi:
            break
        if potential(mid) >= 1.0:
            hi = mid
        else:
            lo = mid
    return hi


def forward(params: SnnParams, input_times: Sequence[float]) -> ForwardTrace:
    """Evaluate all spike times in topological order."""
    g = params.graph
    t_in = np.asarray(input_times, dtype=np.float64).reshape(-1)
    if t_in.shape != (g.d_in,):
        raise DimensionMismatch(f"expected {g.d_in} input times, got {t_in.shape[0]}")
    if not np.all(np.isfinite(t_in)):
        raise ValueError("input times must be finite")

    times = np.full(g.node_count, np.nan)
    times[list(g.input_nodes)] = t_in
    causal: list[tuple[int, ...]] = [()] * g.node_count
    wsum = np.zeros(g.node_count)
    w_all, d_all = params.weights, params.delays

    for v in g.topo_order:
        ks = g.in_edges[v]
        if not ks:
            continue
        ks_arr = np.array(ks)
        a = times[[g.edges[k][0] for k in ks]] + d_all[ks_arr]
        order = np.argsort(a, kind="stable")
        try:
            t, n_causal = _solve_sorted(a[order], w_all[ks_arr][order], params.positive_mode)
        except NoSpike as exc:
            raise NoSpike(str(exc), node=v) from None
        times[v] = t
        chosen = ks_arr[order[:n_causal]]
        causal[v] = tuple(int(k) for k in chosen)
        wsum[v] = float(np.sum(w_all[chosen]))

    return ForwardTrace(params=params, spike_times=times, causal_sets=tuple(causal), causal_weight_sums=wsum)


def realize_core(params: SnnParams, input_times: Sequence[float]) -> np.ndarray:
    return forward(params, input_times).outputs


def clip(values, interval: tuple[float, float]) -> np.ndarray:
    lo, hi = interval
    if lo > hi:
        raise ValueError("clip interval must satisfy lo <= hi")
    return np.clip(np.asarray(values, dtype=np.float64), lo, hi)
