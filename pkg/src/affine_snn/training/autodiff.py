"""Per-sample reverse-mode differentiation through a recorded forward pass.

For a neuron with causal set ``C_v`` and causal weight sum ``W_v`` the local
partials of the closed-form spike time are

    dt_v/dt_u = w_u / W_v,   dt_v/dd_u = w_u / W_v,   dt_v/dw_u = (t_u + d_u - t_v) / W_v

for ``u`` in ``C_v`` and zero otherwise. At a kink (an arrival exactly at
``t_v``) these are the one-sided derivatives of the closed causal set.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..codec import AffineSnn
from ..spike import ForwardTrace, forward
from .grads import ParamGradients


@dataclass(frozen=True)
class GradientTape:
    """Forward trace plus per-edge local partials of the head's spike time.

    ``d_time[k]``, ``d_weight[k]`` and ``d_delay[k]`` are the partials of
    ``t_v`` for edge ``k = (u, v)``; they are zero for non-causal edges.
    """

    x: np.ndarray
    encoded: np.ndarray
    trace: ForwardTrace
    d_time: np.ndarray
    d_weight: np.ndarray
    d_delay: np.ndarray


def record(net: AffineSnn, x) -> GradientTape:
    x = np.asarray(x, dtype=np.float64).reshape(-1)
    encoded = net.encoder(x)
    trace = forward(net.core, encoded)
    g = net.graph
    w, d = net.core.weights, net.core.delays
    t = trace.spike_times
    d_time = np.zeros(g.n_edges)
    d_weight = np.zeros(g.n_edges)
    for v in g.topo_order:
        ks = trace.causal_sets[v]
        if not ks:
            continue
        Wv = trace.causal_weight_sums[v]
        for k in ks:
            u = g.edges[k][0]
            d_time[k] = w[k] / Wv
            d_weight[k] = (t[u] + d[k] - t[v]) / Wv
    return GradientTape(x, encoded, trace, d_time, d_weight, d_time.copy())


def backward(net: AffineSnn, tape: GradientTape, upstream) -> tuple[ParamGradients, np.ndarray]:
    """Pull ``upstream`` (a cotangent of the output) back to parameters and input."""
    g = net.graph
    upstream = np.asarray(upstream, dtype=np.float64).reshape(-1)
    z = tape.trace.outputs

    grads = ParamGradients.zeros_like(net)
    grads.d_W_out = np.outer(upstream, z)
    grads.d_b_out = upstream.copy()

    adj = np.zeros(g.node_count)
    adj[list(g.output_nodes)] += net.decoder.matrix.T @ upstream
    for v in reversed(g.topo_order):
        if adj[v] == 0.0:
            continue
        for k in tape.trace.causal_sets[v]:
            u = g.edges[k][0]
            adj[u] += adj[v] * tape.d_time[k]
            grads.d_weights[k] += adj[v] * tape.d_weight[k]
            grads.d_delays[k] += adj[v] * tape.d_delay[k]

    g_in = adj[list(g.input_nodes)]
    grads.d_W_in = np.outer(g_in, tape.x)
    grads.d_b_in = g_in
    return grads, net.encoder.matrix.T @ g_in
