"""Batched forward/backward over the depth-1 layers of a network graph.

Each layer of the longest-path layering is evaluated for a whole batch at
once: arrivals are sorted per (sample, neuron), prefix sums give every
candidate spike time, and the first admissible prefix is selected with
``argmax``. This is the same rule as :func:`affine_snn.spike.neuron_spike_time`
and is checked against it in the tests.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from ..codec import AffineSnn
from ..errors import DimensionMismatch, NoSpike
from ..graph import NetworkGraph, layering
from .grads import ParamGradients


@dataclass(frozen=True)
class _LayerPlan:
    src: np.ndarray  # node ids feeding this layer
    dst: np.ndarray  # node ids computed in this layer
    edge_ids: np.ndarray
    rows: np.ndarray  # position of each edge's tail in src
    cols: np.ndarray  # position of each edge's head in dst


@lru_cache(maxsize=64)
def _plan(g: NetworkGraph) -> tuple[_LayerPlan, ...]:
    plans = []
    for layer in layering(g).layers:
        ids = np.array(layer, dtype=np.int64)
        tails = np.array([g.edges[k][0] for k in layer])
        heads = np.array([g.edges[k][1] for k in layer])
        src, rows = np.unique(tails, return_inverse=True)
        dst, cols = np.unique(heads, return_inverse=True)
        plans.append(_LayerPlan(src, dst, ids, rows, cols))
    return tuple(plans)


@dataclass
class _LayerTape:
    inv: np.ndarray  # inverse sort permutation, (B,K) or (B,K,N)
    a: np.ndarray  # sorted arrivals, (B,K,1) or (B,K,N)
    w: np.ndarray  # sorted weights, (B,K,N)
    causal: np.ndarray  # (B,K,N) bool in sorted order
    wsum: np.ndarray  # (B,N)
    t: np.ndarray  # (B,N)


@dataclass
class BatchTape:
    x: np.ndarray
    times: np.ndarray  # (B, V)
    outputs: np.ndarray  # decoder outputs (B, d1)
    valid: np.ndarray  # (B,) False where some neuron never fired
    layers: list


def _solve_layer(a, w, positive):
    """Spike times for sorted arrivals ``a`` (B,K,1|N) and weights ``w`` (B,K,N)."""
    B, K, N = w.shape
    cw = np.cumsum(w, axis=1)
    cs = np.cumsum(w * a, axis=1)
    pos = cw > 0
    with np.errstate(divide="ignore", invalid="ignore"):
        cand = np.where(pos, (1.0 + cs) / np.where(pos, cw, 1.0), np.inf)
    a_full = np.broadcast_to(a, w.shape)
    nxt = np.concatenate([a_full[:, 1:, :], np.full((B, 1, N), np.inf)], axis=1)
    ok = pos & (cand <= nxt)
    fired = ok.any(axis=1)
    k0 = np.argmax(ok, axis=1)
    t = np.take_along_axis(cand, k0[:, None, :], axis=1)[:, 0, :]

    # closed causal set: extend over arrivals tied with t while the weight sum stays positive
    j = np.arange(K)[None, :, None]
    stop = (j > k0[:, None, :]) & ~((a_full <= t[:, None, :]) & pos)
    has_stop = stop.any(axis=1)
    kend = np.where(has_stop, np.argmax(stop, axis=1), K)
    causal = j < kend[:, None, :]
    last = (kend - 1)[:, None, :]
    wsum = np.take_along_axis(cw, last, axis=1)[:, 0, :]
    if positive:
        t = (1.0 + np.take_along_axis(cs, last, axis=1)[:, 0, :]) / wsum
    t = np.where(fired, t, np.nan)
    return t, causal, wsum, fired


def forward_batch(net: AffineSnn, X, raise_on_nospike: bool = True) -> BatchTape:
    """Realize ``net`` on each row of ``X`` and keep what backward needs."""
    X = np.atleast_2d(np.asarray(X, dtype=np.float64))
    if X.shape[1] != net.d0:
        raise DimensionMismatch(f"expected inputs of width {net.d0}, got {X.shape[1]}")
    g = net.graph
    B = X.shape[0]
    times = np.full((B, g.node_count), np.nan)
    times[:, list(g.input_nodes)] = X @ net.encoder.matrix.T + net.encoder.bias
    w_all, d_all = net.core.weights, net.core.delays
    valid = np.ones(B, dtype=bool)
    tapes = []
    for p in _plan(g):
        K, N = len(p.src), len(p.dst)
        Wd = np.zeros((K, N))
        Wd[p.rows, p.cols] = w_all[p.edge_ids]
        d_layer = d_all[p.edge_ids]
        t_src = times[:, p.src]
        if not np.any(d_layer):
            order = np.argsort(t_src, axis=1, kind="stable")
            a = np.take_along_axis(t_src, order, axis=1)[:, :, None]
            w = Wd[order]
        else:
            Dd = np.zeros((K, N))
            Dd[p.rows, p.cols] = d_layer
            arr = t_src[:, :, None] + Dd[None]
            order = np.argsort(arr, axis=1, kind="stable")
            a = np.take_along_axis(arr, order, axis=1)
            w = np.take_along_axis(np.broadcast_to(Wd, arr.shape), order, axis=1)
        t, causal, wsum, fired = _solve_layer(a, w, net.core.positive_mode)
        if not fired.all():
            if raise_on_nospike:
                b, n = np.argwhere(~fired)[0]
                raise NoSpike(node=int(p.dst[n]))
            valid &= fired.all(axis=1)
        times[:, p.dst] = t
        tapes.append(_LayerTape(np.argsort(order, axis=1, kind="stable"), a, w, causal, wsum, t))
    z = times[:, list(g.output_nodes)]
    outputs = z @ net.decoder.matrix.T + net.decoder.bias
    return BatchTape(X, times, outputs, valid, tapes)


def backward_batch(net: AffineSnn, tape: BatchTape, upstream) -> tuple[ParamGradients, np.ndarray]:
    """Batch-summed parameter gradients and per-sample input gradients.

    Rows of ``upstream`` belonging to invalid samples are ignored.
    """
    g = net.graph
    G = np.where(tape.valid[:, None], np.asarray(upstream, dtype=np.float64), 0.0)
    times = np.where(tape.valid[:, None], tape.times, 0.0)
    z = times[:, list(g.output_nodes)]
    grads = ParamGradients.zeros_like(net)
    grads.d_W_out = G.T @ z
    grads.d_b_out = G.sum(axis=0)

    adj = np.zeros_like(times)
    adj[:, list(g.output_nodes)] += G @ net.decoder.matrix
    for p, lt in zip(reversed(_plan(g)), reversed(tape.layers)):
        gt = adj[:, p.dst]
        with np.errstate(divide="ignore", invalid="ignore"):
            coef = np.where(tape.valid[:, None], gt / lt.wsum, 0.0)[:, None, :]
        t = np.where(tape.valid[:, None], lt.t, 0.0)[:, None, :]
        a = np.where(tape.valid[:, None, None], lt.a, 0.0)
        g_arr = np.where(lt.causal, lt.w * coef, 0.0)
        g_w = np.where(lt.causal, (a - t) * coef, 0.0)
        if lt.inv.ndim == 2:
            inv3 = lt.inv[:, :, None]
            g_arr_u = np.take_along_axis(g_arr, inv3, axis=1)
            g_w_u = np.take_along_axis(g_w, inv3, axis=1)
        else:
            g_arr_u = np.take_along_axis(g_arr, lt.inv, axis=1)
            g_w_u = np.take_along_axis(g_w, lt.inv, axis=1)
        adj[:, p.src] += g_arr_u.sum(axis=2)
        grads.d_weights[p.edge_ids] += g_w_u.sum(axis=0)[p.rows, p.cols]
        grads.d_delays[p.edge_ids] += g_arr_u.sum(axis=0)[p.rows, p.cols]

    g_in = adj[:, list(g.input_nodes)]
    grads.d_W_in = g_in.T @ tape.x
    grads.d_b_in = g_in.sum(axis=0)
    return grads, g_in @ net.encoder.matrix


def realize_batch(net: AffineSnn, X) -> np.ndarray:
    return forward_batch(net, X).outputs
