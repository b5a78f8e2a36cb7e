"""Affine SNNs: a positive spiking core wrapped by affine encoder and decoder."""

from __future__ import annotations

import json
from dataclasses import dataclass
from functools import reduce
from pathlib import Path

import numpy as np

from .errors import DimensionMismatch
from .graph import NetworkGraph, build_graph, graph_from_dict
from .spike import SnnParams, clip, forward


@dataclass(frozen=True)
class AffineMap:
    """``x -> matrix @ x + bias``."""

    matrix: np.ndarray
    bias: np.ndarray

    def __post_init__(self):
        m = np.array(self.matrix, dtype=np.float64)
        if m.ndim != 2:
            raise DimensionMismatch("affine map matrix must be 2-D")
        b = np.array(self.bias, dtype=np.float64).reshape(-1)
        if b.shape[0] != m.shape[0]:
            raise DimensionMismatch(f"bias length {b.shape[0]} != matrix rows {m.shape[0]}")
        m.flags.writeable = False
        b.flags.writeable = False
        object.__setattr__(self, "matrix", m)
        object.__setattr__(self, "bias", b)

    @property
    def rows(self) -> int:
        return self.matrix.shape[0]

    @property
    def cols(self) -> int:
        return self.matrix.shape[1]

    def __call__(self, x):
        return self.matrix @ np.asarray(x, dtype=np.float64) + self.bias

    @classmethod
    def identity(cls, n: int, scale: float = 1.0) -> "AffineMap":
        return cls(scale * np.eye(n), np.zeros(n))


@dataclass(frozen=True)
class AffineSnn:
    encoder: AffineMap
    core: SnnParams
    decoder: AffineMap

    def __post_init__(self):
        g = self.core.graph
        if self.encoder.rows != g.d_in:
            raise DimensionMismatch(f"encoder has {self.encoder.rows} rows, graph has {g.d_in} inputs")
        if self.decoder.cols != g.d_out:
            raise DimensionMismatch(f"decoder has {self.decoder.cols} columns, graph has {g.d_out} outputs")

    @property
    def graph(self) -> NetworkGraph:
        return self.core.graph

    @property
    def d0(self) -> int:
        return self.encoder.cols

    @property
    def d1(self) -> int:
        return self.decoder.rows

    def replace(self, **changes) -> "AffineSnn":
        """Copy with any of weights, delays, W_in, b_in, W_out, b_out swapped."""
        core = self.core.replace(weights=changes.get("weights"), delays=changes.get("delays"))
        enc = AffineMap(changes.get("W_in", self.encoder.matrix), changes.get("b_in", self.encoder.bias))
        dec = AffineMap(changes.get("W_out", self.decoder.matrix), changes.get("b_out", self.decoder.bias))
        return AffineSnn(enc, core, dec)


def realize(net: AffineSnn, x) -> np.ndarray:
    x = np.asarray(x, dtype=np.float64).reshape(-1)
    if x.shape[0] != net.d0:
        raise DimensionMismatch(f"expected input of length {net.d0}, got {x.shape[0]}")
    return net.decoder(forward(net.core, net.encoder(x)).outputs)


def realize_clipped(net: AffineSnn, x, interval=(0.0, 1.0)) -> np.ndarray:
    return clip(realize(net, x), interval)


def add(a: AffineSnn, b: AffineSnn) -> AffineSnn:
    """Parallel sum: disjoint graph union, stacked encoders, joined decoders.

    ``b``'s nodes are renumbered by ``a.graph.node_count``; input and output
    enumerations list ``a``'s nodes first.
    """
    if a.d0 != b.d0 or a.d1 != b.d1:
        raise DimensionMismatch(f"cannot add nets with dims ({a.d0},{a.d1}) and ({b.d0},{b.d1})")
    if a.core.positive_mode != b.core.positive_mode:
        raise ValueError("cannot add a positive and a general-weight network")
    ga, gb = a.graph, b.graph
    off = ga.node_count
    g = build_graph(
        list(ga.edges) + [(u + off, v + off) for u, v in gb.edges],
        ga.node_count + gb.node_count,
        inputs=list(ga.input_nodes) + [v + off for v in gb.input_nodes],
        outputs=list(ga.output_nodes) + [v + off for v in gb.output_nodes],
    )
    core = SnnParams(
        g,
        np.concatenate([a.core.weights, b.core.weights]),
        np.concatenate([a.core.delays, b.core.delays]),
        a.core.positive_mode,
    )
    enc = AffineMap(
        np.vstack([a.encoder.matrix, b.encoder.matrix]),
        np.concatenate([a.encoder.bias, b.encoder.bias]),
    )
    dec = AffineMap(
        np.hstack([a.decoder.matrix, b.decoder.matrix]),
        a.decoder.bias + b.decoder.bias,
    )
    return AffineSnn(enc, core, dec)


def add_all(nets) -> AffineSnn:
    return reduce(add, nets)


def size(net: AffineSnn) -> int:
    """Number of nonzero scalars among weights, delays, encoder and decoder."""
    parts = (
        net.core.weights,
        net.core.delays,
        net.encoder.matrix,
        net.decoder.matrix,
        net.encoder.bias,
        net.decoder.bias,
    )
    return int(sum(np.count_nonzero(p) for p in parts))


# Serialization: floats are written as hex strings so round-trips are bit-exact.

def _enc(arr) -> list:
    arr = np.asarray(arr, dtype=np.float64)
    if arr.ndim == 0:
        return float(arr).hex()
    return [_enc(x) for x in arr]


def _dec(obj):
    if isinstance(obj, list):
        return [_dec(x) for x in obj]
    if isinstance(obj, str):
        return float.fromhex(obj)
    return float(obj)


def _matrix(obj, cols: int) -> np.ndarray:
    m = np.array(_dec(obj), dtype=np.float64)
    return m.reshape(-1, cols) if m.size == 0 else m


def to_dict(net: AffineSnn) -> dict:
    return {
        "graph": net.graph.to_dict(),
        "weights": _enc(net.core.weights),
        "delays": _enc(net.core.delays),
        "encoder": {"matrix": _enc(net.encoder.matrix), "bias": _enc(net.encoder.bias), "cols": net.d0},
        "decoder": {"matrix": _enc(net.decoder.matrix), "bias": _enc(net.decoder.bias), "cols": net.graph.d_out},
        "positive_mode": bool(net.core.positive_mode),
    }


def from_dict(data: dict) -> AffineSnn:
    g = graph_from_dict(data["graph"])
    core = SnnParams(
        g,
        np.array(_dec(data["weights"]), dtype=np.float64),
        np.array(_dec(data["delays"]), dtype=np.float64),
        bool(data.get("positive_mode", True)),
    )
    e, d = data["encoder"], data["decoder"]
    enc = AffineMap(_matrix(e["matrix"], int(e.get("cols", 0))), _dec(e["bias"]))
    dec = AffineMap(_matrix(d["matrix"], int(d.get("cols", g.d_out))), _dec(d["bias"]))
    return AffineSnn(enc, core, dec)


def save_model(net: AffineSnn, path: str | Path) -> None:
    with open(path, "w") as fh:
        json.dump(to_dict(net), fh, indent=1)


def load_model(path: str | Path) -> AffineSnn:
    with open(path) as fh:
        return from_dict(json.load(fh))
