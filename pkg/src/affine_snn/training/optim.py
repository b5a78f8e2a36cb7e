"""Plain SGD and Adam over a dict of named parameter arrays."""

from __future__ import annotations

import numpy as np


class SGD:
    def __init__(self, lr: float):
        self.lr = lr

    def step(self, params: dict, grads: dict) -> None:
        for name, g in grads.items():
            params[name] -= self.lr * g


class Adam:
    def __init__(self, lr: float, beta1: float = 0.9, beta2: float = 0.999, eps: float = 1e-8):
        self.lr, self.beta1, self.beta2, self.eps = lr, beta1, beta2, eps
        self.m: dict[str, np.ndarray] = {}
        self.v: dict[str, np.ndarray] = {}
        self.t = 0

    def step(self, params: dict, grads: dict) -> None:
        self.t += 1
        c1 = 1.0 - self.beta1**self.t
        c2 = 1.0 - self.beta2**self.t
        for name, g in grads.items():
            m = self.m.setdefault(name, np.zeros_like(g))
            v = self.v.setdefault(name, np.zeros_like(g))
            m *= self.beta1
            m += (1.0 - self.beta1) * g
            v *= self.beta2
            v += (1.0 - self.beta2) * g * g
            params[name] -= self.lr * (m / c1) / (np.sqrt(v / c2) + self.eps)


def project_positive(params: dict, weight_floor: float) -> None:
    """Clamp synaptic weights to ``[weight_floor, inf)`` and delays to ``[0, inf)``."""
    np.maximum(params["weights"], weight_floor, out=params["weights"])
    np.maximum(params["delays"], 0.0, out=params["delays"])


def project_general(params: dict, graph, weight_floor: float) -> None:
    """Keep one positive incoming weight per neuron and delays nonnegative.

    A neuron whose incoming weights all became nonpositive gets its largest
    weight raised to ``weight_floor``.
    """
    w = params["weights"]
    for v in range(graph.node_count):
        ks = list(graph.in_edges[v])
        if ks and not np.any(w[ks] > 0):
            w[ks[int(np.argmax(w[ks]))]] = weight_floor
    np.maximum(params["delays"], 0.0, out=params["delays"])
