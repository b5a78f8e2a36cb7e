from __future__ import annotations

from dataclasses import dataclass, fields

import numpy as np

PARAM_NAMES = ("weights", "delays", "W_in", "b_in", "W_out", "b_out")


@dataclass
class ParamGradients:
    """Gradients with the same shapes as the parameters of an AffineSnn."""

    d_weights: np.ndarray
    d_delays: np.ndarray
    d_W_in: np.ndarray
    d_b_in: np.ndarray
    d_W_out: np.ndarray
    d_b_out: np.ndarray

    @classmethod
    def zeros_like(cls, net) -> "ParamGradients":
        return cls(
            np.zeros_like(net.core.weights),
            np.zeros_like(net.core.delays),
            np.zeros_like(net.encoder.matrix),
            np.zeros_like(net.encoder.bias),
            np.zeros_like(net.decoder.matrix),
            np.zeros_like(net.decoder.bias),
        )

    def as_dict(self) -> dict[str, np.ndarray]:
        return {name: getattr(self, "d_" + name) for name in PARAM_NAMES}

    def __add__(self, other: "ParamGradients") -> "ParamGradients":
        return ParamGradients(*(getattr(self, f.name) + getattr(other, f.name) for f in fields(self)))

    def scaled(self, c: float) -> "ParamGradients":
        return ParamGradients(*(c * getattr(self, f.name) for f in fields(self)))

    def flat(self) -> np.ndarray:
        return np.concatenate([np.ravel(getattr(self, f.name)) for f in fields(self)])


def net_params(net) -> dict[str, np.ndarray]:
    return {
        "weights": np.array(net.core.weights),
        "delays": np.array(net.core.delays),
        "W_in": np.array(net.encoder.matrix),
        "b_in": np.array(net.encoder.bias),
        "W_out": np.array(net.decoder.matrix),
        "b_out": np.array(net.decoder.bias),
    }
