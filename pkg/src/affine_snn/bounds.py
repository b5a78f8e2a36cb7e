"""Closed-form Lipschitz, covering-number and generalization bounds.

All logarithms are natural logarithms.
"""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass

import numpy as np

from .codec import AffineSnn
from .graph import NetworkGraph


@dataclass(frozen=True)
class ParamBox:
    """Parameter class: graph, dimensions, weight floor ``b`` and magnitude cap ``B``."""

    graph: NetworkGraph
    d0: int
    d1: int
    b: float
    B: float

    def __post_init__(self):
        if not 0 < self.b <= 1:
            raise ValueError("b must lie in (0, 1]")
        if not self.B >= 1:
            raise ValueError("B must be >= 1")
        if self.d0 < 1 or self.d1 < 1:
            raise ValueError("d0 and d1 must be positive")

    @property
    def d_in(self) -> int:
        return self.graph.d_in

    @property
    def d_out(self) -> int:
        return self.graph.d_out

    @property
    def depth(self) -> int:
        return self.graph.depth

    @property
    def M(self) -> int:
        """Total parameter count ``d_in*d0 + 2#E + d1*d_out``."""
        return self.d_in * self.d0 + 2 * self.graph.n_edges + self.d1 * self.d_out


def input_lipschitz(net: AffineSnn) -> float:
    """``sqrt(d0 * d_out) * ||W_in||_F * ||W_out||_F``."""
    return float(
        math.sqrt(net.d0 * net.graph.d_out)
        * np.linalg.norm(net.encoder.matrix)
        * np.linalg.norm(net.decoder.matrix)
    )


def param_lipschitz_factor(depth: int, b: float) -> float:
    """Spike-map sensitivity to (weights, delays) in the sup norm: ``L (1 + 1/b^2)``."""
    return depth * (1.0 + 1.0 / b**2)


def zero_output_bound(depth: int, b: float, B: float) -> float:
    """Bound on the spike map's output at zero input: ``L (1/b + B)``."""
    return depth * (1.0 / b + B)


def core_distance(a: AffineSnn, b: AffineSnn) -> float:
    """``max(||W - W~||_inf, ||D - D~||_inf)`` for two cores on the same graph."""
    return float(
        max(
            np.max(np.abs(a.core.weights - b.core.weights), initial=0.0),
            np.max(np.abs(a.core.delays - b.core.delays), initial=0.0),
        )
    )


def param_lipschitz_bound(a: AffineSnn, b: AffineSnn, x, w_floor: float, delay_cap: float) -> float:
    """``B1 + B2`` bounding ``||R(a)(x) - R(b)(x)||_inf`` for nets on one graph.

    ``w_floor`` must bound every synaptic weight of both nets from below and
    ``delay_cap`` every delay from above.
    """
    if a.graph.edges != b.graph.edges:
        raise ValueError("both networks must share one graph")
    x = np.asarray(x, dtype=np.float64)
    xn = float(np.max(np.abs(x), initial=0.0))
    d0, d_out, depth = a.d0, a.graph.d_out, a.graph.depth
    fro = np.linalg.norm
    w_out_star = max(fro(a.decoder.matrix), fro(b.decoder.matrix))
    w_in_star = max(fro(a.encoder.matrix), fro(b.encoder.matrix))
    b_in_star = max(np.max(np.abs(a.encoder.bias)), np.max(np.abs(b.encoder.bias)))
    b1 = math.sqrt(d_out) * w_out_star * (
        math.sqrt(d0) * fro(a.encoder.matrix - b.encoder.matrix) * xn
        + param_lipschitz_factor(depth, w_floor) * core_distance(a, b)
        + np.max(np.abs(a.encoder.bias - b.encoder.bias))
    )
    b2 = math.sqrt(d_out) * fro(a.decoder.matrix - b.decoder.matrix) * (
        math.sqrt(d0) * w_in_star * xn + b_in_star + zero_output_bound(depth, w_floor, delay_cap)
    ) + np.max(np.abs(a.decoder.bias - b.decoder.bias))
    return float(b1 + b2)


def l_star_from(d_in: int, d_out: int, d0: int, depth: int, b: float, B: float) -> float:
    """``d_out (2 sqrt(d_in) d0 B + B L (1 + 1/b^2) + 2B + L (1/b + B)) + 1``."""
    inner = 2.0 * math.sqrt(d_in) * d0 * B + B * depth * (1.0 + 1.0 / b**2) + 2.0 * B + depth * (1.0 / b + B)
    return d_out * inner + 1.0


def l_star(box: ParamBox) -> float:
    """Lipschitz constant of the clipped realization map over the parameter box."""
    return l_star_from(box.d_in, box.d_out, box.d0, box.depth, box.b, box.B)


def log_covering_from(M: int, B: float, L: float, eps: float) -> float:
    """``M * ln(ceil(2 B L / eps))``."""
    if not eps > 0:
        raise ValueError("eps must be positive")
    return M * math.log(math.ceil(2.0 * B * L / eps))


def log_covering(box: ParamBox, eps: float) -> float:
    return log_covering_from(box.M, box.B, l_star(box), eps)


def generalization_gap_from(M: int, B: float, L: float, m: int, delta: float) -> tuple[float, bool]:
    """Gap term and whether ``m`` meets the sample-size condition.

    The log of the product ``m * ceil(16 B L)`` is taken as a sum of logs.
    """
    if m < 1:
        raise ValueError("m must be >= 1")
    if not 0 < delta < 1:
        raise ValueError("delta must lie in (0, 1)")
    core = M * (math.log(m) + math.log(math.ceil(16.0 * B * L))) + math.log(2.0 / delta)
    return math.sqrt(2.0 * core / m), bool(m >= 2.0 * core)


def generalization_gap(box: ParamBox, m: int, delta: float) -> tuple[float, bool]:
    return generalization_gap_from(box.M, box.B, l_star(box), m, delta)


@dataclass(frozen=True)
class SobolevRate:
    """Approximation rate ``C1 N^exponent ||f||``; constants stay symbolic."""

    exponent: float
    weight_floor: float
    weight_cap: str
    size_cap: str
    error: str


def sobolev_rate(d0: int, s: int, N: int) -> SobolevRate:
    if s not in (1, 2):
        raise ValueError("s must be 1 or 2")
    if d0 < 1 or N < 1:
        raise ValueError("d0 and N must be positive")
    floor = 2.0 * N ** (s / d0 + 1.0)
    return SobolevRate(
        exponent=-s / d0,
        weight_floor=floor,
        weight_cap=f"max(C3*{N}^(1/{d0})*||f||_inf, {floor!r})",
        size_cap=f"C2*{N}",
        error=f"C1*{N}^({-s / d0!r})*||f||_W^({s},inf)",
    )


@dataclass(frozen=True)
class BarronRate:
    """Error ``nu * sqrt(d0) * K / sqrt(M)``; ``nu`` stays symbolic."""

    error_factor: float
    weight_cap: str
    weight_floor: str
    size_cap: str


def barron_rate(d0: int, K: float, M: int) -> BarronRate:
    if d0 < 1 or M < 1 or not K > 0:
        raise ValueError("d0, M and K must be positive")
    return BarronRate(
        error_factor=math.sqrt(d0) * K / math.sqrt(M),
        weight_cap=f"C*({M}^1.5/sqrt({K!r}) + sqrt({K!r}))",
        weight_floor=f"c*{M}^1.5/sqrt({K!r})",
        size_cap=f"C*{d0}*{M}",
    )


def full_error_rate(m: int, kind: str, d0: int = 1, s: int = 1) -> float:
    """Learning-rate shape in the sample count ``m`` (up to constants).

    ``sobolev``: ``m^(-2/(d0/s + 4)) sqrt(ln m)``; ``barron``: ``m^(-1/3) sqrt(ln m)``.
    """
    if m < 2:
        raise ValueError("m must be >= 2")
    if kind == "sobolev":
        p = 2.0 / (d0 / s + 4.0)
    elif kind == "barron":
        p = 1.0 / 3.0
    else:
        raise ValueError(f"unknown rate kind {kind!r}")
    return m**-p * math.sqrt(math.log(m))


@dataclass(frozen=True)
class BoundsReport:
    input_lipschitz: float
    param_lipschitz_factor: float
    zero_output_bound: float
    L_star: float
    M: int
    depth: int
    eps: float
    log_covering: float
    m: int
    delta: float
    generalization_gap: float
    sample_feasible: bool

    def to_json(self) -> str:
        return json.dumps(asdict(self), indent=2, sort_keys=True)


def bounds_report(net: AffineSnn, b: float, B: float, m: int, delta: float, eps: float) -> BoundsReport:
    box = ParamBox(net.graph, net.d0, net.d1, b, B)
    gap, feasible = generalization_gap(box, m, delta)
    return BoundsReport(
        input_lipschitz=input_lipschitz(net),
        param_lipschitz_factor=param_lipschitz_factor(box.depth, b),
        zero_output_bound=zero_output_bound(box.depth, b, B),
        L_star=l_star(box),
        M=box.M,
        depth=box.depth,
        eps=eps,
        log_covering=log_covering(box, eps),
        m=m,
        delta=delta,
        generalization_gap=gap,
        sample_feasible=feasible,
    )
