"""Losses with exact gradients, minibatch training, and network initialization."""

from __future__ import annotations

import csv
import time
from dataclasses import dataclass, field
from typing import Literal

import numpy as np

from ..codec import AffineMap, AffineSnn
from ..errors import ConfigError
from ..graph import NetworkGraph, bipartite_graph
from ..spike import SnnParams
from .engine import backward_batch, forward_batch
from .grads import PARAM_NAMES, ParamGradients, net_params
from .losses import LOSSES
from .optim import SGD, Adam, project_general, project_positive


@dataclass
class TrainConfig:
    loss: Literal["mse", "cross_entropy"] = "mse"
    optimizer: Literal["sgd", "adam"] = "adam"
    learning_rate: float = 1e-3
    betas: tuple[float, float] = (0.9, 0.999)
    adam_eps: float = 1e-8
    l2_coefficient: float = 1e-5
    weight_floor: float = 1e-3
    delay_training: bool = False
    batch_size: int = 32
    epochs: int = 10
    seed: int = 0

    def validate(self) -> None:
        if self.loss not in LOSSES:
            raise ConfigError(f"unknown loss {self.loss!r}")
        if self.optimizer not in ("sgd", "adam"):
            raise ConfigError(f"unknown optimizer {self.optimizer!r}")
        if not self.learning_rate > 0:
            raise ConfigError("learning_rate must be positive")
        if not self.weight_floor > 0:
            raise ConfigError("weight_floor must be positive")
        if self.batch_size < 1 or self.epochs < 0:
            raise ConfigError("batch_size must be >= 1 and epochs >= 0")


@dataclass
class EpochRecord:
    epoch: int
    train_loss: float
    test_loss: float
    test_error: float
    wall_ms: float
    skipped: int = 0


@dataclass
class History:
    records: list[EpochRecord] = field(default_factory=list)

    def column(self, name: str) -> list[float]:
        return [getattr(r, name) for r in self.records]

    def write_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["epoch", "train_loss", "test_loss", "test_error", "wall_ms"])
            for r in self.records:
                w.writerow([r.epoch, repr(r.train_loss), repr(r.test_loss), repr(r.test_error), f"{r.wall_ms:.1f}"])


def init_affine_snn(
    rng: np.random.Generator,
    d0: int,
    d_in: int,
    n_hidden: int,
    d1: int,
    weight_floor: float = 1e-3,
    positive_mode: bool = True,
    graph: NetworkGraph | None = None,
) -> AffineSnn:
    """Encoder/decoder ~ U(-1/sqrt(fan_in), 1/sqrt(fan_in)); synapses ~ U(b, 1+b).

    Without an explicit ``graph`` the core is a complete bipartite layer of
    ``d_in`` inputs and ``n_hidden`` spiking neurons. In general-weight mode
    each weight's sign is flipped with probability 1/4, and a neuron left
    without a positive incoming weight gets its first one flipped back.
    """
    g = graph if graph is not None else bipartite_graph(d_in, n_hidden)
    ne = g.n_edges
    w = rng.uniform(weight_floor, 1.0 + weight_floor, size=ne)
    if not positive_mode:
        w = np.where(rng.random(ne) < 0.25, -w, w)
        for v in range(g.node_count):
            ks = g.in_edges[v]
            if ks and not np.any(w[list(ks)] > 0):
                w[ks[0]] = -w[ks[0]]
    a_in = 1.0 / np.sqrt(d0)
    a_out = 1.0 / np.sqrt(g.d_out)
    enc = AffineMap(rng.uniform(-a_in, a_in, (g.d_in, d0)), rng.uniform(-a_in, a_in, g.d_in))
    dec = AffineMap(rng.uniform(-a_out, a_out, (d1, g.d_out)), rng.uniform(-a_out, a_out, d1))
    return AffineSnn(enc, SnnParams(g, w, np.zeros(ne), positive_mode), dec)


def _targets_for(loss: str, y):
    if loss == "cross_entropy":
        return np.asarray(y, dtype=np.int64).reshape(-1)
    y = np.asarray(y, dtype=np.float64)
    return y.reshape(len(y), -1)


def loss_and_grad(net: AffineSnn, X, Y, config: TrainConfig) -> tuple[float, ParamGradients, int]:
    """Mean loss plus L2 penalty over the batch, its gradient, and #skipped samples.

    The penalty is ``(l2/2) * sum(theta**2)`` over all trainable parameters.
    Samples where a general-weight neuron never spikes are left out of the
    mean and counted in the third return value.
    """
    tape = forward_batch(net, X, raise_on_nospike=net.core.positive_mode)
    loss_fn = LOSSES[config.loss]
    Y = _targets_for(config.loss, Y)
    keep = tape.valid
    n_keep = int(keep.sum())
    skipped = len(keep) - n_keep
    per_sample = np.zeros(len(keep))
    upstream = np.zeros_like(tape.outputs)
    if n_keep:
        per_sample[keep], upstream[keep] = loss_fn(tape.outputs[keep], Y[keep])
    grads, _ = backward_batch(net, tape, upstream)
    grads = grads.scaled(1.0 / max(n_keep, 1))
    loss = float(per_sample.sum() / max(n_keep, 1))

    lam = config.l2_coefficient
    if lam:
        params = net_params(net)
        trainable = _trainable(config)
        loss += 0.5 * lam * sum(float(np.sum(params[k] ** 2)) for k in trainable)
        for k in trainable:
            gk = getattr(grads, "d_" + k)
            gk += lam * params[k]
    if not config.delay_training:
        grads.d_delays = np.zeros_like(grads.d_delays)
    return loss, grads, skipped


def _trainable(config: TrainConfig) -> tuple[str, ...]:
    return tuple(k for k in PARAM_NAMES if k != "delays" or config.delay_training)


def evaluate(net: AffineSnn, X, Y, loss: str, batch_size: int = 512) -> tuple[float, float]:
    """Mean loss and error (misclassification rate for cross-entropy, else NaN).

    Samples without a spike count as errors and are left out of the loss,
    which is NaN when no sample spikes.
    """
    Y = _targets_for(loss, Y)
    total, n_valid, wrong = 0.0, 0, 0
    for s in range(0, len(X), batch_size):
        tape = forward_batch(net, X[s : s + batch_size], raise_on_nospike=False)
        ys = Y[s : s + batch_size]
        keep = tape.valid
        if keep.any():
            per, _ = LOSSES[loss](tape.outputs[keep], ys[keep])
            total += float(per.sum())
            n_valid += int(keep.sum())
        if loss == "cross_entropy":
            pred = np.argmax(np.where(keep[:, None], tape.outputs, 0.0), axis=1)
            wrong += int(np.sum((pred != ys) | ~keep))
    mean_loss = total / n_valid if n_valid else float("nan")
    err = wrong / len(X) if loss == "cross_entropy" else float("nan")
    return mean_loss, err


def _build(net: AffineSnn, params: dict) -> AffineSnn:
    return AffineSnn(
        AffineMap(params["W_in"], params["b_in"]),
        SnnParams(net.graph, params["weights"], params["delays"], net.core.positive_mode),
        AffineMap(params["W_out"], params["b_out"]),
    )


def train(
    net: AffineSnn,
    train_set: tuple[np.ndarray, np.ndarray],
    config: TrainConfig,
    test_set: tuple[np.ndarray, np.ndarray] | None = None,
) -> tuple[AffineSnn, History]:
    """Minibatch training with positivity projection after every step.

    Epoch 0 of the history records the untrained network. Batches are drawn
    from a PCG64 generator seeded with ``config.seed``.
    """
    config.validate()
    X, Y = (np.asarray(a) for a in train_set)
    rng = np.random.Generator(np.random.PCG64(config.seed))
    params = net_params(net)
    opt = (
        Adam(config.learning_rate, *config.betas, eps=config.adam_eps)
        if config.optimizer == "adam"
        else SGD(config.learning_rate)
    )
    history = History()

    def record(epoch, train_loss, skipped, t0):
        if test_set is not None:
            tl, te = evaluate(net, test_set[0], test_set[1], config.loss)
        else:
            tl, te = float("nan"), float("nan")
        history.records.append(EpochRecord(epoch, train_loss, tl, te, (time.perf_counter() - t0) * 1e3, skipped))

    t0 = time.perf_counter()
    record(0, evaluate(net, X, Y, config.loss)[0], 0, t0)
    trainable = _trainable(config)
    for epoch in range(1, config.epochs + 1):
        t0 = time.perf_counter()
        perm = rng.permutation(len(X))
        losses, skipped = [], 0
        for s in range(0, len(X), config.batch_size):
            idx = perm[s : s + config.batch_size]
            loss, grads, sk = loss_and_grad(net, X[idx], Y[idx], config)
            skipped += sk
            losses.append(loss)
            g = grads.as_dict()
            opt.step(params, {k: g[k] for k in trainable})
            if net.core.positive_mode:
                project_positive(params, config.weight_floor)
            else:
                project_general(params, net.graph, config.weight_floor)
            net = _build(net, params)
        record(epoch, float(np.mean(losses)), skipped, t0)
    return net, history
