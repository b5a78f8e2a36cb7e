"""Experiment runners behind the ``affine-snn`` command line.

Each runner takes a plain dict (parsed from the JSON config), validates it
into a config dataclass and returns result rows. Rows carry no timing data,
so identical configs give byte-identical CSV files.
"""

from __future__ import annotations

import csv
import dataclasses
import io
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

import numpy as np

from . import bounds as bnd
from .codec import load_model
from .constructors import (
    FemFunction,
    build_fem_net,
    build_max_net,
    build_min_net,
    load_triangulation,
    regular_grid_triangulation,
)
from .errors import ConfigError
from .spike import neuron_spike_time
from .training.data import export_mlxtend_subset, load_mnist_dir
from .training.engine import realize_batch
from .training.optim import Adam
from .training.train import TrainConfig, init_affine_snn, train

CSV_HEADER = ("experiment", "seed", "param", "metric", "value")


# Guaranteed bounds are checked as ``err <= bound * (1 + REL_SLACK)``: a
# single causal input gives an error of exactly eps, which float64 rounding
# can overshoot by an ulp.
REL_SLACK = 1e-9


class AssertFailed(AssertionError):
    """An experiment observed a value outside its guaranteed bound."""


@dataclass
class Results:
    rows: list[tuple] = field(default_factory=list)

    def add(self, experiment: str, seed, param: str, metric: str, value) -> None:
        if isinstance(value, (float, np.floating)):
            value = repr(float(value))
        self.rows.append((experiment, seed, param, metric, value))

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(CSV_HEADER)
        w.writerows(self.rows)
        return buf.getvalue()

    def write(self, path) -> None:
        Path(path).write_text(self.to_csv())

    def values(self, experiment=None, metric=None, param=None, seed=None) -> list[float]:
        return [
            float(r[4])
            for r in self.rows
            if (experiment is None or r[0] == experiment)
            and (metric is None or r[3] == metric)
            and (param is None or r[2] == param)
            and (seed is None or r[1] == seed)
        ]


def _from_dict(cls, data: dict[str, Any], required: tuple[str, ...] = ()):
    names = {f.name for f in dataclasses.fields(cls)}
    unknown = set(data) - names
    if unknown:
        raise ConfigError(f"unknown config keys: {sorted(unknown)}")
    missing = [k for k in required if k not in data]
    if missing:
        raise ConfigError(f"missing config keys: {missing}")
    try:
        return cls(**data)
    except TypeError as exc:
        raise ConfigError(str(exc)) from exc


# -- min / max ---------------------------------------------------------------


@dataclass
class MinMaxConfig:
    seed: int
    eps_grid: list[float] = field(default_factory=lambda: [1e-4, 1e-3, 1e-2, 1e-1])
    d0_min: int = 784
    d0_max: int = 1
    n_samples: int = 1000

    def validate(self):
        if not self.eps_grid or any(not e > 0 for e in self.eps_grid):
            raise ConfigError("eps_grid entries must be positive")
        if self.d0_min < 2 or self.d0_max < 1 or self.n_samples < 1:
            raise ConfigError("need d0_min >= 2, d0_max >= 1, n_samples >= 1")


def run_minmax(cfg: dict) -> Results:
    """Max absolute error of the min and max emulators on Uniform(-0.5, 0.5) inputs."""
    c = _from_dict(MinMaxConfig, cfg, ("seed",))
    c.validate()
    rng = np.random.Generator(np.random.PCG64(c.seed))
    res = Results()
    failures = []
    for name, d0, builder, ref in (
        ("min", c.d0_min, build_min_net, np.min),
        ("max", c.d0_max, build_max_net, np.max),
    ):
        X = rng.uniform(-0.5, 0.5, size=(c.n_samples, d0))
        exact = ref(X, axis=1)
        for eps in c.eps_grid:
            out = realize_batch(builder(d0, eps), X)[:, 0]
            err = float(np.max(np.abs(out - exact)))
            res.add(name, c.seed, f"eps={eps!r};d0={d0}", "max_error", err)
            if err > eps * (1 + REL_SLACK):
                failures.append((name, eps, err))
    if failures:
        raise AssertFailed(f"error above eps: {failures}")
    return res


# -- teacher / student -----------------------------------------------------


@dataclass
class TeacherConfig:
    seeds: list[int]
    epochs: int = 20
    n_train: int = 10_000
    n_test: int = 1_000
    d0: int = 40
    teacher_width: int = 20
    snn_inputs: int = 40
    snn_hidden: int = 20
    relu_width: int = 20
    learning_rate: float = 1e-3
    batch_size: int = 32
    l2_coefficient: float = 0.0
    weight_floor: float = 1e-3
    models: list[str] = field(default_factory=lambda: ["linear", "relu", "snn_positive", "snn_general"])

    def validate(self):
        if not self.seeds:
            raise ConfigError("seeds must be a nonempty list")
        if self.epochs < 0 or self.n_train < 1 or self.n_test < 1:
            raise ConfigError("need epochs >= 0 and positive sample counts")
        bad = set(self.models) - {"linear", "relu", "snn_positive", "snn_general"}
        if bad:
            raise ConfigError(f"unknown models {sorted(bad)}")


def _uniform_init(rng, fan_in, shape):
    a = 1.0 / math.sqrt(fan_in)
    return rng.uniform(-a, a, size=shape)


def make_teacher(rng, d0: int, width: int):
    """Random one-hidden-layer ReLU network x -> c.relu(Ax + b) + d."""
    A = _uniform_init(rng, d0, (width, d0))
    b = _uniform_init(rng, d0, width)
    c = _uniform_init(rng, width, width)
    d = _uniform_init(rng, width, 1)[0]

    def f(X):
        return np.maximum(X @ A.T + b, 0.0) @ c + d

    return f


def _dense_forward(kind, p, X):
    if kind == "linear":
        return X @ p["W"] + p["b"], None
    h = X @ p["A"].T + p["a"]
    return np.maximum(h, 0.0) @ p["c"] + p["d"], h


def _dense_grads(kind, p, X, g):
    """Gradient of ``sum(g * model(X))`` with respect to each parameter."""
    if kind == "linear":
        return {"W": X.T @ g, "b": g.sum(axis=0)}
    h = X @ p["A"].T + p["a"]
    r = np.maximum(h, 0.0)
    gh = (g[:, None] * p["c"]) * (h > 0)
    return {"c": r.T @ g, "d": np.array(g.sum()), "A": gh.T @ X, "a": gh.sum(axis=0)}


def _train_dense(kind, rng, X, Y, Xt, Yt, c: TeacherConfig, seed: int) -> tuple[list[float], list[float]]:
    """Adam on the mean squared error; returns (test curve, train-loss curve)."""
    d0 = X.shape[1]
    if kind == "linear":
        p = {"W": _uniform_init(rng, d0, (d0,)), "b": np.array(_uniform_init(rng, d0, 1)[0])}
    else:
        w = c.relu_width
        p = {
            "A": _uniform_init(rng, d0, (w, d0)),
            "a": _uniform_init(rng, d0, w),
            "c": _uniform_init(rng, w, w),
            "d": np.array(_uniform_init(rng, w, 1)[0]),
        }

    def mse(A, B):
        return float(np.mean((_dense_forward(kind, p, A)[0] - B) ** 2))

    test, train = [mse(Xt, Yt)], [mse(X, Y)]
    opt = Adam(c.learning_rate)
    order = np.random.Generator(np.random.PCG64(seed))
    for _ in range(c.epochs):
        perm = order.permutation(len(X))
        losses = []
        for s in range(0, len(X), c.batch_size):
            idx = perm[s : s + c.batch_size]
            out, _ = _dense_forward(kind, p, X[idx])
            diff = out - Y[idx]
            losses.append(float(np.mean(diff**2)))
            grads = _dense_grads(kind, p, X[idx], 2.0 * diff / len(idx))
            if c.l2_coefficient:
                for k in grads:
                    grads[k] = grads[k] + c.l2_coefficient * p[k]
            opt.step(p, grads)
        test.append(mse(Xt, Yt))
        train.append(float(np.mean(losses)))
    return test, train


def run_teacher(cfg: dict) -> Results:
    """Fit a random ReLU teacher with linear, ReLU and affine SNN students.

    Inputs are Uniform(-1, 1)^d0. Rows give the test mse and the mean
    training loss per epoch and model, then medians and quartiles over seeds.
    """
    c = _from_dict(TeacherConfig, cfg, ("seeds",))
    c.validate()
    res = Results()
    curves: dict[tuple[str, str], list[list[float]]] = {}
    for seed in c.seeds:
        rng = np.random.Generator(np.random.PCG64(seed))
        teacher = make_teacher(rng, c.d0, c.teacher_width)
        X = rng.uniform(-1.0, 1.0, size=(c.n_train, c.d0))
        Xt = rng.uniform(-1.0, 1.0, size=(c.n_test, c.d0))
        Y, Yt = teacher(X), teacher(Xt)
        for model in c.models:
            mrng = np.random.Generator(np.random.PCG64([seed, c.models.index(model)]))
            if model in ("linear", "relu"):
                curve, train_curve = _train_dense(model, mrng, X, Y, Xt, Yt, c, seed)
            else:
                net = init_affine_snn(
                    mrng, c.d0, c.snn_inputs, c.snn_hidden, 1, c.weight_floor, positive_mode=model == "snn_positive"
                )
                tc = TrainConfig(
                    loss="mse",
                    learning_rate=c.learning_rate,
                    l2_coefficient=c.l2_coefficient,
                    weight_floor=c.weight_floor,
                    batch_size=c.batch_size,
                    epochs=c.epochs,
                    seed=seed,
                )
                _, hist = train(net, (X, Y), tc, (Xt, Yt))
                curve, train_curve = hist.column("test_loss"), hist.column("train_loss")
            for metric, values in (("test_mse", curve), ("train_loss", train_curve)):
                curves.setdefault((model, metric), []).append(values)
                for epoch, v in enumerate(values):
                    res.add("teacher", seed, f"model={model};epoch={epoch}", metric, v)
    for (model, metric), cs in curves.items():
        arr = np.array(cs)
        for epoch in range(arr.shape[1]):
            q25, q50, q75 = np.percentile(arr[:, epoch], [25, 50, 75])
            param = f"model={model};epoch={epoch}"
            res.add("teacher", "all", param, f"{metric}_median", q50)
            res.add("teacher", "all", param, f"{metric}_q25", q25)
            res.add("teacher", "all", param, f"{metric}_q75", q75)
    return res


# -- MNIST -----------------------------------------------------------------


@dataclass
class MnistConfig:
    seeds: list[int]
    data_dir: str
    subset_size: int = 6000
    test_size: int = 1000
    subset_seed: int = 0
    epochs: int = 10
    spiking_inputs: int = 200
    hidden: int = 200
    learning_rate: float = 1e-3
    batch_size: int = 32
    l2_coefficient: float = 1e-5
    weight_floor: float = 1e-3
    variants: list[str] = field(default_factory=lambda: ["positive", "general"])
    full: bool = False

    def validate(self):
        if not self.seeds:
            raise ConfigError("seeds must be a nonempty list")
        if self.subset_size < 1 or self.test_size < 1:
            raise ConfigError("subset_size and test_size must be >= 1")
        if self.epochs < 0:
            raise ConfigError("epochs must be >= 0")
        bad = set(self.variants) - {"positive", "general"}
        if bad:
            raise ConfigError(f"unknown variants {sorted(bad)}")


def _subset(ds, n, rng):
    # The bundled sample is sorted by class, so take a random subset.
    idx = np.sort(rng.permutation(len(ds))[: min(n, len(ds))])
    return ds.x[idx], ds.y[idx]


def run_mnist(cfg: dict) -> Results:
    """Train positive- and general-weight affine SNNs with cross-entropy.

    Rows record test error and loss per epoch. ``full`` uses every image
    in the dataset directory instead of the subsets.
    """
    c = _from_dict(MnistConfig, cfg, ("seeds", "data_dir"))
    c.validate()
    train_ds = load_mnist_dir(c.data_dir, "train")
    test_ds = load_mnist_dir(c.data_dir, "test")
    if c.full:
        (X, Y), (Xt, Yt) = (train_ds.x, train_ds.y), (test_ds.x, test_ds.y)
    else:
        srng = np.random.Generator(np.random.PCG64(c.subset_seed))
        X, Y = _subset(train_ds, c.subset_size, srng)
        Xt, Yt = _subset(test_ds, c.test_size, srng)
    res = Results()
    res.add("mnist", "all", "split=train", "n_samples", len(X))
    res.add("mnist", "all", "split=test", "n_samples", len(Xt))
    for variant in c.variants:
        for seed in c.seeds:
            rng = np.random.Generator(np.random.PCG64(seed))
            net = init_affine_snn(
                rng, X.shape[1], c.spiking_inputs, c.hidden, 10, c.weight_floor, positive_mode=variant == "positive"
            )
            tc = TrainConfig(
                loss="cross_entropy",
                learning_rate=c.learning_rate,
                l2_coefficient=c.l2_coefficient,
                weight_floor=c.weight_floor,
                batch_size=c.batch_size,
                epochs=c.epochs,
                seed=seed,
            )
            _, hist = train(net, (X, Y), tc, (Xt, Yt))
            for r in hist.records:
                param = f"variant={variant};epoch={r.epoch}"
                res.add("mnist", seed, param, "test_error", r.test_error)
                res.add("mnist", seed, param, "test_loss", r.test_loss)
                res.add("mnist", seed, param, "skipped", r.skipped)
    return res


def prepare_mnist(directory) -> Path:
    """Write the mlxtend MNIST sample (4000 train / 1000 test) as IDX files."""
    try:
        return export_mlxtend_subset(directory)
    except ImportError as exc:
        raise ConfigError("preparing the MNIST sample needs the optional 'mlxtend' package") from exc


# -- general-weight discontinuities ----------------------------------------


@dataclass
class DiscontinuityConfig:
    eps_grid: list[float] = field(default_factory=lambda: [1e-1, 1e-2, 1e-3])
    s_grid: list[float] = field(default_factory=lambda: [0.5, 0.1, 0.01, 0.0])
    t: float = 0.0
    seed: int = 0


def _three_input(times, delays=(0.0, 0.0, 0.0)) -> float:
    arr = [(ti + di, wi) for ti, di, wi in zip(times, delays, (1.0, -1.0, 1.0))]
    return neuron_spike_time(arr, positive_mode=False)[0]


def spike_time_b1(eps: float) -> tuple[float, float]:
    """Spike times for inputs ``(0, 1+eps, 2)`` and ``(0, 1-eps, 2)``."""
    return _three_input((0.0, 1.0 + eps, 2.0)), _three_input((0.0, 1.0 - eps, 2.0))


def spike_time_b2(t: float, s: float) -> float:
    """Spike time with all inputs at ``t`` and delays ``(0, 1+s, 2)``."""
    return _three_input((t, t, t), (0.0, 1.0 + s, 2.0))


def run_discontinuity(cfg: dict) -> Results:
    """Jumps of general-weight spike times across the two critical points."""
    c = _from_dict(DiscontinuityConfig, cfg)
    res = Results()
    for eps in c.eps_grid:
        above, below = spike_time_b1(eps)
        p = f"eps={eps!r}"
        res.add("input_jump", c.seed, p, "t_above", above)
        res.add("input_jump", c.seed, p, "t_below", below)
        res.add("input_jump", c.seed, p, "jump", abs(below - above))
    small = []
    for s in c.s_grid:
        plus, minus = spike_time_b2(c.t, s), spike_time_b2(c.t, -s)
        p = f"s={s!r};t={c.t!r}"
        res.add("delay_jump", c.seed, p, "t_plus", plus)
        res.add("delay_jump", c.seed, p, "t_minus", minus)
        res.add("delay_jump", c.seed, p, "jump", abs(plus - minus))
        if s != 0 and abs(plus - minus) < 1.0:
            small.append(s)
    if small:
        raise AssertFailed(f"jump below 1 for s in {small}")
    return res


# -- finite elements -------------------------------------------------------


@dataclass
class FemConfig:
    eps: float = 1e-2
    grid_n: int = 101
    mesh_path: str | None = None
    d0: int = 1
    n_per_axis: int = 2
    pattern: str = "diagonal"
    values: list[float] | None = None
    function: str = "hat"
    seed: int = 0

    def validate(self):
        if not self.eps > 0:
            raise ConfigError("eps must be positive")
        if self.grid_n < 2:
            raise ConfigError("grid_n must be >= 2")
        if self.function not in ("hat", "sum", "random"):
            raise ConfigError("function must be 'hat', 'sum' or 'random'")


def _fem_values(c: FemConfig, mesh) -> np.ndarray:
    if c.function == "sum":
        return mesh.vertices.sum(axis=1)
    if c.function == "random":
        return np.random.Generator(np.random.PCG64(c.seed)).uniform(-1, 1, len(mesh.vertices))
    v = np.zeros(len(mesh.vertices))
    v[len(v) // 2] = 1.0
    return v


def run_fem(cfg: dict) -> Results:
    """Grid error of the finite-element emulator against exact interpolation."""
    c = _from_dict(FemConfig, cfg)
    c.validate()
    if c.mesh_path:
        mesh, values = load_triangulation(c.mesh_path)
    else:
        try:
            mesh = regular_grid_triangulation(c.d0, c.n_per_axis, pattern=c.pattern)
        except ValueError as exc:
            raise ConfigError(str(exc)) from exc
        values = None
    if c.values is not None:
        values = np.array(c.values, dtype=np.float64)
    if values is None:
        values = _fem_values(c, mesh)
    f = FemFunction(mesh, values)
    net = build_fem_net(f, c.eps)
    lo, hi = mesh.vertices.min(axis=0), mesh.vertices.max(axis=0)
    axes = [np.linspace(lo[i], hi[i], c.grid_n) for i in range(mesh.d0)]
    pts = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1).reshape(-1, mesh.d0)
    out = realize_batch(net, pts)[:, 0]
    exact = np.array([f(p) for p in pts])
    err = float(np.max(np.abs(out - exact)))
    bound = float(np.abs(values).sum() * c.eps)
    param = f"eps={c.eps!r};d0={mesh.d0};grid_n={c.grid_n}"
    res = Results()
    res.add("fem", c.seed, param, "max_error", err)
    res.add("fem", c.seed, param, "bound", bound)
    if err > bound * (1 + REL_SLACK):
        raise AssertFailed(f"fem error {err} above bound {bound}")
    return res


# -- bounds ----------------------------------------------------------------


@dataclass
class BoundsConfig:
    model_path: str
    m: int
    delta: float
    eps: float
    b: float | None = None
    B: float | None = None
    seed: int = 0


def run_bounds(cfg: dict) -> bnd.BoundsReport:
    """Bounds for a saved model.

    ``b`` and ``B`` default to the model's own smallest weight (capped at 1)
    and largest parameter magnitude (at least 1).
    """
    c = _from_dict(BoundsConfig, cfg, ("model_path", "m", "delta", "eps"))
    net = load_model(c.model_path)
    b = c.b if c.b is not None else min(1.0, float(net.core.weights.min()))
    if c.B is not None:
        B = c.B
    else:
        mags = [np.abs(a).max(initial=0.0) for a in (
            net.core.weights, net.core.delays, net.encoder.matrix, net.encoder.bias,
            net.decoder.matrix, net.decoder.bias,
        )]
        B = max(1.0, float(max(mags)))
    try:
        return bnd.bounds_report(net, b, B, c.m, c.delta, c.eps)
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc


RUNNERS = {
    "minmax": run_minmax,
    "teacher": run_teacher,
    "mnist": run_mnist,
    "discontinuity": run_discontinuity,
    "fem": run_fem,
}

