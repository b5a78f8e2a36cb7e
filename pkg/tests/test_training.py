import gzip
import math
import struct

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from affine_snn.codec import AffineMap, AffineSnn, realize
from affine_snn.errors import BadMagic, ConfigError, TruncatedFile
from affine_snn.graph import build_graph
from affine_snn.sampling import random_affine_snn
from affine_snn.spike import SnnParams
from affine_snn.training import (
    TrainConfig,
    backward,
    backward_batch,
    evaluate,
    forward_batch,
    init_affine_snn,
    load_idx,
    loss_and_grad,
    record,
    train,
    write_idx,
)
from affine_snn.training.data import load_mnist_dir
from affine_snn.training.losses import cross_entropy, mse
from affine_snn.training.optim import SGD, Adam, project_general, project_positive
from fd import analytic_gradients, fd_gradients, max_relative_error, near_kink


def _two_input_net(w1, w2):
    core = SnnParams(build_graph([(0, 2), (1, 2)], 3), [w1, w2], [0.0, 0.0])
    return AffineSnn(AffineMap.identity(2), core, AffineMap.identity(1))


def test_single_edge_partials():
    core = SnnParams(build_graph([(0, 1)], 2), [2.0], [0.0])
    net = AffineSnn(AffineMap.identity(1), core, AffineMap.identity(1))
    tape = record(net, [0.0])
    assert tape.trace.outputs[0] == 0.5
    assert tape.d_weight[0] == -0.25
    assert tape.d_time[0] == 1.0
    assert tape.d_delay[0] == 1.0


def test_two_arrival_partials():
    tape = record(_two_input_net(10.0, 10.0), [0.0, 0.05])
    assert tape.trace.outputs[0] == pytest.approx(0.075)
    assert tape.d_time[0] == pytest.approx(0.5)
    assert tape.d_weight[0] == pytest.approx(-0.00375)


@settings(max_examples=50, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_local_partial_identities(seed):
    rng = np.random.default_rng(seed)
    net = random_affine_snn(rng)
    tape = record(net, rng.uniform(-1, 1, net.d0))
    g, tr = net.graph, tape.trace
    for v in range(g.node_count):
        ks = list(tr.causal_sets[v])
        if not ks:
            continue
        assert sum(tape.d_time[k] for k in ks) == pytest.approx(1.0, abs=1e-12)
        assert sum(tape.d_delay[k] for k in ks) == pytest.approx(1.0, abs=1e-12)
        weighted = sum(net.core.weights[k] * tape.d_weight[k] for k in ks)
        assert weighted == pytest.approx(-1.0 / tr.causal_weight_sums[v], rel=1e-9, abs=1e-12)
        for k in set(g.in_edges[v]) - set(ks):
            assert tape.d_time[k] == tape.d_weight[k] == tape.d_delay[k] == 0.0


@pytest.mark.parametrize("seed", range(12))
def test_backward_matches_finite_differences(seed):
    rng = np.random.default_rng(1000 + seed)
    net = random_affine_snn(rng, n_nodes=int(rng.integers(3, 9)))
    for _ in range(50):
        x = rng.uniform(-1, 1, net.d0)
        if not near_kink(net, x):
            break
    else:
        pytest.skip("no kink-free input found")
    r = rng.normal(size=net.d1)
    assert max_relative_error(analytic_gradients(net, x, r), fd_gradients(net, x, r)) <= 1e-5


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 2**32 - 1), st.booleans())
def test_batched_engine_matches_per_sample(seed, zero_delays):
    rng = np.random.default_rng(seed)
    net = random_affine_snn(rng, zero_delays=zero_delays)
    X = rng.uniform(-1, 1, (6, net.d0))
    U = rng.normal(size=(6, net.d1))
    tape = forward_batch(net, X)
    grads, dX = backward_batch(net, tape, U)
    total = None
    for i in range(len(X)):
        np.testing.assert_allclose(tape.outputs[i], realize(net, X[i]), atol=1e-13)
        gi, dxi = backward(net, record(net, X[i]), U[i])
        total = gi if total is None else total + gi
        np.testing.assert_allclose(dX[i], dxi, atol=1e-10)
    np.testing.assert_allclose(grads.flat(), total.flat(), atol=1e-10)


def test_perfect_fit_has_zero_data_gradient():
    rng = np.random.default_rng(0)
    net = random_affine_snn(rng, d0=2, d1=1)
    X = rng.uniform(-1, 1, (5, 2))
    Y = forward_batch(net, X).outputs.copy()
    loss, grads, skipped = loss_and_grad(net, X, Y, TrainConfig(l2_coefficient=0.0))
    assert loss == 0.0 and skipped == 0
    assert np.all(grads.flat() == 0.0)


def test_mse_and_cross_entropy_values():
    per, g = mse(np.array([[2.0]]), np.array([[0.5]]))
    assert per[0] == 2.25 and g[0, 0] == 3.0
    per, g = cross_entropy(np.zeros((1, 10)), [4])
    assert per[0] == pytest.approx(math.log(10))
    assert g.sum() == pytest.approx(0.0, abs=1e-15)


def test_l2_penalty_added():
    rng = np.random.default_rng(1)
    net = random_affine_snn(rng, d0=2, d1=1, zero_delays=True)
    X, Y = rng.uniform(-1, 1, (4, 2)), rng.uniform(-1, 1, (4, 1))
    lam = 0.1
    l0, g0, _ = loss_and_grad(net, X, Y, TrainConfig(l2_coefficient=0.0))
    l1, g1, _ = loss_and_grad(net, X, Y, TrainConfig(l2_coefficient=lam))
    w = np.asarray(net.core.weights)
    penalty = sum(float(np.sum(a**2)) for a in (w, net.encoder.matrix, net.encoder.bias,
                                                 net.decoder.matrix, net.decoder.bias))
    assert l1 - l0 == pytest.approx(0.5 * lam * penalty)
    np.testing.assert_allclose(g1.d_weights - g0.d_weights, lam * w)


def _toy_problem(seed=0, n=64):
    rng = np.random.default_rng(seed)
    X = rng.uniform(-1, 1, (n, 3))
    Y = np.maximum(X @ np.array([0.5, -0.3, 0.2]), 0.0)[:, None]
    return X, Y


def test_zero_epochs_leaves_net_unchanged():
    X, Y = _toy_problem()
    net = init_affine_snn(np.random.default_rng(0), 3, 3, 4, 1)
    out, hist = train(net, (X, Y), TrainConfig(epochs=0))
    assert out is net
    assert len(hist.records) == 1


def test_training_is_deterministic_and_projected():
    X, Y = _toy_problem()
    cfg = TrainConfig(epochs=3, batch_size=8, learning_rate=0.05, weight_floor=0.2, seed=4)
    runs = []
    for _ in range(2):
        net = init_affine_snn(np.random.default_rng(0), 3, 3, 4, 1, weight_floor=0.2)
        trained, hist = train(net, (X, Y), cfg, (X, Y))
        runs.append((trained, hist))
    (a, ha), (b, hb) = runs
    assert a.core.weights.tobytes() == b.core.weights.tobytes()
    assert ha.column("test_loss") == hb.column("test_loss")
    assert np.all(a.core.weights >= 0.2)
    assert ha.records[-1].test_loss < ha.records[0].test_loss


def test_delay_training_keeps_delays_nonnegative():
    X, Y = _toy_problem()
    net = init_affine_snn(np.random.default_rng(2), 3, 3, 4, 1)
    trained, _ = train(net, (X, Y), TrainConfig(epochs=2, batch_size=8, learning_rate=0.1, delay_training=True))
    assert np.all(trained.core.delays >= 0)


def test_frozen_delays_stay_zero():
    X, Y = _toy_problem()
    net = init_affine_snn(np.random.default_rng(2), 3, 3, 4, 1)
    trained, _ = train(net, (X, Y), TrainConfig(epochs=2, batch_size=8, learning_rate=0.1))
    assert np.all(trained.core.delays == 0)


def test_general_mode_counts_silent_samples():
    core = SnnParams(build_graph([(0, 2), (1, 2)], 3), [1.0, -1.0], [0.0, 0.0], positive_mode=False)
    net = AffineSnn(AffineMap.identity(2), core, AffineMap.identity(1))
    X = np.array([[0.0, 2.0], [0.0, 0.5], [0.0, 3.0]])
    loss, grads, skipped = loss_and_grad(net, X, np.zeros((3, 1)), TrainConfig(l2_coefficient=0.0))
    assert skipped == 1
    assert loss == pytest.approx((1.0 + 1.0) / 2)


def test_project_general_restores_a_positive_weight():
    g = build_graph([(0, 2), (1, 2)], 3)
    params = {"weights": np.array([-0.5, -0.1]), "delays": np.array([-1.0, 0.2])}
    project_general(params, g, 1e-3)
    assert params["weights"].tolist() == [-0.5, 1e-3]
    assert params["delays"].tolist() == [0.0, 0.2]


def test_project_positive():
    params = {"weights": np.array([-1.0, 0.5]), "delays": np.array([-0.1, 0.3])}
    project_positive(params, 0.01)
    assert params["weights"].tolist() == [0.01, 0.5]
    assert params["delays"].tolist() == [0.0, 0.3]


def test_optimizers():
    p = {"a": np.array([1.0])}
    SGD(0.1).step(p, {"a": np.array([2.0])})
    assert p["a"][0] == pytest.approx(0.8)
    p = {"a": np.array([1.0])}
    Adam(0.01).step(p, {"a": np.array([5.0])})
    assert p["a"][0] == pytest.approx(0.99, abs=1e-8)


def test_config_validation():
    with pytest.raises(ConfigError):
        TrainConfig(learning_rate=0.0).validate()
    with pytest.raises(ConfigError):
        TrainConfig(loss="hinge").validate()
    with pytest.raises(ConfigError):
        TrainConfig(weight_floor=0.0).validate()


def test_evaluate_error_rate():
    core = SnnParams(build_graph([(0, 1)], 2), [1.0], [0.0])
    net = AffineSnn(AffineMap([[1.0]], [0.0]), core, AffineMap([[1.0], [-1.0]], [0.0, 0.0]))
    X = np.array([[-5.0], [5.0]])
    _, err = evaluate(net, X, np.array([1, 0]), "cross_entropy")
    # Outputs (t, -t) with t = x + 1: class 1 for x=-5, class 0 for x=5.
    assert err == 0.0


# -- IDX -----------------------------------------------------------------------


def test_idx_image_round_trip(tmp_path):
    imgs = np.arange(4 * 28 * 28, dtype=np.uint32).reshape(4, 28, 28) % 256
    write_idx(tmp_path / "x.idx", imgs)
    back = load_idx(tmp_path / "x.idx")
    assert back.shape == (4, 28, 28)
    np.testing.assert_array_equal(back * 255, imgs)


def test_idx_labels(tmp_path):
    write_idx(tmp_path / "y.idx.gz", np.array([3, 1, 4, 1]))
    assert load_idx(tmp_path / "y.idx.gz").tolist() == [3, 1, 4, 1]


def test_idx_header_bytes(tmp_path):
    p = tmp_path / "y.idx"
    p.write_bytes(struct.pack(">II", 0x801, 2) + bytes([7, 9]))
    assert load_idx(p).tolist() == [7, 9]


def test_idx_bad_magic(tmp_path):
    p = tmp_path / "bad"
    p.write_bytes(struct.pack(">II", 0x999, 1) + b"\x00")
    with pytest.raises(BadMagic):
        load_idx(p)


def test_idx_truncated(tmp_path):
    p = tmp_path / "short"
    p.write_bytes(struct.pack(">IIII", 0x803, 2, 28, 28) + b"\x00" * 100)
    with pytest.raises(TruncatedFile):
        load_idx(p)
    with gzip.open(tmp_path / "h.gz", "wb") as fh:
        fh.write(b"\x00\x00")
    with pytest.raises(TruncatedFile):
        load_idx(tmp_path / "h.gz")


def test_mnist_dir_loader(tmp_path):
    write_idx(tmp_path / "train-images-idx3-ubyte", np.zeros((3, 28, 28)))
    write_idx(tmp_path / "train-labels-idx1-ubyte", np.array([0, 1, 2]))
    ds = load_mnist_dir(tmp_path, "train")
    assert ds.x.shape == (3, 784) and ds.y.tolist() == [0, 1, 2]
    assert len(ds.subset(2)) == 2
