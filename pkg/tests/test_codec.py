import json

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from affine_snn.codec import (
    AffineMap,
    AffineSnn,
    add,
    from_dict,
    load_model,
    realize,
    realize_clipped,
    save_model,
    size,
    to_dict,
)
from affine_snn.errors import DimensionMismatch
from affine_snn.graph import build_graph
from affine_snn.sampling import random_affine_snn
from affine_snn.spike import SnnParams
from oracles import affine_realization


def _single_edge(w=2.0):
    return SnnParams(build_graph([(0, 1)], 2), [w], [0.0])


def _ref(net, x):
    g = net.graph
    return affine_realization(
        net.encoder.matrix, net.encoder.bias, g.edges, net.core.weights, net.core.delays,
        g.input_nodes, g.output_nodes, net.decoder.matrix, net.decoder.bias, x,
    )


def test_identity_single_edge():
    net = AffineSnn(AffineMap.identity(1), _single_edge(), AffineMap.identity(1))
    assert realize(net, [0.0])[0] == 0.5


def test_negation_gives_max():
    eps = 0.01
    core = SnnParams(build_graph([(0, 2), (1, 2)], 3), [1 / eps, 1 / eps], [0.0, 0.0])
    net = AffineSnn(AffineMap([[-1.0], [-1.0]], [0, 0]), core, AffineMap([[-1.0]], [0.0]))
    for x in (-0.3, 0.0, 0.7):
        assert abs(realize(net, [x])[0] - x) <= eps


def test_constant_decoder():
    net = AffineSnn(AffineMap.identity(1), _single_edge(), AffineMap([[0.0]], [3.5]))
    assert realize(net, [12.0])[0] == 3.5


def test_clipped():
    net = AffineSnn(AffineMap.identity(1), _single_edge(), AffineMap([[0.0]], [1.7]))
    assert realize_clipped(net, [0.0])[0] == 1.0


def test_dimension_checks():
    with pytest.raises(DimensionMismatch):
        AffineSnn(AffineMap(np.ones((2, 1)), np.zeros(2)), _single_edge(), AffineMap.identity(1))
    net = AffineSnn(AffineMap.identity(1), _single_edge(), AffineMap.identity(1))
    with pytest.raises(DimensionMismatch):
        realize(net, [0.0, 1.0])


@settings(max_examples=60, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_realize_matches_oracle(seed):
    rng = np.random.default_rng(seed)
    net = random_affine_snn(rng)
    x = rng.uniform(-1, 1, net.d0)
    np.testing.assert_allclose(realize(net, x), _ref(net, x), atol=1e-10)


@settings(max_examples=60, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_addition_is_pointwise_sum(seed):
    rng = np.random.default_rng(seed)
    a = random_affine_snn(rng, d0=2, d1=2)
    b = random_affine_snn(rng, d0=2, d1=2)
    s = add(a, b)
    x = rng.uniform(-1, 1, 2)
    np.testing.assert_allclose(realize(s, x), realize(a, x) + realize(b, x), atol=1e-12)
    assert s.graph.node_count == a.graph.node_count + b.graph.node_count
    assert s.graph.input_nodes[: a.graph.d_in] == a.graph.input_nodes


def test_addition_size_accounting():
    rng = np.random.default_rng(3)
    a = random_affine_snn(rng, d0=2, d1=1)
    b = random_affine_snn(rng, d0=2, d1=1)
    b0 = b.replace(b_out=np.zeros(1))
    assert size(add(a, b0)) == size(a) + size(b0)
    # Both decoder biases nonzero: the merged bias is one entry, not two.
    assert size(add(a, b)) == size(a) + size(b) - 1


def test_add_zero_net_is_identity():
    rng = np.random.default_rng(0)
    a = random_affine_snn(rng, d0=2, d1=1)
    z = random_affine_snn(rng, d0=2, d1=1)
    z = z.replace(W_out=np.zeros_like(z.decoder.matrix), b_out=np.zeros(1))
    x = np.array([0.2, -0.4])
    np.testing.assert_allclose(realize(add(a, z), x), realize(a, x), rtol=0, atol=1e-14)


def test_add_rejects_mismatch():
    rng = np.random.default_rng(1)
    with pytest.raises(DimensionMismatch):
        add(random_affine_snn(rng, d0=2, d1=1), random_affine_snn(rng, d0=3, d1=1))


def test_size_counts_nonzeros():
    core = SnnParams(build_graph([(0, 3), (1, 3), (2, 3)], 4), [1.0, 2.0, 3.0], [0, 0, 0])
    net = AffineSnn(AffineMap(np.zeros((3, 1)), np.zeros(3)), core, AffineMap(np.zeros((1, 1)), [0.0]))
    assert size(net) == 3


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_serialization_bit_exact(seed):
    rng = np.random.default_rng(seed)
    net = random_affine_snn(rng)
    back = from_dict(json.loads(json.dumps(to_dict(net))))
    for a, b in [
        (net.core.weights, back.core.weights),
        (net.core.delays, back.core.delays),
        (net.encoder.matrix, back.encoder.matrix),
        (net.encoder.bias, back.encoder.bias),
        (net.decoder.matrix, back.decoder.matrix),
        (net.decoder.bias, back.decoder.bias),
    ]:
        assert a.tobytes() == b.tobytes()
    assert back.graph.edges == net.graph.edges


def test_save_and_load(tmp_path):
    net = random_affine_snn(np.random.default_rng(7))
    save_model(net, tmp_path / "m.json")
    back = load_model(tmp_path / "m.json")
    x = np.linspace(-1, 1, net.d0)
    assert realize(back, x).tobytes() == realize(net, x).tobytes()
