import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from pecann.autodiff import graph as G
from pecann.autodiff.tape import backward
from pecann.network import (NetworkConfig, flatten, forward, forward_jets, init_xavier, layer_shapes,
                            param_leaves, predict, unflatten)


def test_composite_heat_parameter_count():
    cfg = NetworkConfig(1, 2, 1, 32, "sigmoid")
    assert cfg.n_params == 130
    assert init_xavier(cfg, 0).shape == (130,)


def test_four_layer_parameter_count():
    # 1*20+20 + 3*(20*20+20) + 20*2+2
    assert NetworkConfig(1, 2, 4, 20, "tanh").n_params == 1342


@given(st.integers(1, 4), st.integers(1, 3), st.integers(1, 5), st.integers(1, 12))
@settings(max_examples=20, deadline=None)
def test_parameter_count_matches_enumeration(i, o, layers, width):
    cfg = NetworkConfig(i, o, layers, width)
    count = sum(W.size + b.size for W, b in unflatten(cfg, np.zeros(cfg.n_params)))
    assert count == cfg.n_params


def test_xavier_deterministic_and_bounded():
    cfg = NetworkConfig(2, 1, 2, 10)
    a, b = init_xavier(cfg, 5), init_xavier(cfg, 5)
    np.testing.assert_array_equal(a, b)
    for (W, bias), (fi, fo) in zip(unflatten(cfg, a), layer_shapes(cfg)):
        assert np.all(np.abs(W) <= np.sqrt(6 / (fi + fo)))
        assert np.all(bias == 0)


def test_flatten_roundtrip(rng):
    cfg = NetworkConfig(2, 3, 2, 4)
    theta = rng.normal(size=cfg.n_params)
    np.testing.assert_array_equal(flatten(unflatten(cfg, theta)), theta)


def test_invalid_config():
    with pytest.raises(ValueError):
        NetworkConfig(0, 1, 1, 1)
    with pytest.raises(ValueError):
        NetworkConfig(1, 1, 1, 1, "relu")


def test_zero_network_outputs_zero():
    cfg = NetworkConfig(1, 2, 2, 5)
    g, th, xs, out = forward(cfg, np.zeros(cfg.n_params), [0.7])
    assert [o.value for o in out] == [0.0, 0.0]
    assert G.input_derivative(out[0], xs[0], 1).value == 0.0


def test_dimension_mismatch():
    cfg = NetworkConfig(2, 1, 1, 3)
    with pytest.raises(ValueError):
        forward(cfg, np.zeros(cfg.n_params), [0.1])
    with pytest.raises(ValueError):
        predict(cfg, np.zeros(cfg.n_params), np.zeros((4, 3)))


def test_output_layer_is_affine(rng):
    # with tiny hidden weights the network is close to W2 (W1 x + b1) + b2; exact check uses a graph
    cfg = NetworkConfig(1, 1, 1, 3, "tanh")
    theta = rng.normal(size=cfg.n_params)
    (W1, b1), (W2, b2) = unflatten(cfg, theta)
    x = 0.37
    expected = W2 @ np.tanh(W1[:, 0] * x + b1) + b2
    _, _, _, out = forward(cfg, theta, [x])
    assert out[0].value == pytest.approx(expected[0], rel=1e-14)
    assert predict(cfg, theta, np.array([[x]]))[0, 0] == pytest.approx(expected[0], rel=1e-14)


def test_first_derivative_matches_fd(rng):
    cfg = NetworkConfig(1, 1, 1, 8, "tanh")
    theta = rng.normal(size=cfg.n_params)
    for x in rng.uniform(-1, 1, 5):
        _, _, xs, out = forward(cfg, theta, [x])
        d = G.input_derivative(out[0], xs[0], 1).value
        h = 1e-5
        fd = (predict(cfg, theta, [[x + h]]) - predict(cfg, theta, [[x - h]]))[0, 0] / (2 * h)
        assert abs(d - fd) <= 1e-6 * max(1.0, abs(fd))


@pytest.mark.parametrize("act", ["tanh", "sigmoid"])
def test_jets_match_scalar_graph(act, rng):
    cfg = NetworkConfig(2, 2, 2, 5, act)
    theta = rng.normal(size=cfg.n_params)
    X = rng.uniform(-1, 1, (4, 2))
    jets = forward_jets(cfg, theta, X, (0, 1), (0, 1))
    for n, x in enumerate(X):
        _, _, xs, out = forward(cfg, theta, list(x))
        for i in range(2):
            assert jets.out(i)[n] == pytest.approx(out[i].value, rel=1e-12, abs=1e-14)
            for k in range(2):
                assert jets.d(i, k)[n] == pytest.approx(G.input_derivative(out[i], xs[k], 1).value,
                                                        rel=1e-10, abs=1e-12)
                assert jets.dd(i, k)[n] == pytest.approx(G.input_derivative(out[i], xs[k], 2).value,
                                                         rel=1e-10, abs=1e-12)


def test_tape_parameter_gradient_matches_graph(rng):
    cfg = NetworkConfig(1, 1, 2, 4, "tanh")
    theta = rng.normal(size=cfg.n_params)
    xs = rng.uniform(0, 1, 3)
    leaves = param_leaves(cfg, theta)
    j = forward_jets(cfg, leaves, xs[:, None], (0,), (0,))
    loss = (j.dd(0, 0) * j.dd(0, 0)).sum() + j.d(0, 0).sum()
    grads = backward(loss, [t for pair in leaves for t in pair])
    tape_grad = flatten(list(zip(grads[::2], grads[1::2])))

    g = G.Graph()
    th = [g.leaf(v) for v in theta]
    total = None
    for x in xs:
        _, _, xv, out = forward(cfg, th, [float(x)], g)
        uxx = G.input_derivative(out[0], xv[0], 2)
        term = uxx * uxx + G.input_derivative(out[0], xv[0], 1)
        total = term if total is None else total + term
    graph_grad = np.array(g.grad(total, th))
    np.testing.assert_allclose(tape_grad, graph_grad, rtol=1e-10, atol=1e-12)


def test_second_requires_first():
    cfg = NetworkConfig(1, 1, 1, 2)
    with pytest.raises(ValueError):
        forward_jets(cfg, np.zeros(cfg.n_params), np.zeros((2, 1)), (), (0,))
