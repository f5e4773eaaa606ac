from __future__ import annotations

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from tdwfpinn.neuralfield import (
    DEFAULT_WIDTHS,
    AdamState,
    NetworkParams,
    NonFiniteLossError,
    adam_step,
    eval_with_input_derivs,
    forward_jet,
    init_network,
    load_checkpoint,
    loss_gradient,
    param_count,
    save_checkpoint,
)

widths_st = st.lists(st.integers(1, 12), min_size=1, max_size=3).map(lambda h: (2, *h, 1))


def random_net(widths, seed):
    rng = np.random.default_rng(seed)
    return NetworkParams(widths, 0.8 * rng.standard_normal(param_count(widths)))


def u_at(net, t, x):
    return eval_with_input_derivs(net, np.array([[t, x]]))["u"][0]


# {{{ construction


def test_default_param_count():
    assert param_count(DEFAULT_WIDTHS) == 2601
    assert init_network(DEFAULT_WIDTHS).params.size == 2601


def test_init_determinism():
    a, b, c = init_network(DEFAULT_WIDTHS, 4), init_network(DEFAULT_WIDTHS, 4), init_network(DEFAULT_WIDTHS, 5)
    np.testing.assert_array_equal(a.params, b.params)
    assert not np.array_equal(a.params, c.params)


def test_init_biases_zero_and_glorot_range():
    net = init_network((2, 20, 1), 0)
    w1, b1 = net.params[:40], net.params[40:60]
    assert np.all(b1 == 0.0)
    assert np.max(np.abs(w1)) <= math.sqrt(6.0 / 22.0)


@pytest.mark.parametrize(
    "kwargs",
    [
        {"layer_widths": (3, 4, 1), "params": np.zeros(21)},
        {"layer_widths": (2, 4, 2), "params": np.zeros(22)},
        {"layer_widths": (2, 4, 1), "params": np.zeros(5)},
        {"layer_widths": (2, 4, 1), "params": np.zeros(17), "activation": "relu"},
    ],
)
def test_network_validation(kwargs):
    with pytest.raises(ValueError):
        NetworkParams(**kwargs)


# }}}


# {{{ input derivatives


def test_constant_network():
    net = NetworkParams((2, 3, 1), np.zeros(param_count((2, 3, 1))))
    net.params[-1] = 0.7
    out = eval_with_input_derivs(net, np.random.default_rng(0).random((5, 2)))
    np.testing.assert_array_equal(out["u"], np.full(5, 0.7))
    for ch in ("u_t", "u_x", "u_xx"):
        np.testing.assert_array_equal(out[ch], np.zeros(5))


def test_single_unit_closed_form():
    # u = tanh(t + x)
    net = NetworkParams((2, 1, 1), np.array([1.0, 1.0, 0.0, 1.0, 0.0]))
    pts = np.random.default_rng(1).uniform(-1, 1, (7, 2))
    out = eval_with_input_derivs(net, pts)
    u = np.tanh(pts.sum(axis=1))
    np.testing.assert_allclose(out["u"], u, rtol=1e-15)
    np.testing.assert_allclose(out["u_t"], 1 - u**2, rtol=1e-14)
    np.testing.assert_allclose(out["u_x"], 1 - u**2, rtol=1e-14)
    np.testing.assert_allclose(out["u_xx"], -2 * u * (1 - u**2), rtol=1e-13, atol=1e-16)


def test_affine_network_shapes():
    net = init_network((2, 1), 3)
    out = eval_with_input_derivs(net, np.ones((4, 2)))
    assert all(v.shape == (4,) for v in out.values())
    np.testing.assert_array_equal(out["u_xx"], np.zeros(4))


@settings(max_examples=100, deadline=None)
@given(widths_st, st.integers(0, 10**6), st.floats(-1, 1), st.floats(-1, 1))
def test_input_derivatives_vs_finite_differences(widths, seed, t, x):
    net = random_net(widths, seed)
    d = eval_with_input_derivs(net, np.array([[t, x]]))
    h = 1e-5
    fd_t = (u_at(net, t + h, x) - u_at(net, t - h, x)) / (2 * h)
    fd_x = (u_at(net, t, x + h) - u_at(net, t, x - h)) / (2 * h)
    h2 = 1e-4
    fd_xx = (u_at(net, t, x + h2) - 2 * u_at(net, t, x) + u_at(net, t, x - h2)) / h2**2
    assert abs(fd_t - d["u_t"][0]) <= 1e-5 * max(1.0, abs(d["u_t"][0]))
    assert abs(fd_x - d["u_x"][0]) <= 1e-5 * max(1.0, abs(d["u_x"][0]))
    assert abs(fd_xx - d["u_xx"][0]) <= 1e-5 * max(1.0, abs(d["u_xx"][0]))


def test_fd_small_step_u_x():
    net = random_net((2, 6, 6, 1), 2)
    pts = np.random.default_rng(0).uniform(-1, 1, (20, 2))
    d = eval_with_input_derivs(net, pts)
    h = 1e-4
    up = eval_with_input_derivs(net, pts + [0, h])["u"]
    um = eval_with_input_derivs(net, pts - [0, h])["u"]
    np.testing.assert_allclose((up - um) / (2 * h), d["u_x"], rtol=1e-6, atol=1e-9)


def test_batch_invariance():
    net = init_network((2, 30, 30, 1), 1)
    pts = np.random.default_rng(0).random((50, 2))
    batch = eval_with_input_derivs(net, pts)
    for i in range(len(pts)):
        single = eval_with_input_derivs(net, pts[i:i + 1])
        for ch in batch:
            assert abs(single[ch][0] - batch[ch][i]) <= 1e-14 * max(1.0, abs(batch[ch][i]))


@settings(max_examples=30, deadline=None)
@given(widths_st, st.integers(0, 10**6))
def test_zero_bias_network_is_odd(widths, seed):
    net = random_net(widths, seed)
    off = 0
    for a, b in zip(widths[:-1], widths[1:]):
        off += a * b
        net.params[off:off + b] = 0.0
        off += b
    pts = np.random.default_rng(seed).uniform(-1, 1, (6, 2))
    np.testing.assert_allclose(
        eval_with_input_derivs(net, -pts)["u"], -eval_with_input_derivs(net, pts)["u"], rtol=1e-14, atol=1e-15
    )


def test_unknown_channel_and_bad_points():
    net = init_network((2, 3, 1))
    with pytest.raises(ValueError):
        forward_jet(net.params, net.layer_widths, np.ones((2, 2)), ("u_tt",))
    with pytest.raises(ValueError):
        forward_jet(net.params, net.layer_widths, np.ones((2, 3)))


# }}}


# {{{ parameter gradients


def test_output_bias_gradient():
    widths = (2, 4, 1)
    net = NetworkParams(widths, np.zeros(param_count(widths)))
    net.params[-1] = 1.3
    pt = np.array([[0.2, 0.4]])

    def loss(theta):
        u = forward_jet(theta, widths, pt, ("u",)).u
        return (u * u).sum()

    value, grad = loss_gradient(net, loss)
    assert value == pytest.approx(1.3**2)
    expected = np.zeros_like(grad)
    expected[-1] = 2.6
    np.testing.assert_allclose(grad, expected, atol=1e-15)


def test_linear_loss_gradient_is_constant():
    c = np.random.default_rng(0).standard_normal(param_count((2, 3, 1)))
    for seed in range(3):
        _, g = loss_gradient(init_network((2, 3, 1), seed), lambda th: (th * c).sum())
        np.testing.assert_array_equal(g, c)


@settings(max_examples=100, deadline=None)
@given(widths_st, st.integers(0, 10**6))
def test_gradient_of_derivative_loss(widths, seed):
    net = random_net(widths, seed)
    rng = np.random.default_rng(seed)
    pts = rng.uniform(-1, 1, (5, 2))

    def loss(theta):
        j = forward_jet(theta, widths, pts)
        r = j.u_t - 0.3 * j.u_xx + j.u * j.u_x
        return (r * r).mean()

    _, grad = loss_gradient(net, loss)
    d = rng.standard_normal(net.params.size)
    h = 1e-5

    def at(p):
        return float(loss(p))

    fd = (at(net.params + h * d) - at(net.params - h * d)) / (2 * h)
    assert abs(fd - grad @ d) <= 1e-5 * max(1.0, abs(fd))


def test_nonfinite_loss():
    net = init_network((2, 3, 1))
    with pytest.raises(NonFiniteLossError):
        loss_gradient(net, lambda th: th.sum() * np.inf)


# }}}


# {{{ Adam


def test_adam_first_step():
    g = np.array([0.3, -2.0, 1e-3])
    state = AdamState.zeros(3)
    new = adam_step(np.zeros(3), state, g, lr=1e-3)
    np.testing.assert_allclose(new, -1e-3 * g / (np.abs(g) + state.eps), rtol=1e-12)
    np.testing.assert_allclose(new, -1e-3 * np.sign(g), rtol=1e-4)


def test_adam_zero_gradient():
    state = AdamState.zeros(2)
    p = adam_step(np.ones(2), state, np.array([1.0, 1.0]), 0.1)
    m_before, v_before = state.m.copy(), state.v.copy()
    p2 = adam_step(np.ones(2), state, np.zeros(2), 0.1)
    np.testing.assert_allclose(state.m, 0.9 * m_before)
    np.testing.assert_allclose(state.v, 0.999 * v_before)
    assert p.shape == p2.shape
    fresh = AdamState.zeros(2)
    np.testing.assert_array_equal(adam_step(np.ones(2), fresh, np.zeros(2), 0.1), np.ones(2))


def test_adam_monotone_under_constant_gradient():
    state = AdamState.zeros(2)
    g = np.array([0.5, -0.5])
    p0 = np.zeros(2)
    p1 = adam_step(p0, state, g, 0.01)
    p2 = adam_step(p1, state, g, 0.01)
    assert np.all(np.sign(p1 - p0) == -np.sign(g))
    assert np.all(np.sign(p2 - p1) == -np.sign(g))


# }}}


# {{{ checkpoints


def test_checkpoint_round_trip(tmp_path):
    net = random_net((2, 5, 5, 1), 3)
    net.params[0] = 1.0 / 3.0
    path = tmp_path / "ck.txt"
    save_checkpoint(path, net, iteration=7)
    back, it = load_checkpoint(path)
    assert it == 7
    assert back.layer_widths == net.layer_widths
    np.testing.assert_array_equal(back.params, net.params)
    assert path.read_text().startswith("# tdwfpinn checkpoint v1\n")


def test_checkpoint_rejects_other_files(tmp_path):
    path = tmp_path / "x.txt"
    path.write_text("hello\n")
    with pytest.raises(ValueError):
        load_checkpoint(path)


# }}}
