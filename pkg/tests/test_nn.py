import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from ris_icas.nn import (
    QNetwork,
    backward,
    copy_parameters,
    forward,
    forward_sequence,
    grad_norm,
    load_parameters,
    save_parameters,
    sgd_update,
    sigmoid,
)


def make_net(recurrent=True, seed=0, in_dim=5, n_actions=3, hidden=4):
    return QNetwork(in_dim, n_actions, hidden, recurrent, rng=np.random.default_rng(seed))


def random_batch(net, rng, B=2, T=5):
    X = rng.standard_normal((B, T, net.in_dim))
    Y = rng.standard_normal((B, T, net.n_actions))
    mask = np.zeros((B, T, net.n_actions))
    mask[np.arange(B)[:, None], np.arange(T)[None, :], rng.integers(0, net.n_actions, (B, T))] = 1.0
    return X, Y, mask


def test_sigmoid_values():
    assert sigmoid(0.0) == 0.5
    np.testing.assert_allclose(sigmoid(np.array([-50.0, 50.0])), [0.0, 1.0], atol=1e-20)


def test_constructor_rejects_bad_sizes():
    with pytest.raises(ValueError):
        QNetwork(0, 2)


def test_parameter_shapes_and_forget_bias():
    net = make_net(hidden=4)
    assert net.params["W_in"].shape == (5, 4)
    assert net.params["W_x"].shape == (4, 16) and net.params["W_h"].shape == (4, 16)
    np.testing.assert_array_equal(net.params["b_lstm"][4:8], 1.0)
    dense = make_net(recurrent=False)
    assert "W_mid" in dense.params and "W_h" not in dense.params


# ---------------------------------------------------------------- forward

def test_zero_weights_give_zero_q():
    net = make_net()
    for k in net.params:
        net.params[k][:] = 0.0
    np.testing.assert_array_equal(net(np.ones(5)), np.zeros(3))


def test_zero_lstm_reproduces_output_bias():
    net = make_net()
    for k in ("W_x", "W_h", "b_lstm"):
        net.params[k][:] = 0.0
    # gates are all 0.5 and the candidate is 0, so the cell stays at 0
    np.testing.assert_array_equal(net(np.ones(5)), net.params["b_out"])


def test_forward_deterministic_and_state_handling():
    net = make_net()
    x = np.linspace(-1, 1, 5)
    q1, s1 = forward(net, x, carry_state=False)
    q2, _ = forward(net, x, carry_state=False)
    np.testing.assert_array_equal(q1, q2)
    np.testing.assert_array_equal(net.h, 0.0)
    forward(net, x, carry_state=True)
    np.testing.assert_array_equal(net.h, s1[0])
    q3, _ = forward(net, x, carry_state=False)
    assert not np.array_equal(q3, q1)
    net.reset_state()
    np.testing.assert_array_equal(forward(net, x)[0], q1)


def test_forward_step_matches_sequence():
    net = make_net()
    X = np.random.default_rng(1).standard_normal((6, 5))
    Q, (h, _), _ = forward_sequence(net, X[None])
    steps = [net(x) for x in X]
    np.testing.assert_allclose(np.array(steps), Q[0], atol=1e-14)
    np.testing.assert_allclose(net.h, h[0], atol=1e-14)


@pytest.mark.parametrize("x", [np.ones(4), np.array([1, 2, 3, 4, np.nan])])
def test_forward_errors(x):
    with pytest.raises(ValueError):
        make_net()(x)


def test_activation_ranges():
    net = make_net(hidden=8)
    _, _, cache = forward_sequence(net, 3 * np.random.default_rng(2).standard_normal((4, 10, 5)))
    assert np.all(cache["z_in"] >= 0)
    g = cache["gates"][..., :24]
    assert np.all((g > 0) & (g < 1))
    assert np.all(np.abs(cache["hs"]) < 1)
    # |c_t| <= t since each step adds at most one in magnitude
    assert np.all(np.abs(cache["cs"]) <= np.arange(11)[None, :, None])


# ---------------------------------------------------------------- backward

def finite_difference(net, X, Y, mask, eps=1e-5):
    out = {}
    for name, p in net.params.items():
        g = np.zeros_like(p)
        for idx in np.ndindex(p.shape):
            old = p[idx]
            p[idx] = old + eps
            up = backward(net, X, Y, mask)[0]
            p[idx] = old - eps
            down = backward(net, X, Y, mask)[0]
            p[idx] = old
            g[idx] = (up - down) / (2 * eps)
        out[name] = g
    return out


@pytest.mark.parametrize("recurrent", [True, False])
def test_gradients_match_finite_differences(recurrent):
    rng = np.random.default_rng(3)
    net = make_net(recurrent, seed=4)
    X, Y, mask = random_batch(net, rng, B=2, T=5)
    _, grads = backward(net, X, Y, mask)
    numeric = finite_difference(net, X, Y, mask)
    for name in net.params:
        a, b = grads[name], numeric[name]
        err = np.max(np.abs(a - b)) / max(np.max(np.abs(b)), 1e-8)
        assert err < 1e-4, name


def test_gradient_check_with_initial_state():
    rng = np.random.default_rng(5)
    net = make_net(seed=6)
    X, Y, mask = random_batch(net, rng, B=1, T=5)
    state = (rng.standard_normal(4), rng.standard_normal(4))
    _, grads = backward(net, X, Y, mask, state)
    eps = 1e-5
    p = net.params["W_h"]
    for idx in [(0, 0), (2, 7), (3, 15)]:
        old = p[idx]
        p[idx] = old + eps
        up = backward(net, X, Y, mask, state)[0]
        p[idx] = old - eps
        down = backward(net, X, Y, mask, state)[0]
        p[idx] = old
        assert grads["W_h"][idx] == pytest.approx((up - down) / (2 * eps), rel=1e-4, abs=1e-10)


def test_zero_error_gives_zero_loss_and_grads():
    net = make_net()
    X = np.random.default_rng(7).standard_normal((3, 5))
    Q = forward_sequence(net, X[None])[0][0]
    loss, grads = backward(net, X, Q, np.ones_like(Q))
    assert loss == 0.0
    assert grad_norm(grads) == 0.0


def test_output_layer_gradient_is_linear_regression():
    net = make_net(seed=8)
    x = np.random.default_rng(9).standard_normal(5)
    Q, _, cache = forward_sequence(net, x[None, None])
    feat = cache["feat"][0, 0]
    y = Q[0, 0].copy()
    y[1] += 0.7
    mask = np.zeros((1, 3))
    mask[0, 1] = 1.0
    loss, grads = backward(net, x[None], y[None], mask)
    assert loss == pytest.approx(0.49)
    expected = np.zeros((4, 3))
    expected[:, 1] = 2 * (-0.7) * feat
    np.testing.assert_allclose(grads["W_out"], expected, atol=1e-14)
    np.testing.assert_allclose(grads["b_out"], [0, -1.4, 0], atol=1e-14)


def test_backward_errors():
    net = make_net()
    with pytest.raises(ValueError):
        backward(net, np.zeros((0, 5)), np.zeros((0, 3)), np.zeros((0, 3)))
    with pytest.raises(ValueError):
        backward(net, np.zeros((2, 5)), np.zeros((2, 3)), np.zeros((2, 3)))
    with pytest.raises(ValueError):
        backward(net, np.zeros((2, 5)), np.zeros((2, 2)), np.ones((2, 2)))


# ---------------------------------------------------------------- SGD

def test_sgd_examples():
    net = make_net()
    before = {k: v.copy() for k, v in net.params.items()}
    sgd_update(net, net.zero_grads(), 0.1)
    for k in before:
        np.testing.assert_array_equal(net.params[k], before[k])
    net.params["b_out"][0] = 1.0
    grads = net.zero_grads()
    grads["b_out"][0] = 1.0
    sgd_update(net, grads, 0.1)
    assert net.params["b_out"][0] == pytest.approx(0.9)
    with pytest.raises(ValueError):
        sgd_update(net, grads, -0.1)


def test_sgd_step_splitting_is_linear():
    a, b = make_net(seed=10), make_net(seed=10)
    grads = {k: np.random.default_rng(11).standard_normal(v.shape) for k, v in a.params.items()}
    sgd_update(a, grads, 0.2)
    sgd_update(sgd_update(b, grads, 0.1), grads, 0.1)
    for k in a.params:
        np.testing.assert_allclose(a.params[k], b.params[k], atol=1e-15)


@pytest.mark.parametrize("recurrent", [True, False])
def test_loss_decreases_on_fixed_batch(recurrent):
    rng = np.random.default_rng(12)
    net = make_net(recurrent, seed=13, hidden=16)
    X, Y, mask = random_batch(net, rng, B=4, T=8)
    losses = []
    for _ in range(100):
        loss, grads = backward(net, X, Y, mask)
        losses.append(loss)
        sgd_update(net, grads, 1e-3)
    diffs = np.diff(losses)
    assert np.all(diffs <= 0.01 * np.array(losses[:-1]))
    assert losses[-1] < losses[0]


# ---------------------------------------------------------------- copies and checkpoints

def test_copy_parameters_semantics():
    src, dst = make_net(seed=14), make_net(seed=15)
    dst.h[:] = 3.0
    copy_parameters(src, dst)
    for k in src.params:
        np.testing.assert_array_equal(src.params[k], dst.params[k])
        assert src.params[k] is not dst.params[k]
    np.testing.assert_array_equal(dst.h, 0.0)
    x = np.ones(5)
    np.testing.assert_array_equal(forward(src, x, False)[0], forward(dst, x, False)[0])
    snapshot = {k: v.copy() for k, v in dst.params.items()}
    copy_parameters(src, dst)
    for k in snapshot:
        np.testing.assert_array_equal(dst.params[k], snapshot[k])
    sgd_update(src, {k: np.ones_like(v) for k, v in src.params.items()}, 0.5)
    for k in snapshot:
        np.testing.assert_array_equal(dst.params[k], snapshot[k])


def test_copy_parameters_rejects_mismatch():
    with pytest.raises(ValueError):
        copy_parameters(make_net(), make_net(recurrent=False))
    with pytest.raises(ValueError):
        copy_parameters(make_net(hidden=4), make_net(hidden=5))


def test_network_copy_is_deep():
    net = make_net()
    clone = net.copy()
    net.params["W_in"][0, 0] += 1.0
    assert clone.params["W_in"][0, 0] != net.params["W_in"][0, 0]


@pytest.mark.parametrize("recurrent", [True, False])
def test_save_load_bit_exact(tmp_path, recurrent):
    net = make_net(recurrent, seed=16)
    path = save_parameters(net, tmp_path / "net.npz")
    back = load_parameters(path)
    assert (back.in_dim, back.n_actions, back.hidden, back.recurrent) == (5, 3, 4, recurrent)
    for k in net.params:
        assert back.params[k].tobytes() == net.params[k].tobytes()


def test_load_rejects_unknown_version(tmp_path):
    path = tmp_path / "bad.npz"
    np.savez(path, __header__=np.array([99, 1, 1, 1, 1]))
    with pytest.raises(ValueError):
        load_parameters(path)


@settings(max_examples=25, deadline=None)
@given(st.integers(1, 6), st.integers(1, 5), st.integers(1, 6), st.booleans(), st.integers(0, 2**31 - 1))
def test_forward_is_pure_function_of_params_input_state(in_dim, n_actions, hidden, recurrent, seed):
    rng = np.random.default_rng(seed)
    net = QNetwork(in_dim, n_actions, hidden, recurrent, rng=rng)
    X = rng.standard_normal((2, 3, in_dim))
    state = (rng.standard_normal(hidden), rng.standard_normal(hidden))
    a = forward_sequence(net, X, state)[0]
    b = forward_sequence(net.copy(), X, state)[0]
    np.testing.assert_array_equal(a, b)
    assert np.all(np.isfinite(a))
