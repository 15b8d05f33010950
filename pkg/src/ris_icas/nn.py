"""Dense -> LSTM -> dense Q-network with backpropagation through time.

Shapes follow the batch-major convention ``(batch, time, features)``.
Setting ``recurrent=False`` swaps the LSTM cell for a dense ReLU layer of the
same width, which is the feed-forward DQN baseline.
"""
from __future__ import annotations

from pathlib import Path

import numpy as np

FORGET_BIAS = 1.0
_FORMAT_VERSION = 1


def sigmoid(x):
    return 0.5 * (1.0 + np.tanh(0.5 * x))


class QNetwork:
    """Q-value approximator with an optional LSTM core.

    Parameters live in ``self.params`` (name -> float64 array). The recurrent
    state ``(h, c)`` is only meaningful for the LSTM variant.
    """

    def __init__(self, in_dim: int, n_actions: int, hidden: int = 64,
                 recurrent: bool = True, rng: np.random.Generator | None = None):
        if min(in_dim, n_actions, hidden) < 1:
            raise ValueError("layer sizes must be positive")
        self.in_dim = in_dim
        self.n_actions = n_actions
        self.hidden = hidden
        self.recurrent = recurrent
        rng = np.random.default_rng() if rng is None else rng
        self.params = self._init_params(rng)
        self.reset_state()

    def _init_params(self, rng):
        H, D, A = self.hidden, self.in_dim, self.n_actions

        def unif(fan_in, shape):
            bound = 1.0 / np.sqrt(fan_in)
            return rng.uniform(-bound, bound, size=shape)

        p = {"W_in": unif(D, (D, H)), "b_in": unif(D, (H,))}
        if self.recurrent:
            p["W_x"] = unif(H, (H, 4 * H))
            p["W_h"] = unif(H, (H, 4 * H))
            b = unif(H, (4 * H,))
            b[H:2 * H] = FORGET_BIAS
            p["b_lstm"] = b
        else:
            p["W_mid"] = unif(H, (H, H))
            p["b_mid"] = unif(H, (H,))
        p["W_out"] = unif(H, (H, A))
        p["b_out"] = unif(H, (A,))
        return p

    def reset_state(self):
        self.h = np.zeros(self.hidden)
        self.c = np.zeros(self.hidden)

    @property
    def state(self):
        return self.h.copy(), self.c.copy()

    def zero_grads(self):
        return {k: np.zeros_like(v) for k, v in self.params.items()}

    def copy(self) -> "QNetwork":
        clone = object.__new__(QNetwork)
        clone.in_dim, clone.n_actions = self.in_dim, self.n_actions
        clone.hidden, clone.recurrent = self.hidden, self.recurrent
        clone.params = {k: v.copy() for k, v in self.params.items()}
        clone.reset_state()
        return clone

    def __call__(self, x, carry_state: bool = True):
        return forward(self, x, carry_state)[0]


def forward(net: QNetwork, x, carry_state: bool = True):
    """Single time step. Returns ``(q_values, (h, c))``.

    The new recurrent state is written back to ``net`` only if ``carry_state``.
    """
    x = np.asarray(x, dtype=float)
    if x.shape != (net.in_dim,):
        raise ValueError(f"expected input of shape ({net.in_dim},), got {x.shape}")
    if not np.all(np.isfinite(x)):
        raise ValueError("input contains non-finite values")
    q, (h, c), _ = forward_sequence(net, x[None, None, :], (net.h[None], net.c[None]))
    h, c = h[0], c[0]
    if carry_state:
        net.h, net.c = h, c
    return q[0, 0], (h, c)


def forward_sequence(net: QNetwork, X, state=None):
    """Run a batch of sequences ``X`` of shape (B, T, in_dim).

    Returns ``(Q, final_state, cache)`` with ``Q`` of shape (B, T, n_actions).
    ``state`` defaults to zeros, as in bootstrapped random updates.
    """
    X = np.asarray(X, dtype=float)
    B, T, D = X.shape
    if D != net.in_dim:
        raise ValueError(f"input width {D} != network in_dim {net.in_dim}")
    H = net.hidden
    p = net.params
    a_in = X @ p["W_in"] + p["b_in"]
    z_in = np.maximum(a_in, 0.0)
    cache = {"X": X, "a_in": a_in, "z_in": z_in}
    if net.recurrent:
        if state is None:
            h = np.zeros((B, H))
            c = np.zeros((B, H))
        else:
            h, c = (np.broadcast_to(s, (B, H)).copy() for s in state)
        x_part = z_in @ p["W_x"] + p["b_lstm"]
        hs = np.empty((B, T + 1, H))
        cs = np.empty((B, T + 1, H))
        gates = np.empty((B, T, 4 * H))
        hs[:, 0], cs[:, 0] = h, c
        W_h = p["W_h"]
        for t in range(T):
            pre = x_part[:, t] + h @ W_h
            g = np.empty_like(pre)
            g[:, :3 * H] = sigmoid(pre[:, :3 * H])
            g[:, 3 * H:] = np.tanh(pre[:, 3 * H:])
            i, f, o, cand = g[:, :H], g[:, H:2 * H], g[:, 2 * H:3 * H], g[:, 3 * H:]
            c = f * c + i * cand
            h = o * np.tanh(c)
            gates[:, t] = g
            hs[:, t + 1], cs[:, t + 1] = h, c
        feat = hs[:, 1:]
        cache.update(hs=hs, cs=cs, gates=gates)
        final = (h, c)
    else:
        a_mid = z_in @ p["W_mid"] + p["b_mid"]
        feat = np.maximum(a_mid, 0.0)
        cache["a_mid"] = a_mid
        final = (np.zeros((B, H)), np.zeros((B, H)))
    cache["feat"] = feat
    Q = feat @ p["W_out"] + p["b_out"]
    return Q, final, cache


def _outer_sum(a, b):
    # sum over batch and time of a[..., :, None] * b[..., None, :]
    return a.reshape(-1, a.shape[-1]).T @ b.reshape(-1, b.shape[-1])


def backward(net: QNetwork, X, targets, mask, state=None):
    """Masked mean-squared TD loss and its exact gradients.

    ``targets`` and ``mask`` have the shape of the Q output (B, T, A) or, for a
    single sequence, (T, A) with ``X`` of shape (T, in_dim). The loss is the
    mean of ``(Y - Q)^2`` over entries where ``mask`` is nonzero.
    """
    X = np.asarray(X, dtype=float)
    squeeze = X.ndim == 2
    if squeeze:
        X = X[None]
        targets = np.asarray(targets, dtype=float)[None]
        mask = np.asarray(mask, dtype=float)[None]
    targets = np.asarray(targets, dtype=float)
    mask = np.asarray(mask, dtype=float)
    B, T, _ = X.shape
    if T == 0:
        raise ValueError("empty sequence")
    Q, _, cache = forward_sequence(net, X, state)
    if targets.shape != Q.shape or mask.shape != Q.shape:
        raise ValueError("targets and mask must match the Q output shape")
    count = mask.sum()
    if count == 0:
        raise ValueError("mask selects no entries")
    err = (Q - targets) * mask
    loss = float(np.sum(err**2) / count)
    dQ = 2.0 * err / count

    p = net.params
    H = net.hidden
    grads = {}
    feat = cache["feat"]
    grads["W_out"] = _outer_sum(feat, dQ)
    grads["b_out"] = dQ.sum(axis=(0, 1))
    dfeat = dQ @ p["W_out"].T
    z_in = cache["z_in"]

    if net.recurrent:
        hs, cs, gates = cache["hs"], cache["cs"], cache["gates"]
        W_h = p["W_h"]
        dpre_all = np.empty((B, T, 4 * H))
        dh_next = np.zeros((B, H))
        dc_next = np.zeros((B, H))
        for t in range(T - 1, -1, -1):
            g = gates[:, t]
            i, f, o, cand = g[:, :H], g[:, H:2 * H], g[:, 2 * H:3 * H], g[:, 3 * H:]
            c = cs[:, t + 1]
            tc = np.tanh(c)
            dh = dfeat[:, t] + dh_next
            dc = dh * o * (1.0 - tc**2) + dc_next
            dpre = dpre_all[:, t]
            dpre[:, :H] = dc * cand * i * (1.0 - i)
            dpre[:, H:2 * H] = dc * cs[:, t] * f * (1.0 - f)
            dpre[:, 2 * H:3 * H] = dh * tc * o * (1.0 - o)
            dpre[:, 3 * H:] = dc * i * (1.0 - cand**2)
            dc_next = dc * f
            dh_next = dpre @ W_h.T
        grads["W_x"] = _outer_sum(z_in, dpre_all)
        grads["W_h"] = _outer_sum(hs[:, :-1], dpre_all)
        grads["b_lstm"] = dpre_all.sum(axis=(0, 1))
        dz_in = dpre_all @ p["W_x"].T
    else:
        da_mid = dfeat * (cache["a_mid"] > 0)
        grads["W_mid"] = _outer_sum(z_in, da_mid)
        grads["b_mid"] = da_mid.sum(axis=(0, 1))
        dz_in = da_mid @ p["W_mid"].T

    da_in = dz_in * (cache["a_in"] > 0)
    grads["W_in"] = _outer_sum(cache["X"], da_in)
    grads["b_in"] = da_in.sum(axis=(0, 1))
    return loss, grads


def sgd_update(net: QNetwork, grads: dict, learning_rate: float) -> QNetwork:
    """Plain gradient-descent step, in place; returns ``net``."""
    if learning_rate < 0:
        raise ValueError("learning_rate must be nonnegative")
    for name, g in grads.items():
        if g.shape != net.params[name].shape:
            raise ValueError(f"gradient shape mismatch for {name}")
        net.params[name] -= learning_rate * g
    return net


def grad_norm(grads: dict) -> float:
    return float(np.sqrt(sum(np.sum(g * g) for g in grads.values())))


def copy_parameters(src: QNetwork, dst: QNetwork) -> QNetwork:
    """Overwrite ``dst`` parameters with copies of ``src`` and zero its state."""
    if src.params.keys() != dst.params.keys():
        raise ValueError("networks have different parameter sets")
    for name, value in src.params.items():
        if dst.params[name].shape != value.shape:
            raise ValueError(f"shape mismatch for {name}")
        dst.params[name] = value.copy()
    dst.reset_state()
    return dst


def save_parameters(net: QNetwork, path) -> Path:
    """Write an ``.npz`` archive: one named array per tensor plus a header.

    The header array holds ``[format_version, in_dim, n_actions, hidden,
    recurrent]``; shapes are stored by the npy format itself, so loading is
    bit-exact.
    """
    path = Path(path)
    header = np.array([_FORMAT_VERSION, net.in_dim, net.n_actions, net.hidden,
                       int(net.recurrent)], dtype=np.int64)
    with path.open("wb") as fh:
        np.savez(fh, __header__=header, **net.params)
    return path


def load_parameters(path) -> QNetwork:
    with np.load(Path(path)) as data:
        version, in_dim, n_actions, hidden, recurrent = (int(v) for v in data["__header__"])
        if version != _FORMAT_VERSION:
            raise ValueError(f"unsupported checkpoint version {version}")
        net = QNetwork(in_dim, n_actions, hidden, bool(recurrent),
                       rng=np.random.default_rng(0))
        for name in net.params:
            arr = data[name]
            if arr.shape != net.params[name].shape:
                raise ValueError(f"shape mismatch for {name}")
            net.params[name] = arr.astype(np.float64, copy=True)
    return net
