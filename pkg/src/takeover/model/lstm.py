"""LSTM cell with hand-written backpropagation through time.

Gate layout along the last axis of the pre-activation is ``[i, f, o, g]``::

    i, f, o = sigmoid(.)    g = tanh(.)
    c' = f * c + i * g
    h' = o * tanh(c')
"""

from __future__ import annotations

import numpy as np
from numba import njit


class NumericError(FloatingPointError):
    pass


def sigmoid(x):
    # tanh form never overflows
    return 0.5 * np.tanh(0.5 * x) + 0.5


def lstm_cell_step(x, h, c, params):
    """One step for a single cell. ``params`` holds ``Wx``, ``Wh`` and ``b``."""
    x, h, c = (np.asarray(a, dtype=float) for a in (x, h, c))
    if not (np.all(np.isfinite(x)) and np.all(np.isfinite(h)) and np.all(np.isfinite(c))):
        raise NumericError("non-finite input to LSTM cell")
    Wx, Wh, b = params["Wx"], params["Wh"], params["b"]
    H = Wh.shape[0]
    if x.shape[-1] != Wx.shape[0] or h.shape[-1] != H or c.shape[-1] != H:
        raise ValueError("LSTM input/state shapes do not match parameters")
    a = x @ Wx + h @ Wh + b
    i = sigmoid(a[..., :H])
    f = sigmoid(a[..., H : 2 * H])
    o = sigmoid(a[..., 2 * H : 3 * H])
    g = np.tanh(a[..., 3 * H :])
    c_new = f * c + i * g
    return o * np.tanh(c_new), c_new


@njit(cache=True)
def _cell_update(gt, c_prev, c_new):
    # on entry gt = tanh of the pre-activations (i, f, o pre-halved);
    # finish the sigmoids in place and write the new cell state
    C, N, H4 = gt.shape
    H = H4 // 4
    for a in range(C):
        for n in range(N):
            for j in range(H):
                i = 0.5 * gt[a, n, j] + 0.5
                f = 0.5 * gt[a, n, H + j] + 0.5
                gt[a, n, j] = i
                gt[a, n, H + j] = f
                gt[a, n, 2 * H + j] = 0.5 * gt[a, n, 2 * H + j] + 0.5
                c_new[a, n, j] = f * c_prev[a, n, j] + i * gt[a, n, 3 * H + j]


@njit(cache=True)
def _step_backward(gt, c_prev, tc, dh, dc, da):
    # dc is carried in place: in = dL/dc_t from step t+1, out = dL/dc_{t-1}
    C, N, H4 = gt.shape
    H = H4 // 4
    for a in range(C):
        for n in range(N):
            for j in range(H):
                i = gt[a, n, j]
                f = gt[a, n, H + j]
                o = gt[a, n, 2 * H + j]
                g = gt[a, n, 3 * H + j]
                t = tc[a, n, j]
                d_h = dh[a, n, j]
                d_c = dc[a, n, j] + d_h * o * (1.0 - t * t)
                da[a, n, j] = d_c * g * i * (1.0 - i)
                da[a, n, H + j] = d_c * c_prev[a, n, j] * f * (1.0 - f)
                da[a, n, 2 * H + j] = d_h * t * o * (1.0 - o)
                da[a, n, 3 * H + j] = d_c * i * (1.0 - g * g)
                dc[a, n, j] = d_c * f


def sequence_forward(U, Wx, Wh, b):
    """Run ``C`` cells over a shared time-major input from zero state.

    ``U`` is ``(T, N, D)``; ``Wx`` ``(C, D, 4H)``, ``Wh`` ``(C, H, 4H)`` and
    ``b`` ``(C, 4H)`` stack the cells, which all see the same input. Returns
    the final hidden states ``(C, N, H)`` and a cache for
    :func:`sequence_backward`.
    """
    T, N, D = U.shape
    C, H = Wh.shape[0], Wh.shape[1]
    H3 = 3 * H
    dt = np.result_type(U, Wh)
    # sigmoid(x) = (tanh(x / 2) + 1) / 2: pre-halve the i, f, o columns once
    scale = np.ones(4 * H, dtype=dt)
    scale[:H3] = 0.5
    Wx_s = (Wx * scale).transpose(1, 0, 2).reshape(D, C * 4 * H)
    Wh_s = Wh * scale
    U2 = U.reshape(T * N, D)
    P = (U2 @ Wx_s + (b * scale).reshape(-1)).reshape(T, N, C, 4 * H)
    P = np.ascontiguousarray(P.transpose(0, 2, 1, 3))  # (T, C, N, 4H)
    gates = P  # activated in place step by step
    cs = np.zeros((T + 1, C, N, H), dtype=dt)
    hs = np.zeros((T + 1, C, N, H), dtype=dt)
    tcs = np.empty((T, C, N, H), dtype=dt)
    rec = np.empty((C, N, 4 * H), dtype=dt)
    for t in range(T):
        gt = gates[t]
        np.matmul(hs[t], Wh_s, out=rec)
        gt += rec
        np.tanh(gt, out=gt)
        _cell_update(gt, cs[t], cs[t + 1])
        np.tanh(cs[t + 1], out=tcs[t])
        np.multiply(gt[..., 2 * H : H3], tcs[t], out=hs[t + 1])
    return hs[T], (U2, Wx, Wh, gates, cs, hs, tcs)


def sequence_backward(dh_last, cache):
    """Gradients of a loss that depends only on the final hidden states.

    ``dh_last`` is ``(C, N, H)``. Returns ``(dU, dWx, dWh, db)`` where
    ``dU`` is time-major ``(T, N, D)`` summed over cells.
    """
    U2, Wx, Wh, gates, cs, hs, tcs = cache
    T, C, N, H4 = gates.shape
    H = H4 // 4
    dA = np.empty((T, C, N, H4), dtype=gates.dtype)
    WhT = np.ascontiguousarray(Wh.transpose(0, 2, 1))
    dh = np.ascontiguousarray(dh_last, dtype=gates.dtype)
    dc = np.zeros((C, N, H), dtype=gates.dtype)
    for t in range(T - 1, -1, -1):
        _step_backward(gates[t], cs[t], tcs[t], dh, dc, dA[t])
        dh = np.matmul(dA[t], WhT)
    dWh = np.empty_like(Wh)
    for a in range(C):
        dWh[a] = hs[:T, a].reshape(T * N, H).T @ dA[:, a].reshape(T * N, H4)
    # (T, N, C*4H) view of dA for the shared-input gradients
    dA_n = np.ascontiguousarray(dA.transpose(0, 2, 1, 3)).reshape(T * N, C * H4)
    D = U2.shape[1]
    dWx = (U2.T @ dA_n).reshape(D, C, H4).transpose(1, 0, 2)
    db = dA_n.sum(axis=0).reshape(C, H4)
    dU = dA_n @ Wx.transpose(1, 0, 2).reshape(D, C * H4).T
    return dU.reshape(T, N, D), np.ascontiguousarray(dWx), dWh, db
