"""Batched LSTM recurrences with hand-written backpropagation through time.

Several independent LSTM "streams" (e.g. the forward and backward halves of
four BiLSTMs) are run side by side over the same padded batch.  A stream
either reads the sequence left to right (direction 0) or right to left
(direction 1); right-to-left streams see each sequence reversed within its
own length, so padding always trails the valid steps and never leaks into
them.  Gate layout inside the 4*hidden pre-activation is (input, forget,
output, candidate).
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

CLIP = 30.0


def sigmoid(x):
    return 1.0 / (1.0 + np.exp(-np.clip(x, -CLIP, CLIP)))


def reverse_index(lengths: np.ndarray, T: int) -> np.ndarray:
    """(B, T) gather index reversing each sequence inside its valid length."""
    t = np.arange(T)[None, :]
    L = np.asarray(lengths)[:, None]
    return np.where(t < L, L - 1 - t, t)


@dataclass
class LstmParams:
    """One direction of one LSTM: input weights, recurrent weights, bias."""

    W: np.ndarray  # (input_dim, 4H)
    U: np.ndarray  # (H, 4H)
    b: np.ndarray  # (4H,)

    @property
    def input_dim(self) -> int:
        return self.W.shape[0]

    @property
    def hidden_dim(self) -> int:
        return self.U.shape[0]

    @classmethod
    def init(cls, input_dim: int, hidden_dim: int, rng) -> "LstmParams":
        s = 1.0 / np.sqrt(hidden_dim)
        G = 4 * hidden_dim
        W = rng.uniform_array((input_dim, G), -s, s)
        U = rng.uniform_array((hidden_dim, G), -s, s)
        b = rng.uniform_array((G,), -s, s)
        b[hidden_dim:2 * hidden_dim] = 1.0
        return cls(W, U, b)

    @classmethod
    def zeros(cls, input_dim: int, hidden_dim: int) -> "LstmParams":
        G = 4 * hidden_dim
        return cls(np.zeros((input_dim, G)), np.zeros((hidden_dim, G)), np.zeros(G))


@dataclass
class StreamCache:
    dirs: np.ndarray
    order: np.ndarray  # batch rows sorted by decreasing length
    inv: np.ndarray
    counts: np.ndarray  # counts[t] = rows still running at step t (a prefix of ``order``)
    bidx: np.ndarray
    ridx: np.ndarray
    Xs: np.ndarray
    W: np.ndarray
    U: np.ndarray
    i: np.ndarray
    f: np.ndarray
    o: np.ndarray
    g: np.ndarray
    c: np.ndarray
    tc: np.ndarray
    h: np.ndarray


def _clip(x):
    return np.minimum(np.maximum(x, -CLIP), CLIP)


def streams_forward(X, lengths, W, U, b, dirs):
    """Run S streams over X (B, T, D).

    W (S, D, 4H), U (S, H, 4H), b (S, 4H), dirs (S,) of 0/1.
    Returns hidden states (S, B, T, H) in natural time order and a cache.
    Outputs at padded positions are zero.
    """
    B, T, D = X.shape
    S, _, G = W.shape
    H = G // 4
    if W.shape[1] != D:
        raise ValueError(f"input dim {D} does not match LSTM input dim {W.shape[1]}")
    dirs = np.asarray(dirs)
    lengths = np.asarray(lengths)
    # Rows are processed longest first, so the rows still running at step t
    # are a leading slice and the recurrence works on views.
    order = np.argsort(-lengths, kind="stable")
    inv = np.argsort(order, kind="stable")
    Ls = lengths[order]
    counts = (Ls[None, :] > np.arange(T)[:, None]).sum(axis=1)
    bidx = np.arange(B)[:, None]
    ridx = reverse_index(Ls, T)
    Xo = X[order]
    Xd = np.stack([Xo, Xo[bidx, ridx]])
    Xs = Xd[dirs]
    Z = np.matmul(Xs, W[:, None]) + b[:, None, None, :]

    shape = (S, B, T, H)
    dt = Z.dtype
    i_s, f_s, o_s, g_s = (np.zeros(shape, dtype=dt) for _ in range(4))
    c_s, tc_s, h_s = (np.zeros(shape, dtype=dt) for _ in range(3))
    h = np.zeros((S, B, H), dtype=dt)
    c = np.zeros((S, B, H), dtype=dt)
    for t in range(T):
        nb = counts[t]
        if nb == 0:
            break
        z = Z[:, :nb, t] + np.matmul(h[:, :nb], U)
        ifo = 1.0 / (1.0 + np.exp(-_clip(z[..., :3 * H])))
        i, f, o = ifo[..., :H], ifo[..., H:2 * H], ifo[..., 2 * H:]
        g = np.tanh(z[..., 3 * H:])
        cn = f * c[:, :nb] + i * g
        tc = np.tanh(cn)
        hn = o * tc
        c[:, :nb] = cn
        h[:, :nb] = hn
        i_s[:, :nb, t], f_s[:, :nb, t], o_s[:, :nb, t], g_s[:, :nb, t] = i, f, o, g
        c_s[:, :nb, t], tc_s[:, :nb, t], h_s[:, :nb, t] = cn, tc, hn

    out = h_s.copy()
    back = dirs == 1
    if back.any():
        out[back] = h_s[back][:, bidx, ridx]
    out = out[:, inv]
    cache = StreamCache(dirs, order, inv, counts, bidx, ridx, Xs, W, U, i_s, f_s, o_s, g_s, c_s, tc_s, h_s)
    return out, cache


def streams_backward(dOut, cache: StreamCache):
    """Gradients (dX, dW, dU, db) given dOut (S, B, T, H) in natural order.

    dOut must be zero at padded positions.
    """
    dirs, bidx, ridx, counts = cache.dirs, cache.bidx, cache.ridx, cache.counts
    S, B, T, H = dOut.shape
    back = dirs == 1
    dHp = dOut[:, cache.order]
    if back.any():
        dHp[back] = dHp[back][:, bidx, ridx]

    dt = cache.h.dtype
    dZ = np.zeros((S, B, T, 4 * H), dtype=dt)
    dh_next = np.zeros((S, B, H), dtype=dt)
    dc_next = np.zeros((S, B, H), dtype=dt)
    Ut = cache.U.transpose(0, 2, 1)
    for t in range(T - 1, -1, -1):
        nb = counts[t]
        if nb == 0:
            continue
        i, f, o, g = cache.i[:, :nb, t], cache.f[:, :nb, t], cache.o[:, :nb, t], cache.g[:, :nb, t]
        tc = cache.tc[:, :nb, t]
        dh = dHp[:, :nb, t] + dh_next[:, :nb]
        dc = dc_next[:, :nb] + dh * o * (1.0 - tc * tc)
        dz = dZ[:, :nb, t]
        dz[..., :H] = dc * g * i * (1.0 - i)
        if t > 0:
            dz[..., H:2 * H] = dc * cache.c[:, :nb, t - 1] * f * (1.0 - f)
        dz[..., 2 * H:3 * H] = dh * tc * o * (1.0 - o)
        dz[..., 3 * H:] = dc * i * (1.0 - g * g)
        dh_next[:, :nb] = np.matmul(dz, Ut)
        dc_next[:, :nb] = dc * f

    G = 4 * H
    h_prev = np.zeros_like(cache.h)
    h_prev[:, :, 1:] = cache.h[:, :, :-1]
    dZf = dZ.reshape(S, B * T, G)
    dU = np.matmul(h_prev.reshape(S, B * T, H).transpose(0, 2, 1), dZf)
    D = cache.Xs.shape[-1]
    dW = np.matmul(cache.Xs.reshape(S, B * T, D).transpose(0, 2, 1), dZf)
    db = dZf.sum(axis=1)
    dXs = np.matmul(dZ, cache.W.transpose(0, 2, 1)[:, None])
    dX = dXs[~back].sum(axis=0)
    if back.any():
        dX = dX + dXs[back].sum(axis=0)[bidx, ridx]
    return dX[cache.inv], dW, dU, db


def bilstm_forward(inputs, fwd: LstmParams, bwd: LstmParams) -> np.ndarray:
    """Unbatched BiLSTM: (n, D) -> (n, 2H), rows are [forward_i; backward_i]."""
    X = np.asarray(inputs, dtype=np.float64)
    if X.ndim != 2 or len(X) == 0:
        raise ValueError("bilstm_forward expects a non-empty (n, D) sequence")
    W = np.stack([fwd.W, bwd.W])
    U = np.stack([fwd.U, bwd.U])
    b = np.stack([fwd.b, bwd.b])
    out, _ = streams_forward(X[None], np.array([len(X)]), W, U, b, np.array([0, 1]))
    return np.concatenate([out[0, 0], out[1, 0]], axis=-1)
