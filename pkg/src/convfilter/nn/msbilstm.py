"""Multi-Speaker BiLSTM: a background BiLSTM mixed per position with a speaker BiLSTM.

For an utterance spoken by role s, the layer output is

    g_s * speaker_s(h)_i + (1 - g_s) * background(h)_i,    g_s = sigmoid(w_s)

Every speaker BiLSTM reads the whole sequence, but its output only enters
the mix at positions spoken by its own role, so its parameters receive
gradient from those positions alone.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .lstm import LstmParams, sigmoid, streams_backward, streams_forward

ROLE_NAMES = ("DR", "PT", "OT")


@dataclass
class MsBiLstmLayer:
    background: tuple[LstmParams, LstmParams]
    speakers: dict  # role name -> (forward, backward) LstmParams
    gate_logits: np.ndarray  # (n_roles,) scalar gates or (n_roles, 2H) per-dimension gates

    @property
    def input_dim(self) -> int:
        return self.background[0].input_dim

    @property
    def hidden_dim(self) -> int:
        return self.background[0].hidden_dim

    @property
    def stream_names(self) -> list[str]:
        return ["bg"] + [r for r in ROLE_NAMES if r in self.speakers]

    def __post_init__(self):
        if self.speakers and set(self.speakers) != set(ROLE_NAMES):
            raise ValueError(f"speaker streams must cover exactly {ROLE_NAMES}")
        for pair in [self.background, *self.speakers.values()]:
            for p in pair:
                if (p.input_dim, p.hidden_dim) != (self.input_dim, self.hidden_dim):
                    raise ValueError("all streams must share (input_dim, hidden_dim)")

    @classmethod
    def init(cls, input_dim: int, hidden_dim: int, rng, with_speakers: bool = True,
             gate_mode: str = "scalar") -> "MsBiLstmLayer":
        bg = (LstmParams.init(input_dim, hidden_dim, rng), LstmParams.init(input_dim, hidden_dim, rng))
        speakers = {}
        gates = np.zeros(0)
        if with_speakers:
            for r in ROLE_NAMES:
                speakers[r] = (LstmParams.init(input_dim, hidden_dim, rng),
                               LstmParams.init(input_dim, hidden_dim, rng))
            gates = np.zeros(len(ROLE_NAMES)) if gate_mode == "scalar" else np.zeros((len(ROLE_NAMES), 2 * hidden_dim))
        return cls(bg, speakers, gates)

    def to_params(self, prefix: str) -> dict:
        out = {}
        for name in self.stream_names:
            pair = self.background if name == "bg" else self.speakers[name]
            for d, p in zip(("fwd", "bwd"), pair):
                out[f"{prefix}.{name}.{d}.W"] = p.W
                out[f"{prefix}.{name}.{d}.U"] = p.U
                out[f"{prefix}.{name}.{d}.b"] = p.b
        if self.speakers:
            out[f"{prefix}.gate"] = self.gate_logits
        return out

    @classmethod
    def from_params(cls, params: dict, prefix: str) -> "MsBiLstmLayer":
        def pair(name):
            return tuple(LstmParams(params[f"{prefix}.{name}.{d}.W"], params[f"{prefix}.{name}.{d}.U"],
                                    params[f"{prefix}.{name}.{d}.b"]) for d in ("fwd", "bwd"))
        speakers = {}
        if f"{prefix}.DR.fwd.W" in params:
            speakers = {r: pair(r) for r in ROLE_NAMES}
        return cls(pair("bg"), speakers, params.get(f"{prefix}.gate", np.zeros(0)))


def stream_names(params: dict, prefix: str) -> list[str]:
    return ["bg"] + [r for r in ROLE_NAMES if f"{prefix}.{r}.fwd.W" in params]


def _stack(params, prefix, names):
    keys = [f"{prefix}.{n}.{d}" for n in names for d in ("fwd", "bwd")]
    W = np.stack([params[k + ".W"] for k in keys])
    U = np.stack([params[k + ".U"] for k in keys])
    b = np.stack([params[k + ".b"] for k in keys])
    return keys, W, U, b


def ms_forward(params: dict, prefix: str, X, lengths, speakers):
    """Batched layer forward: X (B, T, D), speakers (B, T) int role ids -> (B, T, 2H)."""
    names = stream_names(params, prefix)
    keys, W, U, b = _stack(params, prefix, names)
    dirs = np.tile([0, 1], len(names))
    out, scache = streams_forward(X, lengths, W, U, b, dirs)
    # (n_streams, B, T, 2H)
    bi = np.concatenate([out[0::2], out[1::2]], axis=-1)
    hbg = bi[0]
    cache = {"prefix": prefix, "keys": keys, "scache": scache, "n_streams": len(names), "speakers": speakers}
    if len(names) == 1:
        return hbg, cache
    n_roles = len(names) - 1
    speakers = np.asarray(speakers)
    if speakers.min() < 0 or speakers.max() >= n_roles:
        raise ValueError(f"speaker role id outside [0, {n_roles})")
    B, T = speakers.shape
    bidx = np.arange(B)[:, None]
    tidx = np.arange(T)[None, :]
    hs_all = bi[1:]
    hs = hs_all[speakers, bidx, tidx]
    gl = params[f"{prefix}.gate"]
    g = sigmoid(gl)
    G = g[speakers]
    if G.ndim == 2:
        G = G[..., None]
    out_mix = G * hs + (1.0 - G) * hbg
    cache.update(hbg=hbg, hs=hs, G=G, g=g, gate_shape=gl.shape, bidx=bidx, tidx=tidx)
    return out_mix, cache


def ms_backward(dout, cache) -> tuple[np.ndarray, dict]:
    """dout (B, T, 2H), zero on padding -> (dX, grads keyed by parameter name)."""
    n = cache["n_streams"]
    B, T, H2 = dout.shape
    H = H2 // 2
    dbi = np.zeros((n, B, T, H2))
    grads = {}
    if n == 1:
        dbi[0] = dout
    else:
        speakers = cache["speakers"]
        G = cache["G"]
        dbi[0] = (1.0 - G) * dout
        dsel = np.zeros((n - 1, B, T, H2))
        dsel[speakers, cache["bidx"], cache["tidx"]] = G * dout
        dbi[1:] = dsel
        dG = dout * (cache["hs"] - cache["hbg"])
        g = cache["g"]
        prefix = cache["prefix"]
        if len(cache["gate_shape"]) == 1:
            per_pos = dG.sum(axis=-1)
            dgate = np.zeros(cache["gate_shape"])
            np.add.at(dgate, speakers.ravel(), per_pos.ravel())
        else:
            dgate = np.zeros(cache["gate_shape"])
            np.add.at(dgate, speakers.ravel(), dG.reshape(-1, H2))
        grads[f"{prefix}.gate"] = dgate * g * (1.0 - g)
    dstreams = np.empty((2 * n, B, T, H))
    dstreams[0::2] = dbi[..., :H]
    dstreams[1::2] = dbi[..., H:]
    dX, dW, dU, db = streams_backward(dstreams, cache["scache"])
    for k, key in enumerate(cache["keys"]):
        grads[key + ".W"] = dW[k]
        grads[key + ".U"] = dU[k]
        grads[key + ".b"] = db[k]
    return dX, grads


def ms_bilstm_forward(inputs, speakers, layer: MsBiLstmLayer) -> np.ndarray:
    """Unbatched layer forward: inputs (n, D), speakers of length n -> (n, 2H)."""
    X = np.asarray(inputs, dtype=np.float64)
    spk = np.array([int(s) for s in speakers])
    if len(spk) != len(X):
        raise ValueError("inputs and speakers must have equal length")
    if layer.speakers and (spk.min() < 0 or spk.max() >= len(ROLE_NAMES)):
        raise ValueError("unknown speaker role")
    out, _ = ms_forward(layer.to_params("L"), "L", X[None], np.array([len(X)]), spk[None])
    return out[0]
