"""Supervised conversation-level extractor: BiLSTM over utterances with attention on the final state.

For utterance states H (n, 2h) and q = [backward state at 0; forward state
at n-1], the conversation vector is H^T softmax(H q), followed by a linear
layer and an independent sigmoid per label.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..corpus import TASKS
from ..metrics import ExtractionScore, extraction_f1
from ..nn.gradcheck import NumericError
from ..nn.lstm import CLIP, LstmParams, sigmoid, streams_backward, streams_forward
from ..rng import Rng
from ..train import AdamState, adam_step, clip_global_norm
from .labels import EXTRACTION_LABELS

EPS = 1e-12


@dataclass(frozen=True)
class AttnConfig:
    hidden_dim: int = 32
    learning_rate: float = 0.01
    batch_size: int = 16
    epochs: int = 25
    seed: int = 0
    threshold: float = 0.5
    grad_clip: float = 5.0

    def __post_init__(self):
        if self.hidden_dim < 1 or self.batch_size < 1 or self.epochs < 0:
            raise ValueError("hidden_dim and batch_size must be >= 1, epochs >= 0")
        if not 0.0 <= self.threshold <= 1.0:
            raise ValueError("threshold must be in [0, 1]")


@dataclass
class AttnExample:
    conv_id: str
    inputs: np.ndarray  # (n, D) utterance vectors
    targets: np.ndarray  # (n_labels,) 0/1


def make_examples(convs, text_source, task: str, labels=None) -> list[AttnExample]:
    if task not in TASKS:
        raise ValueError(f"unknown task {task!r}")
    labels = list(EXTRACTION_LABELS[task] if labels is None else labels)
    out = []
    for conv in convs:
        X = np.stack([text_source.encode(conv.id, u.index, u.text) for u in conv.utterances])
        gold = set(conv.gold_extraction.get(task, ()))
        out.append(AttnExample(conv.id, X, np.array([1.0 if lab in gold else 0.0 for lab in labels])))
    return out


def init_attn_params(input_dim: int, hidden_dim: int, n_labels: int, seed: int) -> dict:
    rng = Rng(seed)
    fwd = LstmParams.init(input_dim, hidden_dim, rng)
    bwd = LstmParams.init(input_dim, hidden_dim, rng)
    s = 1.0 / np.sqrt(hidden_dim)
    return {
        "attn.fwd.W": fwd.W, "attn.fwd.U": fwd.U, "attn.fwd.b": fwd.b,
        "attn.bwd.W": bwd.W, "attn.bwd.U": bwd.U, "attn.bwd.b": bwd.b,
        "attn.out.W": rng.uniform_array((n_labels, 2 * hidden_dim), -s, s),
        "attn.out.b": np.zeros(n_labels),
    }


def _pad(examples):
    B = len(examples)
    T = max(len(e.inputs) for e in examples)
    D = examples[0].inputs.shape[1]
    X = np.zeros((B, T, D))
    lengths = np.zeros(B, dtype=np.int64)
    for b, e in enumerate(examples):
        if e.inputs.shape[1] != D:
            raise ValueError("all conversations must share the utterance vector size")
        X[b, :len(e.inputs)] = e.inputs
        lengths[b] = len(e.inputs)
    return X, lengths


def attn_forward(params: dict, X, lengths):
    """X (B, T, D) padded, lengths (B,) -> (probabilities (B, L), attention (B, T), cache)."""
    X = np.asarray(X)
    lengths = np.asarray(lengths)
    if X.ndim != 3 or X.shape[2] != params["attn.fwd.W"].shape[0]:
        raise ValueError(f"expected (B, T, {params['attn.fwd.W'].shape[0]}) inputs, got {X.shape}")
    if lengths.min() < 1:
        raise ValueError("conversations must have at least one utterance")
    B, T, _ = X.shape
    W = np.stack([params["attn.fwd.W"], params["attn.bwd.W"]])
    U = np.stack([params["attn.fwd.U"], params["attn.bwd.U"]])
    bias = np.stack([params["attn.fwd.b"], params["attn.bwd.b"]])
    out, scache = streams_forward(X, lengths, W, U, bias, np.array([0, 1]))
    Hd = out.shape[-1]
    H = np.concatenate([out[0], out[1]], axis=-1)  # (B, T, 2h)
    bidx = np.arange(B)
    q = np.concatenate([out[1][bidx, 0], out[0][bidx, lengths - 1]], axis=-1)  # (B, 2h)
    mask = np.arange(T)[None, :] < lengths[:, None]
    S = np.einsum("btk,bk->bt", H, q)
    Sc = np.clip(S, -CLIP, CLIP)
    Sm = np.where(mask, Sc, -np.inf)
    e = np.exp(Sm - Sm.max(axis=1, keepdims=True))
    A = e / e.sum(axis=1, keepdims=True)
    ctx = np.einsum("btk,bt->bk", H, A)
    z = ctx @ params["attn.out.W"].T + params["attn.out.b"]
    p = sigmoid(z)
    cache = dict(scache=scache, H=H, q=q, S=S, A=A, ctx=ctx, z=z, mask=mask, lengths=lengths, Hd=Hd)
    return p, A, cache


def attn_loss_and_grads(params: dict, X, lengths, targets, need_grads: bool = True):
    """Mean binary cross-entropy over conversations and labels, with its gradient."""
    p, _, cache = attn_forward(params, X, lengths)
    y = np.asarray(targets, dtype=np.float64)
    pc = np.clip(p, EPS, 1.0 - EPS)
    loss = np.mean(-(y * np.log(pc) + (1.0 - y) * np.log(1.0 - pc)))
    if not need_grads:
        return loss, None
    B, L = y.shape
    H, q, A, mask, lengths, Hd = (cache[k] for k in ("H", "q", "A", "mask", "lengths", "Hd"))
    active = (p > EPS) & (p < 1.0 - EPS) & (np.abs(cache["z"]) < CLIP)
    dz = np.where(active, p - y, 0.0) / (B * L)
    grads = {"attn.out.W": dz.T @ cache["ctx"], "attn.out.b": dz.sum(axis=0)}
    dctx = dz @ params["attn.out.W"]
    dH = A[..., None] * dctx[:, None, :]
    dA = np.einsum("btk,bk->bt", H, dctx)
    dS = A * (dA - (A * dA).sum(axis=1, keepdims=True))
    dS = np.where(mask & (np.abs(cache["S"]) < CLIP), dS, 0.0)
    dH += dS[..., None] * q[:, None, :]
    dq = np.einsum("bt,btk->bk", dS, H)
    bidx = np.arange(B)
    dH[bidx, 0, Hd:] += dq[:, :Hd]
    dH[bidx, lengths - 1, :Hd] += dq[:, Hd:]
    dH *= mask[..., None]
    dOut = np.stack([dH[..., :Hd], dH[..., Hd:]])
    _, dW, dU, db = streams_backward(dOut, cache["scache"])
    for k, d in enumerate(("fwd", "bwd")):
        grads[f"attn.{d}.W"] = dW[k]
        grads[f"attn.{d}.U"] = dU[k]
        grads[f"attn.{d}.b"] = db[k]
    return loss, grads


def attn_extended_loss_fn(X, lengths, targets):
    """Loss evaluated in long double, for finite-difference oracles."""
    def fn(params):
        ext = {k: v.astype(np.longdouble) for k, v in params.items()}
        return attn_loss_and_grads(ext, np.asarray(X, dtype=np.longdouble), lengths, targets, need_grads=False)[0]
    return fn


def bilstm_attn_extract(params: dict, inputs) -> tuple[np.ndarray, np.ndarray]:
    """One conversation (n, D) -> (label probabilities, attention weights over utterances)."""
    X = np.asarray(inputs, dtype=np.float64)
    if X.ndim != 2 or len(X) == 0:
        raise ValueError("expected a non-empty (n, D) sequence of utterance vectors")
    p, A, _ = attn_forward(params, X[None], np.array([len(X)]))
    return p[0], A[0]


@dataclass
class AttnModel:
    params: dict
    task: str
    labels: tuple
    config: AttnConfig
    losses: list

    def predict_proba(self, examples, batch_size: int = 32) -> np.ndarray:
        out = []
        for b in range(0, len(examples), batch_size):
            X, lengths = _pad(examples[b:b + batch_size])
            out.append(attn_forward(self.params, X, lengths)[0])
        return np.concatenate(out) if out else np.zeros((0, len(self.labels)))

    def predict_labels(self, examples) -> list[set]:
        probs = self.predict_proba(examples)
        return [{lab for lab, p in zip(self.labels, row) if p >= self.config.threshold} for row in probs]

    def score(self, examples) -> ExtractionScore:
        gold = [{lab for lab, y in zip(self.labels, e.targets) if y > 0.5} for e in examples]
        return extraction_f1(self.predict_labels(examples), gold, self.labels)


def train_attn(examples, task: str, cfg: AttnConfig, labels=None) -> AttnModel:
    """Adam on mean BCE over seeded, shuffled mini-batches of whole conversations."""
    if not examples:
        raise ValueError("no training conversations")
    labels = tuple(EXTRACTION_LABELS[task] if labels is None else labels)
    D = examples[0].inputs.shape[1]
    params = init_attn_params(D, cfg.hidden_dim, len(labels), cfg.seed)
    shuffler = Rng(cfg.seed).spawn(1)
    state = AdamState()
    losses = []
    for epoch in range(cfg.epochs):
        order = shuffler.shuffle(list(range(len(examples))))
        total = 0.0
        for b in range(0, len(order), cfg.batch_size):
            chunk = [examples[i] for i in order[b:b + cfg.batch_size]]
            X, lengths = _pad(chunk)
            Y = np.stack([e.targets for e in chunk])
            loss, grads = attn_loss_and_grads(params, X, lengths, Y)
            if not np.isfinite(loss):
                raise NumericError(f"non-finite loss in epoch {epoch + 1}, batch {b // cfg.batch_size}")
            clip_global_norm(grads, cfg.grad_clip)
            adam_step(params, grads, state, cfg.learning_rate)
            total += float(loss) * len(chunk)
        losses.append(total / len(examples))
    return AttnModel(params, task, labels, cfg, losses)
