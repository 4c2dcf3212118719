"""Windowed mini-batch training with Adam and early stopping on validation mean PR-AUC."""
from __future__ import annotations

import csv
import logging
import time
from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np

from .features import ConversationInputs, FeatureConfig, prepare_inputs
from .metrics import fmt, mean_pr_auc
from .nn.gradcheck import NumericError
from .nn.model import Batch, ModelConfig, coarse_targets, init_params, loss_and_grads, predict
from .rng import Rng

log = logging.getLogger(__name__)

REPORT_HEADER = ["epoch", "train_loss", "val_auc"]
_SHUFFLE_STREAM = 1


@dataclass(frozen=True)
class TrainConfig:
    learning_rate: float = 0.0005
    batch_size: int = 16
    window_len: int = 128
    beta: float = 1.0
    hidden_dim: int = 32
    max_epochs: int = 50
    patience: int = 5
    seed: int = 0
    grad_clip: float = 5.0
    no_hierarchy: bool = False
    plain_bilstm: bool = False
    no_context: bool = False
    gate_mode: str = "scalar"

    def __post_init__(self):
        if self.learning_rate < 0:
            raise ValueError("learning_rate must be >= 0")
        for name in ("batch_size", "window_len", "hidden_dim", "max_epochs", "patience"):
            if getattr(self, name) < 1:
                raise ValueError(f"{name} must be >= 1")
        if self.beta < 0:
            raise ValueError("beta must be >= 0")
        if self.grad_clip <= 0:
            raise ValueError("grad_clip must be > 0")

    def model_config(self, feature: FeatureConfig) -> ModelConfig:
        return ModelConfig(feature=feature, hidden_dim=self.hidden_dim, hierarchical=not self.no_hierarchy,
                           plain_bilstm=self.plain_bilstm, no_context=self.no_context, gate_mode=self.gate_mode)


class Window(NamedTuple):
    source: object  # a conversation or its ConversationInputs
    start: int
    end: int


def window_conversations(convs, window_len: int) -> list[Window]:
    """Consecutive non-overlapping windows; the last one of each conversation may be shorter."""
    if window_len < 1:
        raise ValueError("window_len must be >= 1")
    out = []
    for conv in convs:
        n = len(conv)
        for start in range(0, n, window_len):
            out.append(Window(conv, start, min(start + window_len, n)))
    return out


@dataclass
class AdamState:
    m: dict = field(default_factory=dict)
    v: dict = field(default_factory=dict)
    t: int = 0


def adam_step(params: dict, grads: dict, state: AdamState, lr: float,
              beta1: float = 0.9, beta2: float = 0.999, eps: float = 1e-8):
    """Bias-corrected Adam update of ``params`` in place; returns (params, state)."""
    state.t += 1
    c1 = 1.0 - beta1 ** state.t
    c2 = 1.0 - beta2 ** state.t
    for name, g in grads.items():
        p = params[name]
        if p.shape != g.shape:
            raise ValueError(f"gradient shape {g.shape} does not match parameter {name} {p.shape}")
        if name not in state.m:
            state.m[name] = np.zeros_like(p)
            state.v[name] = np.zeros_like(p)
        m, v = state.m[name], state.v[name]
        m *= beta1
        m += (1.0 - beta1) * g
        v *= beta2
        v += (1.0 - beta2) * g * g
        p -= lr * (m / c1) / (np.sqrt(v / c2) + eps)
    return params, state


def clip_global_norm(grads: dict, max_norm: float) -> float:
    norm = float(np.sqrt(sum(float(np.sum(g * g)) for g in grads.values())))
    if norm > max_norm:
        scale = max_norm / norm
        for g in grads.values():
            g *= scale
    return norm


@dataclass
class TrainReport:
    train_loss: list = field(default_factory=list)
    val_auc: list = field(default_factory=list)
    best_epoch: int = 0  # 1-based
    wall_time: float = 0.0

    @property
    def best_val_auc(self) -> float:
        return self.val_auc[self.best_epoch - 1]

    def rows(self):
        return [(e + 1, loss, auc) for e, (loss, auc) in enumerate(zip(self.train_loss, self.val_auc))]

    def write_csv(self, path) -> None:
        # wall time is deliberately left out so reruns are byte-identical
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(REPORT_HEADER)
            for epoch, loss, auc in self.rows():
                w.writerow([epoch, fmt(loss), fmt(auc)])


@dataclass
class TrainResult:
    params: dict
    config: ModelConfig
    report: TrainReport


def prepare_corpus(convs, feature: FeatureConfig, text_source, dictionary=None) -> list[ConversationInputs]:
    return [prepare_inputs(c, feature, text_source, dictionary) for c in convs]


def predict_corpus(params: dict, cfg: ModelConfig, inputs, window_len: int = 128, batch_size: int = 16):
    """Per-conversation (fine (n, 3), coarse (n, 2) or None) probabilities, windowed like training."""
    windows = window_conversations(inputs, window_len)
    fine = {id(x): [] for x in inputs}
    coarse = {id(x): [] for x in inputs}
    for b in range(0, len(windows), batch_size):
        chunk = windows[b:b + batch_size]
        for w, (pf, pc) in zip(chunk, predict(params, cfg, Batch.from_windows(chunk, cfg.feature))):
            fine[id(w.source)].append(pf)
            coarse[id(w.source)].append(pc)
    out = []
    for x in inputs:
        pcs = coarse[id(x)]
        out.append((np.concatenate(fine[id(x)]), None if pcs[0] is None else np.concatenate(pcs)))
    return out


def evaluate_auc(params: dict, cfg: ModelConfig, inputs, window_len: int = 128, batch_size: int = 16) -> float:
    preds = predict_corpus(params, cfg, inputs, window_len, batch_size)
    probs = np.concatenate([p for p, _ in preds])
    gold = np.concatenate([x.targets for x in inputs])
    return mean_pr_auc(probs, gold)


def _describe(chunk) -> str:
    return ", ".join(f"{w.source.conv_id}[{w.start}:{w.end}]" for w in chunk)


def prior_bias_init(params: dict, train_inputs, floor: float = 1e-3) -> None:
    """Set the output biases to the training-set log-odds of each label, in place.

    Starting at the class prior avoids spending the first epochs just learning
    prevalence, which with few Adam steps per epoch trips early stopping.
    """
    y = np.concatenate([x.targets for x in train_inputs])
    p = np.clip(y.mean(axis=0), floor, 1.0 - floor)
    params["fine_head.b"][:] = np.log(p / (1.0 - p))
    if "coarse_head.b" in params:
        r = np.clip(coarse_targets(y).mean(), floor, 1.0 - floor)
        params["coarse_head.b"][:] = [0.0, np.log(r / (1.0 - r))]


def train(train_inputs, val_inputs, cfg: TrainConfig, feature: FeatureConfig,
          params: dict | None = None) -> TrainResult:
    """Train on prepared inputs; returns the parameters of the best validation epoch.

    Fresh parameters get prior log-odds output biases; given ``params`` are used as is.
    """
    if not train_inputs or not val_inputs:
        raise ValueError("training and validation sets must be non-empty")
    mcfg = cfg.model_config(feature)
    if params is None:
        params = init_params(mcfg, cfg.seed)
        prior_bias_init(params, train_inputs)
    else:
        params = {k: v.copy() for k, v in params.items()}
    windows = window_conversations(train_inputs, cfg.window_len)
    shuffler = Rng(cfg.seed).spawn(_SHUFFLE_STREAM)
    state = AdamState()
    report = TrainReport()
    best = {k: v.copy() for k, v in params.items()}
    best_auc = -np.inf
    t0 = time.perf_counter()
    for epoch in range(1, cfg.max_epochs + 1):
        order = shuffler.shuffle(windows)
        total, count = 0.0, 0
        for b in range(0, len(order), cfg.batch_size):
            chunk = order[b:b + cfg.batch_size]
            batch = Batch.from_windows(chunk, feature)
            rep, grads = loss_and_grads(params, mcfg, batch, cfg.beta)
            finite = np.isfinite(rep.total) and all(np.all(np.isfinite(g)) for g in grads.values())
            if not finite:
                raise NumericError(f"non-finite loss in epoch {epoch}, batch {b // cfg.batch_size} "
                                   f"({_describe(chunk)})")
            clip_global_norm(grads, cfg.grad_clip)
            adam_step(params, grads, state, cfg.learning_rate)
            bad = [k for k, v in params.items() if not np.all(np.isfinite(v))]
            if bad:
                raise NumericError(f"parameter {bad[0]} became non-finite in epoch {epoch}, "
                                   f"batch {b // cfg.batch_size}")
            n = int(batch.mask.sum())
            total += float(rep.total) * n
            count += n
        auc = evaluate_auc(params, mcfg, val_inputs, cfg.window_len, cfg.batch_size)
        report.train_loss.append(total / count)
        report.val_auc.append(auc)
        log.info("epoch %d train_loss %.6f val_auc %.6f", epoch, total / count, auc)
        if auc > best_auc:
            best_auc = auc
            report.best_epoch = epoch
            best = {k: v.copy() for k, v in params.items()}
        elif epoch - report.best_epoch >= cfg.patience:
            break
    report.wall_time = time.perf_counter() - t0
    return TrainResult(best, mcfg, report)
