"""Hierarchical utterance classifier: coarse relevance layer feeding a fine topic layer."""
from __future__ import annotations

from dataclasses import asdict, dataclass, field

import numpy as np

from ..features import N_SPEAKERS, ConversationInputs, FeatureConfig
from ..rng import Rng
from .lstm import CLIP, sigmoid
from .msbilstm import MsBiLstmLayer, ms_backward, ms_forward

EPS = 1e-12
N_FINE = 3


@dataclass(frozen=True)
class ModelConfig:
    feature: FeatureConfig = field(default_factory=FeatureConfig)
    hidden_dim: int = 32
    hierarchical: bool = True
    plain_bilstm: bool = False
    no_context: bool = False
    gate_mode: str = "scalar"

    def __post_init__(self):
        if self.hidden_dim < 1:
            raise ValueError("hidden_dim must be >= 1")
        if self.gate_mode not in ("scalar", "vector"):
            raise ValueError("gate_mode must be 'scalar' or 'vector'")

    @property
    def fine_input_dim(self) -> int:
        return self.feature.dim + (2 * self.hidden_dim if self.hierarchical else 0)


@dataclass
class Batch:
    text: np.ndarray  # (B, T, text_dim)
    speakers: np.ndarray  # (B, T) int
    positions: np.ndarray  # (B, T) int
    semantic: np.ndarray  # (B, T, n_semantic_types) averaging weights
    targets: np.ndarray  # (B, T, 3)
    mask: np.ndarray  # (B, T) bool
    lengths: np.ndarray  # (B,)

    @classmethod
    def from_windows(cls, windows, cfg: FeatureConfig) -> "Batch":
        """``windows``: sequence of (ConversationInputs, start, end)."""
        B = len(windows)
        T = max(end - start for _, start, end in windows)
        text = np.zeros((B, T, cfg.text_dim))
        speakers = np.zeros((B, T), dtype=np.int64)
        positions = np.zeros((B, T), dtype=np.int64)
        semantic = np.zeros((B, T, cfg.n_semantic_types))
        targets = np.zeros((B, T, N_FINE))
        mask = np.zeros((B, T), dtype=bool)
        lengths = np.zeros(B, dtype=np.int64)
        for b, (inp, start, end) in enumerate(windows):
            n = end - start
            text[b, :n] = inp.text[start:end]
            speakers[b, :n] = inp.speakers[start:end]
            positions[b, :n] = inp.positions[start:end]
            targets[b, :n] = inp.targets[start:end]
            mask[b, :n] = True
            lengths[b] = n
            for t, types in enumerate(inp.semantic[start:end]):
                for ty in types:
                    semantic[b, t, ty] += 1.0 / len(types)
        return cls(text, speakers, positions, semantic, targets, mask, lengths)

    @classmethod
    def single(cls, inputs: ConversationInputs, cfg: FeatureConfig) -> "Batch":
        return cls.from_windows([(inputs, 0, len(inputs))], cfg)


@dataclass
class LossReport:
    total: float
    fine: float
    coarse: float
    fine_probs: np.ndarray  # (N, 3)
    coarse_probs: np.ndarray | None  # (N, 2), columns (irrelevant, relevant)


def init_params(cfg: ModelConfig, seed: int) -> dict:
    rng = Rng(seed)
    fc = cfg.feature
    H = cfg.hidden_dim
    params = {}
    if not cfg.no_context:
        params["emb.speaker"] = rng.uniform_array((N_SPEAKERS, fc.speaker_dim), -0.1, 0.1)
        params["emb.position"] = rng.uniform_array((fc.position_bins, fc.position_dim), -0.1, 0.1)
        params["emb.semantic"] = rng.uniform_array((fc.n_semantic_types, fc.semantic_dim), -0.1, 0.1)
    with_spk = not cfg.plain_bilstm
    s = 1.0 / np.sqrt(H)
    if cfg.hierarchical:
        params.update(MsBiLstmLayer.init(fc.dim, H, rng, with_spk, cfg.gate_mode).to_params("coarse"))
        params["coarse_head.W"] = rng.uniform_array((2, 2 * H), -s, s)
        params["coarse_head.b"] = np.zeros(2)
    params.update(MsBiLstmLayer.init(cfg.fine_input_dim, H, rng, with_spk, cfg.gate_mode).to_params("fine"))
    params["fine_head.W"] = rng.uniform_array((N_FINE, 2 * H), -s, s)
    params["fine_head.b"] = np.zeros(N_FINE)
    return params


def zero_params(cfg: ModelConfig) -> dict:
    return {k: np.zeros_like(v) for k, v in init_params(cfg, 0).items()}


def assemble_features(params: dict, cfg: ModelConfig, batch: Batch) -> np.ndarray:
    fc = cfg.feature
    B, T = batch.speakers.shape
    if cfg.no_context:
        ctx = np.zeros((B, T, fc.speaker_dim + fc.position_dim + fc.semantic_dim))
        return np.concatenate([batch.text, ctx], axis=-1)
    return np.concatenate([
        batch.text,
        params["emb.speaker"][batch.speakers],
        params["emb.position"][batch.positions],
        batch.semantic @ params["emb.semantic"],
    ], axis=-1)


def softmax(z):
    z = np.clip(z, -CLIP, CLIP)
    e = np.exp(z - z.max(axis=-1, keepdims=True))
    return e / e.sum(axis=-1, keepdims=True)


def forward(params: dict, cfg: ModelConfig, batch: Batch):
    """Returns (p_fine (B,T,3), p_coarse (B,T,2) or None, cache)."""
    h = assemble_features(params, cfg, batch)
    cache = {"h": h}
    p_coarse = None
    fine_in = h
    if cfg.hierarchical:
        hc, cache["coarse"] = ms_forward(params, "coarse", h, batch.lengths, batch.speakers)
        zc = hc @ params["coarse_head.W"].T + params["coarse_head.b"]
        p_coarse = softmax(zc)
        cache.update(hc=hc, zc=zc)
        fine_in = np.concatenate([h, hc], axis=-1)
    hf, cache["fine"] = ms_forward(params, "fine", fine_in, batch.lengths, batch.speakers)
    zf = hf @ params["fine_head.W"].T + params["fine_head.b"]
    p_fine = sigmoid(zf)
    cache.update(hf=hf, zf=zf)
    return p_fine, p_coarse, cache


def coarse_targets(fine_targets: np.ndarray) -> np.ndarray:
    """1 for medically relevant (any fine label), else 0."""
    return (fine_targets.max(axis=-1) > 0.5).astype(np.int64)


def joint_loss(p_fine, p_coarse, gold, beta: float) -> LossReport:
    """L = L_fine + beta * L_coarse over N utterances.

    p_fine (N, 3), p_coarse (N, 2) or None, gold (N, 3) of 0/1.
    """
    # dtype is preserved so extended-precision evaluation stays extended
    p_fine = np.asarray(p_fine)
    gold = np.asarray(gold, dtype=np.float64)
    pf = np.clip(p_fine, EPS, 1.0 - EPS)
    l_fine = np.mean(-(gold * np.log(pf) + (1.0 - gold) * np.log(1.0 - pf)))
    l_coarse = np.zeros((), dtype=l_fine.dtype)[()]
    if p_coarse is not None:
        p_coarse = np.asarray(p_coarse)
        y = coarse_targets(gold)
        py = np.clip(p_coarse[np.arange(len(y)), y], EPS, 1.0 - EPS)
        l_coarse = np.mean(-np.log(py))
    return LossReport(l_fine + beta * l_coarse, l_fine, l_coarse, p_fine, p_coarse)


def loss_and_grads(params: dict, cfg: ModelConfig, batch: Batch, beta: float = 1.0, need_grads: bool = True):
    """Joint loss on the valid positions of ``batch`` and its gradient for every parameter."""
    p_fine, p_coarse, cache = forward(params, cfg, batch)
    mask = batch.mask
    report = joint_loss(p_fine[mask], None if p_coarse is None else p_coarse[mask], batch.targets[mask], beta)
    if not need_grads:
        return report, None
    N = float(mask.sum())
    m = mask[..., None].astype(np.float64)
    grads = {}

    y = batch.targets
    active = (p_fine > EPS) & (p_fine < 1.0 - EPS) & (np.abs(cache["zf"]) < CLIP)
    dzf = np.where(active, p_fine - y, 0.0) * m / (N * N_FINE)
    hf = cache["hf"]
    grads["fine_head.W"] = dzf.reshape(-1, N_FINE).T @ hf.reshape(-1, hf.shape[-1])
    grads["fine_head.b"] = dzf.sum(axis=(0, 1))
    dhf = dzf @ params["fine_head.W"]
    d_fine_in, g_fine = ms_backward(dhf, cache["fine"])
    grads.update(g_fine)

    D = cfg.feature.dim
    dh = d_fine_in[..., :D]
    if cfg.hierarchical:
        dhc = d_fine_in[..., D:].copy()
        yc = coarse_targets(y)
        onehot = np.stack([1 - yc, yc], axis=-1).astype(np.float64)
        py = np.take_along_axis(p_coarse, yc[..., None], axis=-1)
        active_c = ((py > EPS) & (py < 1.0 - EPS)) & (np.abs(cache["zc"]) < CLIP)
        dzc = np.where(active_c, p_coarse - onehot, 0.0) * m * (beta / N)
        hc = cache["hc"]
        grads["coarse_head.W"] = dzc.reshape(-1, 2).T @ hc.reshape(-1, hc.shape[-1])
        grads["coarse_head.b"] = dzc.sum(axis=(0, 1))
        dhc += dzc @ params["coarse_head.W"]
        dhc *= m
        dh_c, g_coarse = ms_backward(dhc, cache["coarse"])
        grads.update(g_coarse)
        dh = dh + dh_c

    if not cfg.no_context:
        fc = cfg.feature
        o = fc.offsets
        dspk = dh[..., o[1]:o[2]] * m
        dpos = dh[..., o[2]:o[3]] * m
        dsem = dh[..., o[3]:o[4]] * m
        g_spk = np.zeros_like(params["emb.speaker"])
        np.add.at(g_spk, batch.speakers.ravel(), dspk.reshape(-1, fc.speaker_dim))
        g_pos = np.zeros_like(params["emb.position"])
        np.add.at(g_pos, batch.positions.ravel(), dpos.reshape(-1, fc.position_dim))
        grads["emb.speaker"] = g_spk
        grads["emb.position"] = g_pos
        grads["emb.semantic"] = batch.semantic.reshape(-1, fc.n_semantic_types).T @ dsem.reshape(-1, fc.semantic_dim)
    return report, grads


def loss_only(params: dict, cfg: ModelConfig, batch: Batch, beta: float = 1.0):
    return loss_and_grads(params, cfg, batch, beta, need_grads=False)[0].total


def extended_loss_fn(cfg: ModelConfig, batch: Batch, beta: float = 1.0):
    """Loss evaluated in long double, for finite-difference oracles."""
    def fn(params):
        ext = {k: v.astype(np.longdouble) for k, v in params.items()}
        return loss_only(ext, cfg, batch, beta)
    return fn


def predict(params: dict, cfg: ModelConfig, batch: Batch):
    """Per-utterance probabilities for each sequence in the batch, padding dropped."""
    p_fine, p_coarse, _ = forward(params, cfg, batch)
    out = []
    for b, n in enumerate(batch.lengths):
        pc = None if p_coarse is None else p_coarse[b, :n]
        out.append((p_fine[b, :n], pc))
    return out


def config_to_blocks(cfg: ModelConfig) -> dict:
    blocks = {f"config.{k}": np.array(float(v)) for k, v in asdict(cfg.feature).items()}
    blocks["config.hidden_dim"] = np.array(float(cfg.hidden_dim))
    blocks["config.hierarchical"] = np.array(float(cfg.hierarchical))
    blocks["config.plain_bilstm"] = np.array(float(cfg.plain_bilstm))
    blocks["config.no_context"] = np.array(float(cfg.no_context))
    blocks["config.gate_vector"] = np.array(float(cfg.gate_mode == "vector"))
    return blocks


def config_from_blocks(blocks: dict) -> ModelConfig:
    def get(name):
        return float(blocks[f"config.{name}"])

    fc = FeatureConfig(
        text_dim=int(get("text_dim")), speaker_dim=int(get("speaker_dim")),
        position_dim=int(get("position_dim")), position_bins=int(get("position_bins")),
        semantic_dim=int(get("semantic_dim")), n_semantic_types=int(get("n_semantic_types")),
        jaccard_min=get("jaccard_min"),
    )
    return ModelConfig(
        feature=fc, hidden_dim=int(get("hidden_dim")), hierarchical=bool(get("hierarchical")),
        plain_bilstm=bool(get("plain_bilstm")), no_context=bool(get("no_context")),
        gate_mode="vector" if get("gate_vector") else "scalar",
    )
