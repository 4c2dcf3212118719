"""Per-utterance representation: text, speaker, position and semantic-type segments."""
from __future__ import annotations

import csv
from dataclasses import dataclass

import numpy as np

from .corpus import TASKS, Conversation
from .extract.labels import N_SEMANTIC_TYPES
from .rng import Rng
from .text import encode_text_hashed

N_SPEAKERS = 3


@dataclass(frozen=True)
class FeatureConfig:
    text_dim: int = 64
    speaker_dim: int = 8
    position_dim: int = 4
    position_bins: int = 4
    semantic_dim: int = 8
    n_semantic_types: int = N_SEMANTIC_TYPES
    # minimum token-set Jaccard for a mention to feed the semantic segment
    jaccard_min: float = 0.8

    def __post_init__(self):
        for name in ("text_dim", "speaker_dim", "position_dim", "position_bins",
                     "semantic_dim", "n_semantic_types"):
            if getattr(self, name) < 1:
                raise ValueError(f"{name} must be >= 1")
        if not 0.0 < self.jaccard_min <= 1.0:
            raise ValueError("jaccard_min must be in (0, 1]")

    @property
    def dim(self) -> int:
        return self.text_dim + self.speaker_dim + self.position_dim + self.semantic_dim

    @property
    def offsets(self) -> tuple[int, int, int, int, int]:
        a = self.text_dim
        b = a + self.speaker_dim
        c = b + self.position_dim
        return (0, a, b, c, c + self.semantic_dim)


@dataclass
class EmbeddingTable:
    weights: np.ndarray
    trainable: bool = True

    @property
    def rows(self) -> int:
        return self.weights.shape[0]

    @property
    def dim(self) -> int:
        return self.weights.shape[1]

    def lookup(self, i: int) -> np.ndarray:
        if not 0 <= i < self.rows:
            raise IndexError(f"embedding index {i} out of range [0, {self.rows})")
        return self.weights[i]

    @classmethod
    def uniform(cls, rows: int, dim: int, rng: Rng, scale: float = 0.1) -> "EmbeddingTable":
        return cls(rng.uniform_array((rows, dim), -scale, scale))

    @classmethod
    def zeros(cls, rows: int, dim: int) -> "EmbeddingTable":
        return cls(np.zeros((rows, dim)))


@dataclass
class FeatureTables:
    speaker: EmbeddingTable
    position: EmbeddingTable
    semantic: EmbeddingTable

    @classmethod
    def init(cls, cfg: FeatureConfig, seed: int) -> "FeatureTables":
        rng = Rng(seed)
        return cls(
            speaker=EmbeddingTable.uniform(N_SPEAKERS, cfg.speaker_dim, rng),
            position=EmbeddingTable.uniform(cfg.position_bins, cfg.position_dim, rng),
            semantic=EmbeddingTable.uniform(cfg.n_semantic_types, cfg.semantic_dim, rng),
        )


@dataclass(frozen=True)
class FeatureBundle:
    vector: np.ndarray
    offsets: tuple[int, int, int, int, int]

    def segment(self, name: str) -> np.ndarray:
        i = ("text", "speaker", "position", "semantic").index(name)
        return self.vector[self.offsets[i]:self.offsets[i + 1]]


def position_bin(index: int, n: int, k: int) -> int:
    if k < 1:
        raise ValueError("k must be >= 1")
    if not 0 <= index < n:
        raise ValueError(f"index {index} outside conversation of length {n}")
    return min(k * index // n, k - 1)


def semantic_type_vector(mentions, table: EmbeddingTable) -> np.ndarray:
    if not mentions:
        return np.zeros(table.dim)
    return np.mean([table.lookup(t) for t in mentions], axis=0)


class HashedTextEncoder:
    def __init__(self, dim: int):
        self.dim = dim

    def encode(self, conv_id: str, index: int, text: str) -> np.ndarray:
        return encode_text_hashed(text, self.dim)


class PrecomputedEmbeddings:
    """Utterance vectors produced by an external encoder."""

    def __init__(self, vectors: dict):
        dims = {len(v) for v in vectors.values()}
        if len(dims) > 1:
            raise ValueError(f"inconsistent embedding dimensions {sorted(dims)}")
        self.vectors = vectors
        self.dim = dims.pop() if dims else 0

    def encode(self, conv_id: str, index: int, text: str) -> np.ndarray:
        try:
            return self.vectors[(conv_id, index)]
        except KeyError:
            raise KeyError(f"no precomputed embedding for ({conv_id}, {index})") from None

    def check_covers(self, convs) -> None:
        for conv in convs:
            for u in conv.utterances:
                if (conv.id, u.index) not in self.vectors:
                    raise KeyError(f"no precomputed embedding for ({conv.id}, {u.index})")


def load_precomputed_embeddings(path, convs=None) -> PrecomputedEmbeddings:
    vectors = {}
    with open(path, newline="") as fh:
        reader = csv.reader(fh, delimiter="\t")
        header = next(reader)
        if header[:2] != ["conv_id", "utt_idx"]:
            raise ValueError(f"{path}: header must start with conv_id, utt_idx")
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            try:
                vectors[(row[0], int(row[1]))] = np.array([float(x) for x in row[2:]])
            except ValueError as exc:
                raise ValueError(f"{path}: line {lineno}: {exc}") from exc
    emb = PrecomputedEmbeddings(vectors)
    if convs is not None:
        emb.check_covers(convs)
    return emb


def write_precomputed_embeddings(vectors: dict, path) -> None:
    dim = len(next(iter(vectors.values())))
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, delimiter="\t", lineterminator="\n")
        w.writerow(["conv_id", "utt_idx"] + [f"d{i}" for i in range(dim)])
        for (cid, idx), vec in vectors.items():
            w.writerow([cid, idx] + [repr(float(x)) for x in vec])


@dataclass
class ConversationInputs:
    """Static (non-trainable) per-utterance inputs of one conversation."""

    conv_id: str
    text: np.ndarray  # (n, text_dim)
    speakers: np.ndarray  # (n,) int
    positions: np.ndarray  # (n,) int
    semantic: list  # per utterance, list of semantic-type ids
    targets: np.ndarray  # (n, 3) fine labels in TASKS order

    def __len__(self):
        return len(self.speakers)


def prepare_inputs(conv: Conversation, cfg: FeatureConfig, text_source, dictionary=None) -> ConversationInputs:
    n = len(conv)
    text = np.stack([text_source.encode(conv.id, u.index, u.text) for u in conv.utterances])
    if text.shape[1] != cfg.text_dim:
        raise ValueError(f"text vectors have dim {text.shape[1]}, config expects {cfg.text_dim}")
    if dictionary is not None:
        from .extract.matcher import mentions_to_semantic_types

        semantic = mentions_to_semantic_types(conv, dictionary, cfg.jaccard_min)
    else:
        semantic = [[] for _ in range(n)]
    for types in semantic:
        for t in types:
            if not 0 <= t < cfg.n_semantic_types:
                raise ValueError(f"semantic type id {t} outside table of {cfg.n_semantic_types} rows")
    return ConversationInputs(
        conv_id=conv.id,
        text=text,
        speakers=np.array([int(u.speaker) for u in conv.utterances], dtype=np.int64),
        positions=np.array([position_bin(i, n, cfg.position_bins) for i in range(n)], dtype=np.int64),
        semantic=semantic,
        targets=np.array([u.labels.as_vector() for u in conv.utterances]).reshape(n, len(TASKS)),
    )


def build_features(conv: Conversation, cfg: FeatureConfig, tables: FeatureTables | None, text_source,
                   dictionary=None, no_context: bool = False) -> list[FeatureBundle]:
    """One bundle per utterance, segments ordered text/speaker/position/semantic.

    ``tables=None`` or ``no_context`` zeroes the three contextual segments.
    """
    inputs = prepare_inputs(conv, cfg, text_source, dictionary)
    bundles = []
    for i in range(len(conv)):
        if tables is None or no_context:
            ctx = np.zeros(cfg.speaker_dim + cfg.position_dim + cfg.semantic_dim)
        else:
            ctx = np.concatenate([
                tables.speaker.lookup(int(inputs.speakers[i])),
                tables.position.lookup(int(inputs.positions[i])),
                semantic_type_vector(inputs.semantic[i], tables.semantic),
            ])
        bundles.append(FeatureBundle(np.concatenate([inputs.text[i], ctx]), cfg.offsets))
    return bundles
