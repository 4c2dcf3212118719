"""Conversation data model, JSONL corpus I/O, splitting and statistics."""
from __future__ import annotations

import csv
import enum
import json
import math
from dataclasses import dataclass, field

from .rng import Rng

TASKS = ("SYM", "MED", "COM")
# column order of fine labels everywhere in the package
CATEGORY_NAMES = {"SYM": "symptoms", "COM": "complaints", "MED": "medications"}


class CorpusError(ValueError):
    """Malformed corpus content."""


class SpeakerRole(enum.IntEnum):
    DOCTOR = 0
    PATIENT = 1
    OTHER = 2

    @property
    def code(self) -> str:
        return _ROLE_CODES[self]

    @classmethod
    def from_code(cls, code: str) -> "SpeakerRole":
        try:
            return _CODE_ROLES[code]
        except KeyError:
            raise CorpusError(f"unknown speaker code {code!r}") from None


_ROLE_CODES = {SpeakerRole.DOCTOR: "DR", SpeakerRole.PATIENT: "PT", SpeakerRole.OTHER: "OT"}
_CODE_ROLES = {v: k for k, v in _ROLE_CODES.items()}


@dataclass(frozen=True)
class FineLabelSet:
    symptoms: bool = False
    complaints: bool = False
    medications: bool = False

    @classmethod
    def from_codes(cls, codes) -> "FineLabelSet":
        codes = set(codes)
        unknown = codes - set(TASKS)
        if unknown:
            raise CorpusError(f"unknown label code(s) {sorted(unknown)}")
        return cls(symptoms="SYM" in codes, complaints="COM" in codes, medications="MED" in codes)

    def codes(self) -> list[str]:
        return [t for t in TASKS if self.has(t)]

    def has(self, task: str) -> bool:
        if task == "SYM":
            return self.symptoms
        if task == "COM":
            return self.complaints
        if task == "MED":
            return self.medications
        raise KeyError(task)

    def as_vector(self) -> tuple[float, float, float]:
        """Fine targets in TASKS order (SYM, MED, COM)."""
        return tuple(1.0 if self.has(t) else 0.0 for t in TASKS)

    @property
    def relevant(self) -> bool:
        return self.symptoms or self.complaints or self.medications


@dataclass(frozen=True)
class Utterance:
    index: int
    speaker: SpeakerRole
    text: str
    labels: FineLabelSet = FineLabelSet()


@dataclass(frozen=True)
class Conversation:
    id: str
    utterances: tuple[Utterance, ...]
    gold_extraction: dict = field(default_factory=lambda: {t: () for t in TASKS})

    def __post_init__(self):
        if not self.utterances:
            raise CorpusError(f"conversation {self.id!r} has no utterances")
        for i, u in enumerate(self.utterances):
            if u.index != i:
                raise CorpusError(
                    f"conversation {self.id!r}: utterance indices must be 0..n-1 without gaps "
                    f"(position {i} has idx {u.index})"
                )

    def __len__(self):
        return len(self.utterances)

    @property
    def speakers(self) -> list[SpeakerRole]:
        return [u.speaker for u in self.utterances]

    def validate_labels(self, label_map) -> None:
        for task, labels in self.gold_extraction.items():
            allowed = label_map[task]
            for lab in labels:
                if lab not in allowed:
                    raise CorpusError(f"conversation {self.id!r}: unknown {task} label {lab!r}")


def conversation_from_record(rec: dict) -> Conversation:
    utts = []
    for u in rec["utterances"]:
        utts.append(
            Utterance(
                index=int(u["idx"]),
                speaker=SpeakerRole.from_code(u["speaker"]),
                text=str(u["text"]),
                labels=FineLabelSet.from_codes(u.get("labels", [])),
            )
        )
    gold = rec.get("gold_extraction", {})
    unknown = set(gold) - set(TASKS)
    if unknown:
        raise CorpusError(f"unknown extraction task(s) {sorted(unknown)}")
    gold = {t: tuple(gold.get(t, ())) for t in TASKS}
    return Conversation(id=str(rec["id"]), utterances=tuple(utts), gold_extraction=gold)


def conversation_to_record(conv: Conversation) -> dict:
    return {
        "id": conv.id,
        "utterances": [
            {"idx": u.index, "speaker": u.speaker.code, "text": u.text, "labels": u.labels.codes()}
            for u in conv.utterances
        ],
        "gold_extraction": {t: list(conv.gold_extraction.get(t, ())) for t in TASKS},
    }


def parse_corpus(path, label_map=None) -> list[Conversation]:
    """Read a JSONL corpus; errors carry the 1-based line number."""
    convs = []
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                conv = conversation_from_record(json.loads(line))
                if label_map is not None:
                    conv.validate_labels(label_map)
            except (json.JSONDecodeError, KeyError, TypeError, ValueError) as exc:
                raise CorpusError(f"line {lineno}: {exc}") from exc
            convs.append(conv)
    return convs


def format_conversation(conv: Conversation) -> str:
    return json.dumps(conversation_to_record(conv), ensure_ascii=False, separators=(",", ":"))


def write_corpus(convs, path) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        for conv in convs:
            fh.write(format_conversation(conv))
            fh.write("\n")


def split_corpus(convs, n_val: int, n_test: int, seed: int):
    """Seeded disjoint (train, val, test) partition; input order is kept inside each part."""
    if n_val < 0 or n_test < 0:
        raise ValueError("split counts must be non-negative")
    if n_val + n_test > len(convs):
        raise ValueError(f"n_val + n_test = {n_val + n_test} exceeds corpus size {len(convs)}")
    order = Rng(seed).shuffle(list(range(len(convs))))
    val_idx = sorted(order[:n_val])
    test_idx = sorted(order[n_val:n_val + n_test])
    train_idx = sorted(order[n_val + n_test:])
    pick = lambda idx: [convs[i] for i in idx]  # noqa: E731
    return pick(train_idx), pick(val_idx), pick(test_idx)


@dataclass
class CorpusStats:
    conversation_count: int
    utterances_min: int
    utterances_mean: float
    utterances_max: int
    # keyed by task code
    mean_counts: dict
    mean_fractions: dict
    mean_first_position: dict

    def rows(self) -> list[tuple[str, float]]:
        rows = [
            ("conversation_count", self.conversation_count),
            ("utterances_min", self.utterances_min),
            ("utterances_mean", self.utterances_mean),
            ("utterances_max", self.utterances_max),
        ]
        for t in TASKS:
            rows.append((f"{t}_mean_count", self.mean_counts[t]))
            rows.append((f"{t}_mean_fraction", self.mean_fractions[t]))
            rows.append((f"{t}_mean_first_position", self.mean_first_position[t]))
        return rows

    def write_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["metric", "value"])
            for name, value in self.rows():
                w.writerow([name, _fmt(value)])


def _fmt(value) -> str:
    if isinstance(value, float):
        return "nan" if math.isnan(value) else f"{value:.9g}"
    return str(value)


def compute_stats(convs) -> CorpusStats:
    if not convs:
        raise ValueError("compute_stats needs at least one conversation")
    lengths = [len(c) for c in convs]
    counts = {t: [] for t in TASKS}
    fractions = {t: [] for t in TASKS}
    first = {t: [] for t in TASKS}
    for conv in convs:
        n = len(conv)
        for t in TASKS:
            hits = [u.index for u in conv.utterances if u.labels.has(t)]
            counts[t].append(len(hits))
            fractions[t].append(len(hits) / n)
            if hits:
                first[t].append(hits[0] / n)
    mean = lambda xs: sum(xs) / len(xs) if xs else float("nan")  # noqa: E731
    return CorpusStats(
        conversation_count=len(convs),
        utterances_min=min(lengths),
        utterances_mean=mean(lengths),
        utterances_max=max(lengths),
        mean_counts={t: mean(counts[t]) for t in TASKS},
        mean_fractions={t: mean(fractions[t]) for t in TASKS},
        mean_first_position={t: mean(first[t]) for t in TASKS},
    )


def read_stats_csv(path) -> dict:
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    if rows[0] != ["metric", "value"]:
        raise CorpusError(f"{path}: bad stats header")
    return {name: float(value) for name, value in rows[1:]}
