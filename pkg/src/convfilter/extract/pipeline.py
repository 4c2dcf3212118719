"""Conversation-level extraction with classifier-driven utterance filtering."""
from __future__ import annotations

import csv
from dataclasses import dataclass

import numpy as np

from ..corpus import TASKS
from ..metrics import ExtractionScore, extraction_f1, fmt
from .dictionary import ConceptDictionary
from .labels import EXTRACTION_LABELS, resolve_label
from .matcher import match_concepts

MODES = ("all-text", "mr", "category", "oracle-mr", "oracle-category")
ORACLE_MODES = ("oracle-mr", "oracle-category")
SWEEP_MODES = ("mr", "category")
SWEEP_HEADER = ["mode", "tau", "micro_f1", "macro_f1"]


@dataclass(frozen=True)
class FilterSpec:
    """Which utterances reach the extractor.

    ``mr_source`` picks the relevance score for the MR modes: the coarse
    head ("coarse") or the largest fine probability ("union").
    """

    mode: str = "all-text"
    tau: float = 0.5
    category: str | None = None
    mr_source: str = "coarse"

    def __post_init__(self):
        if self.mode not in MODES:
            raise ValueError(f"unknown filter mode {self.mode!r}; expected one of {', '.join(MODES)}")
        if not 0.0 <= self.tau <= 1.0:
            raise ValueError("tau must be in [0, 1]")
        if self.mode in ("category", "oracle-category") and self.category not in TASKS:
            raise ValueError(f"{self.mode} needs a category in {TASKS}")
        if self.mr_source not in ("coarse", "union"):
            raise ValueError("mr_source must be 'coarse' or 'union'")


def relevance_scores(fine, coarse, source: str = "coarse") -> np.ndarray:
    if source == "coarse":
        if coarse is None:
            raise ValueError("model has no coarse head; use the union relevance score")
        return np.asarray(coarse)[:, 1]
    return np.asarray(fine).max(axis=1)


def filter_utterances(conv, spec: FilterSpec, fine=None, coarse=None) -> list[int]:
    """Indices of the utterances kept by ``spec``, in conversation order.

    ``fine`` is (n, 3) in TASKS order, ``coarse`` is (n, 2) with the
    relevant class second.
    """
    n = len(conv)
    if spec.mode == "all-text":
        return list(range(n))
    if spec.mode == "oracle-mr":
        return [u.index for u in conv.utterances if u.labels.relevant]
    if spec.mode == "oracle-category":
        return [u.index for u in conv.utterances if u.labels.has(spec.category)]
    if fine is None:
        raise ValueError(f"filter mode {spec.mode} needs model probabilities")
    fine = np.asarray(fine)
    if fine.shape != (n, len(TASKS)):
        raise ValueError(f"expected ({n}, {len(TASKS)}) fine probabilities, got {fine.shape}")
    if spec.mode == "mr":
        score = relevance_scores(fine, coarse, spec.mr_source)
    else:
        score = fine[:, TASKS.index(spec.category)]
    return [int(i) for i in np.flatnonzero(score >= spec.tau)]


def extract_labels(conv, subset, dictionary: ConceptDictionary, task: str, labels=None) -> set:
    """Task labels of the exact (similarity 1) dictionary matches inside ``subset``."""
    if task not in TASKS:
        raise ValueError(f"unknown task {task!r}")
    labels = EXTRACTION_LABELS[task] if labels is None else labels
    out = set()
    for i in subset:
        u = conv.utterances[i]
        for m in match_concepts(u.text, dictionary, 1.0, conv.id, u.index):
            if m.similarity == 1.0 and m.task == task:
                lab = resolve_label(task, m.label, labels)
                if lab is not None:
                    out.add(lab)
    return out


def run_extraction(convs, spec: FilterSpec, dictionary: ConceptDictionary, task: str,
                   predictions=None, labels=None):
    """Filter, extract and score every conversation.

    ``predictions`` aligns with ``convs`` as (fine, coarse) pairs; it may be
    None for the all-text and oracle modes.  Returns (per-conversation
    (kept indices, predicted labels), ExtractionScore).
    """
    labels = EXTRACTION_LABELS[task] if labels is None else labels
    rows, predicted = [], []
    for k, conv in enumerate(convs):
        fine, coarse = (None, None) if predictions is None else predictions[k]
        kept = filter_utterances(conv, spec, fine, coarse)
        found = extract_labels(conv, kept, dictionary, task, labels)
        rows.append((kept, found))
        predicted.append(found)
    gold = [set(c.gold_extraction.get(task, ())) for c in convs]
    return rows, extraction_f1(predicted, gold, labels)


@dataclass(frozen=True)
class SweepRow:
    mode: str
    tau: float
    score: ExtractionScore


def threshold_sweep(convs, predictions, dictionary: ConceptDictionary, task: str, taus,
                    labels=None, modes=SWEEP_MODES, mr_source: str = "coarse") -> list[SweepRow]:
    """Scores for every (mode, tau); the category mode filters on ``task``'s own probability."""
    rows = []
    for mode in modes:
        for tau in taus:
            spec = FilterSpec(mode, float(tau), task if mode == "category" else None, mr_source)
            _, score = run_extraction(convs, spec, dictionary, task, predictions, labels)
            rows.append(SweepRow(mode, float(tau), score))
    return rows


def best_rows(rows) -> dict:
    """Per mode, the first row with the highest micro F1."""
    best = {}
    for r in rows:
        if r.mode not in best or r.score.micro_f1 > best[r.mode].score.micro_f1:
            best[r.mode] = r
    return best


def write_sweep_csv(rows, path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(SWEEP_HEADER)
        for r in rows:
            w.writerow([r.mode, fmt(r.tau), fmt(r.score.micro_f1), fmt(r.score.macro_f1)])


def read_sweep_csv(path) -> list[tuple[str, float, float, float]]:
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    if not rows or rows[0] != SWEEP_HEADER:
        raise ValueError(f"{path}: expected header {','.join(SWEEP_HEADER)}")
    return [(r[0], float(r[1]), float(r[2]), float(r[3])) for r in rows[1:]]
