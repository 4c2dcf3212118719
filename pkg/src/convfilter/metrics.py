"""Ranking and extraction metrics: step-wise average precision, PR curves, F1."""
from __future__ import annotations

import csv
import logging
import os
from dataclasses import dataclass, field

import numpy as np

from .corpus import TASKS

log = logging.getLogger(__name__)

PR_HEADER = ["threshold", "precision", "recall"]
SUMMARY_HEADER = ["class", "ap"]


def fmt(x) -> str:
    return f"{float(x):.9g}"


@dataclass
class PRCurve:
    """Operating points at each distinct score, highest threshold first."""

    thresholds: np.ndarray
    precision: np.ndarray
    recall: np.ndarray

    @property
    def average_precision(self) -> float:
        return curve_area(self.precision, self.recall)

    def write_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(PR_HEADER)
            for t, p, r in zip(self.thresholds, self.precision, self.recall):
                w.writerow([fmt(t), fmt(p), fmt(r)])


def curve_area(precision, recall) -> float:
    """Step-wise area: sum of (R_k - R_{k-1}) * P_k with R_0 = 0."""
    r = np.concatenate([[0.0], np.asarray(recall, dtype=np.float64)])
    return float(np.sum(np.diff(r) * np.asarray(precision, dtype=np.float64)))


def _check(scores, labels):
    s = np.asarray(scores, dtype=np.float64).ravel()
    y = np.asarray(labels).astype(bool).ravel()
    if s.shape != y.shape:
        raise ValueError(f"{len(s)} scores but {len(y)} labels")
    if not np.all(np.isfinite(s)):
        raise ValueError("scores must be finite")
    if not y.any():
        raise ValueError("average precision needs at least one positive label")
    return s, y


def pr_curve(scores, labels) -> PRCurve:
    s, y = _check(scores, labels)
    # stable descending sort: equal scores keep their original order
    order = np.argsort(-s, kind="stable")
    s, y = s[order], y[order]
    tp = np.cumsum(y)
    # one operating point per distinct score, taken at the last item of each tie block
    last = np.r_[s[1:] != s[:-1], True]
    k = np.flatnonzero(last)
    tp_k = tp[k].astype(np.float64)
    return PRCurve(s[k], tp_k / (k + 1), tp_k / tp[-1])


def average_precision(scores, labels) -> float:
    """Step-wise AP.

    Items are ranked by descending score, ties by original index.  Recall
    only moves once a whole block of tied scores has been passed, so a
    constant score gives AP equal to the positive rate; with distinct
    scores this is the usual sum of precision at each positive's rank
    divided by the number of positives.
    """
    return pr_curve(scores, labels).average_precision


def per_class_ap(probs, gold, classes=TASKS) -> dict:
    """AP per class; None for classes without positives."""
    probs = np.asarray(probs, dtype=np.float64)
    gold = np.asarray(gold)
    if probs.ndim != 2 or probs.shape[1] != len(classes) or probs.shape != gold.shape:
        raise ValueError(f"expected (N, {len(classes)}) probabilities and labels")
    out = {}
    for j, name in enumerate(classes):
        out[name] = average_precision(probs[:, j], gold[:, j]) if gold[:, j].any() else None
    return out


def mean_pr_auc(probs, gold, classes=TASKS) -> float:
    """Unweighted mean of per-class AP; classes without positives are skipped."""
    aps = per_class_ap(probs, gold, classes)
    kept = [v for v in aps.values() if v is not None]
    skipped = [k for k, v in aps.items() if v is None]
    if skipped:
        log.warning("no positives for %s; excluded from mean PR-AUC", ", ".join(skipped))
    if not kept:
        raise ValueError("no class has a positive label")
    return float(np.mean(kept))


def prevalence_baseline(gold, classes=TASKS) -> float:
    """Mean PR-AUC of a constant scorer: mean positive rate over classes with positives."""
    gold = np.asarray(gold, dtype=np.float64)
    rates = [gold[:, j].mean() for j in range(len(classes)) if gold[:, j].any()]
    return float(np.mean(rates))


def export_pr_curves(probs, gold, out_dir, classes=TASKS, prefix: str = "pr") -> dict:
    """Write ``{prefix}_{class}.csv`` per class and ``{prefix}_summary.csv``.

    Returns class -> written path (classes without positives are skipped).
    """
    os.makedirs(out_dir, exist_ok=True)
    probs = np.asarray(probs, dtype=np.float64)
    gold = np.asarray(gold)
    written = {}
    rows = []
    for j, name in enumerate(classes):
        if not gold[:, j].any():
            log.warning("no positives for %s; no curve written", name)
            continue
        curve = pr_curve(probs[:, j], gold[:, j])
        path = os.path.join(out_dir, f"{prefix}_{name}.csv")
        curve.write_csv(path)
        written[name] = path
        rows.append((name, curve.average_precision))
    with open(os.path.join(out_dir, f"{prefix}_summary.csv"), "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(SUMMARY_HEADER)
        for name, ap in rows:
            w.writerow([name, fmt(ap)])
    return written


def read_pr_curve(path) -> PRCurve:
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    if not rows or rows[0] != PR_HEADER:
        raise ValueError(f"{path}: expected header {','.join(PR_HEADER)}")
    data = np.array([[float(x) for x in r] for r in rows[1:]]).reshape(-1, 3)
    return PRCurve(data[:, 0], data[:, 1], data[:, 2])


@dataclass
class ExtractionScore:
    micro_f1: float
    macro_f1: float
    per_label: dict = field(default_factory=dict)  # label -> (precision, recall, f1)
    tp: int = 0
    fp: int = 0
    fn: int = 0


def _prf(tp: int, fp: int, fn: int) -> tuple[float, float, float]:
    p = tp / (tp + fp) if tp + fp else 0.0
    r = tp / (tp + fn) if tp + fn else 0.0
    f = 2 * tp / (2 * tp + fp + fn) if tp else 0.0
    return p, r, f


def extraction_f1(predicted, gold, labels) -> ExtractionScore:
    """Conversation-level F1 over (conversation, label) decisions.

    ``predicted`` and ``gold`` are aligned sequences of label sets.  Macro F1
    averages over every label in ``labels``; a label never predicted and
    never gold scores 0.
    """
    if len(predicted) != len(gold):
        raise ValueError(f"{len(predicted)} predictions for {len(gold)} conversations")
    labels = list(labels)
    known = set(labels)
    counts = {lab: [0, 0, 0] for lab in labels}
    for pred, g in zip(predicted, gold):
        pred, g = set(pred), set(g)
        unknown = (pred | g) - known
        if unknown:
            raise ValueError(f"unknown extraction label {sorted(unknown)[0]!r}")
        for lab in pred & g:
            counts[lab][0] += 1
        for lab in pred - g:
            counts[lab][1] += 1
        for lab in g - pred:
            counts[lab][2] += 1
    tp = sum(c[0] for c in counts.values())
    fp = sum(c[1] for c in counts.values())
    fn = sum(c[2] for c in counts.values())
    per_label = {lab: _prf(*counts[lab]) for lab in labels}
    macro = float(np.mean([v[2] for v in per_label.values()])) if labels else 0.0
    return ExtractionScore(_prf(tp, fp, fn)[2], macro, per_label, tp, fp, fn)
