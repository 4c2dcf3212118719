"""Concept dictionary: surface forms -> concept ids -> semantic types -> task labels."""
from __future__ import annotations

import csv
from collections import defaultdict
from dataclasses import dataclass
from importlib import resources

from ..corpus import TASKS
from ..text import tokenize

HEADER = ["surface", "concept_id", "semantic_type", "task", "label"]
HEADER_LINE = "\t".join(HEADER)


@dataclass(frozen=True)
class ConceptEntry:
    surface: tuple[str, ...]
    concept_id: str
    semantic_type: int
    task: str
    label: str

    @property
    def surface_text(self) -> str:
        return " ".join(self.surface)


class ConceptDictionary:
    def __init__(self, entries):
        self.entries: list[ConceptEntry] = []
        self._by_surface: dict[tuple, list[ConceptEntry]] = defaultdict(list)
        self._by_token: dict[str, set] = defaultdict(set)
        seen = set()
        for e in entries:
            if not e.surface:
                raise ValueError(f"empty surface form for concept {e.concept_id}")
            if e.task not in TASKS:
                raise ValueError(f"unknown task {e.task!r} for concept {e.concept_id}")
            key = (e.surface, e.concept_id)
            if key in seen:
                raise ValueError(f"duplicate entry ({e.surface_text!r}, {e.concept_id})")
            seen.add(key)
            self.entries.append(e)
            self._by_surface[e.surface].append(e)
            for tok in e.surface:
                self._by_token[tok].add(e.surface)
        if not self.entries:
            raise ValueError("concept dictionary is empty")
        self.max_surface_len = max(len(e.surface) for e in self.entries)
        self._cache: dict = {}

    def __len__(self):
        return len(self.entries)

    def lookup(self, surface: tuple) -> list[ConceptEntry]:
        return self._by_surface.get(tuple(surface), [])

    def surfaces_sharing_token(self, tokens) -> set:
        out = set()
        for tok in tokens:
            out |= self._by_token.get(tok, set())
        return out

    def by_task(self, task: str) -> list[ConceptEntry]:
        return [e for e in self.entries if e.task == task]


def _entry_from_row(row: dict) -> ConceptEntry:
    return ConceptEntry(
        surface=tuple(tokenize(row["surface"])),
        concept_id=row["concept_id"],
        semantic_type=int(row["semantic_type"]),
        task=row["task"],
        label=row["label"] or "",
    )


def load_dictionary(path) -> ConceptDictionary:
    with open(path, newline="", encoding="utf-8") as fh:
        return _read(fh, str(path))


def _read(fh, name: str) -> ConceptDictionary:
    reader = csv.DictReader(fh, delimiter="\t")
    if reader.fieldnames != HEADER:
        raise ValueError(f"{name}: dictionary header must be {HEADER_LINE!r}")
    entries = []
    for lineno, row in enumerate(reader, start=2):
        try:
            entries.append(_entry_from_row(row))
        except (TypeError, ValueError) as exc:
            raise ValueError(f"{name}: line {lineno}: {exc}") from exc
    return ConceptDictionary(entries)


def default_dictionary() -> ConceptDictionary:
    """The bundled synthetic dictionary (~200 entries)."""
    ref = resources.files("convfilter.data").joinpath("synthetic_dictionary.tsv")
    with ref.open("r", encoding="utf-8", newline="") as fh:
        return _read(fh, "synthetic_dictionary.tsv")
