"""Sliding-window dictionary matcher (token-set Jaccard candidates, exact similarity-1)."""
from __future__ import annotations

import math
from dataclasses import dataclass

from ..text import tokenize
from .dictionary import ConceptDictionary

# non-exact matches never report similarity 1, even for permuted token sequences
_BELOW_ONE = math.nextafter(1.0, 0.0)


@dataclass(frozen=True)
class ConceptMention:
    conv_id: str
    utterance_index: int
    start: int
    end: int  # exclusive token offset
    surface: str
    concept_id: str
    semantic_type: int
    task: str
    label: str
    similarity: float


def jaccard(a, b) -> float:
    a, b = set(a), set(b)
    if not a and not b:
        return 1.0
    return len(a & b) / len(a | b)


def _candidates(tokens, dictionary: ConceptDictionary, jaccard_min: float):
    """Best-scoring (start, end, surface, similarity) per token window."""
    out = []
    n = len(tokens)
    for start in range(n):
        for length in range(1, min(dictionary.max_surface_len, n - start) + 1):
            window = tuple(tokens[start:start + length])
            if dictionary.lookup(window):
                out.append((start, start + length, window, 1.0))
                continue
            best = None
            for surface in sorted(dictionary.surfaces_sharing_token(window)):
                sim = jaccard(window, surface)
                if sim >= jaccard_min and (best is None or sim > best[1]):
                    best = (surface, sim)
            if best is not None:
                out.append((start, start + length, best[0], min(best[1], _BELOW_ONE)))
    return out


def match_concepts(text: str, dictionary: ConceptDictionary, jaccard_min: float = 0.8,
                   conv_id: str = "", utterance_index: int = 0) -> list[ConceptMention]:
    """Non-overlapping concept mentions in ``text``, ordered by token offset.

    Overlaps are resolved longest span first, then leftmost, then higher
    similarity.  Every dictionary entry sharing the winning surface form
    yields one mention.
    """
    if not 0.0 < jaccard_min <= 1.0:
        raise ValueError("jaccard_min must be in (0, 1]")
    key = (text, jaccard_min)
    spans = dictionary._cache.get(key)
    if spans is None:
        cands = _candidates(tokenize(text), dictionary, jaccard_min)
        cands.sort(key=lambda c: (-(c[1] - c[0]), c[0], -c[3], c[2]))
        taken = []
        for start, end, surface, sim in cands:
            if all(end <= s or start >= e for s, e, _, _ in taken):
                taken.append((start, end, surface, sim))
        spans = sorted(taken)
        dictionary._cache[key] = spans
    mentions = []
    for start, end, surface, sim in spans:
        for e in dictionary.lookup(surface):
            mentions.append(ConceptMention(conv_id, utterance_index, start, end, e.surface_text,
                                           e.concept_id, e.semantic_type, e.task, e.label, sim))
    return mentions


def mentions_to_semantic_types(conv, dictionary: ConceptDictionary, jaccard_min: float = 0.8) -> list[list[int]]:
    """Per-utterance semantic-type ids, one per mention (duplicates kept)."""
    return [
        [m.semantic_type for m in match_concepts(u.text, dictionary, jaccard_min, conv.id, u.index)]
        for u in conv.utterances
    ]
