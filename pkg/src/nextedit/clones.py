"""Token-based clone search over a project.

Similarity is multiset Jaccard over the token stream with identifiers
collapsed to a placeholder; keywords, literals, and punctuation keep their
text, so structure dominates but renamed copies still match.
"""
from __future__ import annotations

from collections import Counter
from dataclasses import dataclass

from .core import Project
from .lexing import normalize_tokens, tokenize_line


@dataclass(frozen=True)
class CloneHit:
    file: str
    span: tuple[int, int]
    similarity: float
    lines: tuple[str, ...]


def token_bag(lines, language: str) -> Counter:
    bag: Counter = Counter()
    for line in lines:
        bag.update(normalize_tokens(tokenize_line(line), language))
    return bag


def bag_jaccard(a: Counter, b: Counter) -> float:
    if not a and not b:
        return 1.0
    inter = sum((a & b).values())
    union = sum((a | b).values())
    return inter / union if union else 0.0


def line_similarity(a: str, b: str, language: str) -> float:
    return bag_jaccard(token_bag([a], language), token_bag([b], language))


def detect_clones(
    needle: list[str] | tuple[str, ...],
    project: Project,
    min_similarity: float = 0.7,
    exclude: tuple[str, tuple[int, int]] | None = None,
) -> list[CloneHit]:
    """All |needle|-line windows with token similarity >= min_similarity.

    ``exclude`` drops hits overlapping the needle's own (file, span). Hits
    are ordered by (file, line); they carry the similarity but no rank beyond
    it.
    """
    if not needle:
        raise ValueError("needle must be nonempty")
    if not 0 < min_similarity <= 1:
        raise ValueError("min_similarity must be in (0, 1]")
    language = project.language
    needle_bag = token_bag(needle, language)
    if not needle_bag:
        return []  # a token-free needle carries no clone signal
    width = len(needle)
    hits = []
    for path in sorted(project.files):
        lines = project.files[path]
        if len(lines) < width:
            continue
        line_bags = [token_bag([l], language) for l in lines]
        window = Counter()
        for i in range(len(lines)):
            window.update(line_bags[i])
            if i >= width:
                window.subtract(line_bags[i - width])
                window += Counter()  # drop zero/negative entries
            if i < width - 1:
                continue
            start = i - width + 2  # 1-based first line of the window
            span = (start, start + width - 1)
            if exclude and exclude[0] == path:
                lo, hi = exclude[1]
                if span[0] <= hi and lo <= span[1]:
                    continue
            sim = bag_jaccard(needle_bag, window)
            if sim >= min_similarity:
                hits.append(
                    CloneHit(
                        file=path,
                        span=span,
                        similarity=sim,
                        lines=tuple(lines[span[0] - 1 : span[1]]),
                    )
                )
    return hits
