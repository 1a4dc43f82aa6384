"""Edit location: sliding windows, prior-edit selection, label prediction.

The locator predicts one inline label per window line and one inter label per
gap. Two backends ship: a clone-similarity baseline (replace-style hits only,
cannot rank) and an adapter for an external scorer speaking the JSON wire
format documented on ExternalLocatorBackend.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

from .bm25 import BM25Index
from .core import Edit, EditSession, Project
from .clones import line_similarity
from .enrich import INLINE_LABELS, INTER_LABELS, KEEP, NULL, REPLACE
from .errors import BackendUnavailable, LengthMismatch
from .lexing import tokenize_line


@dataclass(frozen=True)
class CodeWindow:
    file: str
    span: tuple[int, int]  # 1-based inclusive
    lines: tuple[str, ...]
    language: str = "python"

    def __post_init__(self):
        if len(self.lines) != self.span[1] - self.span[0] + 1:
            raise ValueError("window span does not match line count")


@dataclass(frozen=True)
class LabelSequence:
    """|inter| == |inline| + 1; confidences are per-position, same layout."""

    inline: tuple[str, ...]
    inter: tuple[str, ...]
    inline_conf: tuple[float, ...]
    inter_conf: tuple[float, ...]
    window: CodeWindow | None = None

    def __post_init__(self):
        if len(self.inter) != len(self.inline) + 1:
            raise ValueError("label length law violated")
        if len(self.inline_conf) != len(self.inline) or len(self.inter_conf) != len(self.inter):
            raise ValueError("confidence length mismatch")

    def has_edit(self) -> bool:
        return any(l != KEEP for l in self.inline) or any(l != NULL for l in self.inter)

    def window_score(self) -> float:
        """Cross-window ranking score: max confidence on a non-KEEP/non-NULL
        position; 0.0 for an all-quiet window."""
        score = 0.0
        for l, c in zip(self.inline, self.inline_conf):
            if l != KEEP:
                score = max(score, c)
        for l, c in zip(self.inter, self.inter_conf):
            if l != NULL:
                score = max(score, c)
        return score


@dataclass(frozen=True)
class LocatorQuery:
    window: CodeWindow
    prompt: str | None = None
    priors: tuple[Edit, ...] = ()  # selected prior edits, most relevant first


def slice_windows(project: Project, window_size: int = 20, stride: int = 10) -> list[CodeWindow]:
    """Sliding windows per file at offsets 0, S, 2S, ...; the final window is
    clamped to the file end so every line is covered at least once."""
    if window_size < 1 or not 1 <= stride <= window_size:
        raise ValueError("require window_size >= 1 and 1 <= stride <= window_size")
    out = []
    for path in sorted(project.files):
        out.extend(slice_file_windows(project, path, window_size, stride))
    return out


def slice_file_windows(
    project: Project, path: str, window_size: int = 20, stride: int = 10
) -> list[CodeWindow]:
    lines = project.files[path]
    n = len(lines)
    if n == 0:
        return []
    windows = []
    start = 0
    while True:
        end = min(start + window_size, n)
        windows.append(
            CodeWindow(
                file=path,
                span=(start + 1, end),
                lines=tuple(lines[start:end]),
                language=project.language,
            )
        )
        if end >= n:
            break
        start += stride
    return windows


def expected_window_count(file_lines: int, window_size: int, stride: int) -> int:
    """ceil((L - W) / S) + 1, clamped for short files."""
    if file_lines == 0:
        return 0
    if file_lines <= window_size:
        return 1
    return -(-(file_lines - window_size) // stride) + 1


def _edit_tokens(edit: Edit) -> list[str]:
    toks: list[str] = []
    for line in list(edit.code_before) + list(edit.code_after):
        toks.extend(t.text for t in tokenize_line(line))
    return toks


def select_prior_edits(
    window: CodeWindow, session: EditSession, k: int = 3, k1: float = 1.2, b: float = 0.75
) -> list[Edit]:
    """Top-k prior edits by BM25 textual similarity to the window.

    Query = window lines tokenized; documents = each prior edit's pre+post
    code tokenized. Ties break toward recency (newer first).
    """
    if k <= 0 or not session.prior_edits:
        return []
    docs = [_edit_tokens(e) for e in session.prior_edits]
    index = BM25Index(docs, k1=k1, b=b)
    query: list[str] = []
    for line in window.lines:
        query.extend(t.text for t in tokenize_line(line))
    ranked = index.rank(query)
    return [session.prior_edits[i] for i, _ in ranked[:k]]


class CloneLocatorBackend:
    """Replace-style similarity against selected priors' pre-code.

    Lines similar to some prior's pre-edit line get REPLACE; everything else
    KEEP, all gaps NULL. The backend never emits INSERT, DELETE, or
    BLOCK-SPLIT and does not rank beyond the raw similarity.
    """

    name = "clone_baseline"

    def __init__(self, threshold: float = 0.7):
        self.threshold = threshold

    def __call__(self, query: LocatorQuery) -> LabelSequence:
        language = query.window.language
        prior_lines = [l for e in query.priors for l in e.code_before]
        inline = []
        inline_conf = []
        for line in query.window.lines:
            best = 0.0
            for pl in prior_lines:
                if not pl.strip():
                    continue
                best = max(best, line_similarity(line, pl, language))
            if best >= self.threshold and line.strip():
                inline.append(REPLACE)
                inline_conf.append(best)
            else:
                inline.append(KEEP)
                inline_conf.append(1.0)
        n = len(inline)
        return LabelSequence(
            inline=tuple(inline),
            inter=tuple([NULL] * (n + 1)),
            inline_conf=tuple(inline_conf),
            inter_conf=tuple([1.0] * (n + 1)),
            window=query.window,
        )


class ExternalLocatorBackend:
    """Adapter for an external scorer.

    Request: {"window_lines": [...], "prompt": str|None,
              "priors_enriched": [str, ...]}
    Response: {"inline": [[label, score], ...], "inter": [[label, score], ...]}
    """

    name = "external"

    def __init__(self, scorer: Callable[[dict], dict] | None, language: str = "python"):
        if scorer is None:
            raise BackendUnavailable("no external locator scorer configured")
        self.scorer = scorer
        self.language = language

    def __call__(self, query: LocatorQuery) -> LabelSequence:
        from .enrich import enrich, render_enriched
        from .textdiff import Hunk

        priors_enriched = []
        for e in query.priors:
            hunk = Hunk(
                file=e.file,
                old_start=e.line_start,
                old_lines=e.code_before,
                new_start=e.line_start,
                new_lines=e.code_after,
            )
            priors_enriched.append(render_enriched(enrich(hunk, self.language)))
        request = {
            "window_lines": list(query.window.lines),
            "prompt": query.prompt,
            "priors_enriched": priors_enriched,
        }
        resp = self.scorer(request)
        inline = [(str(l), float(s)) for l, s in resp["inline"]]
        inter = [(str(l), float(s)) for l, s in resp["inter"]]
        if len(inline) != len(query.window.lines) or len(inter) != len(inline) + 1:
            raise LengthMismatch("external backend returned misshapen labels")
        for l, _ in inline:
            if l not in INLINE_LABELS:
                raise ValueError(f"bad inline label {l!r}")
        for l, _ in inter:
            if l not in INTER_LABELS:
                raise ValueError(f"bad inter label {l!r}")
        return LabelSequence(
            inline=tuple(l for l, _ in inline),
            inter=tuple(l for l, _ in inter),
            inline_conf=tuple(s for _, s in inline),
            inter_conf=tuple(s for _, s in inter),
            window=query.window,
        )


def predict_labels(query: LocatorQuery, backend) -> LabelSequence:
    """Run a locator backend; `backend` is any callable LocatorQuery ->
    LabelSequence (see CloneLocatorBackend / ExternalLocatorBackend)."""
    if backend is None:
        raise BackendUnavailable("no locator backend configured")
    return backend(query)


@dataclass
class LocatorMetrics:
    accuracy: float
    precision: float  # macro over all six classes
    recall: float
    f1: float
    per_class: dict[str, tuple[float, float, float]] = field(default_factory=dict)

    def as_dict(self) -> dict:
        return {
            "accuracy": self.accuracy,
            "precision": self.precision,
            "recall": self.recall,
            "f1": self.f1,
        }


def evaluate_locator(
    predictions: list[LabelSequence], gold: list[LabelSequence]
) -> LocatorMetrics:
    """Accuracy plus macro P/R/F1 jointly over inline and inter positions.

    Macro averages run over the classes that occur in gold or predictions;
    absent-side counts contribute zeros, weighting all classes equally.
    """
    if len(predictions) != len(gold):
        raise LengthMismatch(f"{len(predictions)} predictions vs {len(gold)} gold")
    pairs: list[tuple[str, str]] = []
    for p, g in zip(predictions, gold):
        if len(p.inline) != len(g.inline):
            raise LengthMismatch("inline length mismatch")
        pairs.extend(zip(p.inline, g.inline))
        pairs.extend(zip(p.inter, g.inter))
    total = len(pairs)
    correct = sum(1 for a, b in pairs if a == b)
    classes = sorted({c for pair in pairs for c in pair})
    per_class = {}
    precisions, recalls, f1s = [], [], []
    for c in classes:
        tp = sum(1 for a, b in pairs if a == c and b == c)
        fp = sum(1 for a, b in pairs if a == c and b != c)
        fn = sum(1 for a, b in pairs if a != c and b == c)
        prec = tp / (tp + fp) if tp + fp else 0.0
        rec = tp / (tp + fn) if tp + fn else 0.0
        f1 = 2 * prec * rec / (prec + rec) if prec + rec else 0.0
        per_class[c] = (prec, rec, f1)
        precisions.append(prec)
        recalls.append(rec)
        f1s.append(f1)
    k = len(classes) or 1
    return LocatorMetrics(
        accuracy=correct / total if total else 0.0,
        precision=sum(precisions) / k,
        recall=sum(recalls) / k,
        f1=sum(f1s) / k,
        per_class=per_class,
    )
