"""Edit content generation and its evaluation.

The template-replay backend transfers the token-level rewrite of a prior edit
onto the target lines: for each REPLACE pair in the prior's labelling it
extracts substitution runs (old token run -> new token run) and applies them
to any target line that aligns well enough with the prior's pre-code. An
external backend adapter accepts any scorer honoring the JSON wire format.
"""
from __future__ import annotations

import math
from collections import Counter
from dataclasses import dataclass
from typing import Callable

from .core import Edit
from .enrich import REPLACE, EnrichedHunk, enrich, lcs_match
from .errors import BackendUnavailable
from .lexing import SyntaxToken, tokenize, tokenize_line
from .locator import LabelSequence
from .textdiff import Hunk

BLEU_EPSILON = 1e-9


@dataclass(frozen=True)
class GenerationQuery:
    """One hunk's worth of labelled window lines to regenerate."""

    target_lines: tuple[str, ...]  # the pre-edit lines carrying non-KEEP labels
    labels: LabelSequence | None = None
    prompt: str | None = None
    priors: tuple[Edit, ...] = ()
    language: str = "python"


@dataclass(frozen=True)
class Candidate:
    post_code: tuple[str, ...]
    score: float
    rank: int  # 1-based, consecutive


def _run_text(tokens: list[SyntaxToken], lines: tuple[str, ...] | list[str]) -> str:
    """Raw source slice covering a token run; falls back to space-joined token
    text when the run spans lines."""
    if not tokens:
        return ""
    if tokens[0].line == tokens[-1].line:
        line = lines[tokens[0].line - 1]
        return line[tokens[0].col : tokens[-1].col + len(tokens[-1].text)]
    return " ".join(t.text for t in tokens)


def substitution_rules(prior: EnrichedHunk) -> list[tuple[tuple, str]]:
    """(old token-key run, replacement text) pairs mined from the prior's
    REPLACE pairs. Pure insertions carry no anchor and are not transferred."""
    rules: list[tuple[tuple, str]] = []
    old_lines = prior.hunk.old_lines
    new_lines = prior.hunk.new_lines
    for (start, end), _ in prior.replace_targets.items():
        if not all(l == REPLACE for l in prior.inline_labels[start - 1 : end]):
            continue
        target = prior.assignment[start - 1]
        toks_b = tokenize(old_lines[start - 1 : end])
        toks_a = tokenize([new_lines[target - 1]])
        matches = lcs_match(toks_b, toks_a)
        mi, mj = -1, -1
        bounds = matches + [(len(toks_b), len(toks_a))]
        for i, j in bounds:
            old_run = toks_b[mi + 1 : i]
            new_run = toks_a[mj + 1 : j]
            if old_run:
                rules.append(
                    (
                        tuple(t.key for t in old_run),
                        _run_text(new_run, [new_lines[target - 1]]),
                    )
                )
            mi, mj = i, j
    # longest-first so overlapping rules prefer the most specific match
    rules.sort(key=lambda r: -len(r[0]))
    return rules


def apply_rules_to_line(line: str, rules: list[tuple[tuple, str]]) -> str:
    """Left-to-right, non-overlapping application of substitution runs."""
    tokens = tokenize_line(line)
    keys = [t.key for t in tokens]
    out = []
    cursor = 0  # char position in line
    i = 0
    while i < len(tokens):
        hit = None
        for old_run, new_text in rules:
            if tuple(keys[i : i + len(old_run)]) == old_run:
                hit = (len(old_run), new_text)
                break
        if hit is None:
            i += 1
            continue
        run_len, new_text = hit
        first, last = tokens[i], tokens[i + run_len - 1]
        out.append(line[cursor : first.col])
        out.append(new_text)
        cursor = last.col + len(last.text)
        i += run_len
    out.append(line[cursor:])
    text = "".join(out)
    # a dropped run can leave doubled interior spaces behind
    return text


def alignment_ratio(a_tokens: list[SyntaxToken], b_tokens: list[SyntaxToken]) -> float:
    if not a_tokens or not b_tokens:
        return 0.0
    lcs = len(lcs_match(a_tokens, b_tokens))
    return lcs / max(len(a_tokens), len(b_tokens))


class TemplateReplayBackend:
    """Deterministic template transfer from prior edits; no learning."""

    name = "template_replay"

    def __init__(self, min_alignment: float = 0.6):
        self.min_alignment = min_alignment

    def __call__(self, query: GenerationQuery, k: int) -> list[Candidate]:
        target_tokens = tokenize(query.target_lines)
        seen: set[tuple[str, ...]] = set()
        candidates: list[Candidate] = []
        for prior_edit in query.priors:
            if len(candidates) >= k:
                break
            if not prior_edit.code_before or not prior_edit.code_after:
                continue
            prior_b_tokens = tokenize(prior_edit.code_before)
            ratio = alignment_ratio(prior_b_tokens, target_tokens)
            if ratio < self.min_alignment:
                continue
            hunk = Hunk(
                file=prior_edit.file,
                old_start=prior_edit.line_start,
                old_lines=prior_edit.code_before,
                new_start=prior_edit.line_start,
                new_lines=prior_edit.code_after,
            )
            rules = substitution_rules(enrich(hunk, query.language))
            if not rules:
                continue
            post = tuple(apply_rules_to_line(l, rules) for l in query.target_lines)
            if post == query.target_lines or post in seen:
                continue
            seen.add(post)
            candidates.append(Candidate(post_code=post, score=ratio, rank=0))
        candidates.sort(key=lambda c: -c.score)
        if candidates and len(candidates) < k and query.target_lines not in seen:
            candidates.append(Candidate(post_code=query.target_lines, score=0.0, rank=0))
        ranked = [
            Candidate(post_code=c.post_code, score=c.score, rank=i + 1)
            for i, c in enumerate(candidates[:k])
        ]
        return ranked


class ExternalGeneratorBackend:
    """Adapter for an external generator.

    Request: {"window_with_labels": {"lines": [...], "inline": [...],
              "inter": [...]}, "prompt": str|None, "priors": [edit json, ...]}
    Response: {"candidates": [{"post_code": [...], "score": float}, ...]}
    """

    name = "external"

    def __init__(self, scorer: Callable[[dict], dict] | None):
        if scorer is None:
            raise BackendUnavailable("no external generator configured")
        self.scorer = scorer

    def __call__(self, query: GenerationQuery, k: int) -> list[Candidate]:
        request = {
            "window_with_labels": {
                "lines": list(query.target_lines),
                "inline": list(query.labels.inline) if query.labels else None,
                "inter": list(query.labels.inter) if query.labels else None,
            },
            "prompt": query.prompt,
            "priors": [e.to_json() for e in query.priors],
        }
        resp = self.scorer(request)
        raw = sorted(resp["candidates"], key=lambda c: -float(c["score"]))[:k]
        return [
            Candidate(post_code=tuple(c["post_code"]), score=float(c["score"]), rank=i + 1)
            for i, c in enumerate(raw)
        ]


def generate(query: GenerationQuery, k: int = 10, backend=None) -> list[Candidate]:
    """Up to k candidates sorted by score descending, ranks consecutive from 1.
    An empty list is a valid outcome (no viable prior), not an error."""
    if backend is None:
        backend = TemplateReplayBackend()
    if k < 1:
        raise ValueError("k must be >= 1")
    return backend(query, k)


def _bleu_tokens(text: str) -> list[str]:
    tokens = []
    for line in text.split("\n"):
        tokens.extend(t.text for t in tokenize_line(line))
    return tokens


def bleu4(candidate: str, reference: str) -> float:
    """Sentence BLEU with n-grams up to min(4, token lengths), brevity
    penalty, and epsilon smoothing on zero n-gram overlaps; scaled 0-100.

    Capping n at the sequence length keeps bleu4(x, x) == 100 for short x.
    """
    cand = _bleu_tokens(candidate)
    ref = _bleu_tokens(reference)
    if not cand or not ref:
        return 0.0
    n_max = min(4, len(cand), len(ref))
    log_sum = 0.0
    for n in range(1, n_max + 1):
        cand_ngrams = Counter(tuple(cand[i : i + n]) for i in range(len(cand) - n + 1))
        ref_ngrams = Counter(tuple(ref[i : i + n]) for i in range(len(ref) - n + 1))
        overlap = sum((cand_ngrams & ref_ngrams).values())
        total = sum(cand_ngrams.values())
        p = overlap / total if overlap else BLEU_EPSILON
        log_sum += math.log(p)
    brevity = 1.0 if len(cand) >= len(ref) else math.exp(1 - len(ref) / len(cand))
    return 100.0 * brevity * math.exp(log_sum / n_max)


def exact_match(candidate: tuple[str, ...] | list[str], gold: tuple[str, ...] | list[str]) -> bool:
    """Byte equality after per-line trailing-whitespace strip; real diffs carry
    incidental trailing spaces."""
    return [l.rstrip() for l in candidate] == [l.rstrip() for l in gold]


def evaluate_generation(
    candidates: list[Candidate],
    gold: tuple[str, ...] | list[str],
    ks: tuple[int, ...] = (1, 3, 5, 10),
) -> dict[str, dict[int, float]]:
    """EMR@k (0/1 per sample) and BLEU@k (best among top-k, 0-100)."""
    if not gold:
        raise ValueError("gold must be nonempty")
    gold_text = "\n".join(gold)
    emr: dict[int, float] = {}
    bleu: dict[int, float] = {}
    for k in ks:
        top = candidates[:k]
        emr[k] = 1.0 if any(exact_match(c.post_code, gold) for c in top) else 0.0
        bleu[k] = max((bleu4("\n".join(c.post_code), gold_text) for c in top), default=0.0)
    return {"emr": emr, "bleu": bleu}
