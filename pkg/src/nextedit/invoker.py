"""Edit-composition invocation: decide from the latest edit whether a
predefined composition applies and which tool services to fire.

The default backend is a deterministic heuristic; an external scorer can be
plugged in over the same tagged-text encoding. Diagnostics never appear as an
invoker output class: language servers push them without being asked, so the
pipeline consumes them from the notification stream instead.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from random import Random
from typing import Callable, Sequence

from .core import Edit, EditSession, Project
from .errors import BackendUnavailable
from .lexing import FUNC_KEYWORDS, is_keyword, tokenize, tokenize_line
from .lsp import ToolEditCandidate
from .textdiff import Hunk
from .tools import StaticToolProvider, is_call_or_def_site

VAR_RENAME = "VAR_RENAME"
FUNC_RENAME = "FUNC_RENAME"
DEF_USE = "DEF_USE"
CLONE = "CLONE"
DIAGNOSE = "DIAGNOSE"  # pipeline-handled via the push stream, never invoked

COMPOSITION_TYPES = (VAR_RENAME, FUNC_RENAME, DEF_USE, CLONE)


@dataclass(frozen=True)
class CompositionDecision:
    scores: dict[str, float]
    invoked: frozenset[str]
    threshold: float
    details: dict[str, str] = field(default_factory=dict)

    def __post_init__(self):
        if DIAGNOSE in self.scores or DIAGNOSE in self.invoked:
            raise ValueError("DIAGNOSE is not an invoker output class")
        if not self.invoked <= set(self.scores):
            raise ValueError("invoked must be a subset of scored classes")


def encode_input(last_edit: Edit, prior_edits: Sequence[Edit], max_edits: int = 4) -> str:
    """Tagged text fed to learned backends: the latest edit first, then prior
    edits in reverse chronological order, truncated to the budget."""
    def one(e: Edit) -> str:
        return (
            "<BEFORE>" + "\n".join(e.code_before) + "</BEFORE>"
            "<AFTER>" + "\n".join(e.code_after) + "</AFTER>"
        )

    parts = [one(last_edit)]
    for e in sorted(prior_edits, key=lambda e: -e.timestamp)[: max_edits - 1]:
        parts.append(one(e))
    return "\n".join(parts)


def _rename_pair(edit: Edit, language: str) -> tuple[str, str, bool] | None:
    """(old, new, is_func) when the edit is exactly one identifier
    substitution, identical elsewhere."""
    before = tokenize(edit.code_before, language)
    after = tokenize(edit.code_after, language)
    if len(before) != len(after) or not before:
        return None
    old = new = None
    func = False
    func_kw = FUNC_KEYWORDS.get(language, frozenset())
    changed = False
    for i, (b, a) in enumerate(zip(before, after)):
        if b.key == a.key:
            continue
        changed = True
        if b.kind != "ident" or a.kind != "ident":
            return None
        if is_keyword(b.text, language) or is_keyword(a.text, language):
            return None
        if old is None:
            old, new = b.text, a.text
        elif (b.text, a.text) != (old, new):
            return None
        called = i + 1 < len(before) and before[i + 1].text == "("
        defined = i > 0 and before[i - 1].text in func_kw
        func = func or called or defined
    if not changed or old is None:
        return None
    # a consistent rename leaves no occurrence of the old name behind
    if any(t.kind == "ident" and t.text == old for t in after):
        return None
    return old, new, func


def _extract_signatures(lines: Sequence[str], language: str) -> dict[str, str]:
    """Function name -> normalized parameter text for signature-looking lines."""
    sigs: dict[str, str] = {}
    func_kw = FUNC_KEYWORDS.get(language, frozenset())
    braced = language in ("java", "javascript", "typescript", "go")
    for line in lines:
        tokens = tokenize_line(line)
        for i, t in enumerate(tokens):
            if t.kind != "ident" or is_keyword(t.text, language):
                continue
            if i + 1 >= len(tokens) or tokens[i + 1].text != "(":
                continue
            preceded = i > 0 and tokens[i - 1].text in func_kw
            go_method = language == "go" and tokens and tokens[0].text == "func"
            block_opener = braced and line.rstrip().endswith("{")
            python_def = language == "python" and i > 0 and tokens[i - 1].text == "def"
            if not (preceded or python_def or go_method or block_opener):
                continue
            depth = 0
            params: list[str] = []
            for u in tokens[i + 1 :]:
                if u.text == "(":
                    depth += 1
                    if depth == 1:
                        continue
                elif u.text == ")":
                    depth -= 1
                    if depth == 0:
                        break
                if depth >= 1:
                    params.append(u.text)
            sigs[t.text] = " ".join(params)
            break
    return sigs


def _defuse_symbol(edit: Edit, language: str) -> str | None:
    """Name of a function whose parameter list changed in this edit."""
    sigs_before = _extract_signatures(edit.code_before, language)
    sigs_after = _extract_signatures(edit.code_after, language)
    for name, params in sigs_before.items():
        if name in sigs_after and sigs_after[name] != params:
            return name
    return None


def classify(
    last_edit: Edit,
    prior_edits: Sequence[Edit] = (),
    backend: str = "heuristic",
    project: Project | None = None,
    threshold: float = 0.5,
    clone_threshold: float = 0.7,
    external_scorer: Callable[[str], dict[str, float]] | None = None,
) -> CompositionDecision:
    """Multi-label composition scores for the latest edit.

    The heuristic backend is pure and deterministic; the external backend
    scores the tagged encoding and falls back to the heuristic when absent.
    """
    language = project.language if project is not None else "python"
    if backend == "external":
        if external_scorer is None:
            raise BackendUnavailable("no external invoker scorer configured")
        scores = {c: float(external_scorer(encode_input(last_edit, prior_edits)).get(c, 0.0))
                  for c in COMPOSITION_TYPES}
        invoked = frozenset(c for c, s in scores.items() if s >= threshold)
        return CompositionDecision(scores=scores, invoked=invoked, threshold=threshold)
    if backend != "heuristic":
        raise BackendUnavailable(f"unknown invoker backend {backend!r}")

    scores = {c: 0.0 for c in COMPOSITION_TYPES}
    details: dict[str, str] = {}

    pair = _rename_pair(last_edit, language)
    if pair is not None:
        old, new, func = pair
        scores[FUNC_RENAME if func else VAR_RENAME] = 1.0
        details["rename_old"] = old
        details["rename_new"] = new

    symbol = _defuse_symbol(last_edit, language)
    if symbol is not None:
        scores[DEF_USE] = 1.0
        details["defuse_symbol"] = symbol

    if project is not None and last_edit.code_before:
        hits = StaticToolProvider(clone_threshold).clones(
            project,
            tuple(last_edit.code_before),
            origin=(last_edit.file, (last_edit.line_start, max(last_edit.line_end, last_edit.line_start))),
        )
        if hits:
            scores[CLONE] = max(h.similarity or 0.0 for h in hits)

    invoked = frozenset(c for c, s in scores.items() if s >= threshold)
    return CompositionDecision(
        scores=scores, invoked=invoked, threshold=threshold, details=details
    )


def confirm_invocation(
    decision: CompositionDecision,
    tool_results: dict[str, list[ToolEditCandidate]],
    session: EditSession,
    project: Project | None = None,
) -> list[ToolEditCandidate]:
    """Guard against misleading invocations; confirmation only removes.

    A rename is confirmed only when no earlier session edit touched the old
    identifier (otherwise the latest edit reflects a usage change, not a true
    rename). Def-use results are kept only at call/def sites of the edited
    symbol; clone results are ordered by similarity.
    """
    confirmed: list[ToolEditCandidate] = []
    language = project.language if project is not None else "python"
    for comp, candidates in tool_results.items():
        if comp in (VAR_RENAME, FUNC_RENAME):
            old = decision.details.get("rename_old", "")
            touched = False
            for prior in session.prior_edits[:-1]:
                toks = tokenize(prior.code_before + prior.code_after, language)
                if any(t.kind == "ident" and t.text == old for t in toks):
                    touched = True
                    break
            if not touched:
                confirmed.extend(candidates)
        elif comp == DEF_USE:
            symbol = decision.details.get("defuse_symbol", "")
            for cand in candidates:
                if project is None:
                    confirmed.append(cand)
                    continue
                lines = project.files.get(cand.file, ())
                span_lines = lines[cand.span[0] - 1 : cand.span[1]]
                if any(is_call_or_def_site(l, symbol, language) for l in span_lines):
                    confirmed.append(cand)
        elif comp == CLONE:
            confirmed.extend(
                sorted(candidates, key=lambda c: -(c.similarity or 0.0))
            )
        else:
            confirmed.extend(candidates)
    return confirmed


@dataclass(frozen=True)
class InvokerSample:
    """A partial-commit scenario: the target and background hunks are applied,
    the rest of the commit is not; the label is the set of composition types
    whose service results land on still-unedited hunks."""

    target_hunk: Hunk
    background_hunks: tuple[Hunk, ...]
    label: frozenset[str]
    language: str
    project_files: dict[str, tuple[str, ...]] = field(default_factory=dict)
    repo_id: str = ""
    commit_id: str = ""

    def to_json(self) -> dict:
        target_edit = self.target_hunk.to_edit()
        background = tuple(h.to_edit(i + 1) for i, h in enumerate(self.background_hunks))
        return {
            "encoded": encode_input(target_edit, background),
            "target_hunk": self.target_hunk.to_json(),
            "background_hunks": [h.to_json() for h in self.background_hunks],
            "label": sorted(self.label),
            "language": self.language,
            "repo_id": self.repo_id,
            "commit_id": self.commit_id,
            "project_files": {p: list(ls) for p, ls in sorted(self.project_files.items())},
        }


def _shifted_span(hunk: Hunk, applied: Sequence[Hunk]) -> tuple[int, int]:
    """Current location of a hunk's pre-edit span after ``applied`` hunks."""
    delta = 0
    for h in applied:
        if h.file != hunk.file:
            continue
        if h.old_span[1] < hunk.old_start:
            delta += len(h.new_lines) - len(h.old_lines)
    start = hunk.old_start + delta
    return (start, start + max(len(hunk.old_lines), 1) - 1)


def _applied_span(hunk: Hunk, applied_before: Sequence[Hunk]) -> tuple[int, int]:
    """Span an applied hunk's post-edit lines occupy in the current state."""
    delta = 0
    for h in applied_before:
        if h.file != hunk.file:
            continue
        if h.old_span[1] < hunk.old_start:
            delta += len(h.new_lines) - len(h.old_lines)
    start = hunk.old_start + delta
    return (start, start + max(len(hunk.new_lines), 1) - 1)


def _spans_match(candidate: ToolEditCandidate, span: tuple[int, int], file: str) -> bool:
    from .core import line_overlap_ratio

    if candidate.file != file:
        return False
    try:
        return line_overlap_ratio(candidate.span, span) > 0.5
    except Exception:
        return False


def build_invoker_benchmark(
    record,
    project_pre: Project,
    provider: StaticToolProvider | None = None,
    rng: Random | None = None,
    samples_per_commit: int = 1,
) -> list[InvokerSample]:
    """Synthesize invoker samples from one commit.

    A random target hunk plus up to two background hunks are applied; the
    rename / reference / clone services run at the target's location and a
    service labels the sample positive when its results overlap a remaining
    unedited hunk. Deterministic for a fixed seed.
    """
    provider = provider or StaticToolProvider()
    rng = rng or Random(0)
    hunks = list(record.hunks)
    if not hunks:
        return []
    out = []
    for _ in range(samples_per_commit):
        target = rng.choice(hunks)
        rest = [h for h in hunks if h is not target]
        rng.shuffle(rest)
        background = tuple(sorted(rest[:2], key=lambda h: (h.file, h.old_start)))
        applied = sorted(
            [target, *background], key=lambda h: (h.file, h.old_start)
        )
        project = project_pre
        for h in applied:
            before = [g for g in applied if g.file == h.file and g.old_start < h.old_start]
            span = _shifted_span(h, before)
            project = project.with_file(
                h.file,
                list(project.files[h.file][: span[0] - 1])
                + list(h.new_lines)
                + list(project.files[h.file][span[0] - 1 + len(h.old_lines) :]),
            )
        remaining = [h for h in hunks if h is not target and h not in background]
        remaining_spans = [
            (h.file, _shifted_span(h, [g for g in applied if g.file == h.file]))
            for h in remaining
        ]
        target_span = _applied_span(
            target, [g for g in applied if g.file == target.file and g.old_start < target.old_start]
        )
        origin = (target.file, target_span)
        language = record.language
        target_edit = target.to_edit()

        results: dict[str, list[ToolEditCandidate]] = {}
        pair = _rename_pair(target_edit, language)
        if pair is not None:
            old, new, func = pair
            results[FUNC_RENAME if func else VAR_RENAME] = provider.rename(
                project, old, new, origin=origin
            )
        symbol = _defuse_symbol(target_edit, language)
        if symbol is not None:
            results[DEF_USE] = provider.references(project, symbol, origin=origin)
        if target.old_lines:
            results[CLONE] = provider.clones(project, target.old_lines, origin=origin)

        label = frozenset(
            comp
            for comp, cands in results.items()
            for cand in cands
            if any(_spans_match(cand, span, file) for file, span in remaining_spans)
        )
        out.append(
            InvokerSample(
                target_hunk=target,
                background_hunks=background,
                label=label,
                language=language,
                project_files=dict(project.files),
                repo_id=getattr(record, "repo_id", ""),
                commit_id=getattr(record, "commit_id", ""),
            )
        )
    return out


def _predict(sample: InvokerSample, backend: str, rng: Random, threshold: float) -> frozenset[str]:
    if backend == "blind":
        return frozenset(COMPOSITION_TYPES)
    if backend == "random":
        return frozenset(c for c in COMPOSITION_TYPES if rng.random() < 0.5)
    if backend == "heuristic":
        project = Project(files=dict(sample.project_files), language=sample.language)
        edit = sample.target_hunk.to_edit(timestamp=len(sample.background_hunks) + 1)
        priors = tuple(h.to_edit(i + 1) for i, h in enumerate(sample.background_hunks))
        return classify(edit, priors, project=project, threshold=threshold).invoked
    raise BackendUnavailable(f"unknown invoker backend {backend!r}")


def evaluate_invoker(
    samples: list[InvokerSample],
    backend: str = "heuristic",
    seed: int = 0,
    threshold: float = 0.5,
) -> dict:
    """Macro-averaged precision/recall/F1 per composition class."""
    rng = Random(seed)
    predictions = [_predict(s, backend, rng, threshold) for s in samples]
    per_class = {}
    for c in COMPOSITION_TYPES:
        tp = sum(1 for s, p in zip(samples, predictions) if c in p and c in s.label)
        fp = sum(1 for s, p in zip(samples, predictions) if c in p and c not in s.label)
        fn = sum(1 for s, p in zip(samples, predictions) if c not in p and c in s.label)
        prec = tp / (tp + fp) if tp + fp else 0.0
        rec = tp / (tp + fn) if tp + fn else 0.0
        f1 = 2 * prec * rec / (prec + rec) if prec + rec else 0.0
        per_class[c] = {"precision": prec, "recall": rec, "f1": f1, "support": tp + fn}
    k = len(COMPOSITION_TYPES)
    return {
        "per_class": per_class,
        "precision": sum(v["precision"] for v in per_class.values()) / k,
        "recall": sum(v["recall"] for v in per_class.values()) / k,
        "f1": sum(v["f1"] for v in per_class.values()) / k,
        "backend": backend,
    }
