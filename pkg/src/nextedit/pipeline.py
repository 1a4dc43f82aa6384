"""One prediction step: deduction first, induction as fallback.

The latest session edit is classified against the predefined compositions.
Confirmed rename results carry their own content and skip the locator and
generator; location-only results (references, clones) become windows routed
through both. When nothing fires, sliding windows over the whole project go
through the locator and only edit-labelled windows reach the generator.

The step is split into two phases so callers can meter them separately:
``locate`` produces the ranked location plans (tool invocation plus locator
labelling), ``step`` completes them with generated candidates.
"""
from __future__ import annotations

from dataclasses import dataclass, field

from .core import Edit, EditSession, Project
from .errors import NextEditError
from .generator import Candidate, GenerationQuery, TemplateReplayBackend, generate
from .invoker import CLONE, DEF_USE, FUNC_RENAME, VAR_RENAME, classify, confirm_invocation
from .locator import (
    CloneLocatorBackend,
    CodeWindow,
    LabelSequence,
    LocatorQuery,
    predict_labels,
    select_prior_edits,
    slice_windows,
)
from .lsp import ToolEditCandidate
from .tools import StaticToolProvider

TOOL = "tool"
NEURAL = "neural"


@dataclass(frozen=True)
class Recommendation:
    file: str
    span: tuple[int, int]
    candidates: tuple[Candidate, ...]
    confidence: float
    provenance: str  # "tool" | "neural"
    service: str | None = None  # originating tool service, if any
    labels: LabelSequence | None = None

    def __post_init__(self):
        if self.provenance == TOOL and self.confidence != 1.0:
            raise ValueError("tool recommendations carry confidence 1.0")


@dataclass(frozen=True)
class LocationPlan:
    """A ranked location before content generation."""

    file: str
    span: tuple[int, int]
    confidence: float
    provenance: str
    service: str | None = None
    labels: LabelSequence | None = None
    target_lines: tuple[str, ...] = ()
    priors: tuple[Edit, ...] = ()
    replacement: tuple[str, ...] | None = None  # content already deduced


@dataclass
class EngineConfig:
    window_size: int = 20
    stride: int = 10
    candidates_per_location: int = 10
    max_priors: int = 3
    invoker_mode: str = "heuristic"  # heuristic | blind | off
    invoker_threshold: float = 0.5
    clone_threshold: float = 0.7
    locator_backend: object = field(default_factory=CloneLocatorBackend)
    generator_backend: object = field(default_factory=TemplateReplayBackend)
    tool_provider: object = field(default_factory=StaticToolProvider)
    max_recommendations: int = 20


def _latest_applied_span(edit: Edit) -> tuple[int, int]:
    return (edit.line_start, edit.line_start + max(len(edit.code_after), 1) - 1)


def _proximity(plan: LocationPlan, latest: Edit) -> tuple[int, int]:
    if plan.file == latest.file:
        return (0, abs(plan.span[0] - latest.line_start))
    return (1, 0)


def _window_at(project: Project, file: str, span: tuple[int, int], pad: int = 0) -> CodeWindow | None:
    lines = project.files.get(file)
    if lines is None:
        return None
    lo = max(1, span[0] - pad)
    hi = min(len(lines), span[1] + pad)
    if hi < lo:
        return None
    return CodeWindow(
        file=file, span=(lo, hi), lines=tuple(lines[lo - 1 : hi]), language=project.language
    )


def _nonkeep_run(labels: LabelSequence, window: CodeWindow) -> tuple[tuple[int, int], tuple[str, ...]] | None:
    """Absolute span and lines of the first maximal edit-labelled run."""
    marks = [l != "KEEP" for l in labels.inline]
    for g, l in enumerate(labels.inter):
        if l != "NULL":
            if g > 0:
                marks[g - 1] = True
            if g < len(marks):
                marks[g] = True
    if not any(marks):
        return None
    start = marks.index(True)
    end = start
    while end + 1 < len(marks) and marks[end + 1]:
        end += 1
    lo = window.span[0] + start
    hi = window.span[0] + end
    return (lo, hi), window.lines[start : end + 1]


def locate(session: EditSession, project: Project, config: EngineConfig | None = None) -> list[LocationPlan]:
    """Ranked location plans for the next edit (no content generation).

    ``project`` must be the state after all prior edits were applied.
    Tool-service failures degrade to the neural path instead of failing.
    """
    config = config or EngineConfig()
    latest = session.latest
    if latest is None:
        raise ValueError("session has no prior edits")
    origin = (latest.file, _latest_applied_span(latest))

    plans: list[LocationPlan] = []
    invoked_any = False
    if config.invoker_mode != "off":
        decision = classify(
            latest,
            session.prior_edits[:-1],
            project=project,
            threshold=0.0 if config.invoker_mode == "blind" else config.invoker_threshold,
            clone_threshold=config.clone_threshold,
        )
        if config.invoker_mode == "blind":
            fire = set(decision.scores)
            # blind mode still needs a concrete argument for each service
            if "rename_old" not in decision.details:
                fire -= {VAR_RENAME, FUNC_RENAME}
            if "defuse_symbol" not in decision.details:
                fire.discard(DEF_USE)
            if not latest.code_before:
                fire.discard(CLONE)
        else:
            fire = set(decision.invoked)
        tool_results: dict[str, list[ToolEditCandidate]] = {}
        provider = config.tool_provider
        try:
            for comp in sorted(fire):
                if comp in (VAR_RENAME, FUNC_RENAME):
                    tool_results[comp] = provider.rename(
                        project,
                        decision.details["rename_old"],
                        decision.details["rename_new"],
                        origin=origin,
                    )
                elif comp == DEF_USE:
                    tool_results[comp] = provider.references(
                        project, decision.details["defuse_symbol"], origin=origin
                    )
                elif comp == CLONE:
                    tool_results[comp] = provider.clones(
                        project,
                        tuple(latest.code_before),
                        origin=origin,
                        min_similarity=config.clone_threshold,
                    )
        except NextEditError:
            tool_results = {}  # degraded: fall back to the neural path
        confirmed = confirm_invocation(decision, tool_results, session, project)
        invoked_any = bool(confirmed)
        for cand in confirmed:
            plans.append(_tool_plan(cand, session, project, config))

    if not invoked_any:
        plans.extend(_neural_plans(session, project, config))

    return _rank(plans, latest, config)


def _tool_plan(
    cand: ToolEditCandidate, session: EditSession, project: Project, config: EngineConfig
) -> LocationPlan:
    if cand.replacement is not None:
        # content-carrying service: the locator and generator are skipped
        return LocationPlan(
            file=cand.file,
            span=cand.span,
            confidence=1.0,
            provenance=TOOL,
            service=cand.source_service,
            replacement=cand.replacement,
        )
    window = _window_at(project, cand.file, cand.span)
    labels = None
    priors: tuple[Edit, ...] = ()
    target: tuple[str, ...] = ()
    if window is not None:
        priors = tuple(select_prior_edits(window, session, k=config.max_priors))
        query = LocatorQuery(window=window, prompt=session.prompt, priors=priors)
        try:
            labels = predict_labels(query, config.locator_backend)
        except NextEditError:
            labels = None
        target = window.lines
    return LocationPlan(
        file=cand.file,
        span=cand.span,
        confidence=1.0,
        provenance=TOOL,
        service=cand.source_service,
        labels=labels,
        target_lines=target,
        priors=priors,
    )


def _neural_plans(session: EditSession, project: Project, config: EngineConfig) -> list[LocationPlan]:
    out = []
    for window in slice_windows(project, config.window_size, config.stride):
        priors = tuple(select_prior_edits(window, session, k=config.max_priors))
        query = LocatorQuery(window=window, prompt=session.prompt, priors=priors)
        try:
            labels = predict_labels(query, config.locator_backend)
        except NextEditError:
            continue
        if not labels.has_edit():
            continue
        run = _nonkeep_run(labels, window)
        if run is None:
            continue
        span, lines = run
        out.append(
            LocationPlan(
                file=window.file,
                span=span,
                confidence=labels.window_score(),
                provenance=NEURAL,
                labels=labels,
                target_lines=lines,
                priors=priors,
            )
        )
    return out


def _rank(plans: list[LocationPlan], latest: Edit, config: EngineConfig) -> list[LocationPlan]:
    latest_span = _latest_applied_span(latest)

    def overlaps_latest(plan: LocationPlan) -> bool:
        return (
            plan.file == latest.file
            and plan.span[0] <= latest_span[1]
            and latest_span[0] <= plan.span[1]
        )

    kept: dict[tuple[str, int, int], LocationPlan] = {}
    order: list[tuple[str, int, int]] = []
    for plan in plans:
        if overlaps_latest(plan):
            continue
        key = (plan.file, plan.span[0], plan.span[1])
        old = kept.get(key)
        if old is None:
            kept[key] = plan
            order.append(key)
        elif (plan.provenance == TOOL, plan.confidence) > (old.provenance == TOOL, old.confidence):
            kept[key] = plan
    path_order = {key: i for i, key in enumerate(order)}
    ranked = sorted(
        kept.values(),
        key=lambda p: (
            -(p.provenance == TOOL),
            -p.confidence,
            _proximity(p, latest),
            path_order[(p.file, p.span[0], p.span[1])],
        ),
    )
    return ranked[: config.max_recommendations]


def complete(
    plans: list[LocationPlan],
    session: EditSession,
    project: Project,
    config: EngineConfig | None = None,
) -> list[Recommendation]:
    """Generate candidates for ranked plans, preserving their order."""
    config = config or EngineConfig()
    out = []
    for plan in plans:
        if plan.replacement is not None:
            candidates: tuple[Candidate, ...] = (
                Candidate(post_code=plan.replacement, score=1.0, rank=1),
            )
        elif plan.target_lines:
            query = GenerationQuery(
                target_lines=plan.target_lines,
                labels=plan.labels,
                prompt=session.prompt,
                priors=plan.priors,
                language=project.language,
            )
            candidates = tuple(
                generate(query, k=config.candidates_per_location, backend=config.generator_backend)
            )
        else:
            candidates = ()
        out.append(
            Recommendation(
                file=plan.file,
                span=plan.span,
                candidates=candidates,
                confidence=plan.confidence,
                provenance=plan.provenance,
                service=plan.service,
                labels=plan.labels,
            )
        )
    return out


def step(session: EditSession, project: Project, config: EngineConfig | None = None) -> list[Recommendation]:
    """Ranked next-edit recommendations: locate, then generate."""
    config = config or EngineConfig()
    return complete(locate(session, project, config), session, project, config)
