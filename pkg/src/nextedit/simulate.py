"""Commit-replay simulation: a virtual programmer replays mined commits
hunk by hunk while the engine predicts each next edit.

Stages per commit: (1) check out the pre-commit tree and apply the first
diff hunk as the initial edit; (2) predict locations, a prediction matches a
gold hunk at >50% line overlap; (3) generate candidates for the selected
location, then apply the ground-truth content (quality control, so the
replay never drifts); (4) iterate until every hunk is applied.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from random import Random
from typing import Callable, Sequence

from .core import Edit, EditSession, Project, apply_edit, line_overlap_ratio
from .errors import ContentMismatch, ReplayDesync
from .generator import bleu4
from .invoker import _shifted_span
from .mining import CommitRecord, GitRepo
from .pipeline import EngineConfig, Recommendation, complete, locate
from .textdiff import Hunk

TOP_KS = (1, 3, 5)


@dataclass
class SimConfig:
    engine: EngineConfig = field(default_factory=EngineConfig)
    seed: int = 0
    ccd_only: bool = False  # clone-detector locator: unranked, all hits are Top-1
    timer: Callable[[], float] | None = None  # None => zeros, reports stay byte-stable


@dataclass
class StepRecord:
    index: int
    matched: dict[int, bool]
    accepted: dict[int, bool]
    latency_s: float
    best_bleu: float
    selected_random: bool
    n_recommendations: int
    selected_hunk: int  # position in the commit's gold hunk list

    def to_json(self) -> dict:
        return {
            "index": self.index,
            "matched": {str(k): v for k, v in self.matched.items()},
            "accepted": {str(k): v for k, v in self.accepted.items()},
            "latency_s": round(self.latency_s, 6),
            "best_bleu": round(self.best_bleu, 4),
            "selected_random": self.selected_random,
            "n_recommendations": self.n_recommendations,
            "selected_hunk": self.selected_hunk,
        }


@dataclass
class CommitReport:
    repo_id: str
    commit_id: str
    steps: list[StepRecord]
    final_tree_matches: bool

    def to_json(self) -> dict:
        return {
            "repo_id": self.repo_id,
            "commit_id": self.commit_id,
            "steps": [s.to_json() for s in self.steps],
            "final_tree_matches": self.final_tree_matches,
        }


@dataclass
class SimReport:
    match_rate: dict[int, float]
    acceptance_rate: dict[int, float]
    mean_latency_s: float
    bleu_bands: dict[str, float]  # shares for "100", "50-100", "<50"
    n_steps: int
    commits: list[CommitReport]

    def to_json(self) -> dict:
        return {
            "schema_version": 1,
            "match_rate": {str(k): round(v, 6) for k, v in self.match_rate.items()},
            "acceptance_rate": {str(k): round(v, 6) for k, v in self.acceptance_rate.items()},
            "mean_latency_s": round(self.mean_latency_s, 6),
            "bleu_bands": {k: round(v, 6) for k, v in self.bleu_bands.items()},
            "n_steps": self.n_steps,
            "commits": [c.to_json() for c in self.commits],
        }

    def to_bytes(self) -> bytes:
        return json.dumps(self.to_json(), sort_keys=True).encode("utf-8")


def _match(rec: Recommendation, file: str, span: tuple[int, int]) -> bool:
    if rec.file != file:
        return False
    try:
        return line_overlap_ratio(rec.span, span) > 0.5
    except Exception:
        return False


def simulate_record(
    record: CommitRecord,
    project_pre: Project,
    config: SimConfig | None = None,
    project_post: Project | None = None,
) -> CommitReport:
    """Replay one commit. ``project_pre`` is the full pre-commit tree;
    ``project_post``, when given, is compared byte-for-byte at the end."""
    config = config or SimConfig()
    rng = Random((config.seed, record.commit_id).__repr__())
    timer = config.timer
    hunks = list(record.hunks)
    if len(hunks) < 2:
        raise ValueError("simulation needs a commit with at least 2 hunks")

    applied: list[Hunk] = []
    project = project_pre
    session = EditSession(project_root=".", prompt=record.message_clean or None)

    def apply_gold(hunk: Hunk) -> None:
        nonlocal project, session
        span = _shifted_span(hunk, applied)
        line_end = span[0] + len(hunk.old_lines) - 1
        edit = Edit(
            file=hunk.file,
            line_start=span[0],
            line_end=line_end,
            code_before=hunk.old_lines,
            code_after=hunk.new_lines,
            timestamp=len(session.prior_edits) + 1,
        )
        try:
            project = apply_edit(project, edit)
        except ContentMismatch as exc:
            raise ReplayDesync(f"{record.commit_id}: {exc}") from exc
        applied.append(hunk)
        session = session.extended(edit)

    apply_gold(hunks[0])
    remaining = list(range(1, len(hunks)))
    steps: list[StepRecord] = []

    while remaining:
        # latency covers location prediction only; generation is metered out
        t0 = timer() if timer else 0.0
        plans = locate(session, project, config.engine)
        latency = (timer() - t0) if timer else 0.0
        recommendations = complete(plans, session, project, config.engine)

        gold_spans = {i: (hunks[i].file, _shifted_span(hunks[i], applied)) for i in remaining}

        def hits(rec: Recommendation) -> list[int]:
            return [i for i, (f, s) in gold_spans.items() if _match(rec, f, s)]

        matched: dict[int, bool] = {}
        accepted: dict[int, bool] = {}
        for k in TOP_KS:
            pool = recommendations if config.ccd_only else recommendations[:k]
            matched[k] = any(hits(r) for r in pool)
            ok = False
            for r in pool:
                for i in hits(r):
                    gold_text = "\n".join(hunks[i].new_lines)
                    if any(
                        bleu4("\n".join(c.post_code), gold_text) == 100.0
                        for c in r.candidates
                    ):
                        ok = True
                        break
                if ok:
                    break
            accepted[k] = ok

        chosen = None
        selected_random = False
        for rec in recommendations:
            h = hits(rec)
            if h:
                chosen = (h[0], rec)
                break
        if chosen is None:
            selected_random = True
            chosen = (rng.choice(sorted(remaining)), None)
        gold_idx, rec = chosen
        gold_text = "\n".join(hunks[gold_idx].new_lines)
        best_bleu = 0.0
        if rec is not None:
            best_bleu = max(
                (bleu4("\n".join(c.post_code), gold_text) for c in rec.candidates),
                default=0.0,
            )

        steps.append(
            StepRecord(
                index=len(steps),
                matched=matched,
                accepted=accepted,
                latency_s=latency,
                best_bleu=best_bleu,
                selected_random=selected_random,
                n_recommendations=len(recommendations),
                selected_hunk=gold_idx,
            )
        )
        apply_gold(hunks[gold_idx])
        remaining.remove(gold_idx)

    final_ok = True
    if project_post is not None:
        final_ok = project.files == project_post.files
    return CommitReport(
        repo_id=record.repo_id,
        commit_id=record.commit_id,
        steps=steps,
        final_tree_matches=final_ok,
    )


def simulate_commit(
    repo_path: str,
    commit_id: str,
    language: str,
    config: SimConfig | None = None,
) -> CommitReport:
    """Mine one commit from a git checkout and replay it against the real
    pre/post trees."""
    from .mining import MiningFilters, _mine_one

    repo = GitRepo(repo_path)
    record = _mine_one(
        repo, commit_id, language, MiningFilters(min_hunks=2, max_hunks=10_000,
                                                 min_message_chars=0, max_message_chars=10_000),
        None,
    )
    if record is None:
        raise ValueError(f"{commit_id} is not simulatable (filters or language)")
    parent = repo.parent(commit_id)
    project_pre = repo.project_at(parent, language)
    project_post = repo.project_at(commit_id, language)
    return simulate_record(record, project_pre, config, project_post)


def aggregate(reports: Sequence[CommitReport]) -> SimReport:
    """Micro-average over steps; BLEU bands over all generated steps."""
    if not reports:
        raise ValueError("no reports to aggregate")
    steps = [s for r in reports for s in r.steps]
    n = len(steps)
    match_rate = {k: sum(s.matched[k] for s in steps) / n for k in TOP_KS}
    acceptance = {k: sum(s.accepted[k] for s in steps) / n for k in TOP_KS}
    bands = {"100": 0, "50-100": 0, "<50": 0}
    for s in steps:
        if s.best_bleu == 100.0:
            bands["100"] += 1
        elif s.best_bleu >= 50.0:
            bands["50-100"] += 1
        else:
            bands["<50"] += 1
    return SimReport(
        match_rate=match_rate,
        acceptance_rate=acceptance,
        mean_latency_s=sum(s.latency_s for s in steps) / n,
        bleu_bands={k: v / n for k, v in bands.items()},
        n_steps=n,
        commits=list(reports),
    )
