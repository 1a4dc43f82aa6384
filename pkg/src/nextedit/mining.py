"""Git history mining and benchmark dataset construction.

Commits pass deterministic filters (hunk-count bounds, single-language
source changes, message length bounds); messages are cleaned by rules with
an optional external refinement hook left unplugged by default. Mining is
parallel over commits and output order is canonical, so runs are
reproducible.
"""
from __future__ import annotations

import json
import re
import subprocess
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from random import Random
from typing import Callable

from .bm25 import BM25Index
from .core import LANGUAGE_EXTENSIONS, SOURCE_EXTENSIONS, Project, language_of_path
from .enrich import KEEP, NULL, enrich
from .errors import CheckoutFailed, RepoUnreadable
from .lexing import tokenize_line
from .locator import CodeWindow, LabelSequence, slice_file_windows
from .textdiff import Hunk, parse_unified_diff


def _git(repo: str | Path, *args: str) -> str:
    proc = subprocess.run(
        ["git", "-C", str(repo), *args],
        capture_output=True,
        text=True,
    )
    if proc.returncode != 0:
        raise CheckoutFailed(f"git {' '.join(args)}: {proc.stderr.strip()}")
    return proc.stdout


class GitRepo:
    """Read-only queries against a local git checkout."""

    def __init__(self, path: str | Path):
        self.path = Path(path)
        try:
            top = _git(self.path, "rev-parse", "--show-toplevel").strip()
        except CheckoutFailed as exc:
            raise RepoUnreadable(str(exc)) from exc
        self.name = Path(top).name

    def commits(self) -> list[str]:
        """Non-merge commit ids, oldest first."""
        out = _git(self.path, "rev-list", "--no-merges", "--reverse", "HEAD")
        return out.split()

    def parent(self, sha: str) -> str | None:
        out = _git(self.path, "rev-list", "--parents", "-n", "1", sha).split()
        return out[1] if len(out) > 1 else None

    def message(self, sha: str) -> str:
        return _git(self.path, "show", "-s", "--format=%B", sha)

    def diff_text(self, sha: str) -> str:
        parent = self.parent(sha)
        if parent is None:
            raise CheckoutFailed(f"{sha} has no parent")
        return _git(self.path, "diff", "--no-renames", "--unified=3", parent, sha)

    def file_lines(self, sha: str, path: str) -> tuple[str, ...]:
        text = _git(self.path, "show", f"{sha}:{path}")
        return tuple(text.split("\n")[:-1]) if text.endswith("\n") else tuple(text.split("\n"))

    def tree_files(self, sha: str, extensions: tuple[str, ...]) -> dict[str, tuple[str, ...]]:
        listing = _git(self.path, "ls-tree", "-r", "--name-only", sha)
        files = {}
        for path in listing.splitlines():
            if path.endswith(extensions):
                files[path] = self.file_lines(sha, path)
        return files

    def project_at(self, sha: str, language: str) -> Project:
        return Project(
            files=self.tree_files(sha, LANGUAGE_EXTENSIONS[language]),
            language=language,
        )


_PR_ID_RE = re.compile(r"\s*\(#\d+\)")
_EMAIL_RE = re.compile(r"<?[\w.+-]+@[\w-]+\.[\w.-]+>?")
_TRAILER_RE = re.compile(
    r"^(signed-off-by|co-authored-by|reviewed-by|acked-by|tested-by|cc|fixes|see-also|change-id|reported-by|suggested-by)\s*:",
    re.IGNORECASE,
)


def clean_message(raw: str, refine_hook: Callable[[str], str] | None = None) -> str:
    """Rule-based message cleanup: strip PR ids, emails, and trailer lines,
    keep the first paragraph. ``refine_hook`` may post-process (e.g. an
    external model); it is not called when the rules leave nothing."""
    lines = []
    for line in raw.splitlines():
        if _TRAILER_RE.match(line.strip()):
            continue
        lines.append(line)
    text = "\n".join(lines).strip()
    first_para = text.split("\n\n", 1)[0]
    cleaned = _PR_ID_RE.sub("", first_para)
    cleaned = _EMAIL_RE.sub("", cleaned)
    cleaned = re.sub(r"[ \t]+", " ", cleaned).strip()
    if cleaned and refine_hook is not None:
        cleaned = refine_hook(cleaned)
    return cleaned


@dataclass(frozen=True)
class MiningFilters:
    min_hunks: int = 2
    max_hunks: int = 50
    min_message_chars: int = 3
    max_message_chars: int = 400


@dataclass(frozen=True)
class CommitRecord:
    repo_id: str
    commit_id: str
    message_raw: str
    message_clean: str
    hunks: tuple[Hunk, ...]
    language: str
    pre_files: dict[str, tuple[str, ...]] = field(default_factory=dict)

    def to_json(self) -> dict:
        return {
            "repo_id": self.repo_id,
            "commit_id": self.commit_id,
            "message_raw": self.message_raw,
            "message_clean": self.message_clean,
            "language": self.language,
            "hunks": [h.to_json() for h in self.hunks],
            "pre_files": {p: list(ls) for p, ls in self.pre_files.items()},
        }

    @classmethod
    def from_json(cls, obj: dict) -> CommitRecord:
        return cls(
            repo_id=obj["repo_id"],
            commit_id=obj["commit_id"],
            message_raw=obj["message_raw"],
            message_clean=obj["message_clean"],
            hunks=tuple(Hunk.from_json(h) for h in obj["hunks"]),
            language=obj["language"],
            pre_files={p: tuple(ls) for p, ls in obj.get("pre_files", {}).items()},
        )


def _changed_paths(diff_text: str) -> list[str]:
    paths = []
    for line in diff_text.splitlines():
        if line.startswith("+++ b/"):
            paths.append(line[6:].split("\t")[0])
        elif line.startswith("--- a/"):
            paths.append(line[6:].split("\t")[0])
    return sorted(set(paths))


def _mine_one(
    repo: GitRepo,
    sha: str,
    language: str,
    filters: MiningFilters,
    refine_hook: Callable[[str], str] | None,
) -> CommitRecord | None:
    parent = repo.parent(sha)
    if parent is None:
        return None
    diff = repo.diff_text(sha)
    if not diff.strip():
        return None
    changed = _changed_paths(diff)
    source_paths = [p for p in changed if p.endswith(SOURCE_EXTENSIONS)]
    lang_paths = [p for p in changed if language_of_path(p) == language]
    if not lang_paths or len(source_paths) != len(lang_paths):
        return None
    hunks = parse_unified_diff(diff)
    hunks = tuple(h for h in hunks if language_of_path(h.file) == language)
    if not filters.min_hunks <= len(hunks) <= filters.max_hunks:
        return None
    message_raw = repo.message(sha)
    message_clean = clean_message(message_raw, refine_hook)
    if not filters.min_message_chars <= len(message_clean) <= filters.max_message_chars:
        return None
    pre_files = {}
    for path in sorted({h.file for h in hunks}):
        try:
            pre_files[path] = repo.file_lines(parent, path)
        except CheckoutFailed:
            pre_files[path] = ()  # file created by this commit
    return CommitRecord(
        repo_id=repo.name,
        commit_id=sha,
        message_raw=message_raw,
        message_clean=message_clean,
        hunks=hunks,
        language=language,
        pre_files=pre_files,
    )


def mine_commits(
    repo_path: str | Path,
    language: str,
    filters: MiningFilters | None = None,
    refine_hook: Callable[[str], str] | None = None,
    max_workers: int = 8,
) -> list[CommitRecord]:
    """CommitRecords for all history commits passing the filters, in
    deterministic (history, hash) order."""
    repo = GitRepo(repo_path)
    filters = filters or MiningFilters()
    shas = repo.commits()
    with ThreadPoolExecutor(max_workers=max_workers) as pool:
        results = list(
            pool.map(lambda s: _mine_one(repo, s, language, filters, refine_hook), shas)
        )
    return [r for r in results if r is not None]


def split_records(
    records: list[CommitRecord],
    seed: int = 0,
    ratios: tuple[float, float, float] = (0.7, 0.1, 0.2),
) -> dict[str, list[CommitRecord]]:
    """Cross-project split: every repo lands in exactly one of
    train/valid/test, proportions over projects, seeded shuffle."""
    repos = sorted({r.repo_id for r in records})
    rng = Random(seed)
    rng.shuffle(repos)
    n = len(repos)
    n_train = round(n * ratios[0])
    n_valid = round(n * ratios[1])
    assignment = {}
    for i, repo in enumerate(repos):
        if i < n_train:
            assignment[repo] = "train"
        elif i < n_train + n_valid:
            assignment[repo] = "valid"
        else:
            assignment[repo] = "test"
    out: dict[str, list[CommitRecord]] = {"train": [], "valid": [], "test": []}
    for r in records:
        out[assignment[r.repo_id]].append(r)
    return out


@dataclass(frozen=True)
class WindowConfig:
    size: int = 20
    stride: int = 10
    min_context: int = 2  # context lines kept around a generator hunk


@dataclass(frozen=True)
class LocatorSample:
    window: CodeWindow
    gold: LabelSequence
    priors: tuple[Hunk, ...]  # up to 3, never overlapping the window
    prompt: str
    repo_id: str
    commit_id: str

    def to_json(self) -> dict:
        return {
            "file": self.window.file,
            "span": list(self.window.span),
            "lines": list(self.window.lines),
            "inline": list(self.gold.inline),
            "inter": list(self.gold.inter),
            "priors": [h.to_json() for h in self.priors],
            "prompt": self.prompt,
            "repo_id": self.repo_id,
            "commit_id": self.commit_id,
        }


@dataclass(frozen=True)
class GeneratorSample:
    window: CodeWindow
    gold: LabelSequence
    target_hunk: Hunk
    priors: tuple[Hunk, ...]
    prompt: str
    repo_id: str
    commit_id: str

    def to_json(self) -> dict:
        return {
            "file": self.window.file,
            "span": list(self.window.span),
            "lines": list(self.window.lines),
            "inline": list(self.gold.inline),
            "inter": list(self.gold.inter),
            "gold_post_code": list(self.target_hunk.new_lines),
            "target_hunk": self.target_hunk.to_json(),
            "priors": [h.to_json() for h in self.priors],
            "prompt": self.prompt,
            "repo_id": self.repo_id,
            "commit_id": self.commit_id,
        }


def window_gold_labels(window: CodeWindow, hunks: list[Hunk], language: str) -> LabelSequence:
    """Gold labels for a window: all-KEEP/all-NULL base with each
    intersecting hunk's enriched labels transplanted (clipped at edges)."""
    ws, we = window.span
    n = len(window.lines)
    inline = [KEEP] * n
    inter = [NULL] * (n + 1)
    for hunk in hunks:
        if hunk.file != window.file:
            continue
        e = enrich(hunk, language)
        hs = hunk.old_start
        for i, label in enumerate(e.inline_labels):
            pos = hs + i - ws
            if 0 <= pos < n:
                inline[pos] = label
        for g, label in enumerate(e.inter_labels):
            if label == NULL:
                continue
            pos = hs + g - ws
            if 0 <= pos <= n:
                inter[pos] = label
    return LabelSequence(
        inline=tuple(inline),
        inter=tuple(inter),
        inline_conf=tuple([1.0] * n),
        inter_conf=tuple([1.0] * (n + 1)),
        window=window,
    )


def _hunk_overlaps_window(hunk: Hunk, window: CodeWindow) -> bool:
    if hunk.file != window.file:
        return False
    ws, we = window.span
    hs, he = hunk.old_span
    if not hunk.old_lines:  # insertion point counts as touching its gap line
        return ws <= hunk.old_start <= we + 1
    return hs <= we and ws <= he


def _hunk_tokens(hunk: Hunk) -> list[str]:
    toks: list[str] = []
    for line in list(hunk.old_lines) + list(hunk.new_lines):
        toks.extend(t.text for t in tokenize_line(line))
    return toks


def rank_prior_hunks(window: CodeWindow, hunks: list[Hunk], k: int = 3) -> tuple[Hunk, ...]:
    """BM25-top-k hunks as paired priors; hunks overlapping the window are
    excluded before ranking."""
    eligible = [h for h in hunks if not _hunk_overlaps_window(h, window)]
    if not eligible or k <= 0:
        return ()
    index = BM25Index([_hunk_tokens(h) for h in eligible])
    query = [t.text for line in window.lines for t in tokenize_line(line)]
    ranked = index.rank(query)
    return tuple(eligible[i] for i, _ in ranked[:k])


def build_locator_dataset(
    records: list[CommitRecord], window_cfg: WindowConfig | None = None
) -> list[LocatorSample]:
    cfg = window_cfg or WindowConfig()
    samples = []
    for record in records:
        project = Project(files=dict(record.pre_files), language=record.language)
        hunks = list(record.hunks)
        for path in sorted(record.pre_files):
            for window in slice_file_windows(project, path, cfg.size, cfg.stride):
                inside = [h for h in hunks if _hunk_overlaps_window(h, window)]
                gold = window_gold_labels(window, inside, record.language)
                samples.append(
                    LocatorSample(
                        window=window,
                        gold=gold,
                        priors=rank_prior_hunks(window, hunks, k=3),
                        prompt=record.message_clean,
                        repo_id=record.repo_id,
                        commit_id=record.commit_id,
                    )
                )
    return samples


def _generator_window(record: CommitRecord, hunk: Hunk, cfg: WindowConfig) -> CodeWindow | None:
    lines = record.pre_files.get(hunk.file)
    if lines is None:
        return None
    n = len(lines)
    hs, he = hunk.old_span
    if not hunk.old_lines:
        hs = he = min(max(hunk.old_start, 1), max(n, 1))
    lo = max(1, hs - cfg.min_context)
    hi = min(n, he + cfg.min_context)
    # widen toward the configured size without swallowing another hunk
    others = [h for h in record.hunks if h is not hunk and h.file == hunk.file]
    floor = max((h.old_span[1] + 1 for h in others if h.old_span[1] < hs), default=1)
    ceil = min((h.old_span[0] - 1 for h in others if h.old_span[0] > he), default=n)
    while hi - lo + 1 < cfg.size and (lo > floor or hi < ceil):
        if lo > floor:
            lo -= 1
        if hi - lo + 1 < cfg.size and hi < ceil:
            hi += 1
    if hi < lo:
        return None
    return CodeWindow(
        file=hunk.file,
        span=(lo, hi),
        lines=tuple(lines[lo - 1 : hi]),
        language=record.language,
    )


def build_generator_dataset(
    records: list[CommitRecord], window_cfg: WindowConfig | None = None
) -> list[GeneratorSample]:
    """One sample per hunk: a window holding exactly that hunk, gold output =
    the hunk's post-edit code, priors = up to 3 other same-commit hunks."""
    cfg = window_cfg or WindowConfig()
    samples = []
    for record in records:
        for hunk in record.hunks:
            window = _generator_window(record, hunk, cfg)
            if window is None:
                continue
            gold = window_gold_labels(window, [hunk], record.language)
            others = [h for h in record.hunks if h is not hunk]
            priors = rank_prior_hunks(window, others, k=3)
            samples.append(
                GeneratorSample(
                    window=window,
                    gold=gold,
                    target_hunk=hunk,
                    priors=priors,
                    prompt=record.message_clean,
                    repo_id=record.repo_id,
                    commit_id=record.commit_id,
                )
            )
    return samples


def write_jsonl(path: str | Path, rows: list) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for row in rows:
            obj = row.to_json() if hasattr(row, "to_json") else row
            fh.write(json.dumps(obj, sort_keys=True) + "\n")


def write_manifest(
    path: str | Path, splits: dict[str, list[CommitRecord]], seed: int, filters: MiningFilters
) -> None:
    manifest = {
        "seed": seed,
        "filters": {
            "min_hunks": filters.min_hunks,
            "max_hunks": filters.max_hunks,
            "min_message_chars": filters.min_message_chars,
            "max_message_chars": filters.max_message_chars,
        },
        "splits": {
            name: sorted({r.repo_id for r in records}) for name, records in splits.items()
        },
        "commit_counts": {name: len(records) for name, records in splits.items()},
    }
    Path(path).write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n")
