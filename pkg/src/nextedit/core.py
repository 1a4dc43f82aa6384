"""Session data model: projects, edits, and elementary operations on them.

Line indexing is 1-based and inclusive everywhere in this package; the only
place 0-based positions appear is the language-server boundary, which converts
at the edge. Text is a list of lines split on ``\\n``; a missing trailing
newline is tracked per file so round-trips are exact.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field, replace

from .errors import ContentMismatch, EmptySpan, FileMissing

LANGUAGES = ("python", "go", "java", "javascript", "typescript")

LANGUAGE_EXTENSIONS = {
    "python": (".py",),
    "go": (".go",),
    "java": (".java",),
    "javascript": (".js", ".jsx", ".mjs", ".cjs"),
    "typescript": (".ts", ".tsx"),
}

SOURCE_EXTENSIONS = tuple(ext for exts in LANGUAGE_EXTENSIONS.values() for ext in exts)


def language_of_path(path: str) -> str | None:
    for lang, exts in LANGUAGE_EXTENSIONS.items():
        if path.endswith(exts):
            return lang
    return None


def normalize_path(path: str) -> str:
    """Project-relative path: forward slashes, no leading './', no '..'."""
    parts = [p for p in path.replace("\\", "/").split("/") if p not in ("", ".")]
    if ".." in parts:
        raise ValueError(f"path escapes project root: {path!r}")
    return "/".join(parts)


@dataclass(frozen=True)
class Edit:
    """One atomic change: replace ``code_before`` at [line_start, line_end]
    with ``code_after``. A pure insertion has ``code_before == []`` and
    ``line_end == line_start - 1`` (inserted before line_start)."""

    file: str
    line_start: int
    line_end: int
    code_before: tuple[str, ...]
    code_after: tuple[str, ...]
    timestamp: int = 0

    def __post_init__(self):
        object.__setattr__(self, "file", normalize_path(self.file))
        object.__setattr__(self, "code_before", tuple(self.code_before))
        object.__setattr__(self, "code_after", tuple(self.code_after))
        if self.line_start < 1:
            raise ValueError(f"line_start must be >= 1, got {self.line_start}")
        if self.line_start > self.line_end + 1:
            raise ValueError(
                f"line_start {self.line_start} > line_end {self.line_end} + 1"
            )
        if self.code_before and len(self.code_before) != self.line_end - self.line_start + 1:
            raise ValueError(
                f"code_before has {len(self.code_before)} lines but span "
                f"[{self.line_start}, {self.line_end}] covers "
                f"{self.line_end - self.line_start + 1}"
            )
        if not self.code_before and self.line_end != self.line_start - 1:
            raise ValueError("pure insertion requires line_end == line_start - 1")

    @property
    def span(self) -> tuple[int, int]:
        return (self.line_start, self.line_end)

    def inverse(self) -> Edit:
        """The edit that undoes this one against the post-application state."""
        return Edit(
            file=self.file,
            line_start=self.line_start,
            line_end=self.line_start + len(self.code_after) - 1,
            code_before=self.code_after,
            code_after=self.code_before,
            timestamp=self.timestamp,
        )

    def to_json(self) -> dict:
        return {
            "file": self.file,
            "line_start": self.line_start,
            "line_end": self.line_end,
            "code_before": list(self.code_before),
            "code_after": list(self.code_after),
        }

    @classmethod
    def from_json(cls, obj: dict, timestamp: int = 0) -> Edit:
        return cls(
            file=obj["file"],
            line_start=obj["line_start"],
            line_end=obj["line_end"],
            code_before=tuple(obj["code_before"]),
            code_after=tuple(obj["code_after"]),
            timestamp=timestamp,
        )


@dataclass(frozen=True)
class Project:
    """Immutable snapshot of the project: path -> file lines.

    ``no_trailing_newline`` lists files whose on-disk form lacks a final
    newline, so text round-trips byte-for-byte.
    """

    files: dict[str, tuple[str, ...]]
    language: str = "python"
    no_trailing_newline: frozenset[str] = field(default_factory=frozenset)

    def __post_init__(self):
        object.__setattr__(
            self,
            "files",
            {normalize_path(p): tuple(lines) for p, lines in self.files.items()},
        )

    @classmethod
    def from_texts(cls, texts: dict[str, str], language: str = "python") -> Project:
        files = {}
        ragged = set()
        for path, text in texts.items():
            path = normalize_path(path)
            if text.endswith("\n"):
                files[path] = tuple(text.split("\n")[:-1])
            else:
                files[path] = tuple(text.split("\n"))
                ragged.add(path)
        return cls(files=files, language=language, no_trailing_newline=frozenset(ragged))

    def text(self, path: str) -> str:
        path = normalize_path(path)
        lines = self.lines(path)
        body = "\n".join(lines)
        return body if path in self.no_trailing_newline else body + "\n"

    def lines(self, path: str) -> tuple[str, ...]:
        path = normalize_path(path)
        if path not in self.files:
            raise FileMissing(path)
        return self.files[path]

    def with_file(self, path: str, lines: list[str] | tuple[str, ...]) -> Project:
        files = dict(self.files)
        files[normalize_path(path)] = tuple(lines)
        return replace(self, files=files)


@dataclass(frozen=True)
class EditSession:
    """Chronologically ordered prior edits plus an optional description."""

    project_root: str
    prior_edits: tuple[Edit, ...] = ()
    prompt: str | None = None

    def __post_init__(self):
        object.__setattr__(self, "prior_edits", tuple(self.prior_edits))
        stamps = [e.timestamp for e in self.prior_edits]
        if stamps != sorted(stamps) or len(set(stamps)) != len(stamps):
            raise ValueError("prior_edits must be strictly ordered by timestamp")

    @property
    def latest(self) -> Edit | None:
        return self.prior_edits[-1] if self.prior_edits else None

    def extended(self, edit: Edit) -> EditSession:
        stamp = (self.prior_edits[-1].timestamp + 1) if self.prior_edits else 1
        if edit.timestamp <= (self.prior_edits[-1].timestamp if self.prior_edits else 0):
            edit = replace(edit, timestamp=stamp)
        return replace(self, prior_edits=self.prior_edits + (edit,))

    def to_jsonl(self) -> str:
        return "".join(json.dumps(e.to_json()) + "\n" for e in self.prior_edits)

    @classmethod
    def from_jsonl(cls, text: str, project_root: str = ".", prompt: str | None = None) -> EditSession:
        edits = tuple(
            Edit.from_json(json.loads(line), timestamp=i + 1)
            for i, line in enumerate(text.splitlines())
            if line.strip()
        )
        return cls(project_root=project_root, prior_edits=edits, prompt=prompt)


def apply_edit(project: Project, edit: Edit) -> Project:
    """Splice ``edit.code_after`` in place of ``edit.code_before``.

    Raises ContentMismatch unless the pre-code matches the project exactly,
    FileMissing if the file is absent (a pure insertion into a new file
    creates it when line_start == 1).
    """
    path = edit.file
    if path not in project.files:
        if not edit.code_before and edit.line_start == 1:
            return project.with_file(path, list(edit.code_after))
        raise FileMissing(path)
    lines = list(project.files[path])
    lo = edit.line_start - 1
    hi = edit.line_end  # exclusive slice bound
    if lo > len(lines) or hi > len(lines):
        raise ContentMismatch(
            f"{path}: span [{edit.line_start}, {edit.line_end}] beyond "
            f"{len(lines)}-line file"
        )
    actual = tuple(lines[lo:hi])
    if actual != edit.code_before:
        raise ContentMismatch(
            f"{path}: lines {edit.line_start}-{edit.line_end} do not match "
            f"the edit's pre-code"
        )
    new_lines = lines[:lo] + list(edit.code_after) + lines[hi:]
    return project.with_file(path, new_lines)


def line_overlap_ratio(a: tuple[int, int], b: tuple[int, int]) -> float:
    """|a ∩ b| / |b| for inclusive line spans; b is the ground-truth span.

    Callers apply the 0.5 match threshold themselves.
    """
    if a[0] > a[1] or b[0] > b[1]:
        raise EmptySpan(f"spans must be nonempty: a={a}, b={b}")
    inter = min(a[1], b[1]) - max(a[0], b[0]) + 1
    return max(0, inter) / (b[1] - b[0] + 1)
