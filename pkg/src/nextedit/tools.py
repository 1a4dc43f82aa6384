"""Deduction services the pipeline fires when a composition is detected.

Two providers expose the same surface: StaticToolProvider works on the
in-memory project with token-exact scanning (deterministic, used in
simulation), LspToolProvider defers to running language servers. Every
returned candidate carries confidence 1.0.
"""
from __future__ import annotations

from dataclasses import dataclass

from .clones import detect_clones
from .core import Project
from .lexing import FUNC_KEYWORDS, tokenize_line
from .lsp import ServerSession, ToolEditCandidate


def identifier_occurrences(project: Project, name: str) -> list[tuple[str, int, list[int]]]:
    """(file, 1-based line, token columns) for every line holding the exact
    identifier token. Token-level, so `cap` never matches `capacity`."""
    out = []
    for path in sorted(project.files):
        for i, line in enumerate(project.files[path]):
            cols = [
                t.col
                for t in tokenize_line(line)
                if t.kind == "ident" and t.text == name
            ]
            if cols:
                out.append((path, i + 1, cols))
    return out


def substitute_identifier(line: str, old: str, new: str) -> str:
    tokens = tokenize_line(line)
    out = []
    cursor = 0
    for t in tokens:
        if t.kind == "ident" and t.text == old:
            out.append(line[cursor : t.col])
            out.append(new)
            cursor = t.col + len(t.text)
    out.append(line[cursor:])
    return "".join(out)


def is_call_or_def_site(line: str, name: str, language: str) -> bool:
    tokens = tokenize_line(line)
    func_kw = FUNC_KEYWORDS.get(language, frozenset())
    for i, t in enumerate(tokens):
        if t.kind != "ident" or t.text != name:
            continue
        if i + 1 < len(tokens) and tokens[i + 1].text == "(":
            return True
        if i > 0 and tokens[i - 1].text in func_kw:
            return True
    return False


class StaticToolProvider:
    """Token-exact project scanning standing in for IDE services."""

    name = "static"

    def __init__(self, clone_threshold: float = 0.7):
        self.clone_threshold = clone_threshold

    def rename(
        self, project: Project, old: str, new: str, origin: tuple[str, tuple[int, int]] | None = None
    ) -> list[ToolEditCandidate]:
        """Content-carrying candidates renaming every occurrence of ``old``,
        one per affected line, origin line excluded (already edited)."""
        out = []
        for path, line_no, _cols in identifier_occurrences(project, old):
            if origin and path == origin[0] and origin[1][0] <= line_no <= origin[1][1]:
                continue
            line = project.files[path][line_no - 1]
            out.append(
                ToolEditCandidate(
                    file=path,
                    span=(line_no, line_no),
                    replacement=(substitute_identifier(line, old, new),),
                    source_service="rename",
                )
            )
        return out

    def references(
        self, project: Project, symbol: str, origin: tuple[str, tuple[int, int]] | None = None
    ) -> list[ToolEditCandidate]:
        out = []
        for path, line_no, _cols in identifier_occurrences(project, symbol):
            if origin and path == origin[0] and origin[1][0] <= line_no <= origin[1][1]:
                continue
            out.append(
                ToolEditCandidate(
                    file=path,
                    span=(line_no, line_no),
                    replacement=None,
                    source_service="references",
                )
            )
        return out

    def clones(
        self,
        project: Project,
        needle: tuple[str, ...],
        origin: tuple[str, tuple[int, int]] | None = None,
        min_similarity: float | None = None,
    ) -> list[ToolEditCandidate]:
        hits = detect_clones(
            list(needle),
            project,
            min_similarity=min_similarity or self.clone_threshold,
            exclude=origin,
        )
        return [
            ToolEditCandidate(
                file=h.file,
                span=h.span,
                replacement=None,
                source_service="clone",
                similarity=h.similarity,
            )
            for h in hits
        ]

    def diagnostics(self, project: Project, path: str) -> list[ToolEditCandidate]:
        return []  # no linter: diagnostics only flow from a live server


@dataclass
class LspToolProvider:
    """Adapts a live ServerSession to the provider surface.

    The session works against files on disk under its root; callers keep the
    workspace in sync before invoking services.
    """

    session: ServerSession

    name = "lsp"

    def _find_position(self, project: Project, file: str, span: tuple[int, int], name: str):
        lines = project.files[file]
        for line_no in range(span[0], min(span[1], len(lines)) + 1):
            for t in tokenize_line(lines[line_no - 1]):
                if t.kind == "ident" and t.text == name:
                    return line_no, t.col
        return None

    def rename(self, project, old, new, origin=None):
        if origin is None:
            return []
        pos = self._find_position(project, origin[0], origin[1], old)
        if pos is None:
            return []
        return self.session.rename(origin[0], pos[0], pos[1], new)

    def references(self, project, symbol, origin=None):
        if origin is None:
            return []
        pos = self._find_position(project, origin[0], origin[1], symbol)
        if pos is None:
            return []
        return self.session.references(origin[0], pos[0], pos[1])

    def clones(self, project, needle, origin=None, min_similarity=None):
        # no standard LSP method exists for clone search; served locally
        return StaticToolProvider().clones(project, needle, origin, min_similarity)

    def diagnostics(self, project, path):
        return self.session.diagnostics(path)
