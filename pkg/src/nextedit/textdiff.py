"""Hunk extraction: unified-diff parsing, line diffing, canonical rendering.

A hunk is a maximal run of changed lines; context separates hunks (any
unchanged line splits two runs into two hunks, matching git's strict hunk
semantics). Context lines are kept as metadata, never inside old/new_lines.
"""
from __future__ import annotations

import re
from dataclasses import dataclass

from .core import Edit
from .errors import MalformedDiff

HEADER_RE = re.compile(r"^@@ -(\d+)(?:,(\d+))? \+(\d+)(?:,(\d+))? @@")


@dataclass(frozen=True)
class Hunk:
    """One maximal run of changed lines.

    ``old_start`` is 1-based in the pre-version. For a pure insertion
    (old_lines empty) it names the line the new code is inserted *before*,
    i.e. the span is (old_start, old_start - 1). Same convention on the new
    side for pure deletions.
    """

    file: str
    old_start: int
    old_lines: tuple[str, ...]
    new_start: int
    new_lines: tuple[str, ...]
    context_before: tuple[str, ...] = ()
    context_after: tuple[str, ...] = ()

    def __post_init__(self):
        if not self.old_lines and not self.new_lines:
            raise ValueError("hunk must change at least one line")
        object.__setattr__(self, "old_lines", tuple(self.old_lines))
        object.__setattr__(self, "new_lines", tuple(self.new_lines))
        object.__setattr__(self, "context_before", tuple(self.context_before))
        object.__setattr__(self, "context_after", tuple(self.context_after))

    @property
    def old_span(self) -> tuple[int, int]:
        return (self.old_start, self.old_start + len(self.old_lines) - 1)

    @property
    def new_span(self) -> tuple[int, int]:
        return (self.new_start, self.new_start + len(self.new_lines) - 1)

    def to_edit(self, timestamp: int = 0) -> Edit:
        return Edit(
            file=self.file,
            line_start=self.old_start,
            line_end=self.old_start + len(self.old_lines) - 1,
            code_before=self.old_lines,
            code_after=self.new_lines,
            timestamp=timestamp,
        )

    def to_json(self) -> dict:
        out = {
            "file": self.file,
            "old_start": self.old_start,
            "old_lines": list(self.old_lines),
            "new_start": self.new_start,
            "new_lines": list(self.new_lines),
        }
        if self.context_before:
            out["context_before"] = list(self.context_before)
        if self.context_after:
            out["context_after"] = list(self.context_after)
        return out

    @classmethod
    def from_json(cls, obj: dict) -> Hunk:
        return cls(
            file=obj["file"],
            old_start=obj["old_start"],
            old_lines=tuple(obj["old_lines"]),
            new_start=obj["new_start"],
            new_lines=tuple(obj["new_lines"]),
            context_before=tuple(obj.get("context_before", ())),
            context_after=tuple(obj.get("context_after", ())),
        )


def lcs_pairs(a: list, b: list) -> list[tuple[int, int]]:
    """Index pairs of a longest common subsequence of a and b.

    Myers O(ND) frontier search; minimal edit script, hence a true LCS.
    """
    n, m = len(a), len(b)
    if n == 0 or m == 0:
        return []
    total = n + m
    frontier = [0] * (2 * total + 1)
    chains: list = [None] * (2 * total + 1)
    for d in range(total + 1):
        for k in range(-d, d + 1, 2):
            if k == -d or (k != d and frontier[total + k - 1] < frontier[total + k + 1]):
                idx = total + k + 1
                x = frontier[idx]
            else:
                idx = total + k - 1
                x = frontier[idx] + 1
            y = x - k
            chain = chains[idx]
            while x < n and y < m and a[x] == b[y]:
                chain = ((x, y), chain)
                x += 1
                y += 1
            if x >= n and y >= m:
                out = []
                while chain:
                    out.append(chain[0])
                    chain = chain[1]
                out.reverse()
                return out
            frontier[total + k] = x
            chains[total + k] = chain
    raise AssertionError("unreachable")


def diff_lines(before: list[str], after: list[str], file: str = "") -> list[Hunk]:
    """Minimal line-level diff of two texts, one Hunk per changed run."""
    matches = lcs_pairs(list(before), list(after))
    matches.append((len(before), len(after)))
    hunks = []
    pi, pj = 0, 0
    for mi, mj in matches:
        if mi > pi or mj > pj:
            hunks.append(
                Hunk(
                    file=file,
                    old_start=pi + 1,
                    old_lines=tuple(before[pi:mi]),
                    new_start=pj + 1,
                    new_lines=tuple(after[pj:mj]),
                )
            )
        pi, pj = mi + 1, mj + 1
    return hunks


def apply_hunks(before: list[str], hunks: list[Hunk]) -> list[str]:
    """Apply non-overlapping hunks (old_start coordinates) to a text."""
    out = []
    cursor = 0  # 0-based index into before
    for h in sorted(hunks, key=lambda h: h.old_start):
        lo = h.old_start - 1
        out.extend(before[cursor:lo])
        out.extend(h.new_lines)
        cursor = lo + len(h.old_lines)
    out.extend(before[cursor:])
    return out


def _strip_git_path(token: str) -> str:
    token = token.split("\t")[0].strip()
    if token == "/dev/null":
        return token
    if token.startswith(("a/", "b/")):
        return token[2:]
    return token


def parse_unified_diff(text: str) -> list[Hunk]:
    """Parse unified diff text into per-run Hunks with exact spans.

    Context lines inside @@ sections are excluded from old/new_lines and kept
    as context metadata. Raises MalformedDiff with the offending line number.
    """
    hunks: list[Hunk] = []
    lines = text.splitlines()
    file: str | None = None
    i = 0
    while i < len(lines):
        line = lines[i]
        if line.startswith("+++ "):
            path = _strip_git_path(line[4:])
            if path != "/dev/null":
                file = path
            i += 1
            continue
        if line.startswith("--- "):
            path = _strip_git_path(line[4:])
            if path != "/dev/null":
                file = path
            i += 1
            continue
        if line.startswith("@@"):
            m = HEADER_RE.match(line)
            if not m:
                raise MalformedDiff(f"bad hunk header {line!r}", i + 1)
            if file is None:
                raise MalformedDiff("hunk header before any file header", i + 1)
            old_no = int(m.group(1))
            old_len = int(m.group(2)) if m.group(2) is not None else 1
            new_no = int(m.group(3))
            new_len = int(m.group(4)) if m.group(4) is not None else 1
            # "-l,0" means the insertion point is after old line l
            if old_len == 0:
                old_no += 1
            if new_len == 0:
                new_no += 1
            i += 1
            seen_old = seen_new = 0
            run_old: list[str] = []
            run_new: list[str] = []
            run_old_start = old_no
            run_new_start = new_no
            context: list[str] = []
            pending_context: list[str] = []

            def flush(ctx_after: list[str]):
                if run_old or run_new:
                    hunks.append(
                        Hunk(
                            file=file,
                            old_start=run_old_start,
                            old_lines=tuple(run_old),
                            new_start=run_new_start,
                            new_lines=tuple(run_new),
                            context_before=tuple(context[-3:]),
                            context_after=tuple(ctx_after[:3]),
                        )
                    )

            while i < len(lines) and (seen_old < old_len or seen_new < new_len):
                body = lines[i]
                if body.startswith("\\"):  # "\ No newline at end of file"
                    i += 1
                    continue
                if not body:
                    body = " "  # some tools emit bare empty context lines
                tag, content = body[0], body[1:]
                if tag == " ":
                    flush([content])
                    if run_old or run_new:
                        context = []
                    run_old, run_new = [], []
                    context.append(content)
                    seen_old += 1
                    seen_new += 1
                    run_old_start = old_no + seen_old
                    run_new_start = new_no + seen_new
                elif tag == "-":
                    if not run_old and not run_new:
                        run_old_start = old_no + seen_old
                        run_new_start = new_no + seen_new
                    run_old.append(content)
                    seen_old += 1
                elif tag == "+":
                    if not run_old and not run_new:
                        run_old_start = old_no + seen_old
                        run_new_start = new_no + seen_new
                    run_new.append(content)
                    seen_new += 1
                else:
                    raise MalformedDiff(f"unexpected diff body line {body!r}", i + 1)
                i += 1
            if seen_old != old_len or seen_new != new_len:
                raise MalformedDiff(
                    f"hunk body ended early ({seen_old}/{old_len} old, "
                    f"{seen_new}/{new_len} new)",
                    i,
                )
            flush([])
            continue
        i += 1
    return hunks


def render_unified_diff(hunks: list[Hunk]) -> str:
    """Canonical zero-context unified diff; parse(render(hunks)) == hunks
    modulo context metadata."""
    out = []
    current_file = None
    for h in hunks:
        if h.file != current_file:
            out.append(f"--- a/{h.file}")
            out.append(f"+++ b/{h.file}")
            current_file = h.file
        old_len = len(h.old_lines)
        new_len = len(h.new_lines)
        old_no = h.old_start if old_len else h.old_start - 1
        new_no = h.new_start if new_len else h.new_start - 1
        out.append(f"@@ -{old_no},{old_len} +{new_no},{new_len} @@")
        out.extend("-" + l for l in h.old_lines)
        out.extend("+" + l for l in h.new_lines)
    return "\n".join(out) + ("\n" if out else "")
