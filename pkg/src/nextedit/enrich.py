"""Six-label edit representation and the translation from plain diff hunks.

A hunk's pre-edit lines each get an inline label (KEEP / REPLACE / DELETE)
and every inter-line gap, including the outermost two, gets an inter label
(NULL / INSERT / BLOCK-SPLIT). The translation aligns the two versions at
token level, maps tokens back to lines, and derives labels from the line
mapping. It is lossless: `reconstruct` recovers the post-edit lines exactly.
"""
from __future__ import annotations

from collections import Counter, defaultdict
from dataclasses import dataclass, field

from .errors import EmptyCorpus, InconsistentMapping, MalformedEncoding
from .lexing import SyntaxToken, tokenize
from .textdiff import Hunk, lcs_pairs

KEEP = "KEEP"
REPLACE = "REPLACE"
DELETE = "DELETE"
NULL = "NULL"
INSERT = "INSERT"
BLOCK_SPLIT = "BLOCK-SPLIT"

INLINE_LABELS = (KEEP, REPLACE, DELETE)
INTER_LABELS = (NULL, INSERT, BLOCK_SPLIT)
ALL_LABELS = INLINE_LABELS + INTER_LABELS

_SHORT = {KEEP: "K", REPLACE: "R", DELETE: "D", NULL: "N", INSERT: "I", BLOCK_SPLIT: "B"}
_TAG = {label: f"<{label}>" for label in ALL_LABELS}
_TAG_TO_LABEL = {tag: label for label, tag in _TAG.items()}

# DP cell budget before falling back to the O(ND) matcher on huge hunks
_DP_CELL_CAP = 4_000_000


def short_labels(labels) -> str:
    """Compact single-letter form, e.g. 'KKDRRRKK' — handy in tests."""
    return "".join(_SHORT[l] for l in labels)


def lcs_match(tokens_before: list, tokens_after: list) -> list[tuple[int, int]]:
    """Longest common subsequence under (kind, text) equality.

    Returns index pairs, strictly increasing on both sides. Among equal-length
    alignments the backtrace prefers leaving earlier `before` tokens unmatched,
    which keeps matches on the structurally corresponding occurrence (a kept
    keyword matches the kept statement, not a deleted line that happens to
    share it).
    """
    a = [t.key if isinstance(t, SyntaxToken) else t for t in tokens_before]
    b = [t.key if isinstance(t, SyntaxToken) else t for t in tokens_after]
    n, m = len(a), len(b)
    if n == 0 or m == 0:
        return []
    if (n + 1) * (m + 1) > _DP_CELL_CAP:
        return lcs_pairs(a, b)

    # dp[i][j] = LCS length of a[i:] vs b[j:]
    dp = [[0] * (m + 1) for _ in range(n + 1)]
    for i in range(n - 1, -1, -1):
        row = dp[i]
        nxt = dp[i + 1]
        ai = a[i]
        for j in range(m - 1, -1, -1):
            if ai == b[j]:
                row[j] = nxt[j + 1] + 1
            else:
                down = nxt[j]
                right = row[j + 1]
                row[j] = down if down >= right else right
    out = []
    i = j = 0
    while i < n and j < m:
        if dp[i][j] == dp[i + 1][j]:
            i += 1
        elif dp[i][j] == dp[i][j + 1]:
            j += 1
        else:
            out.append((i, j))
            i += 1
            j += 1
    return out


@dataclass(frozen=True)
class LineMapping:
    """Per pre-edit line: the post-edit line it maps to (None = no
    counterpart). ``orphans`` are post-edit lines that are nobody's target."""

    assignment: tuple[int | None, ...]
    orphans: tuple[int, ...]


def token2line_mapping(
    matches: list[tuple[int, int]],
    tokens_before: list[SyntaxToken],
    tokens_after: list[SyntaxToken],
    old_lines: tuple[str, ...] | list[str],
    new_lines: tuple[str, ...] | list[str],
) -> LineMapping:
    """Collapse token matches into a line-level mapping.

    Each old line votes with its matched tokens for new lines. The target is
    chosen by, in order: a voted line with identical full text; a voted line
    sharing the old line's leading token (an edited statement stays anchored
    to its own statement head, not to new code that borrowed its expression);
    plain majority. Ties break toward the smaller new line index. Blank old
    lines pair positionally with identical blank orphans so unchanged hunks
    map to identity.
    """
    n_old, n_new = len(old_lines), len(new_lines)
    votes: dict[int, Counter] = defaultdict(Counter)
    for i, j in matches:
        votes[tokens_before[i].line][tokens_after[j].line] += 1

    first_tok_old: dict[int, tuple[str, str]] = {}
    for t in tokens_before:
        first_tok_old.setdefault(t.line, t.key)
    first_tok_new: dict[int, tuple[str, str]] = {}
    for t in tokens_after:
        first_tok_new.setdefault(t.line, t.key)

    def pick(cands: Counter, old_idx: int) -> int:
        exact = [nl for nl in cands if new_lines[nl - 1] == old_lines[old_idx - 1]]
        pool = exact
        if not pool:
            head = first_tok_old.get(old_idx)
            pool = [nl for nl in cands if head is not None and first_tok_new.get(nl) == head]
        if not pool:
            pool = list(cands)
        best = max(cands[nl] for nl in pool)
        return min(nl for nl in pool if cands[nl] == best)

    assignment: list[int | None] = [None] * n_old
    last_target = 0
    last_line = 0
    for o in range(1, n_old + 1):
        if o not in votes:
            continue
        t = pick(votes[o], o)
        if t < last_target:
            raise InconsistentMapping(
                f"non-monotone line mapping: old {o} -> new {t} after new {last_target}"
            )
        # a shared target is a merged block, legal only for adjacent lines
        if t == last_target and o != last_line + 1:
            continue
        assignment[o - 1] = t
        last_target, last_line = t, o

    # Positional pairing of blank lines left unmatched by the token vote.
    taken = {t for t in assignment if t is not None}
    for o in range(1, n_old + 1):
        if assignment[o - 1] is not None or old_lines[o - 1].strip():
            continue
        prev_t = max((t for t in assignment[: o - 1] if t is not None), default=0)
        next_t = min((t for t in assignment[o:] if t is not None), default=n_new + 1)
        for nl in range(prev_t + 1, next_t):
            if nl not in taken and new_lines[nl - 1] == old_lines[o - 1]:
                assignment[o - 1] = nl
                taken.add(nl)
                break

    orphans = tuple(nl for nl in range(1, n_new + 1) if nl not in set(assignment))
    return LineMapping(assignment=tuple(assignment), orphans=orphans)


def convert2label(
    mapping: LineMapping,
    old_lines: tuple[str, ...] | list[str],
    new_lines: tuple[str, ...] | list[str],
) -> tuple[tuple[str, ...], tuple[str, ...], dict[int, tuple[str, ...]]]:
    """Labels from a line mapping: (inter_labels, inline_labels, insert_blocks).

    Gap g (0..n) sits before old line g+1; gap 0 and gap n are the outermost.
    Orphan post-edit lines land as an INSERT block at the gap immediately
    before the next mapped old line. BLOCK-SPLIT separates adjacent REPLACE
    lines that map to distinct targets when no insertion already divides them.
    """
    n = len(old_lines)
    assignment = mapping.assignment

    inline: list[str] = []
    for o in range(1, n + 1):
        t = assignment[o - 1]
        if t is None:
            inline.append(DELETE)
        elif new_lines[t - 1] == old_lines[o - 1]:
            inline.append(KEEP)
        else:
            inline.append(REPLACE)

    # merged blocks regenerate as a unit, so members cannot claim KEEP
    for o in range(n):
        t = assignment[o]
        if t is None:
            continue
        prev_same = o > 0 and assignment[o - 1] == t
        next_same = o + 1 < n and assignment[o + 1] == t
        if (prev_same or next_same) and inline[o] == KEEP:
            inline[o] = REPLACE

    assigned = [(o, t) for o, t in enumerate(assignment, start=1) if t is not None]
    insert_blocks: dict[int, list[str]] = defaultdict(list)
    for nl in mapping.orphans:
        gap = n
        for o, t in assigned:
            if t > nl:
                gap = o - 1
                break
        insert_blocks[gap].append(new_lines[nl - 1])

    inter: list[str] = [NULL] * (n + 1)
    for gap in insert_blocks:
        inter[gap] = INSERT
    for g in range(1, n):
        if inter[g] != NULL:
            continue
        if inline[g - 1] == REPLACE and inline[g] == REPLACE:
            if assignment[g - 1] != assignment[g]:
                inter[g] = BLOCK_SPLIT

    blocks = {g: tuple(lines) for g, lines in insert_blocks.items()}
    return tuple(inter), tuple(inline), blocks


@dataclass(frozen=True)
class EnrichedHunk:
    """A hunk annotated with interleaved inter-line and inline labels."""

    hunk: Hunk
    inline_labels: tuple[str, ...]
    inter_labels: tuple[str, ...]
    assignment: tuple[int | None, ...]
    insert_blocks: dict[int, tuple[str, ...]] = field(default_factory=dict)

    def __post_init__(self):
        n = len(self.hunk.old_lines)
        if not (len(self.inter_labels) == len(self.inline_labels) + 1 == n + 1):
            raise InconsistentMapping(
                f"label length law violated: {len(self.inter_labels)} inter, "
                f"{len(self.inline_labels)} inline, {n} old lines"
            )
        if any(g < 0 or g > n for g in self.insert_blocks):
            raise InconsistentMapping("insert block at out-of-range gap")
        for g, label in enumerate(self.inter_labels):
            has_block = bool(self.insert_blocks.get(g))
            if (label == INSERT) != has_block:
                raise InconsistentMapping(f"gap {g}: INSERT label/block mismatch")
            if label == BLOCK_SPLIT and (g == 0 or g == n):
                raise InconsistentMapping("BLOCK-SPLIT at outermost gap")

    @property
    def replace_targets(self) -> dict[tuple[int, int], tuple[str, ...]]:
        """Maximal same-target runs of mapped pre-edit lines -> their
        post-edit line (1-based local spans)."""
        out: dict[tuple[int, int], tuple[str, ...]] = {}
        new_lines = self.hunk.new_lines
        i = 0
        n = len(self.assignment)
        while i < n:
            t = self.assignment[i]
            if t is None:
                i += 1
                continue
            j = i
            while j + 1 < n and self.assignment[j + 1] == t:
                j += 1
            out[(i + 1, j + 1)] = (new_lines[t - 1],)
            i = j + 1
        return out

    def semantics(self) -> set[str]:
        """Distinct edit semantics present: subset of {DELETE, REPLACE, INSERT}."""
        kinds = set()
        if DELETE in self.inline_labels:
            kinds.add(DELETE)
        if REPLACE in self.inline_labels:
            kinds.add(REPLACE)
        if INSERT in self.inter_labels:
            kinds.add(INSERT)
        return kinds


def enrich(hunk: Hunk, language: str = "python") -> EnrichedHunk:
    """Translate a plain diff hunk into the six-label representation."""
    old_lines, new_lines = hunk.old_lines, hunk.new_lines
    toks_b = tokenize(old_lines, language)
    toks_a = tokenize(new_lines, language)
    matches = lcs_match(toks_b, toks_a)
    mapping = token2line_mapping(matches, toks_b, toks_a, old_lines, new_lines)
    inter, inline, blocks = convert2label(mapping, old_lines, new_lines)
    assert len(inter) - 1 == len(inline) == len(old_lines)
    return EnrichedHunk(
        hunk=hunk,
        inline_labels=inline,
        inter_labels=inter,
        assignment=mapping.assignment,
        insert_blocks=blocks,
    )


def reconstruct(e: EnrichedHunk) -> list[str]:
    """Invert the labelling: splice inserts and replace targets around KEEP
    lines and drop DELETE lines, recovering hunk.new_lines exactly."""
    out: list[str] = []
    new_lines = e.hunk.new_lines
    last_emitted = 0
    n = len(e.hunk.old_lines)
    for i in range(n + 1):
        out.extend(e.insert_blocks.get(i, ()))
        if i == n:
            break
        t = e.assignment[i]
        if t is not None and t != last_emitted:
            out.append(new_lines[t - 1])
            last_emitted = t
    return out


def multi_semantic_ratio(hunks: list[Hunk], language: str = "python") -> float:
    """Percentage of hunks whose labelling mixes at least two distinct edit
    semantics (deletion, replacement, insertion)."""
    if not hunks:
        raise EmptyCorpus("no hunks to analyze")
    multi = sum(1 for h in hunks if len(enrich(h, language).semantics()) >= 2)
    return 100.0 * multi / len(hunks)


def render_enriched(e: EnrichedHunk) -> str:
    """Bijective text encoding: a header, the labelled pre-edit section per
    the representation grammar, a blank separator, then every post-edit line
    tagged by its role. Tags always lead a line, so raw code containing a
    literal tag never needs escaping."""
    lines = [f"{e.hunk.old_start}\t{e.hunk.new_start}\t{e.hunk.file}"]
    n = len(e.hunk.old_lines)
    for i in range(n + 1):
        lines.append(_TAG[e.inter_labels[i]])
        if i < n:
            lines.append(f"{_TAG[e.inline_labels[i]]} {e.hunk.old_lines[i]}")
    lines.append("")
    roles = _new_line_roles(e)
    for role, text in zip(roles, e.hunk.new_lines):
        lines.append(f"{_TAG[role]} {text}")
    return "\n".join(lines) + "\n"


def _new_line_roles(e: EnrichedHunk) -> list[str]:
    roles: dict[int, str] = {}
    for i, t in enumerate(e.assignment):
        if t is None or t in roles:
            continue
        roles[t] = e.inline_labels[i]
    n_new = len(e.hunk.new_lines)
    return [roles.get(nl, INSERT) for nl in range(1, n_new + 1)]


def parse_enriched(text: str) -> EnrichedHunk:
    """Inverse of render_enriched. Raises MalformedEncoding on any structural
    violation."""
    raw = text.splitlines()
    if not raw:
        raise MalformedEncoding("empty input")
    header = raw[0].split("\t", 2)
    if len(header) != 3:
        raise MalformedEncoding(f"bad header {raw[0]!r}")
    try:
        old_start, new_start = int(header[0]), int(header[1])
    except ValueError as exc:
        raise MalformedEncoding(f"bad header {raw[0]!r}") from exc
    file = header[2]

    def split_tag(line: str, idx: int) -> tuple[str, str | None]:
        for tag, label in _TAG_TO_LABEL.items():
            if line == tag:
                return label, None
            if line.startswith(tag + " "):
                return label, line[len(tag) + 1 :]
        raise MalformedEncoding(f"line {idx + 1}: no leading label tag in {line!r}")

    # part 1: alternating inter / inline elements until the blank separator
    inter: list[str] = []
    inline: list[str] = []
    old_lines: list[str] = []
    i = 1
    expect_inter = True
    while i < len(raw) and raw[i] != "":
        label, content = split_tag(raw[i], i)
        if expect_inter:
            if label not in INTER_LABELS or content is not None:
                raise MalformedEncoding(f"line {i + 1}: expected inter label")
            inter.append(label)
        else:
            if label not in INLINE_LABELS or content is None:
                raise MalformedEncoding(f"line {i + 1}: expected inline element")
            inline.append(label)
            old_lines.append(content)
        expect_inter = not expect_inter
        i += 1
    if len(inter) != len(inline) + 1:
        raise MalformedEncoding("pre-edit section violates the length law")
    if i >= len(raw):
        raise MalformedEncoding("missing post-edit section")
    i += 1  # separator

    new_lines: list[str] = []
    roles: list[str] = []
    while i < len(raw):
        label, content = split_tag(raw[i], i)
        if label not in (KEEP, REPLACE, INSERT) or content is None:
            raise MalformedEncoding(f"line {i + 1}: bad post-edit element")
        roles.append(label)
        new_lines.append(content)
        i += 1

    # rebuild assignment and insert blocks by walking both structures
    n = len(old_lines)
    assignment: list[int | None] = [None] * n
    insert_blocks: dict[int, tuple[str, ...]] = {}
    cursor = 0  # index into new_lines/roles

    def consume_insert_run() -> tuple[str, ...]:
        nonlocal cursor
        start = cursor
        while cursor < len(roles) and roles[cursor] == INSERT:
            cursor += 1
        if cursor == start:
            raise MalformedEncoding("INSERT gap without inserted lines")
        return tuple(new_lines[start:cursor])

    for g in range(n + 1):
        if inter[g] == INSERT:
            insert_blocks[g] = consume_insert_run()
        if g == n:
            break
        if inline[g] == DELETE:
            continue
        prev_merged = (
            g > 0
            and assignment[g - 1] is not None
            and inter[g] == NULL
            and inline[g - 1] == REPLACE
            and inline[g] == REPLACE
        )
        if prev_merged:
            assignment[g] = assignment[g - 1]
            continue
        if cursor >= len(roles) or roles[cursor] == INSERT:
            raise MalformedEncoding(f"no post-edit line for pre-edit line {g + 1}")
        assignment[g] = cursor + 1
        cursor += 1
    if cursor != len(roles):
        raise MalformedEncoding("unconsumed post-edit lines")

    hunk = Hunk(
        file=file,
        old_start=old_start,
        old_lines=tuple(old_lines),
        new_start=new_start,
        new_lines=tuple(new_lines),
    )
    return EnrichedHunk(
        hunk=hunk,
        inline_labels=tuple(inline),
        inter_labels=tuple(inter),
        assignment=tuple(assignment),
        insert_blocks=insert_blocks,
    )
