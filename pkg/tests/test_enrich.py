import itertools
import random

import pytest

from nextedit.enrich import (
    BLOCK_SPLIT,
    DELETE,
    INSERT,
    KEEP,
    NULL,
    REPLACE,
    enrich,
    lcs_match,
    multi_semantic_ratio,
    parse_enriched,
    reconstruct,
    render_enriched,
    short_labels,
    token2line_mapping,
)
from nextedit.errors import EmptyCorpus, MalformedEncoding
from nextedit.lexing import tokenize
from nextedit.textdiff import Hunk, diff_lines


def hunk(old, new, file="f.py"):
    return Hunk(file=file, old_start=1, old_lines=tuple(old), new_start=1, new_lines=tuple(new))


def brute_force_lcs_len(a, b):
    best = 0
    for r in range(len(a), 0, -1):
        if r <= best:
            break
        for combo in itertools.combinations(range(len(a)), r):
            sub = [a[i] for i in combo]
            it = iter(b)
            if all(x in it for x in sub):
                best = r
                break
    return best


class TestLcsMatch:
    def test_identical_lists_fully_matched(self):
        toks = tokenize(["a = b + c"])
        assert lcs_match(toks, toks) == [(i, i) for i in range(len(toks))]

    def test_classic_lcs(self):
        a = tokenize(["a b c"])
        b = tokenize(["a c"])
        assert lcs_match(a, b) == [(0, 0), (2, 1)]

    def test_brute_force_oracle(self):
        rng = random.Random(11)
        alphabet = ["x", "y", "z", "w"]
        for _ in range(500):
            a = [("ident", rng.choice(alphabet)) for _ in range(rng.randint(0, 12))]
            b = [("ident", rng.choice(alphabet)) for _ in range(rng.randint(0, 12))]
            got = lcs_match(a, b)
            assert all(a[i] == b[j] for i, j in got)
            assert got == sorted(got)
            assert len(got) == brute_force_lcs_len(a, b)


class TestLineMapping:
    def test_golden_mapping(self, golden_hunk):
        toks_b = tokenize(golden_hunk.old_lines)
        toks_a = tokenize(golden_hunk.new_lines)
        mapping = token2line_mapping(
            lcs_match(toks_b, toks_a),
            toks_b,
            toks_a,
            golden_hunk.old_lines,
            golden_hunk.new_lines,
        )
        assert mapping.assignment == (1, 2, None, 3, 6, 7, 10, 11)
        assert mapping.orphans == (4, 5, 8, 9)

    def test_identity_mapping_on_unchanged_hunk(self):
        lines = ("a = 1", "", "b = 2")
        toks = tokenize(lines)
        mapping = token2line_mapping(lcs_match(toks, toks), toks, toks, lines, lines)
        assert mapping.assignment == (1, 2, 3)
        assert mapping.orphans == ()

    def test_brute_force_vote_oracle(self):
        # mapping agrees with exhaustive monotone assignment maximizing
        # matched-token agreement on small randomized hunks
        rng = random.Random(5)
        words = ["alpha", "beta", "gamma", "delta"]
        for _ in range(60):
            old = [" ".join(rng.choice(words) for _ in range(rng.randint(1, 3)))
                   for _ in range(rng.randint(1, 4))]
            new = [" ".join(rng.choice(words) for _ in range(rng.randint(1, 3)))
                   for _ in range(rng.randint(1, 4))]
            toks_b, toks_a = tokenize(old), tokenize(new)
            matches = lcs_match(toks_b, toks_a)
            mapping = token2line_mapping(matches, toks_b, toks_a, tuple(old), tuple(new))
            votes = {}
            for i, j in matches:
                votes.setdefault(toks_b[i].line, {}).setdefault(toks_a[j].line, 0)
                votes[toks_b[i].line][toks_a[j].line] += 1
            for o, t in enumerate(mapping.assignment, start=1):
                if t is not None and old[o - 1].strip():
                    assert t in votes[o], "assigned target must hold votes"


class TestConvert2Label:
    def test_golden_labels(self, golden_hunk):
        e = enrich(golden_hunk)
        assert short_labels(e.inline_labels) == "KKDRRRKK"
        assert short_labels(e.inter_labels) == "NNNNIBINN"

    def test_pure_insertion_between_kept_lines(self):
        e = enrich(hunk(["a = 1", "b = 2"], ["a = 1", "c = 3", "b = 2"]))
        assert short_labels(e.inline_labels) == "KK"
        assert short_labels(e.inter_labels) == "NIN"
        assert e.insert_blocks == {1: ("c = 3",)}

    def test_reformulates_expansion_as_insert_plus_replace(self):
        old = [
            "        extra_params_kwargs = self.initialize(p)",
            "        if 'sigma_min' in inspect.signature(self.func).parameters:",
            "            extra_params_kwargs['sigma_min'] = sigma_sched[-2]",
        ]
        new = [
            "        extra_params_kwargs = self.initialize(p)",
            "        parameters = inspect.signature(self.func).parameters",
            "        xi = x + noise * sigma_sched[0]",
            "        if 'sigma_min' in parameters:",
            "            extra_params_kwargs['sigma_min'] = sigma_sched[-2]",
        ]
        e = enrich(hunk(old, new))
        assert short_labels(e.inline_labels) == "KRK"
        assert short_labels(e.inter_labels) == "NINN"
        # the insert gap sits before the if line and carries the two new lines
        assert e.insert_blocks == {1: (new[1], new[2])}
        # the if line is replaced by the rewritten if line, not the assignment
        assert e.assignment[1] == 4


class TestEnrich:
    def test_degenerate_pure_insert(self):
        e = enrich(Hunk(file="f.py", old_start=4, old_lines=(), new_start=4, new_lines=("x = 1",)))
        assert e.inline_labels == ()
        assert e.inter_labels == (INSERT,)
        assert reconstruct(e) == ["x = 1"]

    def test_pure_delete(self):
        e = enrich(hunk(["gone = 1"], []))
        assert e.inline_labels == (DELETE,)
        assert e.inter_labels == (NULL, NULL)
        assert reconstruct(e) == []

    def test_unchanged_hunk_all_keep_null(self):
        lines = ["a = 1", "", "b = 2"]
        e = enrich(hunk(lines, lines))
        assert set(e.inline_labels) == {KEEP}
        assert set(e.inter_labels) == {NULL}

    def test_length_law(self, golden_hunk):
        e = enrich(golden_hunk)
        assert len(e.inter_labels) - 1 == len(e.inline_labels) == len(golden_hunk.old_lines)

    def test_block_split_never_outermost_or_beside_insert(self, golden_hunk):
        e = enrich(golden_hunk)
        n = len(e.inline_labels)
        for g, label in enumerate(e.inter_labels):
            if label == BLOCK_SPLIT:
                assert 0 < g < n
                assert not e.insert_blocks.get(g)

    def test_deterministic(self, golden_hunk):
        a = enrich(golden_hunk)
        b = enrich(golden_hunk)
        assert a == b

    def test_round_trip_on_random_hunks(self):
        rng = random.Random(23)
        words = ["foo", "bar", "baz", "qux", "if", "return", "x", "y", "1", "2", "'s'"]
        for _ in range(400):
            before = [" ".join(rng.choice(words) for _ in range(rng.randint(0, 5)))
                      for _ in range(rng.randint(0, 8))]
            after = [" ".join(rng.choice(words) for _ in range(rng.randint(0, 5)))
                     for _ in range(rng.randint(0, 8))]
            for h in diff_lines(before, after, file="f.py"):
                e = enrich(h)
                assert reconstruct(e) == list(h.new_lines)

    def test_round_trip_on_whole_hunk_pairs(self):
        rng = random.Random(29)
        words = ["a", "b", "c", "d", "(", ")", "=", "+"]
        for _ in range(300):
            n_old = rng.randint(0, 6)
            n_new = rng.randint(0, 6)
            if n_old == 0 and n_new == 0:
                continue
            before = [" ".join(rng.choice(words) for _ in range(rng.randint(0, 4)))
                      for _ in range(n_old)]
            after = [" ".join(rng.choice(words) for _ in range(rng.randint(0, 4)))
                     for _ in range(n_new)]
            e = enrich(hunk(before, after))
            assert reconstruct(e) == after


class TestMultiSemanticRatio:
    def test_pure_replaces_are_single_semantic(self):
        corpus = [hunk(["x = 1"], ["x = 2"]), hunk(["foo(a)"], ["foo(b)"])]
        assert multi_semantic_ratio(corpus) == 0.0

    def test_golden_hunk_is_multi_semantic(self, golden_hunk):
        assert multi_semantic_ratio([golden_hunk]) == 100.0
        assert enrich(golden_hunk).semantics() == {DELETE, REPLACE, INSERT}

    def test_constructed_thirty_percent(self):
        multi = hunk(
            ["obsolete_call()", "value = compute(1)"],
            ["value = compute(2)", "audit_log(value)", "flush()"],
        )
        assert len(enrich(multi).semantics()) >= 2
        single = hunk(["x = 1"], ["x = 2"])
        corpus = [multi] * 30 + [single] * 70
        assert multi_semantic_ratio(corpus) == pytest.approx(30.0)

    def test_empty_corpus(self):
        with pytest.raises(EmptyCorpus):
            multi_semantic_ratio([])


class TestEncoding:
    def test_round_trip_golden(self, golden_hunk):
        e = enrich(golden_hunk)
        assert parse_enriched(render_enriched(e)) == e

    def test_round_trip_trivial_and_degenerate(self):
        cases = [
            hunk(["a = 1", "b = 2"], ["a = 1", "c = 3", "b = 2"]),
            Hunk(file="f.py", old_start=3, old_lines=(), new_start=3, new_lines=("z",)),
            hunk(["gone"], []),
        ]
        for h in cases:
            e = enrich(h)
            assert parse_enriched(render_enriched(e)) == e

    def test_sentinel_looking_source_lines_survive(self):
        h = hunk(["<KEEP> not a tag", "x = 1"], ["<KEEP> not a tag", "x = 2"])
        e = enrich(h)
        assert parse_enriched(render_enriched(e)) == e

    def test_malformed_inputs_rejected(self):
        with pytest.raises(MalformedEncoding):
            parse_enriched("")
        with pytest.raises(MalformedEncoding):
            parse_enriched("1\t1\tf.py\n<KEEP> x\n")  # inline before any inter
        with pytest.raises(MalformedEncoding):
            parse_enriched("1\t1\tf.py\n<NULL>\n<KEEP> x\n<NULL>\n\n")  # no post line

    def test_random_round_trips(self):
        rng = random.Random(31)
        words = ["m", "n", "o", "p", "=", "("]
        for _ in range(200):
            before = [" ".join(rng.choice(words) for _ in range(rng.randint(0, 4)))
                      for _ in range(rng.randint(0, 5))]
            after = [" ".join(rng.choice(words) for _ in range(rng.randint(0, 4)))
                     for _ in range(rng.randint(0, 5))]
            if not before and not after:
                continue
            e = enrich(hunk(before, after))
            assert parse_enriched(render_enriched(e)) == e
