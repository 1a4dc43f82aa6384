import pytest

from nextedit.core import Project
from nextedit.errors import ReplayDesync
from nextedit.mining import CommitRecord
from nextedit.simulate import SimConfig, aggregate, simulate_record
from nextedit.textdiff import Hunk, apply_hunks


def make_record(files_pre: dict[str, list[str]], hunks: list[Hunk], message="test commit"):
    return CommitRecord(
        repo_id="fixture",
        commit_id="c" + str(abs(hash(tuple(h.file for h in hunks))) % 10_000),
        message_raw=message,
        message_clean=message,
        hunks=tuple(hunks),
        language="python",
        pre_files={p: tuple(ls) for p, ls in files_pre.items()},
    )


def post_project(record: CommitRecord, pre: Project) -> Project:
    files = dict(pre.files)
    by_file: dict[str, list[Hunk]] = {}
    for h in record.hunks:
        by_file.setdefault(h.file, []).append(h)
    for path, hunks in by_file.items():
        files[path] = tuple(apply_hunks(list(pre.files[path]), hunks))
    return Project(files=files, language=pre.language)


@pytest.fixture
def clone_pair_record():
    """Two-hunk commit where hunk 2 is a near-clone of hunk 1."""
    lines = [
        "def handler_a(req):",
        "    if 'sigma_min' in inspect.signature(self.func).parameters:",
        "        mark('a')",
        "",
        "def handler_b(req):",
        "    if 'sigma_sched' in inspect.signature(self.func).parameters:",
        "        mark('b')",
    ]
    h1 = Hunk("mod.py", 2, (lines[1],), 2, ("    if 'sigma_min' in parameters:",))
    h2 = Hunk("mod.py", 6, (lines[5],), 6, ("    if 'sigma_sched' in parameters:",))
    record = make_record({"mod.py": lines}, [h1, h2])
    return record, Project(files={"mod.py": tuple(lines)}, language="python")


class TestSimulateRecord:
    def test_clone_pair_matched_at_top1(self, clone_pair_record):
        record, pre = clone_pair_record
        report = simulate_record(record, pre, SimConfig(), post_project(record, pre))
        (step,) = report.steps
        assert step.matched[1] and step.matched[3] and step.matched[5]
        assert step.best_bleu == 100.0
        assert step.accepted[1]

    def test_final_tree_matches_post_commit(self, clone_pair_record):
        record, pre = clone_pair_record
        report = simulate_record(record, pre, SimConfig(), post_project(record, pre))
        assert report.final_tree_matches

    def test_deterministic_reports_byte_identical(self, clone_pair_record):
        record, pre = clone_pair_record
        a = simulate_record(record, pre, SimConfig(seed=4), post_project(record, pre))
        b = simulate_record(record, pre, SimConfig(seed=4), post_project(record, pre))
        assert aggregate([a]).to_bytes() == aggregate([b]).to_bytes()

    def test_replay_consumes_one_hunk_per_step(self):
        lines = [f"v{i} = {i}" for i in range(1, 30)]
        hunks = [
            Hunk("m.py", i, (f"v{i} = {i}",), i, (f"v{i} = {i + 100}",))
            for i in (2, 9, 16, 23)
        ]
        record = make_record({"m.py": lines}, hunks)
        pre = Project(files={"m.py": tuple(lines)}, language="python")
        report = simulate_record(record, pre, SimConfig(), post_project(record, pre))
        assert len(report.steps) == len(hunks) - 1
        assert report.final_tree_matches

    def test_desync_detected_on_bad_gold(self):
        lines = ["a = 1", "b = 2", "c = 3"]
        h1 = Hunk("m.py", 1, ("a = 1",), 1, ("a = 9",))
        bad = Hunk("m.py", 2, ("WRONG",), 2, ("b = 9",))
        record = make_record({"m.py": lines}, [h1, bad])
        pre = Project(files={"m.py": tuple(lines)}, language="python")
        with pytest.raises(ReplayDesync):
            simulate_record(record, pre, SimConfig())

    def test_needs_two_hunks(self):
        lines = ["a = 1"]
        record = make_record({"m.py": lines}, [Hunk("m.py", 1, ("a = 1",), 1, ("a = 2",))])
        with pytest.raises(ValueError):
            simulate_record(record, Project(files={"m.py": tuple(lines)}), SimConfig())

    def test_line_renumbering_across_growing_edits(self):
        # first hunk grows the file by two lines; the second must still apply
        lines = ["hdr", "target_one = 1", "mid", "target_two = 2", "tail"]
        h1 = Hunk("m.py", 2, ("target_one = 1",), 2, ("t = 0", "u = 1", "target_one = t + u"))
        h2 = Hunk("m.py", 4, ("target_two = 2",), 6, ("target_two = 20",))
        record = make_record({"m.py": lines}, [h1, h2])
        pre = Project(files={"m.py": tuple(lines)}, language="python")
        report = simulate_record(record, pre, SimConfig(), post_project(record, pre))
        assert report.final_tree_matches


class TestCcdOnly:
    def test_match_rates_equal_across_k(self, clone_pair_record):
        record, pre = clone_pair_record
        from nextedit.pipeline import EngineConfig

        cfg = SimConfig(engine=EngineConfig(invoker_mode="off"), ccd_only=True)
        report = simulate_record(record, pre, cfg, post_project(record, pre))
        agg = aggregate([report])
        assert agg.match_rate[1] == agg.match_rate[3] == agg.match_rate[5]


class TestAggregate:
    def test_all_matched_with_perfect_bleu(self, clone_pair_record):
        record, pre = clone_pair_record
        agg = aggregate([simulate_record(record, pre, SimConfig(), post_project(record, pre))])
        assert agg.acceptance_rate[1] == 1.0
        assert agg.bleu_bands["100"] == 1.0

    def test_rates_monotone_and_acceptance_bounded(self, clone_pair_record):
        record, pre = clone_pair_record
        reports = [
            simulate_record(record, pre, SimConfig(seed=s), post_project(record, pre))
            for s in range(3)
        ]
        agg = aggregate(reports)
        assert agg.match_rate[1] <= agg.match_rate[3] <= agg.match_rate[5]
        assert all(agg.acceptance_rate[k] <= agg.match_rate[k] for k in (1, 3, 5))

    def test_band_shares_sum_to_one(self, clone_pair_record):
        record, pre = clone_pair_record
        agg = aggregate([simulate_record(record, pre, SimConfig(), post_project(record, pre))])
        assert sum(agg.bleu_bands.values()) == pytest.approx(1.0)

    def test_hand_counted_match_rate(self):
        # one commit with 3 steps: make exactly one step unmatched by pointing
        # the third hunk at content no prior resembles
        lines = [
            "alpha = 'x'",
            "if 'k1' in inspect.signature(f).parameters:",
            "pad1",
            "if 'k2' in inspect.signature(f).parameters:",
            "pad2",
            "zeta = object()",
        ]
        hunks = [
            Hunk("m.py", 2, (lines[1],), 2, ("if 'k1' in params:",)),
            Hunk("m.py", 4, (lines[3],), 4, ("if 'k2' in params:",)),
            Hunk("m.py", 6, (lines[5],), 6, ("zeta = factory.build_unrelated()",)),
        ]
        record = make_record({"m.py": lines}, hunks)
        pre = Project(files={"m.py": tuple(lines)}, language="python")
        report = simulate_record(record, pre, SimConfig(), post_project(record, pre))
        agg = aggregate([report])
        assert agg.n_steps == 2
        assert agg.match_rate[1] == pytest.approx(0.5)

    def test_empty_rejected(self):
        with pytest.raises(ValueError):
            aggregate([])
