import json

import pytest
from click.testing import CliRunner

from nextedit.cli import main

from conftest import commit_files, make_git_repo

DIFF = """\
--- a/t.py
+++ b/t.py
@@ -1,3 +1,3 @@
 def extract(data):
-    items = data.fetch_all()
+    items = data.fetch_batch(limit)
     return items
"""


@pytest.fixture
def runner():
    return CliRunner()


class TestRepresent:
    def test_text_encoding(self, runner):
        result = runner.invoke(main, ["represent"], input=DIFF)
        assert result.exit_code == 0, result.output
        assert "<REPLACE>     items = data.fetch_all()" in result.output

    def test_json_output(self, runner):
        result = runner.invoke(main, ["represent", "--json"], input=DIFF)
        assert result.exit_code == 0
        row = json.loads(result.output.splitlines()[0])
        assert row["inline"] == ["REPLACE"]


class TestMineAndDatasets(object):
    @pytest.fixture
    def repo(self, tmp_path):
        repo = make_git_repo(tmp_path, "cli-repo")
        base = "\n".join(f"field_{i} = {i}" for i in range(1, 31)) + "\n"
        commit_files(repo, {"mod.py": base}, "seed")
        lines = base.splitlines()
        lines[2] = "field_3 = 'a'"
        lines[20] = "field_21 = 'b'"
        commit_files(repo, {"mod.py": "\n".join(lines) + "\n"}, "tweak two fields")
        return repo

    def test_mine_and_build(self, runner, repo, tmp_path):
        records = tmp_path / "records.jsonl"
        result = runner.invoke(main, ["mine", "--repo", str(repo), "--out", str(records)])
        assert result.exit_code == 0, result.output
        assert "mined 1 commits" in result.output

        out_dir = tmp_path / "ds"
        result = runner.invoke(
            main,
            ["build-dataset", "--records", str(records), "--task", "locator",
             "--out-dir", str(out_dir)],
        )
        assert result.exit_code == 0, result.output
        assert (out_dir / "manifest.json").exists()
        files = list(out_dir.glob("locator.*.jsonl"))
        assert len(files) == 3


class TestLocateAndGenerate:
    def test_locate_reports_similar_lines(self, runner, tmp_path):
        proj = tmp_path / "proj"
        proj.mkdir()
        (proj / "mod.py").write_text(
            "if 'k1' in inspect.signature(f).parameters:\n"
            "    pass\n"
            "if 'k2' in inspect.signature(f).parameters:\n"
        )
        session = tmp_path / "session.jsonl"
        session.write_text(
            json.dumps(
                {
                    "file": "mod.py",
                    "line_start": 1,
                    "line_end": 1,
                    "code_before": ["if 'k1' in inspect.signature(f).parameters:"],
                    "code_after": ["if 'k1' in params:"],
                }
            )
            + "\n"
        )
        result = runner.invoke(
            main,
            ["locate", "--project-dir", str(proj), "--session", str(session)],
        )
        assert result.exit_code == 0, result.output
        rows = json.loads(result.output)
        assert rows and rows[0]["file"] == "mod.py"

    def test_generate_applies_prior_rewrite(self, runner, tmp_path):
        target = tmp_path / "target.txt"
        target.write_text("if 'k2' in inspect.signature(f).parameters:\n")
        session = tmp_path / "session.jsonl"
        session.write_text(
            json.dumps(
                {
                    "file": "mod.py",
                    "line_start": 1,
                    "line_end": 1,
                    "code_before": ["if 'k1' in inspect.signature(f).parameters:"],
                    "code_after": ["if 'k1' in params:"],
                }
            )
            + "\n"
        )
        result = runner.invoke(
            main,
            ["generate", "--target", str(target), "--session", str(session)],
        )
        assert result.exit_code == 0, result.output
        first = json.loads(result.output.splitlines()[0])
        assert first["post_code"] == ["if 'k2' in params:"]


class TestInvokerCli:
    def test_bench_then_eval(self, runner, tmp_path):
        from nextedit.mining import CommitRecord, write_jsonl
        from nextedit.textdiff import Hunk

        lines = ["count = 0", "pad", "print(count)", "pad", "emit(count)", "pad", "log(count)"]
        hunks = tuple(
            Hunk("r.py", at, (lines[at - 1],), at, (lines[at - 1].replace("count", "total"),))
            for at in (1, 3, 5, 7)
        )
        record = CommitRecord("r", "c1", "rename count", "rename count", hunks,
                              "python", pre_files={"r.py": tuple(lines)})
        records = tmp_path / "records.jsonl"
        write_jsonl(records, [record])

        bench = tmp_path / "invoker.jsonl"
        result = runner.invoke(
            main, ["invoker-bench", "--records", str(records), "--out", str(bench)]
        )
        assert result.exit_code == 0, result.output

        result = runner.invoke(
            main, ["invoker-eval", "--samples", str(bench), "--backend", "heuristic"]
        )
        assert result.exit_code == 0, result.output
        metrics = json.loads(result.output)
        assert metrics["per_class"]["VAR_RENAME"]["recall"] == 1.0


class TestSimulateCli:
    def test_end_to_end_on_fixture_repo(self, runner, tmp_path):
        repo = make_git_repo(tmp_path, "sim-repo")
        base = (
            "def a(x):\n"
            "    if 'k1' in inspect.signature(f).parameters:\n"
            "        pass\n"
            "\n"
            "def b(x):\n"
            "    if 'k2' in inspect.signature(f).parameters:\n"
            "        pass\n"
        )
        commit_files(repo, {"m.py": base}, "seed")
        edited = base.replace(
            "if 'k1' in inspect.signature(f).parameters:", "if 'k1' in params:"
        ).replace(
            "if 'k2' in inspect.signature(f).parameters:", "if 'k2' in params:"
        )
        sha = commit_files(repo, {"m.py": edited}, "collapse signature lookups")
        out = tmp_path / "report.json"
        result = runner.invoke(
            main,
            ["simulate", "--repo", str(repo), "--commits", sha, "--untimed",
             "--out", str(out)],
        )
        assert result.exit_code == 0, result.output
        report = json.loads(out.read_text())
        assert report["match_rate"]["1"] == 1.0
