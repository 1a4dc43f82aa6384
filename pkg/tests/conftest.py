import subprocess
from pathlib import Path

import pytest

from nextedit.core import Edit, Project
from nextedit.textdiff import Hunk

# ---------------------------------------------------------------- golden hunk
# Tag-extraction rewrite: one hunk mixing a deletion, three replacements, and
# two insertions. Reference labelling: inline KKDRRRKK, inter NNNNIBINN.

GOLDEN_OLD = (
    "def extract_tags(req_data):",
    "    tags = []",
    "    req_tags = {k: v for k, v in req_data.items() if k.startswith('Tags.member.')}",
    "    for i in range(int(len(req_tags.keys()) / 2)):",
    "        key = req_tags['Tags.member.' + str(i + 1) + '.Key']",
    "        value = req_tags['Tags.member.' + str(i + 1) + '.Value']",
    "        tags.append({'Key': key, 'Value': value})",
    "    return tags",
)
GOLDEN_NEW = (
    "def extract_tags(req_data):",
    "    tags = []",
    "    for i in range(1, 200):",
    "        k1 = 'Tags.member.%s.Key' % i",
    "        k2 = 'Tags.member.%s.Value' % i",
    "        key = req_data.get(k1)",
    "        value = req_data.get(k2)",
    "        if key is None or value is None:",
    "            break",
    "        tags.append({'Key': key, 'Value': value})",
    "    return tags",
)


@pytest.fixture
def golden_hunk() -> Hunk:
    return Hunk(
        file="localstack/tags.py",
        old_start=1,
        old_lines=GOLDEN_OLD,
        new_start=1,
        new_lines=GOLDEN_NEW,
    )


# ------------------------------------------------------- sampler clone session
# A Python sampler where rewriting the first inspect.signature condition (H1)
# should propagate to the two clone sites below (H2, H3).

SAMPLER_PRE = """\
import inspect


class Sampler:
    def initialize(self, p):
        return {}

    def launch(self, p, x, noise, sigma_sched):
        extra_params_kwargs = self.initialize(p)
        if 'sigma_min' in inspect.signature(self.func).parameters:
            extra_params_kwargs['sigma_min'] = sigma_sched[-2]
        if 'n' in inspect.signature(self.func).parameters:
            extra_params_kwargs['n'] = len(sigma_sched) - 1
        if 'sigma_sched' in inspect.signature(self.func).parameters:
            extra_params_kwargs['sigma_sched'] = sigma_sched
        return extra_params_kwargs
"""

SAMPLER_H1_POST = (
    "        parameters = inspect.signature(self.func).parameters",
    "        xi = x + noise * sigma_sched[0]",
    "        if 'sigma_min' in parameters:",
)


@pytest.fixture
def sampler_project() -> Project:
    return Project.from_texts(
        {"modules/sampler.py": SAMPLER_PRE}, language="python"
    )


@pytest.fixture
def sampler_h1_edit() -> Edit:
    return Edit(
        file="modules/sampler.py",
        line_start=10,
        line_end=10,
        code_before=("        if 'sigma_min' in inspect.signature(self.func).parameters:",),
        code_after=SAMPLER_H1_POST,
        timestamp=1,
    )


# -------------------------------------------------------- chunk renew session
# Go project: a signature gains a parameter (H1); the engine should propagate
# to the call sites in the same file (H3) and across files (H4). H2 is the
# usage change that must NOT be treated as a rename.

WINDOW_GO_PRE = """\
package executor

func renewWithCapacity(chk *Chunk, cap int) *Chunk {
	newChk := new(Chunk)
	newChk.capacity = cap
	newChk.requiredRows = cap
	return newChk
}

func renewChunk(chk *Chunk, newCap int) *Chunk {
	return renewWithCapacity(chk, newCap)
}
"""

ROW_GO_PRE = """\
package chunk

func (r Row) renew() *Chunk {
	newChk := renewWithCapacity(r.c, 1)
	return newChk
}
"""


@pytest.fixture
def chunk_project() -> Project:
    return Project.from_texts(
        {"executor/window.go": WINDOW_GO_PRE, "util/chunk/row.go": ROW_GO_PRE},
        language="go",
    )


@pytest.fixture
def chunk_h1_edit() -> Edit:
    return Edit(
        file="executor/window.go",
        line_start=3,
        line_end=3,
        code_before=("func renewWithCapacity(chk *Chunk, cap int) *Chunk {",),
        code_after=("func renewWithCapacity(chk *Chunk, cap, maxChunkSize int) *Chunk {",),
        timestamp=1,
    )


# --------------------------------------------------------------- git fixtures
def run_git(repo: Path, *args: str) -> str:
    proc = subprocess.run(
        ["git", "-C", str(repo), *args], capture_output=True, text=True, check=True
    )
    return proc.stdout


def make_git_repo(root: Path, name: str = "fixture") -> Path:
    repo = root / name
    repo.mkdir(parents=True, exist_ok=True)
    run_git(repo, "init", "-q", "-b", "main")
    run_git(repo, "config", "user.email", "dev@example.com")
    run_git(repo, "config", "user.name", "Dev")
    return repo


def commit_files(repo: Path, files: dict[str, str], message: str) -> str:
    for rel, text in files.items():
        path = repo / rel
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(text, encoding="utf-8")
    run_git(repo, "add", "-A")
    run_git(repo, "commit", "-q", "-m", message, "--allow-empty")
    return run_git(repo, "rev-parse", "HEAD").strip()
