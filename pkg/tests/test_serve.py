import io
import json
import subprocess
import sys

import pytest

from nextedit.serve import EngineServer

from conftest import SAMPLER_PRE


def rpc(server, method, params=None, rid=1):
    return server.handle({"jsonrpc": "2.0", "id": rid, "method": method, "params": params or {}})


@pytest.fixture
def initialized():
    server = EngineServer()
    resp = rpc(server, "initialize", {
        "project_files": {"modules/sampler.py": SAMPLER_PRE},
        "language": "python",
    })
    assert resp["result"]["revision"] == 0
    return server


H1_EDIT = {
    "file": "modules/sampler.py",
    "line_start": 10,
    "line_end": 10,
    "code_before": ["        if 'sigma_min' in inspect.signature(self.func).parameters:"],
    "code_after": [
        "        parameters = inspect.signature(self.func).parameters",
        "        xi = x + noise * sigma_sched[0]",
        "        if 'sigma_min' in parameters:",
    ],
}


class TestEngineServer:
    def test_edit_then_step_returns_suggestions(self, initialized):
        resp = rpc(initialized, "edit", {"edit": H1_EDIT, "revision": 0})
        assert resp["result"]["revision"] == 1
        resp = rpc(initialized, "step", {"k": 5, "revision": 1})
        suggestions = resp["result"]["suggestions"]
        assert suggestions
        spans = {tuple(s["span"]) for s in suggestions}
        assert (14, 14) in spans

    def test_accept_applies_and_advances_revision(self, initialized):
        rpc(initialized, "edit", {"edit": H1_EDIT, "revision": 0})
        suggestions = rpc(initialized, "step", {})["result"]["suggestions"]
        target = next(s for s in suggestions if tuple(s["span"]) == (14, 14))
        resp = rpc(initialized, "accept", {"id": target["id"], "revision": 1})
        assert resp["result"]["revision"] == 2
        lines = rpc(initialized, "file", {"path": "modules/sampler.py"})["result"]["lines"]
        assert lines[13] == "        if 'n' in parameters:"
        assert len(initialized.state.session.prior_edits) == 2

    def test_stale_suggestion_rejected_after_buffer_change(self, initialized):
        rpc(initialized, "edit", {"edit": H1_EDIT, "revision": 0})
        suggestions = rpc(initialized, "step", {})["result"]["suggestions"]
        target = next(s for s in suggestions if tuple(s["span"]) == (14, 14))
        # mutate the buffer underneath the pending suggestion
        mutation = {
            "file": "modules/sampler.py",
            "line_start": 14,
            "line_end": 14,
            "code_before": ["        if 'n' in inspect.signature(self.func).parameters:"],
            "code_after": ["        if 'n_steps' in inspect.signature(self.func).parameters:"],
        }
        rpc(initialized, "edit", {"edit": mutation, "revision": 1})
        resp = rpc(initialized, "accept", {"id": target["id"], "revision": 2})
        assert "error" in resp

    def test_revision_mismatch_rejected(self, initialized):
        resp = rpc(initialized, "edit", {"edit": H1_EDIT, "revision": 5})
        assert "error" in resp

    def test_reject_removes_suggestion(self, initialized):
        rpc(initialized, "edit", {"edit": H1_EDIT, "revision": 0})
        suggestions = rpc(initialized, "step", {})["result"]["suggestions"]
        sid = suggestions[0]["id"]
        assert rpc(initialized, "reject", {"id": sid})["result"]["ok"]
        resp = rpc(initialized, "accept", {"id": sid, "revision": 1})
        assert "error" in resp

    def test_unknown_method(self, initialized):
        assert "error" in rpc(initialized, "bogus")

    def test_stream_transport(self):
        requests = [
            {"jsonrpc": "2.0", "id": 1, "method": "initialize",
             "params": {"project_files": {"a.py": "x = 1\n"}}},
            {"jsonrpc": "2.0", "id": 2, "method": "shutdown", "params": {}},
        ]
        rfile = io.BytesIO(("".join(json.dumps(r) + "\n" for r in requests)).encode())
        wfile = io.BytesIO()
        EngineServer().serve_stream(rfile, wfile)
        out = [json.loads(l) for l in wfile.getvalue().decode().splitlines()]
        assert out[0]["result"]["revision"] == 0
        assert out[1]["result"] == {}


class TestStdioProcess:
    def test_subprocess_round_trip(self):
        proc = subprocess.Popen(
            [sys.executable, "-m", "nextedit.cli", "serve", "--stdio"],
            stdin=subprocess.PIPE,
            stdout=subprocess.PIPE,
            text=True,
        )
        try:
            requests = [
                {"jsonrpc": "2.0", "id": 1, "method": "initialize",
                 "params": {"project_files": {"modules/sampler.py": SAMPLER_PRE}}},
                {"jsonrpc": "2.0", "id": 2, "method": "edit",
                 "params": {"edit": H1_EDIT, "revision": 0}},
                {"jsonrpc": "2.0", "id": 3, "method": "step", "params": {"k": 5}},
                {"jsonrpc": "2.0", "id": 4, "method": "shutdown", "params": {}},
            ]
            stdout, _ = proc.communicate(
                "".join(json.dumps(r) + "\n" for r in requests), timeout=60
            )
            responses = [json.loads(l) for l in stdout.splitlines()]
            assert responses[2]["result"]["suggestions"]
        finally:
            proc.kill()
