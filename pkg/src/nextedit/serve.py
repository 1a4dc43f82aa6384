"""Newline-delimited JSON-RPC endpoint for interactive clients.

One editor session per connection: the client streams applied edits, asks for
a prediction step, and accepts or rejects suggestions. Revisions implement
optimistic concurrency: any mutating call must quote the current revision,
and accept re-validates the suggestion's pre-code so a stale suggestion can
never be applied.
"""
from __future__ import annotations

import json
import socket
import sys
from dataclasses import dataclass, field

from .core import Edit, EditSession, Project, apply_edit
from .errors import ContentMismatch, FileMissing, NextEditError
from .pipeline import EngineConfig, Recommendation, step

STALE_REVISION = -32009
STALE_SUGGESTION = -32010


@dataclass
class EngineState:
    project: Project | None = None
    session: EditSession | None = None
    config: EngineConfig = field(default_factory=EngineConfig)
    revision: int = 0
    suggestions: dict[str, dict] = field(default_factory=dict)


class EngineServer:
    def __init__(self, config: EngineConfig | None = None):
        self.state = EngineState(config=config or EngineConfig())

    # ------------------------------------------------------------- handlers
    def handle(self, request: dict) -> dict:
        method = request.get("method", "")
        params = request.get("params") or {}
        rid = request.get("id")
        try:
            handler = getattr(self, "on_" + method.replace("/", "_"), None)
            if handler is None:
                return self._error(rid, -32601, f"unknown method {method!r}")
            result = handler(params)
            return {"jsonrpc": "2.0", "id": rid, "result": result}
        except NextEditError as exc:
            code = STALE_SUGGESTION if isinstance(exc, (ContentMismatch, FileMissing)) else -32000
            return self._error(rid, code, str(exc))
        except (KeyError, ValueError, TypeError) as exc:
            return self._error(rid, -32602, f"{type(exc).__name__}: {exc}")

    @staticmethod
    def _error(rid, code: int, message: str) -> dict:
        return {"jsonrpc": "2.0", "id": rid, "error": {"code": code, "message": message}}

    def _check_revision(self, params: dict) -> None:
        given = params.get("revision")
        if given is not None and given != self.state.revision:
            raise NextEditError(f"revision {given} != {self.state.revision}")

    def on_initialize(self, params: dict) -> dict:
        files = {p: t for p, t in params.get("project_files", {}).items()}
        language = params.get("language", "python")
        self.state.project = Project.from_texts(files, language=language)
        self.state.session = EditSession(
            project_root=params.get("project_root", "."),
            prompt=params.get("prompt"),
        )
        self.state.revision = 0
        self.state.suggestions = {}
        return {"revision": 0, "files": sorted(self.state.project.files)}

    def on_edit(self, params: dict) -> dict:
        self._require_session()
        self._check_revision(params)
        edit = Edit.from_json(
            params["edit"], timestamp=len(self.state.session.prior_edits) + 1
        )
        self.state.project = apply_edit(self.state.project, edit)
        self.state.session = self.state.session.extended(edit)
        self.state.revision += 1
        self.state.suggestions = {}
        return {"revision": self.state.revision}

    def on_step(self, params: dict) -> dict:
        self._require_session()
        self._check_revision(params)
        if not self.state.session.prior_edits:
            return {"revision": self.state.revision, "suggestions": []}
        recs = step(self.state.session, self.state.project, self.state.config)
        limit = int(params.get("k", 5))
        payload = []
        self.state.suggestions = {}
        for i, rec in enumerate(recs[:limit]):
            sid = f"s{self.state.revision}-{i}"
            entry = self._suggestion_payload(sid, rec)
            if entry is None:
                continue
            self.state.suggestions[sid] = entry
            payload.append(entry)
        return {"revision": self.state.revision, "suggestions": payload}

    def _suggestion_payload(self, sid: str, rec: Recommendation) -> dict | None:
        lines = self.state.project.files.get(rec.file)
        if lines is None:
            return None
        lo, hi = rec.span
        pre = list(lines[lo - 1 : hi])
        post = list(rec.candidates[0].post_code) if rec.candidates else None
        return {
            "id": sid,
            "file": rec.file,
            "span": [lo, hi],
            "pre_lines": pre,
            "post_lines": post,
            "confidence": rec.confidence,
            "provenance": rec.provenance,
            "service": rec.service,
        }

    def on_accept(self, params: dict) -> dict:
        self._require_session()
        self._check_revision(params)
        entry = self.state.suggestions.get(params["id"])
        if entry is None:
            raise NextEditError(f"unknown or expired suggestion {params.get('id')!r}")
        if entry["post_lines"] is None:
            raise NextEditError("suggestion carries no content to apply")
        lo, hi = entry["span"]
        current = list(self.state.project.files.get(entry["file"], ()))[lo - 1 : hi]
        if current != entry["pre_lines"]:
            raise ContentMismatch("buffer changed under the suggestion")
        edit = Edit(
            file=entry["file"],
            line_start=lo,
            line_end=hi,
            code_before=tuple(entry["pre_lines"]),
            code_after=tuple(entry["post_lines"]),
            timestamp=len(self.state.session.prior_edits) + 1,
        )
        self.state.project = apply_edit(self.state.project, edit)
        self.state.session = self.state.session.extended(edit)
        self.state.revision += 1
        self.state.suggestions = {}
        return {"revision": self.state.revision, "applied": edit.to_json()}

    def on_reject(self, params: dict) -> dict:
        self._require_session()
        self.state.suggestions.pop(params.get("id", ""), None)
        return {"ok": True}

    def on_file(self, params: dict) -> dict:
        self._require_session()
        path = params["path"]
        return {"lines": list(self.state.project.files.get(path, ()))}

    def on_session(self, params: dict) -> dict:
        self._require_session()
        return {
            "revision": self.state.revision,
            "prior_edits": len(self.state.session.prior_edits),
        }

    def on_shutdown(self, params: dict) -> dict:
        return {}

    def _require_session(self) -> None:
        if self.state.project is None or self.state.session is None:
            raise NextEditError("initialize first")

    # ------------------------------------------------------------ transports
    def serve_stream(self, rfile, wfile) -> None:
        for raw in rfile:
            line = raw.strip()
            if not line:
                continue
            try:
                request = json.loads(line)
            except json.JSONDecodeError:
                continue
            response = self.handle(request)
            wfile.write((json.dumps(response) + "\n").encode("utf-8"))
            wfile.flush()
            if request.get("method") == "shutdown":
                return

    def serve_stdio(self) -> None:
        self.serve_stream(sys.stdin.buffer, sys.stdout.buffer)

    def serve_socket(self, host: str = "127.0.0.1", port: int = 0) -> None:
        with socket.create_server((host, port)) as server:
            print(f"listening on {server.getsockname()[1]}", flush=True)
            conn, _ = server.accept()
            with conn, conn.makefile("rb") as rfile, conn.makefile("wb") as wfile:
                self.serve_stream(rfile, wfile)
