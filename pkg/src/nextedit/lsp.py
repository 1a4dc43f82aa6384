"""Language Server Protocol client over stdio (JSON-RPC 2.0, Content-Length
framed).

One reader thread per server correlates responses to pending requests by id
and feeds notifications into a bounded queue (overflow drops oldest and
counts). All positions convert to 1-based inclusive line spans here and only
here; character offsets follow the protocol's UTF-16 default.
"""
from __future__ import annotations

import itertools
import json
import os
import subprocess
import threading
import time
from collections import deque
from dataclasses import dataclass
from pathlib import Path

from .errors import (
    HandshakeTimeout,
    LaunchFailed,
    RequestTimeout,
    ServerError,
    TransportClosed,
)

TOOL_SERVICES = ("rename", "references", "definition", "clone", "diagnostics")


@dataclass(frozen=True)
class ServerConfig:
    language: str
    command: tuple[str, ...]
    root: str
    initialization_options: dict | None = None
    timeout_ms: int = 5000

    def __post_init__(self):
        if not self.command:
            raise ValueError("command must be nonempty")
        if self.timeout_ms <= 0:
            raise ValueError("timeout must be positive")


@dataclass(frozen=True)
class ToolEditCandidate:
    """A location (and possibly content) deduced by a tool service.

    ``replacement`` holds the full post-edit text of the spanned lines when
    the service provides content (rename); None for location-only services.
    Tool-deduced locations always carry confidence 1.0; ``similarity`` keeps
    the clone score separately.
    """

    file: str
    span: tuple[int, int]
    replacement: tuple[str, ...] | None
    source_service: str
    confidence: float = 1.0
    similarity: float | None = None
    message: str | None = None

    def __post_init__(self):
        if self.confidence != 1.0:
            raise ValueError("tool candidates carry confidence 1.0 exactly")
        if self.source_service not in TOOL_SERVICES:
            raise ValueError(f"unknown service {self.source_service!r}")


def _to_utf16_col(line: str, col: int) -> int:
    return len(line[:col].encode("utf-16-le")) // 2


def _from_utf16_col(line: str, units: int) -> int:
    count = 0
    for i, ch in enumerate(line):
        if count >= units:
            return i
        count += 2 if ord(ch) > 0xFFFF else 1
    return len(line)


def path_to_uri(path: str | Path) -> str:
    return Path(path).absolute().as_uri()


class ServerSession:
    """A running language server plus the request plumbing around it."""

    def __init__(self, config: ServerConfig, notification_limit: int = 256):
        self.config = config
        self.root = Path(config.root).absolute()
        self._proc: subprocess.Popen | None = None
        self._ids = itertools.count(1)
        self._pending: dict[int, dict] = {}
        self._pending_events: dict[int, threading.Event] = {}
        self._lock = threading.Lock()
        self._write_lock = threading.Lock()
        self.notifications: deque = deque(maxlen=notification_limit)
        self.dropped_notifications = 0
        self._diagnostics: dict[str, list] = {}
        self._diag_event = threading.Event()
        self._closed = False
        self._docs: dict[str, int] = {}  # uri -> version
        self.capabilities: dict = {}

    # ------------------------------------------------------------- lifecycle
    def start(self) -> ServerSession:
        try:
            self._proc = subprocess.Popen(
                list(self.config.command),
                stdin=subprocess.PIPE,
                stdout=subprocess.PIPE,
                stderr=subprocess.DEVNULL,
                cwd=str(self.root),
            )
        except (OSError, ValueError) as exc:
            raise LaunchFailed(f"{self.config.command}: {exc}") from exc
        threading.Thread(target=self._read_loop, daemon=True).start()
        params = {
            "processId": os.getpid(),
            "rootUri": path_to_uri(self.root),
            "workspaceFolders": [
                {"uri": path_to_uri(self.root), "name": self.root.name}
            ],
            "capabilities": {
                "textDocument": {
                    "synchronization": {"didSave": True},
                    "publishDiagnostics": {"relatedInformation": False},
                    "rename": {"prepareSupport": False},
                    "references": {},
                    "definition": {},
                },
                "workspace": {"workspaceFolders": True, "configuration": True},
            },
            "initializationOptions": self.config.initialization_options or {},
        }
        try:
            result = self.request("initialize", params, timeout_ms=max(self.config.timeout_ms, 15000))
        except RequestTimeout as exc:
            self.stop()
            raise HandshakeTimeout(str(exc)) from exc
        self.capabilities = result.get("capabilities", {})
        self.notify("initialized", {})
        return self

    def stop(self) -> None:
        self._closed = True
        proc = self._proc
        if proc is None:
            return
        try:
            if proc.poll() is None:
                try:
                    self.notify("exit", None)
                except TransportClosed:
                    pass
                proc.terminate()
                try:
                    proc.wait(timeout=3)
                except subprocess.TimeoutExpired:
                    proc.kill()
        finally:
            self._proc = None

    # ------------------------------------------------------------- transport
    def _write(self, payload: dict) -> None:
        proc = self._proc
        if proc is None or proc.stdin is None or proc.poll() is not None:
            raise TransportClosed("server process is gone")
        body = json.dumps(payload).encode("utf-8")
        frame = b"Content-Length: %d\r\n\r\n%b" % (len(body), body)
        with self._write_lock:
            try:
                proc.stdin.write(frame)
                proc.stdin.flush()
            except (BrokenPipeError, OSError) as exc:
                raise TransportClosed(str(exc)) from exc

    def _read_message(self) -> dict | None:
        stdout = self._proc.stdout if self._proc else None
        if stdout is None:
            return None
        length = None
        while True:
            line = stdout.readline()
            if not line:
                return None
            line = line.strip()
            if not line:
                break
            if line.lower().startswith(b"content-length:"):
                length = int(line.split(b":")[1])
        if length is None:
            return None
        body = stdout.read(length)
        if len(body) < length:
            return None
        return json.loads(body.decode("utf-8"))

    def _read_loop(self) -> None:
        while not self._closed:
            try:
                msg = self._read_message()
            except Exception:
                msg = None
            if msg is None:
                break
            if "id" in msg and "method" in msg:
                self._answer_server_request(msg)
            elif "id" in msg:
                with self._lock:
                    event = self._pending_events.pop(msg["id"], None)
                    if event is not None:
                        self._pending[msg["id"]] = msg
                        event.set()
            else:
                if msg.get("method") == "textDocument/publishDiagnostics":
                    params = msg.get("params", {})
                    self._diagnostics[params.get("uri", "")] = params.get("diagnostics", [])
                    self._diag_event.set()
                if len(self.notifications) == self.notifications.maxlen:
                    self.dropped_notifications += 1
                self.notifications.append(msg)
        # transport gone: release all waiters
        with self._lock:
            for rid, event in list(self._pending_events.items()):
                self._pending[rid] = {"error": {"code": -1, "message": "transport closed"}}
                event.set()
            self._pending_events.clear()

    def _answer_server_request(self, msg: dict) -> None:
        method = msg.get("method")
        if method == "workspace/configuration":
            items = msg.get("params", {}).get("items", [])
            result = [None] * len(items)
        elif method == "window/workDoneProgress/create":
            result = None
        elif method == "workspace/workspaceFolders":
            result = [{"uri": path_to_uri(self.root), "name": self.root.name}]
        else:
            result = None
        try:
            self._write({"jsonrpc": "2.0", "id": msg["id"], "result": result})
        except TransportClosed:
            pass

    def request(self, method: str, params, timeout_ms: int | None = None):
        rid = next(self._ids)
        event = threading.Event()
        with self._lock:
            self._pending_events[rid] = event
        self._write({"jsonrpc": "2.0", "id": rid, "method": method, "params": params})
        timeout = (timeout_ms or self.config.timeout_ms) / 1000.0
        if not event.wait(timeout):
            with self._lock:
                self._pending_events.pop(rid, None)
            raise RequestTimeout(f"{method} did not answer within {timeout:.1f}s")
        with self._lock:
            msg = self._pending.pop(rid)
        if "error" in msg and msg["error"] is not None:
            err = msg["error"]
            if err.get("code") == -1:
                raise TransportClosed(err.get("message", ""))
            raise ServerError(err.get("code", 0), err.get("message", ""))
        return msg.get("result")

    def notify(self, method: str, params) -> None:
        self._write({"jsonrpc": "2.0", "method": method, "params": params})

    # ------------------------------------------------------------- documents
    def _language_id(self) -> str:
        return {"javascript": "javascript", "typescript": "typescript"}.get(
            self.config.language, self.config.language
        )

    def open_document(self, path: str, text: str) -> None:
        uri = path_to_uri(self.root / path)
        self._docs[uri] = 1
        self.notify(
            "textDocument/didOpen",
            {
                "textDocument": {
                    "uri": uri,
                    "languageId": self._language_id(),
                    "version": 1,
                    "text": text,
                }
            },
        )

    def change_document(self, path: str, text: str) -> None:
        uri = path_to_uri(self.root / path)
        version = self._docs.get(uri, 1) + 1
        self._docs[uri] = version
        self._diagnostics.pop(uri, None)
        self._diag_event.clear()
        self.notify(
            "textDocument/didChange",
            {
                "textDocument": {"uri": uri, "version": version},
                "contentChanges": [{"text": text}],
            },
        )

    # ------------------------------------------------------------- services
    def _doc_lines(self, path: str) -> list[str]:
        return (self.root / path).read_text(encoding="utf-8").split("\n")

    def _position(self, path: str, line: int, col: int) -> dict:
        text_line = self._doc_lines(path)[line - 1]
        return {"line": line - 1, "character": _to_utf16_col(text_line, col)}

    def _uri_to_rel(self, uri: str) -> str:
        from urllib.parse import unquote, urlparse

        p = Path(unquote(urlparse(uri).path))
        try:
            return p.relative_to(self.root).as_posix()
        except ValueError:
            return p.as_posix()

    def rename(self, path: str, line: int, col: int, new_name: str) -> list[ToolEditCandidate]:
        """All workspace edits for renaming the symbol at (line, col); every
        candidate carries the full post-edit text of its spanned lines."""
        result = self.request(
            "textDocument/rename",
            {
                "textDocument": {"uri": path_to_uri(self.root / path)},
                "position": self._position(path, line, col),
                "newName": new_name,
            },
        )
        if not result:
            return []
        return self._workspace_edit_candidates(result, "rename")

    def _workspace_edit_candidates(self, wedit: dict, service: str) -> list[ToolEditCandidate]:
        per_uri: dict[str, list[dict]] = {}
        for uri, edits in (wedit.get("changes") or {}).items():
            per_uri.setdefault(uri, []).extend(edits)
        for change in wedit.get("documentChanges") or []:
            if "textDocument" in change:
                per_uri.setdefault(change["textDocument"]["uri"], []).extend(
                    change.get("edits", [])
                )
        out = []
        for uri, edits in per_uri.items():
            rel = self._uri_to_rel(uri)
            lines = self._doc_lines(rel)
            # merge per affected line so one candidate covers all same-line edits
            by_line: dict[tuple[int, int], list[dict]] = {}
            for e in edits:
                s, t = e["range"]["start"], e["range"]["end"]
                key = (s["line"], t["line"])
                by_line.setdefault(key, []).append(e)
            for (sl, el), batch in sorted(by_line.items()):
                batch.sort(key=lambda e: e["range"]["start"]["character"], reverse=True)
                region = lines[sl : el + 1]
                for e in batch:
                    s, t = e["range"]["start"], e["range"]["end"]
                    scol = _from_utf16_col(region[0], s["character"])
                    ecol = _from_utf16_col(region[-1], t["character"])
                    merged = region[0][:scol] + e["newText"] + region[-1][ecol:]
                    region = merged.split("\n")
                out.append(
                    ToolEditCandidate(
                        file=rel,
                        span=(sl + 1, el + 1),
                        replacement=tuple(region),
                        source_service=service,
                    )
                )
        out.sort(key=lambda c: (c.file, c.span))
        return out

    def references(self, path: str, line: int, col: int) -> list[ToolEditCandidate]:
        result = self.request(
            "textDocument/references",
            {
                "textDocument": {"uri": path_to_uri(self.root / path)},
                "position": self._position(path, line, col),
                "context": {"includeDeclaration": True},
            },
        )
        return self._locations_to_candidates(result or [], "references")

    def definition(self, path: str, line: int, col: int) -> list[ToolEditCandidate]:
        result = self.request(
            "textDocument/definition",
            {
                "textDocument": {"uri": path_to_uri(self.root / path)},
                "position": self._position(path, line, col),
            },
        )
        if result is None:
            result = []
        if isinstance(result, dict):
            result = [result]
        locs = [
            {"uri": l.get("targetUri", l.get("uri")), "range": l.get("targetRange", l.get("range"))}
            for l in result
        ]
        return self._locations_to_candidates(locs, "definition")

    def _locations_to_candidates(self, locations: list, service: str) -> list[ToolEditCandidate]:
        out = []
        for loc in locations:
            rel = self._uri_to_rel(loc["uri"])
            r = loc["range"]
            out.append(
                ToolEditCandidate(
                    file=rel,
                    span=(r["start"]["line"] + 1, r["end"]["line"] + 1),
                    replacement=None,
                    source_service=service,
                )
            )
        out.sort(key=lambda c: (c.file, c.span))
        return out

    def diagnostics(self, path: str, wait_ms: int | None = None) -> list[ToolEditCandidate]:
        """Latest pushed diagnostics for the file, waiting up to the timeout
        for the server's publish; empty (stale) after the window expires."""
        uri = path_to_uri(self.root / path)
        deadline = time.monotonic() + (wait_ms or self.config.timeout_ms) / 1000.0
        while uri not in self._diagnostics and time.monotonic() < deadline:
            self._diag_event.wait(timeout=0.05)
            self._diag_event.clear()
        out = []
        for diag in self._diagnostics.get(uri, []):
            r = diag["range"]
            out.append(
                ToolEditCandidate(
                    file=path,
                    span=(r["start"]["line"] + 1, r["end"]["line"] + 1),
                    replacement=None,
                    source_service="diagnostics",
                    message=diag.get("message"),
                )
            )
        return out


def start(config: ServerConfig) -> ServerSession:
    """Launch and initialize a language server session."""
    return ServerSession(config).start()


def load_server_configs(path: str | Path, root: str) -> dict[str, ServerConfig]:
    """Server launch commands from a JSON or TOML file keyed by language.

    Each entry: {"command": [...], "initialization_options": {...},
    "timeout_ms": N}. TOML needs a tomllib-capable interpreter (3.11+).
    """
    raw = Path(path).read_bytes()
    if str(path).endswith(".toml"):
        import tomllib  # py3.11+; JSON configs work everywhere

        data = tomllib.loads(raw.decode("utf-8"))
    else:
        data = json.loads(raw.decode("utf-8"))
    configs = {}
    for language, entry in data.items():
        configs[language] = ServerConfig(
            language=language,
            command=tuple(entry["command"]),
            root=root,
            initialization_options=entry.get("initialization_options"),
            timeout_ms=int(entry.get("timeout_ms", 5000)),
        )
    return configs
