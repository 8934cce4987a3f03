"""JSON-over-HTTP review API plus static hosting for the review console.

Loopback by default. Decision writes are serialized through a single lock so
concurrent curator tabs cannot interleave appends to the decision log.
"""

from __future__ import annotations

import json
import threading
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer
from importlib import resources
from pathlib import Path
from urllib.parse import parse_qs, urlparse

from .bootstrap import Workspace
from .errors import (
    AlreadyFinalized,
    ConflictingDecision,
    DataError,
    PendingDecisions,
    StateError,
    UnknownCandidate,
)

_CONTENT_TYPES = {
    ".html": "text/html; charset=utf-8",
    ".js": "text/javascript; charset=utf-8",
    ".css": "text/css; charset=utf-8",
    ".json": "application/json",
    ".map": "application/json",
}


def _error_payload(exc: Exception) -> tuple[int, dict]:
    if isinstance(exc, UnknownCandidate):
        return 404, {"error": "unknown_candidate", "detail": str(exc)}
    if isinstance(exc, ConflictingDecision):
        return 409, {"error": "conflicting_decision", "detail": str(exc)}
    if isinstance(exc, AlreadyFinalized):
        return 409, {"error": "already_finalized", "detail": str(exc)}
    if isinstance(exc, PendingDecisions):
        return 409, {
            "error": "pending_decisions",
            "detail": str(exc),
            "pending": exc.candidate_ids,
        }
    if isinstance(exc, (DataError, StateError)):
        return 400, {"error": "bad_request", "detail": str(exc)}
    return 500, {"error": "internal", "detail": str(exc)}


class ReviewApi:
    """Thin, validated wrappers over the workspace queue store."""

    def __init__(self, workspace: Workspace):
        self.workspace = workspace
        self._write_lock = threading.Lock()

    def list_iterations(self) -> dict:
        iterations = []
        for st in self.workspace.list_iterations():
            queue = self.workspace.load_queue(st.iteration)
            decisions = self.workspace.load_decisions(st.iteration)
            iterations.append({
                **st.to_json(),
                "pending": sum(1 for e in queue if e["candidate_id"] not in decisions),
            })
        return {"iterations": iterations}

    def list_candidates(self, iteration: int, role: str | None = None) -> dict:
        self.workspace.iteration_state(iteration)  # 404 on unknown iteration
        return {
            "iteration": iteration,
            "candidates": self.workspace.list_candidates(iteration, role),
        }

    def record_decision(self, candidate_id: str, verdict: str) -> dict:
        with self._write_lock:
            decision = self.workspace.record_decision(candidate_id, verdict)
        status = "accepted" if decision.verdict == "accept" else "rejected"
        return {"candidate_id": candidate_id, "status": status}

    def finalize(self, iteration: int) -> dict:
        with self._write_lock:
            merged = self.workspace.finalize(iteration)
        return {"iteration": iteration, "pattern_version": merged.version}


def default_static_dir() -> Path:
    return Path(str(resources.files("rxnmine").joinpath("static")))


def make_handler(api: ReviewApi, static_dir: Path):
    class Handler(BaseHTTPRequestHandler):
        def log_message(self, fmt, *args):  # keep test output quiet
            pass

        def _send_json(self, status: int, payload: dict) -> None:
            body = json.dumps(payload).encode("utf-8")
            self.send_response(status)
            self.send_header("Content-Type", "application/json")
            self.send_header("Content-Length", str(len(body)))
            self.end_headers()
            self.wfile.write(body)

        def _read_body(self) -> dict:
            length = int(self.headers.get("Content-Length", 0))
            raw = self.rfile.read(length) if length else b"{}"
            obj = json.loads(raw.decode("utf-8"))
            if not isinstance(obj, dict):
                raise ValueError("expected a JSON object")
            return obj

        def do_GET(self) -> None:
            url = urlparse(self.path)
            try:
                if url.path == "/api/iterations":
                    self._send_json(200, api.list_iterations())
                elif url.path == "/api/candidates":
                    query = parse_qs(url.query)
                    if "iteration" not in query:
                        self._send_json(400, {"error": "bad_request",
                                              "detail": "iteration parameter required"})
                        return
                    iteration = int(query["iteration"][0])
                    role = query.get("role", [None])[0]
                    self._send_json(200, api.list_candidates(iteration, role))
                else:
                    self._serve_static(url.path)
            except (ValueError, json.JSONDecodeError) as exc:
                self._send_json(400, {"error": "bad_request", "detail": str(exc)})
            except Exception as exc:  # noqa: BLE001 - surface as JSON error
                self._send_json(*_error_payload(exc))

        def do_POST(self) -> None:
            url = urlparse(self.path)
            try:
                body = self._read_body()
                if url.path == "/api/decisions":
                    result = api.record_decision(
                        str(body.get("candidate_id", "")), str(body.get("verdict", ""))
                    )
                    self._send_json(200, result)
                elif url.path == "/api/finalize":
                    result = api.finalize(int(body["iteration"]))
                    self._send_json(200, result)
                else:
                    self._send_json(404, {"error": "not_found", "detail": url.path})
            except (KeyError, ValueError, json.JSONDecodeError) as exc:
                self._send_json(400, {"error": "bad_request", "detail": str(exc)})
            except Exception as exc:  # noqa: BLE001
                self._send_json(*_error_payload(exc))

        def _serve_static(self, path: str) -> None:
            name = "index.html" if path in ("", "/") else path.lstrip("/")
            target = (static_dir / name).resolve()
            if not str(target).startswith(str(static_dir.resolve())) or not target.is_file():
                self._send_json(404, {"error": "not_found", "detail": path})
                return
            body = target.read_bytes()
            self.send_response(200)
            self.send_header(
                "Content-Type",
                _CONTENT_TYPES.get(target.suffix, "application/octet-stream"),
            )
            self.send_header("Content-Length", str(len(body)))
            self.end_headers()
            self.wfile.write(body)

    return Handler


def make_server(
    workspace: Workspace,
    port: int = 0,
    host: str = "127.0.0.1",
    static_dir: Path | None = None,
) -> ThreadingHTTPServer:
    api = ReviewApi(workspace)
    handler = make_handler(api, static_dir or default_static_dir())
    return ThreadingHTTPServer((host, port), handler)


def serve(workspace: Workspace, port: int, host: str = "127.0.0.1",
          static_dir: Path | None = None) -> None:
    server = make_server(workspace, port, host, static_dir)
    address = f"http://{server.server_address[0]}:{server.server_address[1]}/"
    print(f"review console at {address}")
    try:
        server.serve_forever()
    except KeyboardInterrupt:
        pass
    finally:
        server.server_close()
