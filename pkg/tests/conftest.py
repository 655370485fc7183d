"""Shared fixtures: an in-process chat-completion stub server."""

from __future__ import annotations

import json
import threading
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer

import pytest


class StubServer:
    """Scripted chat-completion endpoint with request recording.

    `responder(body, index)` returns either a content string (sent as a 200
    chat completion), an (status, raw_body) tuple for error injection, or a
    plain int status.
    """

    def __init__(self, responder):
        self.responder = responder
        self.requests: list[dict] = []
        self.raw_requests: list[bytes] = []
        self._lock = threading.Lock()
        self._in_flight = 0
        self.max_in_flight = 0
        server = ThreadingHTTPServer(("127.0.0.1", 0), _Handler)
        server.stub = self  # type: ignore[attr-defined]
        self._server = server
        self._thread = threading.Thread(target=server.serve_forever, daemon=True)

    def start(self) -> "StubServer":
        self._thread.start()
        return self

    def stop(self) -> None:
        self._server.shutdown()
        self._server.server_close()

    @property
    def base_url(self) -> str:
        host, port = self._server.server_address[:2]
        return f"http://{host}:{port}"

    def _enter(self) -> None:
        with self._lock:
            self._in_flight += 1
            self.max_in_flight = max(self.max_in_flight, self._in_flight)

    def _exit(self) -> None:
        with self._lock:
            self._in_flight -= 1


class _Handler(BaseHTTPRequestHandler):
    def log_message(self, *args):  # silence test output
        pass

    def do_POST(self):
        stub: StubServer = self.server.stub  # type: ignore[attr-defined]
        stub._enter()
        try:
            length = int(self.headers.get("Content-Length", 0))
            raw = self.rfile.read(length)
            body = json.loads(raw)
            with stub._lock:
                index = len(stub.requests)
                stub.requests.append(body)
                stub.raw_requests.append(raw)
            result = stub.responder(body, index)
            if isinstance(result, int):
                status, payload = result, b"{}"
            elif isinstance(result, tuple):
                status, raw_body = result
                payload = raw_body.encode("utf-8") if isinstance(raw_body, str) else raw_body
            else:
                status = 200
                payload = json.dumps(
                    {"choices": [{"message": {"role": "assistant", "content": result}}]}
                ).encode("utf-8")
            self.send_response(status)
            self.send_header("Content-Type", "application/json")
            self.send_header("Content-Length", str(len(payload)))
            self.end_headers()
            self.wfile.write(payload)
        finally:
            stub._exit()


@pytest.fixture
def stub_server_factory():
    servers: list[StubServer] = []

    def factory(responder) -> StubServer:
        server = StubServer(responder).start()
        servers.append(server)
        return server

    yield factory
    for server in servers:
        server.stop()


@pytest.fixture
def api_key_env(monkeypatch):
    monkeypatch.setenv("REMEDY_API_KEY", "test-key-not-a-secret")
    return "REMEDY_API_KEY"
