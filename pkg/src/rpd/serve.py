"""Loopback HTTP host for a scripted teacher.

Single-threaded, sequential request handling: determinism over
throughput. POST /v1/act and GET /v1/health follow the teacher wire
contract; malformed bodies and empty batches get HTTP 400 with a JSON
error object.
"""

from __future__ import annotations

import json
import logging
import threading
from http.server import BaseHTTPRequestHandler, HTTPServer

import numpy as np

from .teacher import ScriptedTeacher

log = logging.getLogger("rpd.serve")


def _make_handler(teacher: ScriptedTeacher):
    class Handler(BaseHTTPRequestHandler):
        protocol_version = "HTTP/1.1"

        def _send(self, code: int, payload: dict) -> None:
            body = json.dumps(payload).encode("utf-8")
            self.send_response(code)
            self.send_header("Content-Type", "application/json")
            self.send_header("Content-Length", str(len(body)))
            self.end_headers()
            self.wfile.write(body)

        def do_GET(self):
            if self.path == "/v1/health":
                self._send(200, {"status": "ok", "act_dim": teacher.act_dim})
            else:
                self._send(404, {"error": f"unknown path {self.path}"})

        def do_POST(self):
            if self.path != "/v1/act":
                self._send(404, {"error": f"unknown path {self.path}"})
                return
            try:
                length = int(self.headers.get("Content-Length", "0"))
                payload = json.loads(self.rfile.read(length).decode("utf-8"))
                observations = payload["observations"]
                sample_count = int(payload.get("sample_count", 1))
                if not isinstance(observations, list) or len(observations) == 0:
                    raise ValueError("observations must be a non-empty list")
                obs = np.asarray(observations, dtype=np.float64)
                if obs.ndim != 2:
                    raise ValueError("observations must be a matrix")
                if sample_count < 1:
                    raise ValueError("sample_count must be >= 1")
                response = teacher.act(obs, sample_count)
            except Exception as exc:
                self._send(400, {"error": str(exc)})
                return
            self._send(200, {"actions": response.actions.tolist()})

        def log_message(self, fmt, *args):
            log.debug("%s " + fmt, self.client_address[0], *args)

    return Handler


def make_server(teacher: ScriptedTeacher, port: int, host: str = "127.0.0.1") -> HTTPServer:
    try:
        return HTTPServer((host, port), _make_handler(teacher))
    except OSError as exc:
        raise SystemExit(f"cannot bind {host}:{port}: {exc}")


def serve_forever(teacher: ScriptedTeacher, port: int, host: str = "127.0.0.1") -> None:
    server = make_server(teacher, port, host)
    log.info("scripted teacher listening on %s:%d", host, server.server_address[1])
    try:
        server.serve_forever()
    except KeyboardInterrupt:
        pass
    finally:
        server.server_close()


class BackgroundServer:
    """Context manager running the server in a thread (tests/loopback)."""

    def __init__(self, teacher: ScriptedTeacher, port: int = 0):
        self.server = make_server(teacher, port)
        self.port = self.server.server_address[1]
        self.endpoint = f"http://127.0.0.1:{self.port}"
        self._thread = threading.Thread(target=self.server.serve_forever, daemon=True)

    def __enter__(self):
        self._thread.start()
        return self

    def __exit__(self, *exc):
        self.server.shutdown()
        self.server.server_close()
        self._thread.join(timeout=5)
