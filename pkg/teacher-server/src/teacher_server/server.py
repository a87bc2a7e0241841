"""HTTP host for the scripted teacher: POST /v1/act, GET /v1/health.

Single worker, sequential request handling. Numbers are serialized with
Python's shortest round-trip float formatting, so a double survives the
wire exactly.
"""

from __future__ import annotations

import argparse
import json
import sys
from http.server import BaseHTTPRequestHandler, HTTPServer

from .policy import ScriptedTeacher


def load_config(path: str) -> ScriptedTeacher | tuple[int, ScriptedTeacher]:
    with open(path) as f:
        data = json.load(f)
    teacher_cfg = data.get("teacher")
    if not isinstance(teacher_cfg, dict):
        raise ValueError("config needs a 'teacher' object")
    if teacher_cfg.get("kind", "scripted") != "scripted":
        raise ValueError("only scripted teachers can be served")
    task = teacher_cfg.get("task")
    if not isinstance(task, str):
        raise ValueError("teacher.task is required")
    teacher = ScriptedTeacher(
        task=task,
        competence=float(teacher_cfg.get("competence", 1.0)),
        action_noise_std=float(teacher_cfg.get("action_noise_std", 0.0)),
        systematic_bias=teacher_cfg.get("systematic_bias"),
        observes_transformed=bool(teacher_cfg.get("observes_transformed", False)),
        seed=int(data.get("seed", teacher_cfg.get("seed", 0))),
        act_dim=int(data.get("act_dim", 3)))
    return int(data.get("port", 8800)), teacher


def make_handler(teacher: ScriptedTeacher):
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
                if not isinstance(observations, list) or not observations:
                    raise ValueError("observations must be a non-empty list")
                for row in observations:
                    if not isinstance(row, list):
                        raise ValueError("observations must be a list of rows")
                actions = teacher.act(observations, sample_count)
            except (KeyError, TypeError, ValueError) as exc:
                self._send(400, {"error": str(exc)})
                return
            self._send(200, {"actions": actions})

        def log_message(self, fmt, *args):
            pass

    return Handler


def serve(port: int, teacher: ScriptedTeacher, host: str = "127.0.0.1") -> HTTPServer:
    try:
        return HTTPServer((host, port), make_handler(teacher))
    except OSError as exc:
        raise SystemExit(f"cannot bind {host}:{port}: {exc}")


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="teacher-server",
        description="Serve a scripted teacher over the action protocol")
    parser.add_argument("--config", required=True, help="server config JSON")
    parser.add_argument("--port", type=int, default=None, help="override port")
    args = parser.parse_args(argv)
    try:
        port, teacher = load_config(args.config)
    except (OSError, ValueError, json.JSONDecodeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    if args.port is not None:
        port = args.port
    server = serve(port, teacher)
    print(f"teacher-server listening on 127.0.0.1:{server.server_address[1]} "
          f"(task={teacher.task}, act_dim={teacher.act_dim})", flush=True)
    try:
        server.serve_forever()
    except KeyboardInterrupt:
        pass
    finally:
        server.server_close()
    return 0


if __name__ == "__main__":
    sys.exit(main())
