"""Serving loops: newline-delimited JSON over byte streams and HTTP.

Request  {"id": n, "prefixes": [[int, ...], ...]}
Response {"id": n, "logprobs": [[float, ...], ...]}
Handshake: GET /vocab, or {"id": n, "op": "vocab"} on a stream, returning
{"vocab_size": V, "concept_table": {...}}.  Failures answer an object
with an "error" field instead of crashing the connection.
"""

from __future__ import annotations

import json
import sys
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer

__all__ = ["Bridge", "serve_stdio", "serve_http"]

DEFAULT_MAX_BATCH = 128


class Bridge:
    """Protocol core shared by both transports; one in-flight batch."""

    def __init__(self, model, concept_table: dict, *,
                 max_batch: int = DEFAULT_MAX_BATCH):
        self.model = model
        self.concept_table = concept_table
        self.max_batch = max_batch

    def vocab_payload(self) -> dict:
        return {"vocab_size": self.model.vocab_size,
                "concept_table": self.concept_table}

    def score_payload(self, prefixes) -> dict:
        if not isinstance(prefixes, list) or not all(
                isinstance(p, list) and all(isinstance(x, int) for x in p)
                for p in prefixes):
            raise ValueError("prefixes must be an array of integer arrays")
        if len(prefixes) > self.max_batch:
            raise ValueError(f"batch of {len(prefixes)} exceeds the limit "
                             f"of {self.max_batch}")
        return {"logprobs": self.model.logprob_rows(prefixes)}

    def handle_line(self, line: bytes) -> bytes:
        """One stream request to one response, errors included."""
        request_id = None
        try:
            request = json.loads(line)
            request_id = request.get("id")
            if request.get("op") == "vocab":
                payload = {"id": request_id, **self.vocab_payload()}
            else:
                payload = {"id": request_id,
                           **self.score_payload(request.get("prefixes"))}
        except Exception as exc:  # surface, never kill the stream
            payload = {"id": request_id, "error": str(exc)}
        return json.dumps(payload).encode() + b"\n"


def serve_stdio(bridge: Bridge, stdin=None, stdout=None) -> None:
    """Answer requests line by line until the peer closes the stream."""
    stdin = stdin if stdin is not None else sys.stdin.buffer
    stdout = stdout if stdout is not None else sys.stdout.buffer
    while True:
        line = stdin.readline()
        if not line:
            return
        if not line.strip():
            continue
        stdout.write(bridge.handle_line(line))
        stdout.flush()


def serve_http(bridge: Bridge, port: int) -> ThreadingHTTPServer:
    """Start an HTTP server answering GET /vocab and POST /score; the
    caller owns serve_forever / shutdown."""

    class Handler(BaseHTTPRequestHandler):
        def log_message(self, format, *args):  # keep stdout clean
            print(self.address_string(), format % args, file=sys.stderr)

        def _send(self, status: int, payload: dict) -> None:
            body = json.dumps(payload).encode()
            self.send_response(status)
            self.send_header("Content-Type", "application/json")
            self.send_header("Content-Length", str(len(body)))
            self.end_headers()
            self.wfile.write(body)

        def do_GET(self):
            if self.path.rstrip("/") == "/vocab" or self.path == "/vocab":
                self._send(200, bridge.vocab_payload())
            else:
                self._send(404, {"error": f"unknown path {self.path}"})

        def do_POST(self):
            if self.path.rstrip("/") != "/score":
                self._send(404, {"error": f"unknown path {self.path}"})
                return
            length = int(self.headers.get("Content-Length", "0"))
            try:
                request = json.loads(self.rfile.read(length))
                payload = {"id": request.get("id"),
                           **bridge.score_payload(request.get("prefixes"))}
                self._send(200, payload)
            except Exception as exc:
                self._send(400, {"id": None, "error": str(exc)})

    server = ThreadingHTTPServer(("127.0.0.1", port), Handler)
    return server
