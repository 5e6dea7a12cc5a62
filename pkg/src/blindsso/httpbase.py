"""Minimal JSON-over-HTTP plumbing shared by the two services.

Routes map ``(method, path)`` to a handler taking a :class:`HttpRequest`
and returning a :class:`HttpResponse`.  The server is a stdlib
ThreadingHTTPServer, so handlers run concurrently on real sockets; state
protection is the service's job.
"""

from __future__ import annotations

import json
import threading
from dataclasses import dataclass, field
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer
from typing import Any, Callable, Optional
from urllib.parse import parse_qsl, urlparse

SESSION_COOKIE = "sid"


@dataclass
class HttpRequest:
    method: str
    path: str
    query: dict[str, str]
    body: Any  # parsed JSON or None
    cookie: Optional[str]
    headers: dict[str, str]


@dataclass
class HttpResponse:
    status: int = 200
    body: Any = None  # dict/list -> JSON; str/bytes -> raw
    content_type: str = "application/json"
    set_cookie: Optional[str] = None
    headers: dict[str, str] = field(default_factory=dict)


Handler = Callable[[HttpRequest], HttpResponse]


def json_error(status: int, error: str, **extra) -> HttpResponse:
    return HttpResponse(status=status, body={"error": error, **extra})


class JsonHttpServer:
    """HTTP front for a route table; binds to an ephemeral loopback port."""

    def __init__(self, routes: dict[tuple[str, str], Handler], host: str = "127.0.0.1", port: int = 0):
        self.routes = routes
        outer = self

        class _RequestHandler(BaseHTTPRequestHandler):
            protocol_version = "HTTP/1.1"
            disable_nagle_algorithm = True  # loopback latency, not throughput

            def log_message(self, fmt, *args):
                pass

            def _dispatch(self, method: str):
                parsed = urlparse(self.path)
                handler = outer.routes.get((method, parsed.path))
                if handler is None:
                    self._respond(HttpResponse(status=404, body={"error": "NotFound"}))
                    return
                body = None
                length = int(self.headers.get("Content-Length") or 0)
                if length:
                    raw = self.rfile.read(length)
                    try:
                        body = json.loads(raw)
                    except json.JSONDecodeError:
                        self._respond(HttpResponse(status=400, body={"error": "BadJson"}))
                        return
                cookie = None
                raw_cookie = self.headers.get("Cookie", "")
                for part in raw_cookie.split(";"):
                    name, _, value = part.strip().partition("=")
                    if name == SESSION_COOKIE and value:
                        cookie = value
                req = HttpRequest(
                    method=method,
                    path=parsed.path,
                    query=dict(parse_qsl(parsed.query)),
                    body=body,
                    cookie=cookie,
                    headers={k: v for k, v in self.headers.items()},
                )
                try:
                    resp = handler(req)
                except Exception as exc:  # handler bug; surface it loudly
                    resp = HttpResponse(status=500, body={"error": "Internal", "detail": repr(exc)})
                self._respond(resp)

            def _respond(self, resp: HttpResponse):
                if isinstance(resp.body, (dict, list)):
                    payload = json.dumps(resp.body).encode()
                    ctype = "application/json"
                elif isinstance(resp.body, str):
                    payload = resp.body.encode()
                    ctype = resp.content_type
                elif isinstance(resp.body, bytes):
                    payload = resp.body
                    ctype = resp.content_type
                else:
                    payload = b""
                    ctype = resp.content_type
                self.send_response(resp.status)
                self.send_header("Content-Type", ctype)
                self.send_header("Content-Length", str(len(payload)))
                if resp.set_cookie:
                    self.send_header(
                        "Set-Cookie", f"{SESSION_COOKIE}={resp.set_cookie}; Path=/; HttpOnly"
                    )
                for key, value in resp.headers.items():
                    self.send_header(key, value)
                self.end_headers()
                self.wfile.write(payload)

            def do_GET(self):
                self._dispatch("GET")

            def do_POST(self):
                self._dispatch("POST")

        self._server = ThreadingHTTPServer((host, port), _RequestHandler)
        self._server.daemon_threads = True
        self._thread: Optional[threading.Thread] = None

    @property
    def address(self) -> tuple[str, int]:
        return self._server.server_address[:2]

    @property
    def url(self) -> str:
        host, port = self.address
        return f"http://{host}:{port}"

    def start(self) -> "JsonHttpServer":
        self._thread = threading.Thread(target=self._server.serve_forever, daemon=True)
        self._thread.start()
        return self

    def stop(self) -> None:
        self._server.shutdown()
        self._server.server_close()
        if self._thread:
            self._thread.join(timeout=5)
