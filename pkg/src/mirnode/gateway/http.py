"""Minimal HTTP plumbing: request/response types, a pattern router, and a
threaded stdlib server. Handlers are plain callables Request -> Response, so
the whole API is exercisable without sockets.
"""
from __future__ import annotations

import json
import logging
import re
import threading
from dataclasses import dataclass, field
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer
from urllib.parse import parse_qs, unquote, urlsplit

log = logging.getLogger("mirnode.gateway")

MAX_BODY_BYTES = 256 * 2 ** 20


@dataclass
class Request:
    method: str
    path: str
    query: dict[str, list[str]] = field(default_factory=dict)
    headers: dict[str, str] = field(default_factory=dict)
    body: bytes = b""
    params: dict[str, str] = field(default_factory=dict)
    principal: object | None = None

    @property
    def token(self) -> str:
        value = self.headers.get("authorization", "")
        scheme, _, credential = value.partition(" ")
        if scheme.lower() == "bearer" and credential.strip():
            return credential.strip()
        return ""

    def json(self):
        if not self.body:
            return {}
        try:
            doc = json.loads(self.body.decode("utf-8"))
        except (UnicodeDecodeError, json.JSONDecodeError) as exc:
            raise ValueError(f"request body is not valid JSON: {exc}") from exc
        if not isinstance(doc, dict):
            raise ValueError("request body must be a JSON object")
        return doc

    def first_query(self, key: str, default: str = "") -> str:
        values = self.query.get(key)
        return values[0] if values else default


@dataclass
class Response:
    status: int
    body: bytes
    content_type: str = "application/json"
    headers: dict[str, str] = field(default_factory=dict)


def json_response(doc, status: int = 200) -> Response:
    return Response(status, json.dumps(doc, sort_keys=True).encode("utf-8"))


def error_response(status: int, code: str, message: str) -> Response:
    return json_response({"error_code": code, "message": message}, status)


_PARAM_RE = re.compile(r"\{([a-z_]+)(\*)?\}")


def _compile(pattern: str) -> re.Pattern:
    regex = ""
    last = 0
    for found in _PARAM_RE.finditer(pattern):
        regex += re.escape(pattern[last:found.start()])
        capture = r".+" if found.group(2) else r"[^/]+"
        regex += f"(?P<{found.group(1)}>{capture})"
        last = found.end()
    regex += re.escape(pattern[last:])
    return re.compile(f"^{regex}$")


@dataclass
class _Route:
    method: str
    pattern: re.Pattern
    handler: object


class Router:
    """Matches (method, path); '{name}' captures a segment, '{name*}' a tail."""

    def __init__(self):
        self._routes: list[_Route] = []
        self._prefixes: list[tuple[str, object]] = []

    def add(self, method: str, pattern: str, handler) -> None:
        self._routes.append(_Route(method.upper(), _compile(pattern), handler))

    def mount(self, prefix: str, handler) -> None:
        """handler(request) for every path under prefix, any method."""
        self._prefixes.append((prefix, handler))

    def dispatch(self, request: Request) -> Response:
        for prefix, handler in self._prefixes:
            if request.path.startswith(prefix):
                return handler(request)
        allowed: set[str] = set()
        for route in self._routes:
            match = route.pattern.match(request.path)
            if not match:
                continue
            if route.method != request.method:
                allowed.add(route.method)
                continue
            request.params = {k: unquote(v)
                              for k, v in match.groupdict().items()}
            return route.handler(request)
        if allowed:
            return error_response(405, "method_not_allowed",
                                  f"allowed: {', '.join(sorted(allowed))}")
        return error_response(404, "not_found",
                              f"no route for {request.path}")


class GatewayHTTPServer(ThreadingHTTPServer):
    daemon_threads = True
    allow_reuse_address = True

    def __init__(self, address, dispatch):
        self.dispatch = dispatch
        super().__init__(address, _Handler)


class _Handler(BaseHTTPRequestHandler):
    server_version = "mirnode"
    protocol_version = "HTTP/1.1"

    def _serve(self) -> None:
        try:
            length = int(self.headers.get("Content-Length") or 0)
        except ValueError:
            length = 0
        if length > MAX_BODY_BYTES:
            response = error_response(413, "payload_too_large",
                                      f"body exceeds {MAX_BODY_BYTES} bytes")
        else:
            body = self.rfile.read(length) if length else b""
            split = urlsplit(self.path)
            request = Request(
                method=self.command,
                path=unquote(split.path),
                query=parse_qs(split.query),
                headers={k.lower(): v for k, v in self.headers.items()},
                body=body)
            try:
                response = self.server.dispatch(request)
            except Exception:
                log.exception("unhandled error for %s %s",
                              self.command, self.path)
                response = error_response(500, "internal_error",
                                          "internal error")
        try:
            self.send_response(response.status)
            self.send_header("Content-Type", response.content_type)
            self.send_header("Content-Length", str(len(response.body)))
            for key, value in response.headers.items():
                self.send_header(key, value)
            self.end_headers()
            self.wfile.write(response.body)
        except (BrokenPipeError, ConnectionResetError):
            pass

    do_GET = do_POST = do_PUT = do_DELETE = do_PATCH = _serve

    def log_message(self, format, *args):  # noqa: A002 - stdlib signature
        log.debug("%s - %s", self.address_string(), format % args)


def start_http_server(host: str, port: int, dispatch) -> GatewayHTTPServer:
    server = GatewayHTTPServer((host, port), dispatch)
    thread = threading.Thread(target=server.serve_forever,
                              kwargs={"poll_interval": 0.05},
                              daemon=True, name="gateway-http")
    thread.start()
    server._thread = thread  # type: ignore[attr-defined]
    return server


def stop_http_server(server: GatewayHTTPServer) -> None:
    server.shutdown()
    server.server_close()
    thread = getattr(server, "_thread", None)
    if thread is not None:
        thread.join(timeout=5)
