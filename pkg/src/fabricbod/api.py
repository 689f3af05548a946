"""HTTP surface and the shared route core.

The route core maps (method, path, query, body) onto node operations and
renders canonical JSON bodies; the HTTP server and the CLI's embedded mode
both go through it, which is what keeps `--json` output byte-identical to
the HTTP responses.  GET /events streams the feed as JSON lines and supports
resuming from a sequence cursor.
"""

from __future__ import annotations

import json
import re
import threading
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer
from pathlib import Path
from urllib.parse import parse_qs, urlsplit

from .node import NodeConfig, ServiceNode

JSON_CONTENT = "application/json"
NDJSON_CONTENT = "application/x-ndjson"

STATUS_BY_KIND = {
    "Rejected": 422,
    "NoQuorum": 503,
    "NsiUnavailable": 503,
    "WrongState": 409,
    "AlreadyTerminal": 409,
    "DuplicateId": 409,
    "DuplicateName": 409,
    "EndpointBusy": 409,
    "PortInUse": 409,
    "TunnelVlanConflict": 409,
    "PhysicalPortAlreadyDedicated": 409,
    "VfcLimitExceeded": 409,
    "CrossOverlayLink": 409,
    "UnknownDevice": 404,
    "UnknownPort": 404,
    "UnknownVfc": 404,
    "UnknownLink": 404,
    "UnknownEndpoint": 404,
    "UnknownService": 404,
    "UnknownCircuit": 404,
    "UnknownReplica": 404,
    "UnknownCorrelation": 404,
}
DEFAULT_ERROR_STATUS = 400

def dump_body(doc: dict) -> bytes:
    return (json.dumps(doc, sort_keys=True, separators=(",", ":")) + "\n").encode()


class Response:
    def __init__(self, status: int, body: bytes, content_type: str = JSON_CONTENT):
        self.status = status
        self.body = body
        self.content_type = content_type


class ApiCore:
    """Routes requests onto a ServiceNode. Thread-safe via the node lock."""

    def __init__(self, node: ServiceNode):
        self.node = node
        self.routes = [
            ("GET", re.compile(r"^/$"), self._root),
            ("GET", re.compile(r"^/topology$"), self._get_topology),
            ("GET", re.compile(r"^/bod/services$"),
             lambda m, q, b: self._envelope(self.node.services_doc(), m)),
            ("POST", re.compile(r"^/bod/services$"),
             lambda m, q, b: self._envelope(self.node.bod_request(b), m,
                                            created=True)),
            ("GET", re.compile(r"^/bod/services/([^/]+)$"),
             lambda m, q, b: self._envelope(self.node.service_doc(m.group(1)), m)),
            ("DELETE", re.compile(r"^/bod/services/([^/]+)$"),
             lambda m, q, b: self._envelope(self.node.bod_cancel(m.group(1)), m)),
            ("GET", re.compile(r"^/sdxl2/circuits$"),
             lambda m, q, b: self._envelope(self.node.circuits_doc(), m)),
            ("POST", re.compile(r"^/sdxl2/circuits$"),
             lambda m, q, b: self._envelope(self.node.circuit_create(b), m,
                                            created=True)),
            ("GET", re.compile(r"^/sdxl2/circuits/([^/]+)$"),
             lambda m, q, b: self._envelope(self.node.circuit_doc(m.group(1)), m)),
            ("DELETE", re.compile(r"^/sdxl2/circuits/([^/]+)$"),
             lambda m, q, b: self._envelope(self.node.circuit_remove(m.group(1)), m)),
            ("POST", re.compile(r"^/events/link$"),
             lambda m, q, b: self._envelope(
                 self.node.link_event(b.get("link_id"), b.get("state")), m)),
            ("POST", re.compile(r"^/events/port$"),
             lambda m, q, b: self._envelope(
                 self.node.port_event(b.get("vfc"), b.get("port"), b.get("state")), m)),
            ("POST", re.compile(r"^/clock/advance$"),
             lambda m, q, b: self._envelope(
                 self.node.clock_advance(b.get("ticks")), m)),
            ("POST", re.compile(r"^/dataplane/inject$"),
             lambda m, q, b: self._envelope(self.node.inject(b), m)),
            ("GET", re.compile(r"^/cluster$"),
             lambda m, q, b: self._envelope(self.node.cluster_doc(), m)),
            ("POST", re.compile(r"^/cluster/(\d+)/kill$"),
             lambda m, q, b: self._envelope(
                 self.node.cluster_kill(int(m.group(1))), m)),
            ("POST", re.compile(r"^/cluster/(\d+)/revive$"),
             lambda m, q, b: self._envelope(
                 self.node.cluster_revive(int(m.group(1))), m)),
            ("POST", re.compile(r"^/nsi/reserve$"),
             lambda m, q, b: self._envelope(self.node.nsi_reserve(b), m,
                                            created=True)),
            ("GET", re.compile(r"^/nsi$"),
             lambda m, q, b: self._envelope(self.node.nsi_list_doc(), m)),
            ("GET", re.compile(r"^/nsi/trace$"), self._nsi_trace),
            ("GET", re.compile(r"^/nsi/([^/]+)$"),
             lambda m, q, b: self._envelope(self.node.nsi_doc(m.group(1)), m)),
            ("POST", re.compile(r"^/nsi/([^/]+)/commit$"),
             lambda m, q, b: self._envelope(self.node.nsi_commit(m.group(1)), m)),
            ("POST", re.compile(r"^/nsi/([^/]+)/provision$"),
             lambda m, q, b: self._envelope(self.node.nsi_provision(m.group(1)), m)),
            ("POST", re.compile(r"^/nsi/([^/]+)/release$"),
             lambda m, q, b: self._envelope(self.node.nsi_release(m.group(1)), m)),
            ("GET", re.compile(r"^/events$"), self._events_snapshot),
            ("GET", re.compile(r"^/journal$"),
             lambda m, q, b: self._envelope(self.node.journal_doc(), m)),
        ]

    def handle(self, method: str, path: str, query: dict, body: dict | None) -> Response:
        for route_method, pattern, handler in self.routes:
            match = pattern.match(path)
            if match and route_method == method:
                with self.node.lock:
                    return handler(match, query, body or {})
        for _, pattern, _ in self.routes:
            if pattern.match(path):
                return Response(405, dump_body(
                    {"error": {"kind": "MethodNotAllowed",
                               "message": f"{method} {path}"}}))
        return Response(404, dump_body(
            {"error": {"kind": "NotFound", "message": path}}))

    # --- handlers ---

    def _root(self, m, q, b) -> Response:
        return Response(200, dump_body({
            "service": "fabricbod",
            "endpoints": sorted({p.pattern for _, p, _ in self.routes}),
            "ui": "/ui/",
        }))

    def _get_topology(self, m, query, b) -> Response:
        at_tick = None
        if "at" in query:
            try:
                at_tick = int(query["at"][0])
            except (ValueError, IndexError):
                at_tick = None
        return self._envelope(self.node.topology_doc(at_tick), m)

    def _nsi_trace(self, m, q, b) -> Response:
        return Response(200, self.node.nsi_trace_text().encode(), "text/plain")

    def _events_snapshot(self, m, query, b) -> Response:
        since = _int_param(query, "since", 0)
        events = self.node.events_since(since)
        body = b"".join(dump_body(e) for e in events)
        return Response(200, body, NDJSON_CONTENT)

    def _envelope(self, outcome: dict, match, created: bool = False) -> Response:
        if outcome.get("ok"):
            return Response(201 if created else 200, dump_body(outcome["value"]))
        error = outcome["error"]
        status = STATUS_BY_KIND.get(error["kind"], DEFAULT_ERROR_STATUS)
        return Response(status, dump_body({"error": error}))


def _int_param(query: dict, key: str, default: int) -> int:
    try:
        return int(query.get(key, [default])[0])
    except (ValueError, TypeError):
        return default


class _Handler(BaseHTTPRequestHandler):
    protocol_version = "HTTP/1.1"
    server_version = "fabricbod"

    # set by the server factory
    core: ApiCore = None
    ui_dir: Path | None = None

    def log_message(self, fmt, *args):  # quiet by default
        pass

    def do_GET(self):
        self._dispatch("GET")

    def do_POST(self):
        self._dispatch("POST")

    def do_DELETE(self):
        self._dispatch("DELETE")

    def _dispatch(self, method: str) -> None:
        parts = urlsplit(self.path)
        path = parts.path
        query = parse_qs(parts.query)
        if method == "GET" and path == "/events" and _int_param(query, "follow", 1):
            self._stream_events(_int_param(query, "since", 0))
            return
        if method == "GET" and (path == "/ui" or path.startswith("/ui/")):
            self._serve_static(path)
            return
        body = None
        length = int(self.headers.get("Content-Length") or 0)
        if length:
            raw = self.rfile.read(length)
            try:
                body = json.loads(raw)
            except json.JSONDecodeError:
                self._respond(Response(400, dump_body(
                    {"error": {"kind": "ParseError", "message": "invalid JSON body"}})))
                return
        response = self.core.handle(method, path, query, body)
        self._respond(response)

    def _respond(self, response: Response) -> None:
        self.send_response(response.status)
        self.send_header("Content-Type", response.content_type)
        self.send_header("Content-Length", str(len(response.body)))
        self.send_header("Access-Control-Allow-Origin", "*")
        self.end_headers()
        self.wfile.write(response.body)

    def _stream_events(self, since: int) -> None:
        """Long-lived JSON-lines stream, chunked-encoded so clients see each
        event as soon as it is committed."""
        node = self.core.node
        self.send_response(200)
        self.send_header("Content-Type", NDJSON_CONTENT)
        self.send_header("Cache-Control", "no-store")
        self.send_header("Access-Control-Allow-Origin", "*")
        self.send_header("Transfer-Encoding", "chunked")
        self.send_header("Connection", "close")
        self.end_headers()
        cursor = since
        try:
            while not node.closed:
                batch = node.feed.since(cursor)
                for event in batch:
                    data = dump_body(event)
                    self.wfile.write(f"{len(data):x}\r\n".encode() + data + b"\r\n")
                    cursor = event["seq"]
                self.wfile.flush()
                with node.feed.cond:
                    if node.feed.last_seq() <= cursor and not node.closed:
                        node.feed.cond.wait(timeout=0.5)
            self.wfile.write(b"0\r\n\r\n")
        except (BrokenPipeError, ConnectionResetError):
            pass

    def _serve_static(self, path: str) -> None:
        if self.ui_dir is None:
            self._respond(Response(404, dump_body(
                {"error": {"kind": "NotFound",
                           "message": "no UI assets configured"}})))
            return
        rel = path[len("/ui"):].lstrip("/") or "index.html"
        base = self.ui_dir.resolve()
        target = (base / rel).resolve()
        if not str(target).startswith(str(base)) or not target.is_file():
            self._respond(Response(404, dump_body(
                {"error": {"kind": "NotFound", "message": path}})))
            return
        content_types = {
            ".html": "text/html", ".js": "application/javascript",
            ".css": "text/css", ".svg": "image/svg+xml", ".json": JSON_CONTENT,
            ".map": JSON_CONTENT,
        }
        body = target.read_bytes()
        self._respond(Response(
            200, body, content_types.get(target.suffix, "application/octet-stream")))


class ApiServer:
    """Threaded HTTP server wrapping one ServiceNode."""

    def __init__(self, node: ServiceNode, host: str = "127.0.0.1", port: int = 8080,
                 ui_dir: str | Path | None = None):
        self.node = node
        self.core = ApiCore(node)
        handler = type("Handler", (_Handler,), {
            "core": self.core,
            "ui_dir": Path(ui_dir) if ui_dir else None,
        })
        self.httpd = ThreadingHTTPServer((host, port), handler)
        self.httpd.daemon_threads = True
        self._thread: threading.Thread | None = None

    @property
    def address(self) -> str:
        host, port = self.httpd.server_address[:2]
        return f"http://{host}:{port}"

    def start(self) -> None:
        self._thread = threading.Thread(target=self.httpd.serve_forever, daemon=True)
        self._thread.start()

    def serve_forever(self) -> None:
        self.httpd.serve_forever()

    def close(self) -> None:
        self.node.close()
        self.httpd.shutdown()
        self.httpd.server_close()
        if self._thread:
            self._thread.join(timeout=5)


def serve(config: NodeConfig, host: str = "127.0.0.1", port: int = 8080,
          ui_dir=None) -> ApiServer:
    node = ServiceNode(config)
    return ApiServer(node, host, port, ui_dir)
