"""Small helpers over ``http.server`` / ``http.client`` shared by the servers and clients."""

from __future__ import annotations

import http.client
import json
import socket
import threading
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer
from urllib.parse import urlsplit


class QuietHandler(BaseHTTPRequestHandler):
    """Keep-alive HTTP/1.1 handler with Nagle disabled and access logging off."""

    protocol_version = "HTTP/1.1"
    # header and body go out in separate writes; Nagle + delayed ACK would add ~40 ms
    disable_nagle_algorithm = True

    def log_message(self, format, *args):  # noqa: A002
        pass

    def send_json(self, status: int, payload, headers: dict | None = None) -> None:
        body = json.dumps(payload, separators=(",", ":")).encode()
        self.send_response(status)
        self.send_header("Content-Type", "application/json")
        self.send_header("Content-Length", str(len(body)))
        for key, value in (headers or {}).items():
            self.send_header(key, value)
        self.end_headers()
        self.wfile.write(body)

    def send_empty(self, status: int) -> None:
        self.send_response(status)
        self.send_header("Content-Length", "0")
        self.end_headers()

    def send_error_json(self, status: int, code: str, reason: str, close: bool = False) -> None:
        headers = {"Connection": "close"} if close else None
        if close:
            self.close_connection = True
        self.send_json(status, {"error": code, "reason": reason}, headers)

    def read_body(self, limit: int) -> bytes | None:
        """Return the request body, or None when Content-Length exceeds ``limit``."""
        length = int(self.headers.get("Content-Length") or 0)
        if length > limit:
            return None
        return self.rfile.read(length) if length else b""


class Server(ThreadingHTTPServer):
    daemon_threads = True
    allow_reuse_address = True
    request_queue_size = 64

    def handle_error(self, request, client_address):
        # peers (the path proxy in particular) may drop connections with RST
        import sys

        if isinstance(sys.exc_info()[1], (ConnectionError, TimeoutError)):
            return
        super().handle_error(request, client_address)


def serve_in_thread(server: ThreadingHTTPServer) -> threading.Thread:
    thread = threading.Thread(target=server.serve_forever, kwargs={"poll_interval": 0.05}, daemon=True)
    thread.start()
    return thread


def split_hostport(addr: str) -> tuple[str, int]:
    host, _, port = addr.rpartition(":")
    if not host or not port.isdigit():
        raise ValueError(f"expected host:port, got {addr!r}")
    return host, int(port)


def base_uri(uri: str) -> str:
    """``http://h:p/anything`` -> ``http://h:p``."""
    parts = urlsplit(uri)
    return f"{parts.scheme}://{parts.netloc}"


def json_request(method: str, uri: str, body=None, timeout: float = 5.0):
    """One-shot JSON request; returns ``(status, decoded body or None)``.

    Raises ``OSError`` (including ``ConnectionRefusedError``) when unreachable.
    """
    parts = urlsplit(uri)
    conn = http.client.HTTPConnection(parts.hostname, parts.port or 80, timeout=timeout)
    try:
        payload = None if body is None else json.dumps(body).encode()
        headers = {"Content-Type": "application/json"} if payload is not None else {}
        path = parts.path or "/"
        if parts.query:
            path += "?" + parts.query
        conn.request(method, path, body=payload, headers=headers)
        resp = conn.getresponse()
        raw = resp.read()
        data = json.loads(raw) if raw else None
        return resp.status, data
    except http.client.HTTPException as exc:
        raise OSError(str(exc)) from exc
    finally:
        conn.close()


def free_port(host: str = "127.0.0.1") -> int:
    with socket.socket() as s:
        s.bind((host, 0))
        return s.getsockname()[1]


def port_is_free(host: str, port: int) -> bool:
    with socket.socket() as s:
        s.setsockopt(socket.SOL_SOCKET, socket.SO_REUSEADDR, 1)
        try:
            s.bind((host, port))
        except OSError:
            return False
    return True
