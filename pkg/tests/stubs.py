"""A serialized single-worker detect server: one request computes at a time."""

from __future__ import annotations

import socket
import threading
import time

from mecbench.httputil import QuietHandler, Server, serve_in_thread


class _StubHandler(QuietHandler):
    def do_POST(self):
        body = self.read_body(16 * 1024 * 1024)
        if self.path == "/echo":
            self.send_response(200)
            self.send_header("Content-Type", "application/octet-stream")
            self.send_header("Content-Length", str(len(body)))
            self.end_headers()
            self.wfile.write(body)
            return
        self.server.served += 1
        if self.server.fail_after is not None and self.server.served > self.server.fail_after:
            # drop the connection without answering, like a crashed server
            self.close_connection = True
            self.connection.shutdown(socket.SHUT_RDWR)
            return
        with self.server.worker:
            start = time.perf_counter()
            time.sleep(self.server.service_s)
            processing = (time.perf_counter() - start) * 1000
        seq = int(self.headers["X-Seq"])
        self.send_json(200, {"faces": [], "processing_ms": processing, "server_id": "stub", "request_seq": seq})


class SingleWorkerStub(Server):
    def __init__(self, service_ms: float, fail_after: int | None = None):
        super().__init__(("127.0.0.1", 0), _StubHandler)
        self.fail_after = fail_after
        self.served = 0
        self.worker = threading.Lock()
        self.service_s = service_ms / 1000

    @property
    def uri(self) -> str:
        return f"http://127.0.0.1:{self.server_address[1]}"

    def __enter__(self):
        serve_in_thread(self)
        return self

    def __exit__(self, *exc):
        self.shutdown()
        self.server_close()


def queueing_ratio(service_ms: float = 50.0, samples: int = 20) -> tuple[float, float]:
    """Mean response for one device and per-device mean for two devices against the stub."""
    from mecbench.loadgen import LoadConfig, run_fleet
    from mecbench.vision.corpus import synthetic_corpus

    frames = synthetic_corpus(0, count=2, width=16, height=16)
    means = []
    for devices in (1, 2):
        with SingleWorkerStub(service_ms) as stub:
            runs = run_fleet(devices, LoadConfig(stub.uri, frames, samples=samples, rtt_burst=1))
        assert all(r.complete for r in runs)
        per_device = [sum(s.response_ms for s in r.samples) / len(r.samples) for r in runs]
        means.append(sum(per_device) / len(per_device))
    return means[0], means[1]
