"""Closed-loop UE emulation: send a frame, wait for the answer, record, repeat.

Byte counts are taken at the socket level inside the client, so they include
HTTP request and response headers as well as bodies. RTT is measured at
application level against ``/echo``: a burst of probes before the run plus
one probe every ``probe_every`` detect requests; each sample carries the
probe nearest to it in time.
"""

from __future__ import annotations

import csv
import http.client
import io
import json
import logging
import random
import socket
import threading
import time
from bisect import bisect_left
from dataclasses import dataclass, field
from pathlib import Path
from urllib.parse import urlsplit

from mecbench.errors import EndpointUnreachable, MecbenchError, ProtocolError, ZeroDuration
from mecbench.vision.frames import Encoding, Frame, encode_frame

log = logging.getLogger(__name__)

PROBE_BYTES = 64
DEFAULT_TIMEOUT_S = 10.0
DEFAULT_RTT_BURST = 20
DEFAULT_PROBE_EVERY = 10

SAMPLE_FIELDS = (
    "device_id",
    "seq",
    "rtt_ms",
    "processing_ms",
    "response_ms",
    "bytes_sent",
    "bytes_received",
    "throughput_mbps",
)


def throughput_mbps(total_bytes: int, response_ms: float) -> float:
    if response_ms <= 0:
        raise ZeroDuration(f"response time must be positive, got {response_ms}")
    # bits per ms / 1000 == Mbit/s
    return total_bytes * 8 / (response_ms * 1000)


@dataclass(frozen=True)
class MetricSample:
    device_id: int
    seq: int
    rtt_ms: float
    processing_ms: float
    response_ms: float
    bytes_sent: int
    bytes_received: int
    throughput_mbps: float
    t_start: float = 0.0  # client monotonic clock, seconds

    @classmethod
    def build(cls, device_id, seq, rtt_ms, processing_ms, response_ms, bytes_sent, bytes_received, t_start=0.0):
        return cls(
            device_id,
            seq,
            rtt_ms,
            processing_ms,
            response_ms,
            bytes_sent,
            bytes_received,
            throughput_mbps(bytes_sent + bytes_received, response_ms),
            t_start,
        )


def compute_throughput(sample: MetricSample) -> float:
    return throughput_mbps(sample.bytes_sent + sample.bytes_received, sample.response_ms)


@dataclass
class DeviceRun:
    device_id: int
    endpoint: str
    frame_source: str
    samples: list[MetricSample] = field(default_factory=list)
    probes: list[float] = field(default_factory=list)  # every RTT probe, ms
    complete: bool = True
    error: MecbenchError | None = None


@dataclass
class LoadConfig:
    endpoint: str
    frames: list[Frame]
    samples: int = 100
    seed: int = 0
    encoding: Encoding = Encoding.RAW
    frame_source: str = "synthetic"
    rtt_burst: int = DEFAULT_RTT_BURST
    probe_every: int = DEFAULT_PROBE_EVERY
    timeout_s: float = DEFAULT_TIMEOUT_S
    think_time_ms: float = 0.0


class _Meter:
    def __init__(self):
        self.sent = 0
        self.received = 0

    def reset(self):
        self.sent = self.received = 0


class _CountingReader(io.RawIOBase):
    def __init__(self, sock: socket.socket, meter: _Meter):
        self._sock = sock
        self._meter = meter

    def readable(self):
        return True

    def readinto(self, buffer):
        n = self._sock.recv_into(buffer)
        self._meter.received += n
        return n


class _MeteredSocket:
    """Socket stand-in that counts every octet ``http.client`` moves."""

    def __init__(self, sock: socket.socket, meter: _Meter):
        self._sock = sock
        self._meter = meter

    def sendall(self, data):
        self._sock.sendall(data)
        self._meter.sent += len(data)

    def makefile(self, mode="rb", *args, **kwargs):
        return io.BufferedReader(_CountingReader(self._sock, self._meter))

    def __getattr__(self, name):
        return getattr(self._sock, name)


class MeteredConnection(http.client.HTTPConnection):
    def __init__(self, host, port, timeout=DEFAULT_TIMEOUT_S):
        super().__init__(host, port, timeout=timeout)
        self.meter = _Meter()

    def connect(self):
        super().connect()
        self.sock = _MeteredSocket(self.sock, self.meter)


_UNREACHABLE = (OSError, http.client.RemoteDisconnected, http.client.IncompleteRead)


def _connection(uri: str, timeout: float) -> MeteredConnection:
    parts = urlsplit(uri)
    if not parts.hostname:
        raise ValueError(f"endpoint must be an absolute URI, got {uri!r}")
    return MeteredConnection(parts.hostname, parts.port or 80, timeout=timeout)


def detect_uri(endpoint: str) -> str:
    parts = urlsplit(endpoint)
    return f"{parts.scheme}://{parts.netloc}{parts.path if parts.path not in ('', '/') else '/detect'}"


def echo_uri(endpoint: str) -> str:
    parts = urlsplit(endpoint)
    return f"{parts.scheme}://{parts.netloc}/echo"


class _Prober:
    def __init__(self, endpoint: str, timeout: float, rng: random.Random):
        self.uri = echo_uri(endpoint)
        self.conn = _connection(self.uri, timeout)
        self.rng = rng
        self.timeline: list[tuple[float, float]] = []  # (midpoint s, rtt ms)

    def probe(self) -> float:
        payload = self.rng.randbytes(PROBE_BYTES)
        start = time.perf_counter()
        try:
            self.conn.request("POST", "/echo", body=payload, headers={"Content-Type": "application/octet-stream"})
            resp = self.conn.getresponse()
            body = resp.read()
        except _UNREACHABLE as exc:
            self.conn.close()
            raise EndpointUnreachable(f"echo probe to {self.uri} failed: {exc}") from exc
        except http.client.HTTPException as exc:
            self.conn.close()
            raise ProtocolError(f"echo probe to {self.uri}: {exc!r}") from exc
        end = time.perf_counter()
        if resp.status != 200 or body != payload:
            raise ProtocolError(f"echo probe to {self.uri} returned status {resp.status}, {len(body)} octets")
        rtt = (end - start) * 1000.0
        self.timeline.append(((start + end) / 2, rtt))
        return rtt

    def nearest(self, t: float) -> float:
        if not self.timeline:
            return float("nan")
        times = [p[0] for p in self.timeline]
        i = bisect_left(times, t)
        candidates = [j for j in (i - 1, i) if 0 <= j < len(times)]
        return self.timeline[min(candidates, key=lambda j: abs(times[j] - t))][1]

    def close(self):
        self.conn.close()


def measure_rtt(endpoint: str, probes: int, timeout: float = DEFAULT_TIMEOUT_S, seed: int = 0) -> list[float]:
    """Client-measured echo round trips of 64-octet probes, in ms."""
    if probes < 1:
        raise ValueError("probes must be >= 1")
    prober = _Prober(endpoint, timeout, random.Random(seed))
    try:
        return [prober.probe() for _ in range(probes)]
    finally:
        prober.close()


def run_device(
    endpoint: str,
    frames: list[Frame],
    n: int,
    seed: int = 0,
    device_id: int = 0,
    *,
    encoding: Encoding | str = Encoding.RAW,
    frame_source: str = "synthetic",
    rtt_burst: int = DEFAULT_RTT_BURST,
    probe_every: int = DEFAULT_PROBE_EVERY,
    timeout_s: float = DEFAULT_TIMEOUT_S,
    think_time_ms: float = 0.0,
) -> DeviceRun:
    """Run one emulated device for ``n`` strictly sequential requests.

    On failure raises :class:`EndpointUnreachable` or :class:`ProtocolError`
    whose ``run`` attribute holds the samples gathered so far, marked
    incomplete.
    """
    if not frames:
        raise ValueError("frame corpus is empty")
    encoding = Encoding(encoding)
    run = DeviceRun(device_id, detect_uri(endpoint), frame_source)
    if n == 0:
        return run
    rng = random.Random(seed)
    payloads = [encode_frame(f, encoding) for f in frames]
    offset = seed % len(payloads)
    headers = {"Content-Type": encoding.content_type}
    path = urlsplit(run.endpoint).path
    conn = _connection(run.endpoint, timeout_s)
    prober = _Prober(endpoint, timeout_s, rng)
    raw: list[tuple] = []
    try:
        for _ in range(rtt_burst):
            prober.probe()
        for seq in range(n):
            if seq and probe_every and seq % probe_every == 0:
                prober.probe()
            body = payloads[(offset + seq) % len(payloads)]
            headers["X-Seq"] = str(seq)
            conn.meter.reset()
            t_start = time.perf_counter()
            try:
                conn.request("POST", path, body=body, headers=headers)
                resp = conn.getresponse()
                content = resp.read()
            except _UNREACHABLE as exc:
                conn.close()
                raise EndpointUnreachable(f"detect request {seq} to {run.endpoint} failed: {exc}") from exc
            except http.client.HTTPException as exc:
                conn.close()
                raise ProtocolError(f"detect request {seq}: {exc!r}") from exc
            t_end = time.perf_counter()
            if resp.status != 200:
                raise ProtocolError(f"detect request {seq} got status {resp.status}: {content[:200]!r}")
            try:
                reply = json.loads(content)
                processing_ms = float(reply["processing_ms"])
                echoed = int(reply["request_seq"])
            except (ValueError, KeyError, TypeError) as exc:
                raise ProtocolError(f"detect request {seq}: malformed response body: {exc}") from exc
            if echoed != seq:
                raise ProtocolError(f"detect request {seq}: server echoed sequence {echoed}")
            raw.append((seq, t_start, (t_end - t_start) * 1000.0, processing_ms, conn.meter.sent, conn.meter.received))
            if think_time_ms > 0:
                time.sleep(think_time_ms / 1000.0)
    except (EndpointUnreachable, ProtocolError) as exc:
        run.complete = False
        run.error = exc
        exc.run = run
        raise
    finally:
        conn.close()
        prober.close()
        run.probes = [p[1] for p in prober.timeline]
        run.samples = [
            MetricSample.build(device_id, seq, prober.nearest(t), proc, resp_ms, sent, received, t)
            for seq, t, resp_ms, proc, sent, received in raw
        ]
    return run


def run_fleet(devices: int, config: LoadConfig) -> list[DeviceRun]:
    """Run ``devices`` closed loops concurrently; a failing device never stops its siblings.

    Failed devices come back with ``complete=False`` and ``error`` set.
    """
    if devices < 1:
        raise ValueError("devices must be >= 1")
    runs: list[DeviceRun | None] = [None] * devices

    def one(device_id: int):
        try:
            runs[device_id] = run_device(
                config.endpoint,
                config.frames,
                config.samples,
                seed=config.seed + device_id,
                device_id=device_id,
                encoding=config.encoding,
                frame_source=config.frame_source,
                rtt_burst=config.rtt_burst,
                probe_every=config.probe_every,
                timeout_s=config.timeout_s,
                think_time_ms=config.think_time_ms,
            )
        except (EndpointUnreachable, ProtocolError) as exc:
            log.warning("device %d failed: %s", device_id, exc)
            runs[device_id] = exc.run
        except Exception as exc:  # keep siblings alive; surface as an incomplete run
            log.exception("device %d crashed", device_id)
            runs[device_id] = DeviceRun(
                device_id, config.endpoint, config.frame_source, complete=False, error=MecbenchError(repr(exc))
            )

    threads = [threading.Thread(target=one, args=(i,), name=f"ue-{i}") for i in range(devices)]
    for t in threads:
        t.start()
    for t in threads:
        t.join()
    return runs


def write_samples(runs: list[DeviceRun], path: str | Path) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(SAMPLE_FIELDS)
        for run in runs:
            for s in run.samples:
                writer.writerow([getattr(s, name) for name in SAMPLE_FIELDS])


def read_samples(path: str | Path) -> list[DeviceRun]:
    """Inverse of :func:`write_samples`; runs come back grouped by device id."""
    by_device: dict[int, DeviceRun] = {}
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        if tuple(reader.fieldnames or ()) != SAMPLE_FIELDS:
            raise ValueError(f"{path}: unexpected header {reader.fieldnames}")
        for row in reader:
            device = int(row["device_id"])
            run = by_device.setdefault(device, DeviceRun(device, "", ""))
            run.samples.append(
                MetricSample(
                    device,
                    int(row["seq"]),
                    float(row["rtt_ms"]),
                    float(row["processing_ms"]),
                    float(row["response_ms"]),
                    int(row["bytes_sent"]),
                    int(row["bytes_received"]),
                    float(row["throughput_mbps"]),
                )
            )
    return [by_device[k] for k in sorted(by_device)]
