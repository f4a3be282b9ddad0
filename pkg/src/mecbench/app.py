"""The offloading server (MEC app or cloud app; one program, a mode flag apart).

``POST /detect`` runs decode -> resize to the working resolution -> detect ->
synthetic load, and reports how long that took. ``POST /echo`` mirrors small
payloads and is the RTT probe target. In MEC mode the server registers
itself with the platform registry at startup and keeps its lease alive.
"""

from __future__ import annotations

import enum
import logging
import threading
import time
from dataclasses import dataclass, field

from mecbench import FRAME_HEIGHT, FRAME_WIDTH
from mecbench.errors import (
    DuplicateName,
    MalformedImage,
    MecbenchError,
    PayloadTooLarge,
    RegistryUnreachable,
    UnknownService,
    UnsupportedEncoding,
)
from mecbench.httputil import QuietHandler, Server, serve_in_thread
from mecbench.registry.client import MepClient
from mecbench.registry.core import ServiceDescriptor
from mecbench.vision.detector import DetectorParams, FaceDetection, ReferenceDetector, VisionTask
from mecbench.vision.frames import Encoding, decode_frame, resize
from mecbench.vision.workload import WorkloadProfile, calibrate, synth_load

log = logging.getLogger(__name__)

SERVICE_NAME = "sentiment-analysis"
SERVICE_CATEGORY = "vision"
SERVICE_VERSION = "1.0"
MAX_DETECT_BODY = 8 * 1024 * 1024
MAX_ECHO_BODY = 1024
REGISTER_ATTEMPTS = 5
REGISTER_BACKOFF_S = 0.2


class Mode(str, enum.Enum):
    MEC = "mec"
    CLOUD = "cloud"


@dataclass
class AppConfig:
    mode: Mode = Mode.CLOUD
    host: str = "127.0.0.1"
    port: int = 0
    workload: WorkloadProfile = field(default_factory=WorkloadProfile)
    mep_uri: str | None = None
    detector: DetectorParams = field(default_factory=DetectorParams)
    advertise_uri: str | None = None
    ttl_s: int = 30
    max_body: int = MAX_DETECT_BODY
    frame_width: int = FRAME_WIDTH
    frame_height: int = FRAME_HEIGHT

    def __post_init__(self):
        self.mode = Mode(self.mode)
        if self.mode is Mode.MEC and not self.mep_uri:
            raise ValueError("MEC mode requires mep_uri")


@dataclass(frozen=True)
class DetectionResponse:
    faces: list[FaceDetection]
    processing_ms: float
    server_id: str
    request_seq: int

    def to_wire(self) -> dict:
        return {
            "faces": [f.to_wire() for f in self.faces],
            "processing_ms": self.processing_ms,
            "server_id": self.server_id,
            "request_seq": self.request_seq,
        }

    @classmethod
    def from_wire(cls, body: dict) -> DetectionResponse:
        return cls(
            faces=[FaceDetection.from_wire(f) for f in body["faces"]],
            processing_ms=float(body["processing_ms"]),
            server_id=str(body["server_id"]),
            request_seq=int(body["request_seq"]),
        )


def analyze_frame(
    data: bytes, encoding: Encoding | str, task: VisionTask, size: tuple[int, int] = (FRAME_WIDTH, FRAME_HEIGHT)
) -> list[FaceDetection]:
    """The vision pipeline the server runs, minus the synthetic load."""
    return task.analyze(resize(decode_frame(data, encoding), *size))


def handle_detect(
    seq: int,
    encoding: Encoding | str,
    data: bytes,
    workload: WorkloadProfile,
    task: VisionTask,
    server_id: str,
    size: tuple[int, int] = (FRAME_WIDTH, FRAME_HEIGHT),
) -> DetectionResponse:
    """Process one fully-read request body.

    The synthetic load tops the request up to ``workload.target_service_ms``
    of total compute (never negative); ``processing_ms`` spans decode through
    load, which is everything the server does between reading the body and
    starting the response.
    """
    start = time.perf_counter()
    faces = analyze_frame(data, encoding, task, size)
    spent_ms = (time.perf_counter() - start) * 1000.0
    synth_load(workload, max(0.0, workload.target_service_ms - spent_ms))
    processing_ms = (time.perf_counter() - start) * 1000.0
    return DetectionResponse(faces, processing_ms, server_id, seq)


def handle_echo(payload: bytes) -> bytes:
    if len(payload) > MAX_ECHO_BODY:
        raise PayloadTooLarge(f"echo payload of {len(payload)} octets exceeds {MAX_ECHO_BODY}")
    return payload


class AppHandler(QuietHandler):
    server: AppServer

    def do_POST(self):
        path = self.path.split("?", 1)[0]
        if path == "/detect":
            self._detect()
        elif path == "/echo":
            self._echo()
        else:
            self.read_body(MAX_DETECT_BODY)
            self.send_error_json(404, "NotFound", path)

    def _echo(self):
        length = int(self.headers.get("Content-Length") or 0)
        if length > MAX_ECHO_BODY:
            return self.send_error_json(413, PayloadTooLarge.code, f"echo limit is {MAX_ECHO_BODY} octets", close=True)
        payload = handle_echo(self.read_body(MAX_ECHO_BODY))
        self.send_response(200)
        self.send_header("Content-Type", "application/octet-stream")
        self.send_header("Content-Length", str(len(payload)))
        self.end_headers()
        self.wfile.write(payload)

    def _detect(self):
        app = self.server.app
        try:
            seq = int(self.headers.get("X-Seq", ""))
        except ValueError:
            self.read_body(app.config.max_body)
            return self.send_error_json(400, "BadRequest", "X-Seq header must be an integer")
        body = self.read_body(app.config.max_body)
        if body is None:
            return self.send_error_json(
                413, PayloadTooLarge.code, f"body exceeds {app.config.max_body} octets", close=True
            )
        try:
            encoding = Encoding.from_content_type(self.headers.get("Content-Type"))
            response = handle_detect(
                seq,
                encoding,
                body,
                app.config.workload,
                app.task,
                app.config.mode.value,
                (app.config.frame_width, app.config.frame_height),
            )
        except UnsupportedEncoding as exc:
            return self.send_error_json(415, exc.code, str(exc))
        except MalformedImage as exc:
            return self.send_error_json(400, exc.code, str(exc))
        self.send_json(200, response.to_wire())


class AppServer(Server):
    def __init__(self, address, app: OffloadApp):
        super().__init__(address, AppHandler)
        self.app = app


def startup_register(config: AppConfig, advertise_uri: str, sleep=time.sleep) -> str | None:
    """Register with the platform registry (MEC mode only).

    Makes up to five attempts 200 ms apart; raises :class:`RegistryUnreachable`
    when none gets through.
    """
    if config.mode is Mode.CLOUD:
        return None
    client = MepClient(config.mep_uri)
    descriptor = ServiceDescriptor(
        service_name=SERVICE_NAME,
        version=SERVICE_VERSION,
        category=SERVICE_CATEGORY,
        endpoint_uri=advertise_uri,
        ttl_s=config.ttl_s,
    )
    last_error: Exception | None = None
    for attempt in range(REGISTER_ATTEMPTS):
        if attempt:
            sleep(REGISTER_BACKOFF_S)
        try:
            return client.register(descriptor)
        except OSError as exc:
            last_error = exc
    raise RegistryUnreachable(f"{config.mep_uri} after {REGISTER_ATTEMPTS} attempts: {last_error}")


class OffloadApp:
    def __init__(self, config: AppConfig, task: VisionTask | None = None):
        self.config = config
        self.task = task or ReferenceDetector(config.detector)
        self.server: AppServer | None = None
        self.service_id: str | None = None
        self._stop = threading.Event()
        self._threads: list[threading.Thread] = []

    @property
    def uri(self) -> str:
        host, port = self.server.server_address[:2]
        return f"http://{host}:{port}"

    @property
    def advertise_uri(self) -> str:
        return self.config.advertise_uri or f"{self.uri}/detect"

    def start(self) -> OffloadApp:
        if self.config.workload.calibration is None:
            self.config.workload = calibrate(self.config.workload)
        self.server = AppServer((self.config.host, self.config.port), self)
        self._threads.append(serve_in_thread(self.server))
        try:
            self.service_id = startup_register(self.config, self.advertise_uri)
        except RegistryUnreachable:
            self.server.shutdown()
            self.server.server_close()
            raise
        if self.service_id is not None:
            renewer = threading.Thread(target=self._renew_loop, name="lease-renewal", daemon=True)
            renewer.start()
            self._threads.append(renewer)
        log.info("%s app serving on %s (service id %s)", self.config.mode.value, self.uri, self.service_id)
        return self

    def _renew_loop(self):
        client = MepClient(self.config.mep_uri)
        period = self.config.ttl_s / 3.0
        while not self._stop.wait(period):
            try:
                client.renew(self.service_id)
            except UnknownService:
                # lease lost (registry restart or a missed window): register afresh
                try:
                    self.service_id = startup_register(self.config, self.advertise_uri, sleep=self._stop.wait)
                except (RegistryUnreachable, DuplicateName) as exc:
                    log.warning("re-registration failed: %s", exc)
            except (OSError, MecbenchError) as exc:
                log.warning("lease renewal failed: %s", exc)

    def stop(self, deregister: bool = True) -> None:
        self._stop.set()
        if deregister and self.service_id is not None:
            try:
                MepClient(self.config.mep_uri).deregister(self.service_id)
            except (OSError, MecbenchError) as exc:
                log.info("deregistration skipped: %s", exc)
        if self.server is not None:
            self.server.shutdown()
            self.server.server_close()
        for t in self._threads:
            t.join(timeout=2)
