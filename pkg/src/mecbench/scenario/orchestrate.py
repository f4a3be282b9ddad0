"""Run scenario suites: spawn the chain, check health, measure, tear down, report.

Each scenario is a chain of local processes::

    load generator -> path proxy -> offload app  (+ registry in MEC mode)

Scenarios run strictly one after another so they never compete for CPU.
"""

from __future__ import annotations

import json
import logging
import os
import platform
import shutil
import signal
import socket
import subprocess
import sys
import time
from dataclasses import asdict, dataclass, field
from pathlib import Path

from mecbench import __version__
from mecbench.errors import HealthCheckTimeout, MecbenchError, PortInUse
from mecbench.httputil import free_port, json_request, port_is_free
from mecbench.loadgen import read_samples
from mecbench.metrics import ScenarioReport, build_report, export
from mecbench.scenario.config import ScenarioConfig, SuiteConfig

log = logging.getLogger(__name__)

HOST = "127.0.0.1"
HEALTH_TIMEOUT_S = 30.0
STOP_GRACE_S = 5.0

CONVENTIONS = {
    "rtt": "application level: 64-octet POST /echo round trips through the emulated path; "
    "a burst before each device run plus one probe every probe_every requests; each sample "
    "carries the nearest-in-time probe",
    "processing": "server clock, request body fully read to response start (decode, resize, detect, synthetic load)",
    "response": "client clock, request send start to response fully read",
    "throughput": "(request + response octets, HTTP headers included) * 8 / response time, in Mbit/s",
    "load": "closed loop, zero think time unless configured, one keep-alive connection per device",
    "confidence_interval": "Student-t two-sided 95 % on the mean, samples pooled across devices, no outlier removal",
    "cell_contention": "devices do not share modelled radio capacity on the edge path (per-connection links); "
    "the cloud path is one shared link served round-robin",
}


@dataclass
class ChainEndpoints:
    app: str  # direct base URI of the offload app
    proxy: tuple[str, int]
    registry: str | None = None  # base URI, MEC mode only

    @property
    def proxied(self) -> str:
        return f"http://{self.proxy[0]}:{self.proxy[1]}"


@dataclass
class HealthStatus:
    ok: bool
    failing: str | None = None
    detail: str = ""


def _echo_ok(base: str, timeout: float = 2.0) -> tuple[bool, str]:
    import http.client
    from urllib.parse import urlsplit

    parts = urlsplit(base)
    conn = http.client.HTTPConnection(parts.hostname, parts.port, timeout=timeout)
    try:
        conn.request("POST", "/echo", body=b"health", headers={"Content-Type": "application/octet-stream"})
        resp = conn.getresponse()
        body = resp.read()
        if resp.status == 200 and body == b"health":
            return True, ""
        return False, f"status {resp.status}"
    except (OSError, http.client.HTTPException) as exc:
        return False, repr(exc)
    finally:
        conn.close()


def health_check(chain: ChainEndpoints) -> HealthStatus:
    """Probe each hop in turn and name the first one that fails.

    Hops: ``registry`` (GET services), ``app`` (direct /echo), ``proxy``
    (TCP connect), ``proxy→app`` (/echo through the proxy).
    """
    if chain.registry is not None:
        try:
            status, _ = json_request("GET", f"{chain.registry}/mep/v1/services", timeout=2.0)
            if status != 200:
                return HealthStatus(False, "registry", f"status {status}")
        except OSError as exc:
            return HealthStatus(False, "registry", repr(exc))
    ok, detail = _echo_ok(chain.app)
    if not ok:
        return HealthStatus(False, "app", detail)
    try:
        socket.create_connection(chain.proxy, timeout=2.0).close()
    except OSError as exc:
        return HealthStatus(False, "proxy", repr(exc))
    ok, detail = _echo_ok(chain.proxied, timeout=5.0)
    if not ok:
        return HealthStatus(False, "proxy→app", detail)
    return HealthStatus(True)


@dataclass
class ScenarioOutcome:
    name: str
    ok: bool
    reason: str = ""
    runs: list = field(default_factory=list)
    seconds: float = 0.0
    ports: dict = field(default_factory=dict)


class _Supervisor:
    """Owns the child processes of one scenario."""

    def __init__(self, log_dir: Path):
        self.log_dir = log_dir
        self.procs: list[tuple[str, subprocess.Popen]] = []

    def spawn(self, name: str, args: list[str]) -> subprocess.Popen:
        self.log_dir.mkdir(parents=True, exist_ok=True)
        out = open(self.log_dir / f"{name}.log", "wb")
        proc = subprocess.Popen(
            [sys.executable, "-m", "mecbench", *args],
            stdout=out,
            stderr=subprocess.STDOUT,
            stdin=subprocess.DEVNULL,
            start_new_session=True,
        )
        out.close()
        self.procs.append((name, proc))
        return proc

    def wait_until(self, name: str, proc: subprocess.Popen, ready, deadline: float) -> None:
        while time.monotonic() < deadline:
            if proc.poll() is not None:
                tail = (self.log_dir / f"{name}.log").read_text(errors="replace")[-2000:]
                raise MecbenchError(f"{name} exited with status {proc.returncode} during startup:\n{tail}")
            if ready():
                return
            time.sleep(0.05)
        raise HealthCheckTimeout(f"{name} not ready within {HEALTH_TIMEOUT_S:.0f} s")

    def teardown(self) -> list[str]:
        """Stop children in reverse start order; return names that had to be killed."""
        killed = []
        for name, proc in reversed(self.procs):
            if proc.poll() is None:
                proc.send_signal(signal.SIGTERM)
                try:
                    proc.wait(STOP_GRACE_S)
                except subprocess.TimeoutExpired:
                    os.killpg(proc.pid, signal.SIGKILL)
                    proc.wait()
                    killed.append(name)
        return killed

    def leaked(self) -> list[str]:
        return [name for name, proc in self.procs if proc.poll() is None]


def _tcp_ready(addr) -> bool:
    try:
        socket.create_connection(addr, timeout=0.5).close()
        return True
    except OSError:
        return False


def _registry_ready(uri: str) -> bool:
    try:
        return json_request("GET", f"{uri}/mep/v1/services", timeout=0.5)[0] == 200
    except OSError:
        return False


def _ports(cfg: ScenarioConfig) -> dict[str, int]:
    wanted = {"mep": cfg.mep_port, "app": cfg.app_port, "proxy": cfg.proxy_port}
    if cfg.mode != "mec":
        del wanted["mep"]
    busy = [f"{k}:{p}" for k, p in wanted.items() if p and not port_is_free(HOST, p)]
    if busy:
        raise PortInUse(f"scenario {cfg.name}: port(s) in use: {', '.join(busy)}")
    return {k: p or free_port(HOST) for k, p in wanted.items()}


def run_scenario(cfg: ScenarioConfig, out_dir: Path, keep_logs: bool = False) -> ScenarioOutcome:
    started = time.monotonic()
    scenario_dir = out_dir / cfg.name
    scenario_dir.mkdir(parents=True, exist_ok=True)
    log_dir = scenario_dir / "logs"
    sup = _Supervisor(log_dir)
    outcome = ScenarioOutcome(cfg.name, ok=False)
    try:
        ports = _ports(cfg)
        outcome.ports = ports
        deadline = time.monotonic() + HEALTH_TIMEOUT_S
        registry = None
        if cfg.mode == "mec":
            registry = f"http://{HOST}:{ports['mep']}"
            proc = sup.spawn("mep", ["mep", "--listen", f"{HOST}:{ports['mep']}", "--sweep-interval-ms", "1000"])
            sup.wait_until("mep", proc, lambda: _registry_ready(registry), deadline)
        app_args = [
            "app",
            "--mode", cfg.mode,
            "--listen", f"{HOST}:{ports['app']}",
            "--service-ms", repr(cfg.service_ms),
            "--threshold", str(cfg.threshold),
            "--min-area", str(cfg.min_area),
            "--frame-size", f"{cfg.frame_width}x{cfg.frame_height}",
        ]  # fmt: skip
        if registry:
            # the UE reaches the app through the path, so that is the address to advertise
            app_args += ["--mep", registry, "--ttl", str(cfg.ttl_s), "--advertise", f"http://{HOST}:{ports['proxy']}/detect"]
        app_uri = f"http://{HOST}:{ports['app']}"
        proc = sup.spawn("app", app_args)
        sup.wait_until("app", proc, lambda: _echo_ok(app_uri, 0.5)[0], deadline)
        path = cfg.path
        proc = sup.spawn(
            "path",
            [
                "path",
                "--listen", f"{HOST}:{ports['proxy']}",
                "--upstream", f"{HOST}:{ports['app']}",
                "--one-way-ms", repr(path.one_way_delay_ms),
                "--jitter-ms", repr(path.jitter_ms),
                "--bandwidth-mbps", "unlimited" if path.unlimited else repr(path.bandwidth_mbps),
                "--scope", path.scope.value,
                "--seed", str(cfg.seed),
            ],
        )  # fmt: skip
        sup.wait_until("path", proc, lambda: _tcp_ready((HOST, ports["proxy"])), deadline)
        chain = ChainEndpoints(app_uri, (HOST, ports["proxy"]), registry)
        while True:
            status = health_check(chain)
            if status.ok:
                break
            if time.monotonic() > deadline:
                raise HealthCheckTimeout(f"scenario {cfg.name}: hop {status.failing} failing: {status.detail}")
            time.sleep(0.1)

        samples_file = scenario_dir / "samples.csv"
        load_args = [
            "load",
            "--devices", str(cfg.devices),
            "--samples", str(cfg.samples_per_device),
            "--frames", cfg.frames,
            "--frame-size", f"{cfg.frame_width}x{cfg.frame_height}",
            "--encoding", cfg.encoding.value,
            "--seed", str(cfg.seed),
            "--rtt-burst", str(cfg.rtt_burst),
            "--probe-every", str(cfg.probe_every),
            "--think-time-ms", repr(cfg.think_time_ms),
            "--timeout-s", repr(cfg.timeout_s),
            "--out", str(samples_file),
        ]  # fmt: skip
        if registry:
            load_args += ["--discover", registry]
        else:
            load_args += ["--endpoint", f"{chain.proxied}/detect"]
        proc = sup.spawn("load", load_args)
        proc.wait()
        if samples_file.exists():
            outcome.runs = read_samples(samples_file)
        if proc.returncode != 0:
            tail = (log_dir / "load.log").read_text(errors="replace")[-2000:]
            raise MecbenchError(f"load generator exited with status {proc.returncode}:\n{tail}")
        outcome.ok = True
    except MecbenchError as exc:
        outcome.reason = f"{exc.code}: {exc}"
        log.error("scenario %s failed: %s", cfg.name, outcome.reason)
    finally:
        killed = sup.teardown()
        leaked = sup.leaked()
        if killed:
            log.warning("scenario %s: had to kill %s", cfg.name, ", ".join(killed))
        if leaked:
            outcome.ok = False
            outcome.reason += f" leaked processes: {', '.join(leaked)}"
        if outcome.ok and not keep_logs:
            shutil.rmtree(log_dir, ignore_errors=True)
        outcome.seconds = time.monotonic() - started
    return outcome


def run_suite(
    config: SuiteConfig, out_dir: Path | None = None, keep_logs: bool = False, only: list[str] | None = None
) -> tuple[ScenarioReport, int]:
    """Run every scenario (or just ``only``) and write the report files.

    Returns the report and the process exit status: 0 when every scenario
    succeeded, 1 otherwise.
    """
    out_dir = Path(out_dir or config.output)
    out_dir.mkdir(parents=True, exist_ok=True)
    scenarios = [s for s in config.scenarios if only is None or s.name in only]
    suite_started = time.monotonic()
    outcomes = []
    for cfg in scenarios:
        log.info("scenario %s: %d device(s) x %d samples", cfg.name, cfg.devices, cfg.samples_per_device)
        outcomes.append(run_scenario(cfg, out_dir, keep_logs))
    runs = {o.name: o.runs for o in outcomes if o.ok}
    pairs = [p for p in config.comparisons if only is None or (p[0] in only or p[1] in only)]
    report = build_report(runs, pairs, conventions=CONVENTIONS)
    for o in outcomes:
        if not o.ok:
            report.notes.append(f"ScenarioFailed: {o.name}: {o.reason}")
    (out_dir / "report.csv").write_bytes(export(report, "csv"))
    (out_dir / "report.json").write_bytes(export(report, "json"))
    (out_dir / "plotdata.txt").write_bytes(export(report, "plotdata"))
    manifest = {
        "mecbench_version": __version__,
        "suite": str(config.source) if config.source else None,
        "python": platform.python_version(),
        "cpu_count": os.cpu_count(),
        "suite_seconds": round(time.monotonic() - suite_started, 3),
        "conventions": CONVENTIONS,
        "scenarios": [
            {
                "name": cfg.name,
                "status": "ok" if o.ok else "failed",
                "reason": o.reason,
                "seconds": round(o.seconds, 3),
                "mode": cfg.mode,
                "devices": cfg.devices,
                "samples_per_device": cfg.samples_per_device,
                "service_ms": cfg.service_ms,
                "seed": cfg.seed,
                "device_seeds": [cfg.seed + i for i in range(cfg.devices)],
                "encoding": cfg.encoding.value,
                "frames": cfg.frames,
                "frame_size": [cfg.frame_width, cfg.frame_height],
                "rtt_burst": cfg.rtt_burst,
                "probe_every": cfg.probe_every,
                "think_time_ms": cfg.think_time_ms,
                "path": {**asdict(cfg.path), "scope": cfg.path.scope.value},
                "ports": o.ports,
            }
            for cfg, o in zip(scenarios, outcomes)
        ],
    }
    (out_dir / "run-manifest.json").write_text(json.dumps(manifest, indent=2) + "\n")
    return report, 0 if all(o.ok for o in outcomes) else 1
