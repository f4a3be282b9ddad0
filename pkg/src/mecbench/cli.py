"""``mecbench`` command line: one subcommand per component plus the suite runner."""

from __future__ import annotations

import argparse
import logging
import signal
import sys
import threading
from pathlib import Path

from mecbench.errors import MecbenchError, ParseError, ValidationError

log = logging.getLogger("mecbench")

EXIT_OK = 0
EXIT_FAILED = 1
EXIT_CONFIG = 2


def _hostport(text: str) -> tuple[str, int]:
    from mecbench.httputil import split_hostport

    try:
        return split_hostport(text)
    except ValueError as exc:
        raise argparse.ArgumentTypeError(str(exc)) from None


def _frame_size(text: str) -> tuple[int, int]:
    try:
        w, h = (int(v) for v in text.lower().split("x"))
    except ValueError:
        raise argparse.ArgumentTypeError(f"{text!r} is not WIDTHxHEIGHT") from None
    if w < 1 or h < 1:
        raise argparse.ArgumentTypeError("frame size must be positive")
    return w, h


def _bandwidth(text: str) -> float | None:
    from mecbench.pathemu.profile import parse_bandwidth

    try:
        return parse_bandwidth(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"{text!r} is not a number or 'unlimited'") from None


def _stop_event() -> threading.Event:
    """Event set by SIGTERM or SIGINT; install before announcing readiness."""
    stop = threading.Event()
    for sig in (signal.SIGTERM, signal.SIGINT):
        signal.signal(sig, lambda *_: stop.set())
    return stop


def _wait(stop: threading.Event) -> None:
    while not stop.wait(1.0):
        pass


def cmd_mep(args) -> int:
    from mecbench.registry.http import RegistryServer

    stop = _stop_event()
    server = RegistryServer(args.listen, sweep_interval_ms=args.sweep_interval_ms).start()
    print(f"registry listening on {server.uri}", flush=True)
    try:
        _wait(stop)
    finally:
        server.stop()
    return EXIT_OK


def cmd_app(args) -> int:
    from mecbench.app import AppConfig, OffloadApp
    from mecbench.vision.detector import DetectorParams
    from mecbench.vision.workload import WorkloadProfile

    host, port = args.listen
    try:
        config = AppConfig(
            mode=args.mode,
            host=host,
            port=port,
            workload=WorkloadProfile(args.service_ms),
            mep_uri=args.mep,
            detector=DetectorParams(args.threshold, args.min_area),
            advertise_uri=args.advertise,
            ttl_s=args.ttl,
            frame_width=args.frame_size[0],
            frame_height=args.frame_size[1],
        )
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    stop = _stop_event()
    app = OffloadApp(config).start()
    print(f"{config.mode.value} app listening on {app.uri}", flush=True)
    try:
        _wait(stop)
    finally:
        app.stop()
    return EXIT_OK


def cmd_path(args) -> int:
    from mecbench.pathemu import LinkScope, PathProfile, proxy_listen

    try:
        profile = PathProfile(args.one_way_ms, args.jitter_ms, args.bandwidth_mbps, "cli", LinkScope(args.scope))
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    stop = _stop_event()
    proxy = proxy_listen(args.listen, args.upstream, profile, args.seed)
    host, port = proxy.address
    print(f"path proxy {host}:{port} -> {args.upstream[0]}:{args.upstream[1]}", flush=True)
    try:
        _wait(stop)
    finally:
        proxy.shutdown()
    return EXIT_OK


def _discover(registry_uri: str) -> str:
    from mecbench.app import SERVICE_CATEGORY
    from mecbench.errors import UnknownService
    from mecbench.registry.client import MepClient

    try:
        found = MepClient(registry_uri).discover(SERVICE_CATEGORY)
    except OSError as exc:
        raise MecbenchError(f"registry {registry_uri} unreachable: {exc}") from exc
    if not found:
        raise UnknownService(f"no active {SERVICE_CATEGORY!r} service registered at {registry_uri}")
    return found[0][1].endpoint_uri


def cmd_load(args) -> int:
    from mecbench.loadgen import LoadConfig, run_fleet, write_samples
    from mecbench.vision.corpus import load_corpus

    endpoint = _discover(args.discover) if args.discover else args.endpoint
    width, height = args.frame_size
    frames = load_corpus(args.frames, args.seed, width, height)
    config = LoadConfig(
        endpoint=endpoint,
        frames=frames,
        samples=args.samples,
        seed=args.seed,
        encoding=args.encoding,
        frame_source=args.frames,
        rtt_burst=args.rtt_burst,
        probe_every=args.probe_every,
        timeout_s=args.timeout_s,
        think_time_ms=args.think_time_ms,
    )
    runs = run_fleet(args.devices, config)
    if args.out:
        write_samples(runs, args.out)
    else:
        write_samples(runs, "/dev/stdout")
    failed = [r for r in runs if not r.complete]
    for r in failed:
        print(f"device {r.device_id} incomplete after {len(r.samples)} samples: {r.error}", file=sys.stderr)
    return EXIT_FAILED if failed else EXIT_OK


def cmd_run(args) -> int:
    from mecbench.scenario.config import bundled_suite, load_config
    from mecbench.scenario.orchestrate import run_suite

    try:
        config = load_config(args.suite or bundled_suite())
    except ParseError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except ValidationError as exc:
        print("config error:", file=sys.stderr)
        for v in exc.violations:
            print(f"  {v}", file=sys.stderr)
        return EXIT_CONFIG
    only = args.scenario or None
    if only:
        unknown = [s for s in only if s not in {c.name for c in config.scenarios}]
        if unknown:
            print(f"config error: unknown scenario(s): {', '.join(unknown)}", file=sys.stderr)
            return EXIT_CONFIG
    # SIGTERM unwinds through run_suite's teardown like Ctrl-C does
    signal.signal(signal.SIGTERM, signal.default_int_handler)
    report, status = run_suite(config, Path(args.out) if args.out else None, args.keep_logs, only)
    out = Path(args.out or config.output)
    for c in report.comparisons:
        print(f"{c.metric:<11} {c.baseline} -> {c.variant}: {c.improvement_pct:+.1f} %")
    for note in report.notes:
        print(f"note: {note}")
    print(f"report written to {out}")
    return status


def cmd_calibrate(args) -> int:
    from mecbench.calibration import fit_cloud, fit_edge, measure_payload
    from mecbench.vision.corpus import load_corpus

    frames = load_corpus(args.frames, args.seed)
    payload, overhead = measure_payload(frames, args.encoding)
    print(f"payload per request: {payload:.0f} octets, harness overhead {overhead:.2f} ms")
    for label, fit in (("edge", fit_edge(payload, overhead)), ("cloud", fit_cloud(payload, overhead))):
        p = fit.profile
        print(
            f"[path {label}] one_way_ms = {p.one_way_delay_ms:.1f}  bandwidth_mbps = {p.bandwidth_mbps:.3f}"
            f"  scope = {p.scope.value}  worst error {fit.worst_relative_error * 100:.1f} %"
        )
        for name, value in fit.predicted.items():
            print(f"    {name}: predicted response {value:.1f} ms")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    from mecbench import __version__

    parser = argparse.ArgumentParser(prog="mecbench", description="Edge vs cloud offloading benchmark harness.")
    parser.add_argument("--version", action="version", version=f"mecbench {__version__}")
    parser.add_argument("-v", "--verbose", action="store_true", help="debug logging")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("mep", help="run the service registry")
    p.add_argument("--listen", type=_hostport, default=("127.0.0.1", 8080))
    p.add_argument("--sweep-interval-ms", type=float, default=1000.0)
    p.set_defaults(func=cmd_mep)

    p = sub.add_parser("app", help="run the offloading server")
    p.add_argument("--mode", choices=("mec", "cloud"), required=True)
    p.add_argument("--listen", type=_hostport, default=("127.0.0.1", 8081))
    p.add_argument("--service-ms", type=float, default=0.0, help="mean compute per request")
    p.add_argument("--mep", help="registry base URI (required with --mode mec)")
    p.add_argument("--advertise", help="endpoint URI to register (default: this server's /detect)")
    p.add_argument("--ttl", type=int, default=30, help="registry lease, seconds")
    p.add_argument("--threshold", type=int, default=200)
    p.add_argument("--min-area", type=int, default=16)
    p.add_argument("--frame-size", type=_frame_size, default=(200, 152), metavar="WxH")
    p.set_defaults(func=cmd_app)

    p = sub.add_parser("path", help="run the path emulator proxy")
    p.add_argument("--listen", type=_hostport, required=True)
    p.add_argument("--upstream", type=_hostport, required=True)
    p.add_argument("--one-way-ms", type=float, default=0.0)
    p.add_argument("--jitter-ms", type=float, default=0.0)
    p.add_argument("--bandwidth-mbps", type=_bandwidth, default=None, help="number or 'unlimited'")
    p.add_argument("--scope", choices=("connection", "shared"), default="connection")
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_path)

    p = sub.add_parser("load", help="run emulated devices against an endpoint")
    target = p.add_mutually_exclusive_group(required=True)
    target.add_argument("--endpoint", help="detect URI (or base URI) of the server")
    target.add_argument("--discover", metavar="MEP_URI", help="look the endpoint up in a registry")
    p.add_argument("--devices", type=int, default=1)
    p.add_argument("--samples", type=int, default=100, help="requests per device")
    p.add_argument("--frames", default="synthetic", help="'synthetic' or a directory of images")
    p.add_argument("--frame-size", type=_frame_size, default=(200, 152), metavar="WxH")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", help="samples CSV (default: stdout)")
    p.add_argument("--encoding", choices=("raw", "png", "jpeg"), default="raw")
    p.add_argument("--rtt-burst", type=int, default=20, help="echo probes before the run")
    p.add_argument("--probe-every", type=int, default=10, help="one echo probe every N requests (0: never)")
    p.add_argument("--think-time-ms", type=float, default=0.0)
    p.add_argument("--timeout-s", "--timeout", type=float, default=10.0)
    p.set_defaults(func=cmd_load)

    p = sub.add_parser("run", help="run a scenario suite end to end")
    p.add_argument("--suite", help="suite file (default: the bundled reference suite)")
    p.add_argument("--out", help="output directory (default: the suite's output key)")
    p.add_argument("--scenario", action="append", help="run only this scenario (repeatable)")
    p.add_argument("--keep-logs", action="store_true", help="keep per-process logs of successful scenarios")
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("calibrate", help="refit the edge and cloud path profiles on this host")
    p.add_argument("--frames", default="synthetic")
    p.add_argument("--encoding", choices=("raw", "png", "jpeg"), default="raw")
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_calibrate)
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(
        level=logging.DEBUG if args.verbose else logging.INFO,
        format="%(asctime)s %(name)s %(levelname)s %(message)s",
        stream=sys.stderr,
    )
    try:
        return args.func(args)
    except MecbenchError as exc:
        print(f"error: {exc.code}: {exc}", file=sys.stderr)
        return EXIT_FAILED
    except KeyboardInterrupt:
        return EXIT_FAILED
