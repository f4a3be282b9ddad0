"""Suite files: INI-style key/value text read with :mod:`configparser`.

Layout (every key optional unless marked required)::

    [suite]
    output = results                # output directory, relative to the working directory
    seed = 7                        # base seed; scenario seeds default to it
    comparisons = Cloud1 -> MEC1, Cloud2 -> MEC2   # baseline -> variant

    [path <name>]                   # one section per named path profile
    one_way_ms = 41.0               # required
    jitter_ms = 0.0
    bandwidth_mbps = unlimited      # number or "unlimited"
    scope = connection              # connection | shared

    [scenario <name>]               # scenarios run in file order
    mode = mec                      # required: mec | cloud
    path = <path name>              # required
    service_ms = 54.2               # required: mean server compute per request
    devices = 1
    samples = 100                   # per device
    frames = synthetic              # or a directory of images
    encoding = raw                  # raw | png | jpeg
    frame_width = 200
    frame_height = 152
    seed = <suite seed>
    rtt_burst = 100                 # echo probes before the run
    probe_every = 10                # one echo probe every N requests
    think_time_ms = 0
    timeout_s = 10
    threshold = 200                 # detector luminance threshold
    min_area = 16                   # detector minimum blob area
    ttl_s = 30                      # registry lease (mec mode)
    mep_port = 0                    # 0 = pick a free port
    app_port = 0
    proxy_port = 0
"""

from __future__ import annotations

import configparser
from dataclasses import dataclass, field
from pathlib import Path

from mecbench import FRAME_HEIGHT, FRAME_WIDTH
from mecbench.errors import ParseError, ValidationError
from mecbench.loadgen import DEFAULT_PROBE_EVERY, DEFAULT_TIMEOUT_S
from mecbench.pathemu.profile import LinkScope, PathProfile, parse_bandwidth
from mecbench.vision.frames import Encoding

DEFAULT_SAMPLES = 100
DEFAULT_RTT_BURST = 100


@dataclass
class ScenarioConfig:
    name: str
    mode: str
    path: PathProfile
    service_ms: float
    devices: int = 1
    samples_per_device: int = DEFAULT_SAMPLES
    frames: str = "synthetic"
    encoding: Encoding = Encoding.RAW
    frame_width: int = FRAME_WIDTH
    frame_height: int = FRAME_HEIGHT
    seed: int = 0
    rtt_burst: int = DEFAULT_RTT_BURST
    probe_every: int = DEFAULT_PROBE_EVERY
    think_time_ms: float = 0.0
    timeout_s: float = DEFAULT_TIMEOUT_S
    threshold: int = 200
    min_area: int = 16
    ttl_s: int = 30
    mep_port: int = 0
    app_port: int = 0
    proxy_port: int = 0


@dataclass
class SuiteConfig:
    scenarios: list[ScenarioConfig]
    comparisons: list[tuple[str, str]] = field(default_factory=list)
    output: Path = Path("results")
    seed: int = 0
    source: Path | None = None

    def scenario(self, name: str) -> ScenarioConfig:
        for s in self.scenarios:
            if s.name == name:
                return s
        raise KeyError(name)


_SCENARIO_KEYS = {
    "mode": str,
    "path": str,
    "service_ms": float,
    "devices": int,
    "samples": int,
    "frames": str,
    "encoding": str,
    "frame_width": int,
    "frame_height": int,
    "seed": int,
    "rtt_burst": int,
    "probe_every": int,
    "think_time_ms": float,
    "timeout_s": float,
    "threshold": int,
    "min_area": int,
    "ttl_s": int,
    "mep_port": int,
    "app_port": int,
    "proxy_port": int,
}
_REQUIRED_SCENARIO_KEYS = ("mode", "path", "service_ms")
_PATH_KEYS = {"one_way_ms", "jitter_ms", "bandwidth_mbps", "scope"}
_SUITE_KEYS = {"output", "seed", "comparisons"}


def _parse_pairs(text: str, errors: list[str]) -> list[tuple[str, str]]:
    pairs = []
    for item in filter(None, (p.strip() for p in text.split(","))):
        baseline, sep, variant = item.partition("->")
        if not sep or not baseline.strip() or not variant.strip():
            errors.append(f"suite.comparisons: {item!r} is not 'baseline -> variant'")
            continue
        pairs.append((baseline.strip(), variant.strip()))
    return pairs


def parse_suite(text: str, source: Path | None = None) -> SuiteConfig:
    parser = configparser.ConfigParser(interpolation=None, inline_comment_prefixes=("#", ";"), strict=True)
    try:
        parser.read_string(text, source=str(source or "<suite>"))
    except configparser.Error as exc:
        raise ParseError(str(exc)) from exc

    errors: list[str] = []
    suite = parser["suite"] if parser.has_section("suite") else {}
    for key in suite:
        if key not in _SUITE_KEYS:
            errors.append(f"suite.{key}: unknown key")

    def convert(where: str, key: str, raw: str, kind):
        try:
            return kind(raw)
        except ValueError:
            errors.append(f"{where}.{key}: {raw!r} is not a valid {kind.__name__}")
            return None

    suite_seed = convert("suite", "seed", suite.get("seed", "0"), int) or 0
    paths: dict[str, PathProfile] = {}
    scenarios: list[ScenarioConfig] = []
    for section in parser.sections():
        kind, _, name = section.partition(" ")
        name = name.strip()
        if section == "suite":
            continue
        if kind == "path" and name:
            body = parser[section]
            for key in body:
                if key not in _PATH_KEYS:
                    errors.append(f"path {name}.{key}: unknown key")
            if "one_way_ms" not in body:
                errors.append(f"path {name}.one_way_ms: required")
                continue
            one_way = convert(f"path {name}", "one_way_ms", body["one_way_ms"], float)
            jitter = convert(f"path {name}", "jitter_ms", body.get("jitter_ms", "0"), float)
            try:
                bandwidth = parse_bandwidth(body.get("bandwidth_mbps", "unlimited"))
            except ValueError:
                errors.append(f"path {name}.bandwidth_mbps: {body['bandwidth_mbps']!r} is not a number or 'unlimited'")
                continue
            if one_way is None or jitter is None:
                continue
            try:
                paths[name] = PathProfile(one_way, jitter, bandwidth, name, LinkScope(body.get("scope", "connection")))
            except ValueError as exc:
                errors.append(f"path {name}: {exc}")
        elif kind == "scenario" and name:
            scenarios.append((name, parser[section]))
        else:
            errors.append(f"[{section}]: unknown section (expected suite, path <name> or scenario <name>)")

    built: list[ScenarioConfig] = []
    seen: set[str] = set()
    for name, body in scenarios:
        where = f"scenario {name}"
        if name in seen:
            errors.append(f"{where}: duplicate scenario name")
        seen.add(name)
        values = {}
        for key, raw in body.items():
            if key not in _SCENARIO_KEYS:
                errors.append(f"{where}.{key}: unknown key")
                continue
            values[key] = convert(where, key, raw, _SCENARIO_KEYS[key])
        missing = [k for k in _REQUIRED_SCENARIO_KEYS if k not in values]
        for key in missing:
            errors.append(f"{where}.{key}: required")
        if missing or any(v is None for v in values.values()):
            continue
        if values["mode"] not in ("mec", "cloud"):
            errors.append(f"{where}.mode: must be 'mec' or 'cloud', got {values['mode']!r}")
        if values["path"] not in paths:
            errors.append(f"{where}.path: unknown path profile {values['path']!r}")
        encoding = values.pop("encoding", "raw")
        if encoding not in {e.value for e in Encoding}:
            errors.append(f"{where}.encoding: must be raw, png or jpeg, got {encoding!r}")
            encoding = "raw"
        cfg = ScenarioConfig(
            name=name,
            mode=values.pop("mode"),
            path=paths.get(values.pop("path")),
            service_ms=values.pop("service_ms"),
            samples_per_device=values.pop("samples", DEFAULT_SAMPLES),
            seed=values.pop("seed", suite_seed),
            encoding=Encoding(encoding),
            **values,
        )
        errors.extend(validate_scenario(cfg))
        built.append(cfg)

    if not scenarios:
        errors.append("suite: no [scenario <name>] sections")
    pairs = _parse_pairs(suite.get("comparisons", ""), errors)
    for baseline, variant in pairs:
        for ref in (baseline, variant):
            if ref not in seen:
                errors.append(f"suite.comparisons: unknown scenario {ref!r}")
    if errors:
        raise ValidationError(errors)
    output = Path(suite.get("output", "results"))
    return SuiteConfig(built, pairs, output, suite_seed, source)


def validate_scenario(cfg: ScenarioConfig) -> list[str]:
    where = f"scenario {cfg.name}"
    checks = [
        (cfg.devices >= 1, "devices: must be >= 1"),
        (cfg.samples_per_device >= 2, "samples: must be >= 2"),
        (cfg.service_ms >= 0, "service_ms: must be >= 0"),
        (cfg.frame_width >= 1 and cfg.frame_height >= 1, "frame_width/frame_height: must be >= 1"),
        (cfg.rtt_burst >= 0, "rtt_burst: must be >= 0"),
        (cfg.probe_every >= 0, "probe_every: must be >= 0"),
        (cfg.think_time_ms >= 0, "think_time_ms: must be >= 0"),
        (cfg.timeout_s > 0, "timeout_s: must be > 0"),
        (0 <= cfg.threshold <= 255, "threshold: must be within 0..255"),
        (cfg.min_area >= 1, "min_area: must be >= 1"),
        (cfg.ttl_s >= 1, "ttl_s: must be >= 1"),
    ]
    for port_key in ("mep_port", "app_port", "proxy_port"):
        port = getattr(cfg, port_key)
        checks.append((0 <= port <= 65535, f"{port_key}: must be within 0..65535"))
    return [f"{where}.{msg}" for ok, msg in checks if not ok]


def load_config(path: str | Path) -> SuiteConfig:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ParseError(f"{path}: {exc}") from exc
    return parse_suite(text, source=path)


def bundled_suite() -> Path:
    """Path of the shipped reference suite."""
    return Path(__file__).resolve().parent.parent / "data" / "paper.suite"
