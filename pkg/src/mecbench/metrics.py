"""Per-scenario statistics and edge-vs-cloud comparisons."""

from __future__ import annotations

import csv
import enum
import io
import json
import math
from dataclasses import asdict, dataclass, field

from scipy import stats

from mecbench.errors import InsufficientSamples, ZeroBaseline

METRICS = ("rtt", "processing", "response", "throughput")
_SAMPLE_ATTR = {
    "rtt": "rtt_ms",
    "processing": "processing_ms",
    "response": "response_ms",
    "throughput": "throughput_mbps",
}

SUMMARY_HEADER = ("scenario", "metric", "n", "mean", "sd", "ci95_half", "min", "max")
COMPARISON_HEADER = ("metric", "baseline", "variant", "baseline_mean", "variant_mean", "improvement_pct", "direction")


class Direction(str, enum.Enum):
    LOWER_IS_BETTER = "LOWER_IS_BETTER"
    HIGHER_IS_BETTER = "HIGHER_IS_BETTER"


COMPARED_METRICS = {
    "processing": Direction.LOWER_IS_BETTER,
    "response": Direction.LOWER_IS_BETTER,
    "throughput": Direction.HIGHER_IS_BETTER,
}


@dataclass(frozen=True)
class SummaryStats:
    n: int
    mean: float
    sd: float
    ci95_half: float
    min: float
    max: float


@dataclass(frozen=True)
class Comparison:
    metric: str
    baseline: str
    variant: str
    baseline_mean: float
    variant_mean: float
    improvement_pct: float
    direction: Direction


@dataclass
class ScenarioReport:
    summaries: dict[str, dict[str, SummaryStats]] = field(default_factory=dict)
    comparisons: list[Comparison] = field(default_factory=list)
    notes: list[str] = field(default_factory=list)
    conventions: dict[str, str] = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "summaries": {s: {m: asdict(v) for m, v in ms.items()} for s, ms in self.summaries.items()},
            "comparisons": [{**asdict(c), "direction": c.direction.value} for c in self.comparisons],
            "notes": list(self.notes),
            "conventions": dict(self.conventions),
        }

    @classmethod
    def from_dict(cls, data: dict) -> ScenarioReport:
        return cls(
            summaries={s: {m: SummaryStats(**v) for m, v in ms.items()} for s, ms in data["summaries"].items()},
            comparisons=[Comparison(**{**c, "direction": Direction(c["direction"])}) for c in data["comparisons"]],
            notes=list(data.get("notes", [])),
            conventions=dict(data.get("conventions", {})),
        )


def t_quantile(df: int, p: float = 0.975) -> float:
    return float(stats.t.ppf(p, df))


def summarize(samples) -> SummaryStats:
    """Mean, sample SD (n-1) and Student-t 95 % half-width of the mean."""
    values = [float(v) for v in samples]
    n = len(values)
    if n < 2:
        raise InsufficientSamples(f"need at least 2 samples, got {n}")
    mean = math.fsum(values) / n
    sd = math.sqrt(math.fsum((v - mean) ** 2 for v in values) / (n - 1))
    ci = t_quantile(n - 1) * sd / math.sqrt(n)
    return SummaryStats(n, mean, sd, ci, min(values), max(values))


def improvement(baseline_mean: float, variant_mean: float, direction: Direction | str) -> float:
    """Percent improvement of ``variant`` over ``baseline``."""
    direction = Direction(direction)
    if baseline_mean <= 0:
        raise ZeroBaseline(f"baseline mean must be positive, got {baseline_mean}")
    if direction is Direction.LOWER_IS_BETTER:
        return (baseline_mean - variant_mean) / baseline_mean * 100.0
    return (variant_mean - baseline_mean) / baseline_mean * 100.0


def default_pairs(names) -> list[tuple[str, str]]:
    """Pair ``CloudK`` with ``MECK`` for every K present among ``names``."""
    pairs = []
    for name in names:
        if name.startswith("Cloud"):
            pairs.append((name, "MEC" + name[len("Cloud"):]))
    return pairs


def build_report(runs: dict, pairs=None, conventions: dict | None = None) -> ScenarioReport:
    """Summaries per scenario and metric, pooled across devices, plus comparisons.

    ``runs`` maps scenario name -> list of DeviceRun; ``pairs`` lists
    ``(baseline, variant)`` scenario names. A pair whose counterpart is absent
    is skipped with a MissingScenario note.
    """
    report = ScenarioReport(conventions=dict(conventions or {}))
    for name, device_runs in runs.items():
        samples = [s for run in device_runs for s in run.samples]
        per_metric = {}
        for metric in METRICS:
            values = [getattr(s, _SAMPLE_ATTR[metric]) for s in samples]
            values = [v for v in values if not math.isnan(v)]
            try:
                per_metric[metric] = summarize(values)
            except InsufficientSamples as exc:
                raise InsufficientSamples(f"scenario {name}, metric {metric}: {exc}") from None
        report.summaries[name] = per_metric
    for baseline, variant in default_pairs(runs) if pairs is None else pairs:
        missing = [s for s in (baseline, variant) if s not in report.summaries]
        if missing:
            report.notes.append(f"MissingScenario: {baseline} vs {variant} skipped, no data for {', '.join(missing)}")
            continue
        for metric, direction in COMPARED_METRICS.items():
            b = report.summaries[baseline][metric].mean
            v = report.summaries[variant][metric].mean
            report.comparisons.append(Comparison(metric, baseline, variant, b, v, improvement(b, v, direction), direction))
    return report


def _fmt(x: float) -> str:
    return f"{x:.4f}"


def export_csv(report: ScenarioReport) -> bytes:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(SUMMARY_HEADER)
    for scenario, per_metric in report.summaries.items():
        for metric, s in per_metric.items():
            writer.writerow([scenario, metric, s.n, _fmt(s.mean), _fmt(s.sd), _fmt(s.ci95_half), _fmt(s.min), _fmt(s.max)])
    if report.comparisons:
        writer.writerow([])
        writer.writerow(COMPARISON_HEADER)
        for c in report.comparisons:
            writer.writerow(
                [c.metric, c.baseline, c.variant, _fmt(c.baseline_mean), _fmt(c.variant_mean), _fmt(c.improvement_pct), c.direction.value]
            )
    return buf.getvalue().encode()


def export_json(report: ScenarioReport) -> bytes:
    return (json.dumps(report.to_dict(), indent=2) + "\n").encode()


def export_plotdata(report: ScenarioReport) -> bytes:
    lines = ["# scenario metric mean ci95_half"]
    for scenario, per_metric in report.summaries.items():
        for metric, s in per_metric.items():
            lines.append(f"{scenario} {metric} {_fmt(s.mean)} {_fmt(s.ci95_half)}")
    return ("\n".join(lines) + "\n").encode()


_EXPORTERS = {"csv": export_csv, "json": export_json, "plotdata": export_plotdata}


def export(report: ScenarioReport, fmt: str) -> bytes:
    try:
        return _EXPORTERS[fmt.lower()](report)
    except KeyError:
        raise ValueError(f"unknown export format {fmt!r}; choose from {sorted(_EXPORTERS)}") from None
