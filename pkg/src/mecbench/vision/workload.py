"""Calibrated synthetic compute load standing in for model inference time."""

from __future__ import annotations

import time
from collections.abc import Callable
from dataclasses import dataclass, replace

from mecbench.errors import CalibrationUnstable

KERNEL_ITERATIONS = 60_000
MAX_SPREAD = 0.5  # three consecutive measurements must agree within 50 %
MAX_MEASUREMENTS = 8
SLICE_MS = 0.5


@dataclass(frozen=True)
class WorkloadProfile:
    target_service_ms: float = 0.0
    calibration: float | None = None  # kernel iterations per millisecond

    def __post_init__(self):
        if self.target_service_ms < 0:
            raise ValueError("target_service_ms must be >= 0")
        if self.calibration is not None and self.calibration <= 0:
            raise ValueError("calibration must be > 0")


def kernel(iterations: int, seed: int = 1) -> int:
    """Side-effect-free integer arithmetic (a linear congruential walk)."""
    x = seed
    for _ in range(iterations):
        x = (x * 1103515245 + 12345) & 0x7FFFFFFF
    return x


def calibrate(profile: WorkloadProfile, clock: Callable[[], float] = time.perf_counter) -> WorkloadProfile:
    """Measure kernel speed and return ``profile`` with ``calibration`` set.

    Measurements repeat until the last three agree within 50 % of each other;
    the median of that window is used. Raises :class:`CalibrationUnstable`
    when no such window appears within ``MAX_MEASUREMENTS`` runs.
    """
    rates: list[float] = []
    for _ in range(MAX_MEASUREMENTS):
        start = clock()
        kernel(KERNEL_ITERATIONS)
        elapsed_ms = (clock() - start) * 1000.0
        rates.append(KERNEL_ITERATIONS / max(elapsed_ms, 1e-6))
        window = rates[-3:]
        if len(window) == 3 and max(window) <= (1 + MAX_SPREAD) * min(window):
            return replace(profile, calibration=sorted(window)[1])
    raise CalibrationUnstable(
        "kernel timings never settled: " + ", ".join(f"{r:.0f}" for r in rates) + " iterations/ms"
    )


def synth_load(profile: WorkloadProfile, target_ms: float | None = None) -> float:
    """Burn CPU for about ``target_ms`` (default: the profile target); return elapsed ms.

    Work runs in slices of roughly half a millisecond until the wall-clock
    deadline passes, so a request keeps its service time even when several
    requests share the interpreter.
    """
    if profile.calibration is None:
        raise ValueError("workload profile is not calibrated")
    target = profile.target_service_ms if target_ms is None else target_ms
    start = time.perf_counter()
    if target <= 0:
        return (time.perf_counter() - start) * 1000.0
    deadline = start + target / 1000.0
    slice_iterations = max(1, int(profile.calibration * SLICE_MS))
    seed = 1
    while time.perf_counter() < deadline:
        seed = kernel(slice_iterations, seed)
    return (time.perf_counter() - start) * 1000.0
