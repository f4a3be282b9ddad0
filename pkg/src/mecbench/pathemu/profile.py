from __future__ import annotations

import enum
import math
from dataclasses import dataclass


class LinkScope(str, enum.Enum):
    """Who shares the bandwidth cap.

    ``connection``: every proxied connection gets its own link (a UE with its
    own radio resources). ``shared``: all connections through one proxy share
    one link, served round-robin (a common backhaul/internet uplink).
    """

    CONNECTION = "connection"
    SHARED = "shared"


@dataclass(frozen=True)
class PathProfile:
    one_way_delay_ms: float = 0.0
    jitter_ms: float = 0.0
    bandwidth_mbps: float | None = None  # None = unlimited
    name: str = "path"
    scope: LinkScope = LinkScope.CONNECTION

    def __post_init__(self):
        if self.one_way_delay_ms < 0 or self.jitter_ms < 0:
            raise ValueError("delay and jitter must be >= 0")
        if self.jitter_ms > self.one_way_delay_ms:
            raise ValueError("jitter_ms must not exceed one_way_delay_ms")
        if self.bandwidth_mbps is not None and not (self.bandwidth_mbps > 0 and math.isfinite(self.bandwidth_mbps)):
            raise ValueError("bandwidth_mbps must be a positive finite number or None")
        object.__setattr__(self, "scope", LinkScope(self.scope))

    @property
    def unlimited(self) -> bool:
        return self.bandwidth_mbps is None

    def serialization_ms(self, nbytes: int) -> float:
        if self.bandwidth_mbps is None:
            return 0.0
        # Mbit/s == kbit/ms
        return nbytes * 8 / (self.bandwidth_mbps * 1000.0)


def transfer_time(nbytes: int, profile: PathProfile) -> float:
    """One-way delay plus serialization time, in ms; jitter is excluded."""
    if nbytes < 0:
        raise ValueError("nbytes must be >= 0")
    return profile.one_way_delay_ms + profile.serialization_ms(nbytes)


def parse_bandwidth(text: str) -> float | None:
    if text.strip().lower() in ("unlimited", "inf", "none", ""):
        return None
    return float(text)
