"""Deterministic release-time scheduler for one direction of an emulated link.

The scheduler never reads a clock. Callers submit chunks with their arrival
time and call :meth:`LinkScheduler.advance` with the current time; it
returns the chunks whose release time has passed. All times are in ms.

Each chunk becomes *eligible* one one-way delay (plus seeded uniform jitter)
after it arrives; eligibility is kept monotone per flow so a flow never
reorders. Bounded links then serialize eligible data in segments, serving
flows round-robin, and release a chunk when its last segment has left the
link. Unlimited links release at the eligible time.
"""

from __future__ import annotations

import heapq
import itertools
import random
from collections import OrderedDict, deque
from dataclasses import dataclass, field
from typing import Any, Hashable

from mecbench.pathemu.profile import PathProfile

SEGMENT_BYTES = 1460


@dataclass
class Chunk:
    flow: Hashable
    index: int
    size: int
    arrival: float
    eligible: float
    payload: Any = None
    remaining: int = 0
    release: float | None = None


@dataclass(frozen=True)
class ScheduleRecord:
    flow: Hashable
    index: int
    size: int
    arrival: float
    eligible: float
    release: float


@dataclass
class LinkScheduler:
    profile: PathProfile
    seed: int = 0
    segment_bytes: int = SEGMENT_BYTES
    record: bool = False
    log: list[ScheduleRecord] = field(default_factory=list)

    def __post_init__(self):
        self._rng = random.Random(self.seed)
        self._queues: OrderedDict[Hashable, deque[Chunk]] = OrderedDict()
        self._last_eligible: dict[Hashable, float] = {}
        self._next_index: dict[Hashable, int] = {}
        self._released: list[tuple[float, int, Chunk]] = []
        self._tiebreak = itertools.count()
        self._link_free_at = float("-inf")
        self._last_served: Hashable | None = None

    def submit(self, flow: Hashable, size: int, arrival: float, payload: Any = None) -> Chunk:
        if size <= 0:
            raise ValueError("chunks must carry at least one byte")
        jitter = self._rng.uniform(-self.profile.jitter_ms, self.profile.jitter_ms) if self.profile.jitter_ms else 0.0
        eligible = max(arrival + self.profile.one_way_delay_ms + jitter, self._last_eligible.get(flow, float("-inf")))
        self._last_eligible[flow] = eligible
        index = self._next_index.get(flow, 0)
        self._next_index[flow] = index + 1
        chunk = Chunk(flow, index, size, arrival, eligible, payload, remaining=size)
        if self.profile.unlimited:
            self._finish(chunk, eligible)
        else:
            if flow not in self._queues:
                self._queues[flow] = deque()
                # a flow that turns up mid-segment goes ahead of the flow being served
                last = self._last_served
                if last in self._queues and last != flow and self._link_free_at > arrival:
                    self._queues.move_to_end(last)
            self._queues[flow].append(chunk)
        return chunk

    def _finish(self, chunk: Chunk, release: float) -> None:
        chunk.release = release
        heapq.heappush(self._released, (release, next(self._tiebreak), chunk))
        if self.record:
            self.log.append(ScheduleRecord(chunk.flow, chunk.index, chunk.size, chunk.arrival, chunk.eligible, release))

    def _serve(self, now: float) -> None:
        # Segments may be committed once their start time has passed: any chunk
        # eligible by then arrived no later (jitter never exceeds the delay).
        while self._queues:
            earliest = min(q[0].eligible for q in self._queues.values())
            start = max(self._link_free_at, earliest)
            if start > now:
                return
            flow = next(f for f, q in self._queues.items() if q[0].eligible <= start)
            queue = self._queues[flow]
            chunk = queue[0]
            sent = min(self.segment_bytes, chunk.remaining)
            self._link_free_at = start + self.profile.serialization_ms(sent)
            chunk.remaining -= sent
            self._last_served = flow
            if chunk.remaining == 0:
                queue.popleft()
                self._finish(chunk, self._link_free_at)
            if queue:
                self._queues.move_to_end(flow)
            else:
                del self._queues[flow]

    def advance(self, now: float) -> list[Chunk]:
        """Return chunks with ``release <= now`` in release order."""
        if self._queues:
            self._serve(now)
        out = []
        while self._released and self._released[0][0] <= now:
            out.append(heapq.heappop(self._released)[2])
        return out

    def next_event(self) -> float | None:
        """Earliest time at which :meth:`advance` could make progress."""
        times = []
        if self._released:
            times.append(self._released[0][0])
        if self._queues:
            earliest = min(q[0].eligible for q in self._queues.values())
            times.append(max(self._link_free_at, earliest))
        return min(times) if times else None

    @property
    def idle(self) -> bool:
        return not self._queues and not self._released


def replay(profile: PathProfile, arrivals: list[tuple[Hashable, int, float]], seed: int = 0) -> list[ScheduleRecord]:
    """Run a whole arrival sequence through a fresh scheduler, returning its schedule.

    ``arrivals`` holds ``(flow, size, arrival_ms)`` in arrival order.
    """
    sched = LinkScheduler(profile, seed=seed, record=True)
    for flow, size, arrival in arrivals:
        sched.advance(arrival)
        sched.submit(flow, size, arrival)
    while not sched.idle:
        sched.advance(sched.next_event())
    return list(sched.log)
