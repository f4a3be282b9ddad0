"""In-memory MEC platform service registry.

Every operation takes the current monotonic time as an argument; the core
never reads a clock, so lease expiry is fully deterministic under test.
An entry is considered expired once ``expires_at <= now``.
"""

from __future__ import annotations

import enum
import itertools
import threading
from dataclasses import dataclass
from urllib.parse import urlsplit

from mecbench.errors import DuplicateName, InvalidDescriptor, UnknownService

MAX_NAME_LENGTH = 128


class ServiceState(str, enum.Enum):
    ACTIVE = "ACTIVE"
    INACTIVE = "INACTIVE"


@dataclass(frozen=True)
class ServiceDescriptor:
    service_name: str
    version: str
    category: str
    endpoint_uri: str
    state: ServiceState = ServiceState.ACTIVE
    ttl_s: int = 30

    def validate(self) -> None:
        """Raise :class:`InvalidDescriptor` naming the first failing field."""
        if not isinstance(self.service_name, str) or not self.service_name:
            raise InvalidDescriptor("service_name", "must be non-empty")
        if len(self.service_name) > MAX_NAME_LENGTH:
            raise InvalidDescriptor("service_name", f"longer than {MAX_NAME_LENGTH} characters")
        if not isinstance(self.version, str):
            raise InvalidDescriptor("version", "must be text")
        if not isinstance(self.category, str):
            raise InvalidDescriptor("category", "must be text")
        if not isinstance(self.endpoint_uri, str):
            raise InvalidDescriptor("endpoint_uri", "must be text")
        parts = urlsplit(self.endpoint_uri)
        if not parts.scheme or not parts.hostname:
            raise InvalidDescriptor("endpoint_uri", "must be an absolute URI with scheme and host")
        if not isinstance(self.state, ServiceState):
            raise InvalidDescriptor("state", "must be ACTIVE or INACTIVE")
        if isinstance(self.ttl_s, bool) or not isinstance(self.ttl_s, int) or self.ttl_s < 1:
            raise InvalidDescriptor("ttl_s", "must be an integer >= 1")

    def to_wire(self) -> dict:
        return {
            "ser_name": self.service_name,
            "version": self.version,
            "category": self.category,
            "endpoint_uri": self.endpoint_uri,
            "state": self.state.value,
            "ttl_s": self.ttl_s,
        }

    @classmethod
    def from_wire(cls, body: object) -> ServiceDescriptor:
        """Build a descriptor from the JSON registration body, validating it."""
        if not isinstance(body, dict):
            raise InvalidDescriptor("body", "must be a JSON object")
        try:
            state = ServiceState(body.get("state", "ACTIVE"))
        except ValueError:
            raise InvalidDescriptor("state", "must be ACTIVE or INACTIVE") from None
        descriptor = cls(
            service_name=body.get("ser_name", ""),
            version=body.get("version", ""),
            category=body.get("category", ""),
            endpoint_uri=body.get("endpoint_uri", ""),
            state=state,
            ttl_s=body.get("ttl_s", 30),
        )
        descriptor.validate()
        return descriptor


@dataclass(frozen=True)
class RegistryEntry:
    service_id: str
    descriptor: ServiceDescriptor
    registered_at: float
    expires_at: float


class Registry:
    """Thread-safe registry; one lock guards a single map mutation at a time."""

    def __init__(self) -> None:
        self._lock = threading.Lock()
        self._entries: dict[str, RegistryEntry] = {}
        self._ids = itertools.count(1)

    def _next_id(self) -> str:
        # zero-padded so lexical order equals issue order
        return f"svc-{next(self._ids):010d}"

    def register(self, descriptor: ServiceDescriptor, now: float) -> str:
        descriptor.validate()
        with self._lock:
            for entry in self._entries.values():
                d = entry.descriptor
                if (
                    entry.expires_at > now
                    and d.state is ServiceState.ACTIVE
                    and d.service_name == descriptor.service_name
                    and d.version == descriptor.version
                ):
                    raise DuplicateName(
                        f"{descriptor.service_name} {descriptor.version} already registered as {entry.service_id}"
                    )
            service_id = self._next_id()
            self._entries[service_id] = RegistryEntry(
                service_id, descriptor, registered_at=now, expires_at=now + descriptor.ttl_s
            )
            return service_id

    def deregister(self, service_id: str, now: float) -> None:
        with self._lock:
            entry = self._entries.pop(service_id, None)
            if entry is None or entry.expires_at <= now:
                raise UnknownService(service_id)

    def renew(self, service_id: str, now: float) -> None:
        with self._lock:
            entry = self._entries.get(service_id)
            if entry is None or entry.expires_at <= now:
                raise UnknownService(service_id)
            self._entries[service_id] = RegistryEntry(
                service_id, entry.descriptor, entry.registered_at, now + entry.descriptor.ttl_s
            )

    def discover(self, category: str = "", now: float = float("-inf")) -> list[tuple[str, ServiceDescriptor]]:
        with self._lock:
            live = [
                e
                for e in self._entries.values()
                if e.expires_at > now and (not category or e.descriptor.category == category)
            ]
        live.sort(key=lambda e: (e.registered_at, e.service_id))
        return [(e.service_id, e.descriptor) for e in live]

    def expire_sweep(self, now: float) -> int:
        with self._lock:
            dead = [sid for sid, e in self._entries.items() if e.expires_at <= now]
            for sid in dead:
                del self._entries[sid]
        return len(dead)

    def view(self) -> list[RegistryEntry]:
        with self._lock:
            entries = list(self._entries.values())
        entries.sort(key=lambda e: (e.registered_at, e.service_id))
        return entries
