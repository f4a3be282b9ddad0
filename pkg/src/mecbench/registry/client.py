"""Client side of the registry HTTP surface, used by the offload app and the load generator."""

from __future__ import annotations

from urllib.parse import quote

from mecbench.errors import DuplicateName, InvalidDescriptor, MecbenchError, UnknownService
from mecbench.httputil import json_request
from mecbench.registry.core import ServiceDescriptor
from mecbench.registry.http import PREFIX

_ERRORS = {400: InvalidDescriptor, 404: UnknownService, 409: DuplicateName}


def _raise_for(status: int, body) -> None:
    reason = body.get("reason", "") if isinstance(body, dict) else ""
    exc = _ERRORS.get(status)
    if exc is InvalidDescriptor:
        raise InvalidDescriptor("remote", reason)
    if exc is not None:
        raise exc(reason)
    raise MecbenchError(f"unexpected registry status {status}: {body}")


class MepClient:
    """Thin wrapper around the registry endpoints.

    Network failures surface as ``OSError``; protocol-level failures as the
    matching registry exception.
    """

    def __init__(self, base_uri: str, timeout: float = 2.0):
        self.base = base_uri.rstrip("/") + PREFIX
        self.timeout = timeout

    def register(self, descriptor: ServiceDescriptor) -> str:
        status, body = json_request("POST", f"{self.base}/services", descriptor.to_wire(), self.timeout)
        if status != 201:
            _raise_for(status, body)
        return body["service_id"]

    def deregister(self, service_id: str) -> None:
        status, body = json_request("DELETE", f"{self.base}/services/{service_id}", timeout=self.timeout)
        if status != 204:
            _raise_for(status, body)

    def renew(self, service_id: str) -> None:
        status, body = json_request("PUT", f"{self.base}/services/{service_id}/renew", timeout=self.timeout)
        if status != 204:
            _raise_for(status, body)

    def discover(self, category: str = "") -> list[tuple[str, ServiceDescriptor]]:
        query = f"?category={quote(category)}" if category else ""
        status, body = json_request("GET", f"{self.base}/services{query}", timeout=self.timeout)
        if status != 200:
            _raise_for(status, body)
        return [(item["service_id"], ServiceDescriptor.from_wire(item["descriptor"])) for item in body]

    def openapi(self) -> dict:
        status, body = json_request("GET", f"{self.base}/openapi", timeout=self.timeout)
        if status != 200:
            _raise_for(status, body)
        return body
