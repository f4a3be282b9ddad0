"""HTTP facade over :class:`~mecbench.registry.core.Registry` (the MP1-style surface)."""

from __future__ import annotations

import json
import logging
import threading
import time
from urllib.parse import parse_qs, urlsplit

from mecbench.errors import DuplicateName, InvalidDescriptor, UnknownService
from mecbench.httputil import QuietHandler, Server, serve_in_thread
from mecbench.registry.core import Registry, ServiceDescriptor

log = logging.getLogger(__name__)

PREFIX = "/mep/v1"
MAX_BODY = 64 * 1024

_DESCRIPTOR_SCHEMA = {
    "type": "object",
    "required": ["ser_name", "endpoint_uri"],
    "properties": {
        "ser_name": {"type": "string", "minLength": 1, "maxLength": 128},
        "version": {"type": "string"},
        "category": {"type": "string"},
        "endpoint_uri": {"type": "string", "format": "uri"},
        "state": {"type": "string", "enum": ["ACTIVE", "INACTIVE"]},
        "ttl_s": {"type": "integer", "minimum": 1},
    },
}

_ERROR_SCHEMA = {
    "type": "object",
    "properties": {"error": {"type": "string"}, "reason": {"type": "string"}},
}


def openapi_document() -> dict:
    """OpenAPI 3 description of the registry endpoints."""

    def err(description):
        return {
            "description": description,
            "content": {"application/json": {"schema": {"$ref": "#/components/schemas/Error"}}},
        }

    sid_param = {"name": "service_id", "in": "path", "required": True, "schema": {"type": "string"}}
    return {
        "openapi": "3.0.3",
        "info": {"title": "MEC Platform service registry", "version": "1.0.0"},
        "paths": {
            f"{PREFIX}/services": {
                "post": {
                    "summary": "Register a MEC service",
                    "requestBody": {
                        "required": True,
                        "content": {"application/json": {"schema": {"$ref": "#/components/schemas/ServiceDescriptor"}}},
                    },
                    "responses": {
                        "201": {
                            "description": "Registered",
                            "content": {
                                "application/json": {
                                    "schema": {"type": "object", "properties": {"service_id": {"type": "string"}}}
                                }
                            },
                        },
                        "400": err("InvalidDescriptor"),
                        "409": err("DuplicateName"),
                    },
                },
                "get": {
                    "summary": "Discover available MEC services",
                    "parameters": [{"name": "category", "in": "query", "required": False, "schema": {"type": "string"}}],
                    "responses": {
                        "200": {
                            "description": "Live services ordered by registration time",
                            "content": {
                                "application/json": {
                                    "schema": {
                                        "type": "array",
                                        "items": {
                                            "type": "object",
                                            "properties": {
                                                "service_id": {"type": "string"},
                                                "descriptor": {"$ref": "#/components/schemas/ServiceDescriptor"},
                                            },
                                        },
                                    }
                                }
                            },
                        }
                    },
                },
            },
            f"{PREFIX}/services/{{service_id}}": {
                "delete": {
                    "summary": "Unregister a MEC service",
                    "parameters": [sid_param],
                    "responses": {"204": {"description": "Removed"}, "404": err("UnknownService")},
                }
            },
            f"{PREFIX}/services/{{service_id}}/renew": {
                "put": {
                    "summary": "Renew a service lease",
                    "parameters": [sid_param],
                    "responses": {"204": {"description": "Renewed"}, "404": err("UnknownService")},
                }
            },
            f"{PREFIX}/openapi": {
                "get": {"summary": "This document", "responses": {"200": {"description": "OpenAPI document"}}}
            },
        },
        "components": {"schemas": {"ServiceDescriptor": _DESCRIPTOR_SCHEMA, "Error": _ERROR_SCHEMA}},
    }


class RegistryHandler(QuietHandler):
    server: RegistryServer

    def _route(self):
        path = urlsplit(self.path).path.rstrip("/")
        if not path.startswith(PREFIX):
            return None
        return path[len(PREFIX):].strip("/").split("/")

    def _not_found(self):
        self.send_error_json(404, "NotFound", self.path)

    def do_GET(self):
        parts = self._route()
        if parts == ["openapi"]:
            self.send_json(200, openapi_document())
        elif parts == ["services"]:
            query = parse_qs(urlsplit(self.path).query)
            category = query.get("category", [""])[0]
            found = self.server.registry.discover(category, now=time.monotonic())
            self.send_json(200, [{"service_id": sid, "descriptor": d.to_wire()} for sid, d in found])
        else:
            self._not_found()

    def do_POST(self):
        if self._route() != ["services"]:
            return self._not_found()
        raw = self.read_body(MAX_BODY)
        if raw is None:
            return self.send_error_json(413, "PayloadTooLarge", f"body exceeds {MAX_BODY} bytes", close=True)
        try:
            descriptor = ServiceDescriptor.from_wire(json.loads(raw or b"null"))
            service_id = self.server.registry.register(descriptor, now=time.monotonic())
        except json.JSONDecodeError as exc:
            return self.send_error_json(400, InvalidDescriptor.code, f"body: {exc}")
        except InvalidDescriptor as exc:
            return self.send_error_json(400, exc.code, str(exc))
        except DuplicateName as exc:
            return self.send_error_json(409, exc.code, str(exc))
        log.info("registered %s -> %s", service_id, descriptor.endpoint_uri)
        self.send_json(201, {"service_id": service_id})

    def do_DELETE(self):
        parts = self._route()
        if not parts or len(parts) != 2 or parts[0] != "services":
            return self._not_found()
        try:
            self.server.registry.deregister(parts[1], now=time.monotonic())
        except UnknownService as exc:
            return self.send_error_json(404, exc.code, str(exc))
        self.send_empty(204)

    def do_PUT(self):
        parts = self._route()
        if not parts or len(parts) != 3 or parts[0] != "services" or parts[2] != "renew":
            return self._not_found()
        # renew carries no body, but drain one if a client sent it
        self.read_body(MAX_BODY)
        try:
            self.server.registry.renew(parts[1], now=time.monotonic())
        except UnknownService as exc:
            return self.send_error_json(404, exc.code, str(exc))
        self.send_empty(204)


class RegistryServer(Server):
    def __init__(self, address, registry: Registry | None = None, sweep_interval_ms: float = 1000):
        super().__init__(address, RegistryHandler)
        self.registry = registry or Registry()
        self.sweep_interval_ms = sweep_interval_ms
        self._stop = threading.Event()
        self._workers: list[threading.Thread] = []

    @property
    def uri(self) -> str:
        host, port = self.server_address[:2]
        return f"http://{host}:{port}"

    def _sweep_loop(self):
        while not self._stop.wait(self.sweep_interval_ms / 1000):
            removed = self.registry.expire_sweep(time.monotonic())
            if removed:
                log.info("expired %d registrations", removed)

    def start(self) -> RegistryServer:
        self._workers.append(serve_in_thread(self))
        if self.sweep_interval_ms > 0:
            sweeper = threading.Thread(target=self._sweep_loop, daemon=True)
            sweeper.start()
            self._workers.append(sweeper)
        return self

    def stop(self) -> None:
        self._stop.set()
        self.shutdown()
        self.server_close()
        for t in self._workers:
            t.join(timeout=2)
