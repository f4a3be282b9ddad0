"""User-space TCP proxy that imposes a :class:`PathProfile` on both directions.

The proxy runs its own asyncio loop in a background thread so it can be
embedded in tests or the orchestrator, and shut down from any thread.
"""

from __future__ import annotations

import asyncio
import concurrent.futures
import itertools
import logging
import socket
import struct
import threading

from mecbench.errors import BindFailed, UpstreamUnreachable
from mecbench.pathemu.profile import LinkScope, PathProfile
from mecbench.pathemu.scheduler import LinkScheduler

log = logging.getLogger(__name__)

READ_SIZE = 16 * 1024
# per-flow bytes admitted into the emulated link before the reader pauses
FLOW_WINDOW = 256 * 1024
CONNECT_TIMEOUT_S = 5.0


class _Link:
    """Drives one scheduler from the event loop, delivering chunks on time."""

    def __init__(self, scheduler: LinkScheduler, loop: asyncio.AbstractEventLoop):
        self.scheduler = scheduler
        self.loop = loop
        self._wake = asyncio.Event()
        self.task = loop.create_task(self._run())

    def now(self) -> float:
        return self.loop.time() * 1000.0

    def submit(self, flow: _Flow, data: bytes) -> None:
        self.scheduler.submit(flow, len(data), self.now(), payload=data)
        self._wake.set()

    async def _run(self):
        while True:
            for chunk in self.scheduler.advance(self.now()):
                chunk.flow.deliver(chunk.payload)
            nxt = self.scheduler.next_event()
            self._wake.clear()
            timeout = None if nxt is None else max(0.0, (nxt - self.now()) / 1000.0)
            if timeout == 0.0:
                await asyncio.sleep(0)
                continue
            try:
                await asyncio.wait_for(self._wake.wait(), timeout)
            except asyncio.TimeoutError:
                pass


class _Flow:
    """One direction of one proxied connection."""

    def __init__(self, conn: _Connection, link: _Link, writer: asyncio.StreamWriter, delay_ms: float):
        self.conn = conn
        self.link = link
        self.writer = writer
        self.delay_ms = delay_ms
        self.inflight = 0
        self.space = asyncio.Event()
        self.space.set()
        self.eof_pending = False
        self.done = asyncio.Event()

    def deliver(self, data: bytes) -> None:
        if self.conn.closed:
            return
        self.inflight -= len(data)
        try:
            self.writer.write(data)
        except (ConnectionError, RuntimeError):
            self.conn.abort()
            return
        if self.inflight <= FLOW_WINDOW:
            self.space.set()
        if self.eof_pending and self.inflight == 0:
            self._write_eof()

    def _write_eof(self) -> None:
        self.eof_pending = False
        if not self.conn.closed:
            try:
                if self.writer.can_write_eof():
                    self.writer.write_eof()
            except (ConnectionError, RuntimeError, OSError):
                pass
        self.done.set()

    async def pump(self, reader: asyncio.StreamReader) -> None:
        try:
            while True:
                data = await reader.read(READ_SIZE)
                if not data:
                    break
                self.inflight += len(data)
                self.link.submit(self, data)
                if self.inflight > FLOW_WINDOW:
                    self.space.clear()
                    await self.space.wait()
        except (ConnectionError, OSError):
            self.conn.abort()
            return
        # EOF travels the path like data: after the last chunk and one delay
        if self.inflight == 0:
            self.link.loop.call_later(self.delay_ms / 1000.0, self._write_eof)
        else:
            self.eof_pending = True
        await self.done.wait()


class _Connection:
    def __init__(self, proxy: PathProxy, client_reader, client_writer):
        self.proxy = proxy
        self.client_reader = client_reader
        self.client_writer = client_writer
        self.upstream_writer: asyncio.StreamWriter | None = None
        self.closed = False

    def abort(self) -> None:
        """Tear both sides down with RST so peers see an error, not a clean EOF."""
        if self.closed:
            return
        self.closed = True
        for writer in (self.client_writer, self.upstream_writer):
            if writer is None:
                continue
            sock = writer.get_extra_info("socket")
            try:
                if sock is not None:
                    sock.setsockopt(socket.SOL_SOCKET, socket.SO_LINGER, struct.pack("ii", 1, 0))
            except OSError:
                pass
            writer.transport.abort()

    def close(self) -> None:
        if self.closed:
            return
        self.closed = True
        for writer in (self.client_writer, self.upstream_writer):
            if writer is not None:
                writer.close()

    async def run(self) -> None:
        host, port = self.proxy.upstream
        try:
            up_reader, self.upstream_writer = await asyncio.wait_for(
                asyncio.open_connection(host, port), CONNECT_TIMEOUT_S
            )
        except (OSError, asyncio.TimeoutError) as exc:
            log.warning("upstream %s:%d unreachable: %s", host, port, exc)
            self.abort()
            return
        up_link, down_link = self.proxy.links_for_connection()
        delay = self.proxy.profile.one_way_delay_ms
        to_upstream = _Flow(self, up_link, self.upstream_writer, delay)
        to_client = _Flow(self, down_link, self.client_writer, delay)
        try:
            await asyncio.gather(to_upstream.pump(self.client_reader), to_client.pump(up_reader))
        finally:
            if self.proxy.profile.scope is LinkScope.CONNECTION:
                up_link.task.cancel()
                down_link.task.cancel()
            self.close()


class PathProxy:
    """Handle returned by :func:`proxy_listen`."""

    def __init__(self, listen: tuple[str, int], upstream: tuple[str, int], profile: PathProfile, seed: int = 0):
        self.listen_requested = listen
        self.upstream = upstream
        self.profile = profile
        self.seed = seed
        self.address: tuple[str, int] | None = None
        self._loop = asyncio.new_event_loop()
        self._thread = threading.Thread(target=self._loop.run_forever, name="path-proxy", daemon=True)
        self._server: asyncio.AbstractServer | None = None
        self._connections: set[_Connection] = set()
        self._tasks: set[asyncio.Task] = set()
        self._shared: tuple[_Link, _Link] | None = None
        self._seeds = itertools.count(seed)
        self._stopped = False
        self._lock = threading.Lock()

    def links_for_connection(self) -> tuple[_Link, _Link]:
        if self.profile.scope is LinkScope.SHARED:
            return self._shared
        return self._new_link(), self._new_link()

    def _new_link(self) -> _Link:
        return _Link(LinkScheduler(self.profile, seed=next(self._seeds)), self._loop)

    async def _start(self):
        host, port = self.upstream
        try:
            _, writer = await asyncio.wait_for(asyncio.open_connection(host, port), CONNECT_TIMEOUT_S)
        except (OSError, asyncio.TimeoutError) as exc:
            raise UpstreamUnreachable(f"{host}:{port}: {exc}") from exc
        writer.close()
        if self.profile.scope is LinkScope.SHARED:
            self._shared = (self._new_link(), self._new_link())
        try:
            self._server = await asyncio.start_server(self._accept, *self.listen_requested, reuse_address=True)
        except OSError as exc:
            raise BindFailed(f"{self.listen_requested[0]}:{self.listen_requested[1]}: {exc}") from exc
        self.address = self._server.sockets[0].getsockname()[:2]

    async def _accept(self, reader, writer):
        sock = writer.get_extra_info("socket")
        if sock is not None:
            sock.setsockopt(socket.IPPROTO_TCP, socket.TCP_NODELAY, 1)
        conn = _Connection(self, reader, writer)
        self._connections.add(conn)
        task = asyncio.current_task()
        self._tasks.add(task)
        try:
            await conn.run()
        finally:
            self._connections.discard(conn)
            self._tasks.discard(task)

    def start(self) -> PathProxy:
        self._thread.start()
        future = asyncio.run_coroutine_threadsafe(self._start(), self._loop)
        try:
            future.result(timeout=CONNECT_TIMEOUT_S + 5)
        except BaseException:
            self._loop.call_soon_threadsafe(self._loop.stop)
            self._thread.join(timeout=5)
            self._stopped = True
            raise
        log.info("proxy %s -> %s with %s", self.address, self.upstream, self.profile)
        return self

    async def _stop(self):
        if self._server is not None:
            self._server.close()
        for conn in list(self._connections):
            conn.abort()
        for task in list(self._tasks):
            task.cancel()
        links = [t for t in asyncio.all_tasks() if t is not asyncio.current_task()]
        for task in links:
            task.cancel()
        await asyncio.gather(*links, return_exceptions=True)

    def shutdown(self) -> None:
        """Close the listener and abort in-flight connections; idempotent."""
        with self._lock:
            if self._stopped:
                return
            self._stopped = True
        try:
            asyncio.run_coroutine_threadsafe(self._stop(), self._loop).result(timeout=5)
        except (concurrent.futures.TimeoutError, RuntimeError):
            log.warning("proxy shutdown did not finish cleanly")
        self._loop.call_soon_threadsafe(self._loop.stop)
        self._thread.join(timeout=5)
        self._loop.close()

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.shutdown()


def proxy_listen(listen: tuple[str, int], upstream: tuple[str, int], profile: PathProfile, seed: int = 0) -> PathProxy:
    return PathProxy(listen, upstream, profile, seed).start()
