"""asyncio TCP transport and the loopback latency harness.

One listening socket per replica carries all three frame kinds. Rounds are
milliseconds since a process-wide epoch, so ``Replica`` and ``Client`` run
unchanged. Each connection has a bounded outbound queue; a reader that falls
behind is disconnected instead of stalling the replica.
"""
from __future__ import annotations

import asyncio
import logging
import math
import statistics
import time
from dataclasses import dataclass, field
from typing import Callable, Sequence

from .client import Client, confirmed_round
from .codec import FRAME_HEADER, CodecError, FrameTag, connect_payload, encode_frame
from .crypto import SignatureScheme, scheme_by_name
from .replica import Replica
from .types import FaultProfile, Pki, Vote, make_keys

log = logging.getLogger(__name__)

MAX_FRAME = 16 * 1024 * 1024
DEFAULT_QUEUE = 100_000
DEFAULT_HEARTBEAT_MS = 50


class Clock:
    def __init__(self) -> None:
        self.epoch = time.monotonic()

    def round(self) -> int:
        return int((time.monotonic() - self.epoch) * 1000)


async def read_frame(reader: asyncio.StreamReader) -> bytes:
    header = await reader.readexactly(FRAME_HEADER.size)
    _, length = FRAME_HEADER.unpack(header)
    if length > MAX_FRAME:
        raise CodecError(f"frame of {length} bytes exceeds limit")
    return header + await reader.readexactly(length)


class _Conn:
    """Outbound side of one accepted connection."""

    def __init__(self, writer: asyncio.StreamWriter, limit: int) -> None:
        self.writer = writer
        self.queue: asyncio.Queue[bytes] = asyncio.Queue(maxsize=limit)
        self.closed = False
        self.task = asyncio.get_running_loop().create_task(self._pump())

    async def _pump(self) -> None:
        try:
            while True:
                chunks = [await self.queue.get()]
                while not self.queue.empty():
                    chunks.append(self.queue.get_nowait())
                self.writer.write(b"".join(chunks))
                await self.writer.drain()
        except (ConnectionError, asyncio.CancelledError):
            pass
        finally:
            self.close()

    def close(self) -> None:
        if not self.closed:
            self.closed = True
            self.writer.close()
            if self.task is not asyncio.current_task():
                self.task.cancel()


class ReplicaServer:
    def __init__(
        self,
        index: int,
        sk: bytes,
        pki: Pki,
        clock: Clock,
        host: str = "127.0.0.1",
        port: int = 0,
        heartbeat_ms: int = DEFAULT_HEARTBEAT_MS,
        queue_limit: int = DEFAULT_QUEUE,
        skip_idle_heartbeat: bool = True,
    ) -> None:
        self.clock = clock
        self.host = host
        self.port = port
        self.heartbeat_ms = heartbeat_ms
        self.queue_limit = queue_limit
        self.replica = Replica(index, sk, pki, self._send, clock.round,
                               skip_idle_heartbeat=skip_idle_heartbeat)
        self.shed = 0
        self._server: asyncio.base_events.Server | None = None
        self._conns: set[_Conn] = set()
        self._tasks: list[asyncio.Task] = []

    async def start(self) -> "ReplicaServer":
        self._server = await asyncio.start_server(self._handle, self.host, self.port)
        self.port = self._server.sockets[0].getsockname()[1]
        self._tasks.append(asyncio.get_running_loop().create_task(self._heartbeats()))
        return self

    @property
    def endpoint(self) -> tuple[str, int]:
        return self.host, self.port

    def _send(self, conn: _Conn, frame: bytes) -> None:
        if conn.closed:
            self.replica.on_disconnect(conn)
            return
        try:
            conn.queue.put_nowait(frame)
        except asyncio.QueueFull:
            self.shed += 1
            log.warning("replica %d shedding slow connection", self.replica.index)
            conn.close()
            self.replica.on_disconnect(conn)

    async def _handle(self, reader: asyncio.StreamReader, writer: asyncio.StreamWriter) -> None:
        conn = _Conn(writer, self.queue_limit)
        self._conns.add(conn)
        try:
            while not conn.closed:
                self.replica.on_frame(conn, await read_frame(reader))
        except (asyncio.IncompleteReadError, ConnectionError, CodecError):
            pass
        finally:
            self.replica.on_disconnect(conn)
            self._conns.discard(conn)
            conn.close()

    async def _heartbeats(self) -> None:
        period = self.heartbeat_ms / 1000
        while True:
            await asyncio.sleep(period)
            self.replica.on_round_end(self.clock.round())

    async def close(self) -> None:
        if self._server is not None:
            self._server.close()
        for task in self._tasks:
            task.cancel()
        for conn in list(self._conns):
            conn.close()
            self.replica.on_disconnect(conn)
        if self._server is not None:
            await self._server.wait_closed()


async def serve_replica(index, sk, pki, clock, **kw) -> ReplicaServer:
    return await ReplicaServer(index, sk, pki, clock, **kw).start()


class TcpClient:
    """A pod ``Client`` whose frames travel over one socket per replica."""

    def __init__(
        self,
        pki: Pki,
        profile: FaultProfile,
        endpoints: Sequence[tuple[str, int]],
        on_accept: Callable[[Vote], None] | None = None,
        subscribe: bool = True,
        reconnect: bool = False,
    ) -> None:
        self.endpoints = list(endpoints)
        self.subscribe = subscribe
        self.reconnect = reconnect
        self.client = Client(pki, profile, self._send, on_accept=on_accept)
        self._writers: list[asyncio.StreamWriter | None] = [None] * len(endpoints)
        self._tasks: list[asyncio.Task] = []
        self._closing = False

    async def connect(self) -> "TcpClient":
        for j in range(len(self.endpoints)):
            await self._open(j)
        return self

    async def _open(self, j: int) -> bool:
        host, port = self.endpoints[j]
        try:
            reader, writer = await asyncio.open_connection(host, port)
        except OSError:
            return False
        self._writers[j] = writer
        if self.subscribe:
            writer.write(self._connect_frame())
        self._tasks.append(asyncio.get_running_loop().create_task(self._read(j, reader)))
        return True

    def _connect_frame(self) -> bytes:
        return encode_frame(FrameTag.CONNECT, connect_payload(self.client.pki.sid))

    async def _read(self, j: int, reader: asyncio.StreamReader) -> None:
        try:
            while True:
                self.client.on_frame(j, await read_frame(reader))
        except (asyncio.IncompleteReadError, ConnectionError, CodecError):
            pass
        self._writers[j] = None
        delay = 0.05
        while self.reconnect and not self._closing:
            await asyncio.sleep(delay)
            if await self._open(j):
                return
            delay = min(delay * 2, 1.0)

    def _send(self, j: int, frame: bytes) -> None:
        writer = self._writers[j]
        if writer is not None and not writer.is_closing():
            writer.write(frame)

    def write(self, tx: bytes) -> None:
        self.client.write(tx)

    async def close(self) -> None:
        self._closing = True
        for task in self._tasks:
            task.cancel()
        for writer in self._writers:
            if writer is not None:
                writer.close()


# -- latency measurement ---------------------------------------------------


@dataclass
class LatencySummary:
    n: int
    profile: FaultProfile
    samples: list[float] = field(default_factory=list)
    failed: int = 0

    @property
    def mean(self) -> float:
        return statistics.fmean(self.samples) if self.samples else math.nan

    def percentile(self, q: float) -> float:
        if not self.samples:
            return math.nan
        ordered = sorted(self.samples)
        return ordered[min(len(ordered) - 1, int(math.ceil(q * len(ordered))) - 1)]

    @property
    def p50(self) -> float:
        return self.percentile(0.50)

    @property
    def p95(self) -> float:
        return self.percentile(0.95)

    @property
    def ci95(self) -> float:
        """Half-width of the normal-approximation 95% interval around the mean."""
        if len(self.samples) < 2:
            return math.nan
        return 1.96 * statistics.stdev(self.samples) / math.sqrt(len(self.samples))


def bench_profile(n: int, kind: str) -> FaultProfile:
    from .types import check_profile

    if kind == "omission":
        return check_profile(n, 0, (n - 1) // 3)
    if kind == "byzantine":
        return check_profile(n, (n - 1) // 5, 0)
    raise ValueError(f"unknown bench profile {kind!r}")


class Cluster:
    """n replica servers on loopback plus helpers to stop some of them."""

    def __init__(self, n: int, scheme: SignatureScheme, sid: bytes = b"pod-bench",
                 base_port: int = 0, heartbeat_ms: int = DEFAULT_HEARTBEAT_MS,
                 seed: int | None = 0) -> None:
        import random

        rng = random.Random(seed) if seed is not None else None
        self.keys = make_keys(scheme, n, rng)
        self.pki = Pki(sid, scheme, tuple(k.pk for k in self.keys))
        self.clock = Clock()
        self.base_port = base_port
        self.heartbeat_ms = heartbeat_ms
        self.servers: list[ReplicaServer] = []

    async def start(self) -> "Cluster":
        for j, key in enumerate(self.keys):
            port = self.base_port + j if self.base_port else 0
            self.servers.append(await serve_replica(
                j, key.sk, self.pki, self.clock, port=port, heartbeat_ms=self.heartbeat_ms))
        return self

    @property
    def endpoints(self) -> list[tuple[str, int]]:
        return [s.endpoint for s in self.servers]

    async def kill(self, indices) -> None:
        for j in indices:
            await self.servers[j].close()

    async def close(self) -> None:
        for server in self.servers:
            await server.close()


async def measure_readers(
    n: int,
    profiles: dict[str, FaultProfile],
    tx_count: int,
    scheme: str = "ed25519",
    base_port: int = 0,
    heartbeat_ms: int = DEFAULT_HEARTBEAT_MS,
    timeout: float = 5.0,
    settle: float = 0.1,
    warmup: int = 10,
    cluster: Cluster | None = None,
) -> dict[str, LatencySummary]:
    """Sequential write-to-quorum latency in milliseconds, one reader per profile.

    All readers watch the same writes on the same replicas and differ only in
    the quorum they wait for. The first ``warmup`` writes are not recorded.
    """
    own = cluster is None
    if cluster is None:
        cluster = await Cluster(n, scheme_by_name(scheme), base_port=base_port,
                                heartbeat_ms=heartbeat_ms).start()
    summaries = {name: LatencySummary(n, p) for name, p in profiles.items()}
    events: dict[str, dict[bytes, asyncio.Event]] = {name: {} for name in profiles}
    done: dict[str, dict[bytes, float]] = {name: {} for name in profiles}
    readers: dict[str, TcpClient] = {}

    def watcher(name: str, profile: FaultProfile):
        def on_accept(vote: Vote) -> None:
            event = events[name].get(vote.tx)
            if event is None or event.is_set():
                return
            if confirmed_round(readers[name].client.tsps[vote.tx], profile) is not None:
                done[name][vote.tx] = time.perf_counter()
                event.set()
        return on_accept

    for name, profile in profiles.items():
        readers[name] = await TcpClient(cluster.pki, profile, cluster.endpoints,
                                        watcher(name, profile)).connect()
    writer = await TcpClient(cluster.pki, next(iter(profiles.values())), cluster.endpoints,
                             subscribe=False).connect()
    try:
        await asyncio.sleep(0.05)
        for i in range(warmup + tx_count):
            tx = f"bench/{n}/{i}".encode()
            for name in profiles:
                events[name][tx] = asyncio.Event()
            start = time.perf_counter()
            writer.write(tx)
            for name, summary in summaries.items():
                try:
                    await asyncio.wait_for(events[name][tx].wait(), timeout)
                except asyncio.TimeoutError:
                    if i >= warmup:
                        summary.failed += 1
                    continue
                if i >= warmup:
                    summary.samples.append((done[name][tx] - start) * 1000)
            # Let the remaining votes for this tx drain so they do not bleed
            # into the next sample.
            deadline = time.perf_counter() + settle
            while (any(len(r.client.tsps.get(tx, ())) < n for r in readers.values())
                   and time.perf_counter() < deadline):
                await asyncio.sleep(0.001)
    finally:
        for reader in readers.values():
            await reader.close()
        await writer.close()
        if own:
            await cluster.close()
    return summaries


async def measure_latency(
    n: int,
    profile: FaultProfile,
    tx_count: int,
    scheme: str = "ed25519",
    base_port: int = 0,
    heartbeat_ms: int = DEFAULT_HEARTBEAT_MS,
    timeout: float = 5.0,
    settle: float = 0.1,
    warmup: int = 10,
    cluster: Cluster | None = None,
) -> LatencySummary:
    """Single-reader form of ``measure_readers``."""
    out = await measure_readers(n, {"reader": profile}, tx_count, scheme, base_port,
                                heartbeat_ms, timeout, settle, warmup, cluster)
    return out["reader"]
