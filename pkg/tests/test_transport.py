import asyncio
import math
import socket

import pytest

from podcore import codec
from podcore.client import confirmed_round
from podcore.codec import FrameTag
from podcore.crypto import scheme_by_name
from podcore.simnet import SimConfig, Simulation
from podcore.transport import (
    Cluster,
    LatencySummary,
    TcpClient,
    bench_profile,
    measure_latency,
    measure_readers,
)
from podcore.types import check_profile

QUIET = 10**6  # heartbeat period that never fires during a test


async def wait_until(pred, timeout=5.0):
    loop = asyncio.get_running_loop()
    end = loop.time() + timeout
    while not pred():
        if loop.time() > end:
            raise AssertionError("condition not reached")
        await asyncio.sleep(0.005)


def run(coro):
    return asyncio.run(coro)


def test_round_trip():
    async def main():
        cluster = await Cluster(1, scheme_by_name("hmac-test"), heartbeat_ms=QUIET).start()
        profile = check_profile(1, 0, 0)
        client = await TcpClient(cluster.pki, profile, cluster.endpoints).connect()
        client.write(b"hello")
        await wait_until(lambda: b"hello" in client.client.tsps)
        vote = client.client.c_tx[b"hello"][0]
        assert cluster.pki.verify_vote(vote)
        await client.close()
        await cluster.close()

    run(main())


def test_fifteen_replicas_reach_quorum():
    async def main():
        profile = bench_profile(15, "omission")
        cluster = await Cluster(15, scheme_by_name("ed25519"), heartbeat_ms=QUIET).start()
        reader = await TcpClient(cluster.pki, profile, cluster.endpoints).connect()
        writer = await TcpClient(cluster.pki, profile, cluster.endpoints, subscribe=False).connect()
        writer.write(b"tx")
        await wait_until(lambda: reader.client.trace(b"tx") is not None
                         and reader.client.trace(b"tx").r_conf is not None)
        assert len(reader.client.tsps[b"tx"]) >= profile.alpha
        for c in (reader, writer):
            await c.close()
        await cluster.close()

    run(main())


def test_confirmations_continue_after_killing_a_third():
    async def main():
        n = 10
        profile = check_profile(n, 0, n // 3)
        cluster = await Cluster(n, scheme_by_name("ed25519"), heartbeat_ms=20).start()
        reader = await TcpClient(cluster.pki, profile, cluster.endpoints).connect()
        writer = await TcpClient(cluster.pki, profile, cluster.endpoints, subscribe=False).connect()

        def confirmed(tx):
            stamps = reader.client.tsps.get(tx)
            return stamps is not None and confirmed_round(stamps, profile) is not None

        for i in range(3):
            writer.write(b"before%d" % i)
            await wait_until(lambda i=i: confirmed(b"before%d" % i))
        await cluster.kill(range(n // 3))
        perf_at_kill = reader.client.r_perf()
        for i in range(3):
            writer.write(b"after%d" % i)
            await wait_until(lambda i=i: confirmed(b"after%d" % i))
        await wait_until(lambda: reader.client.r_perf() > perf_at_kill + 40)
        for c in (reader, writer):
            await c.close()
        await cluster.close()

    run(main())


def test_reconnect_replays_log():
    async def main():
        cluster = await Cluster(4, scheme_by_name("hmac-test"), heartbeat_ms=QUIET).start()
        profile = check_profile(4, 0, 1)
        client = await TcpClient(cluster.pki, profile, cluster.endpoints, reconnect=True).connect()
        client.write(b"a")
        await wait_until(lambda: len(client.client.tsps.get(b"a", {})) == 4)
        # Drop our side of one connection; the replica forgets us, we reconnect.
        client._writers[0].close()
        await wait_until(lambda: client._writers[0] is None)
        await wait_until(lambda: client._writers[0] is not None)
        client.write(b"b")
        await wait_until(lambda: len(client.client.tsps.get(b"b", {})) == 4)
        assert client.client.next_sn == [2, 2, 2, 2]
        assert client.client.evidence == []
        await client.close()
        await cluster.close()

    run(main())


def test_slow_reader_is_shed():
    async def main():
        cluster = await Cluster(1, scheme_by_name("hmac-test"), heartbeat_ms=QUIET).start()
        server = cluster.servers[0]
        server.queue_limit = 2
        _, writer = await asyncio.open_connection(*server.endpoint)
        payload = codec.connect_payload(cluster.pki.sid)
        writer.write(codec.encode_frame(FrameTag.CONNECT, payload))
        await wait_until(lambda: server.replica.state.connected)
        for i in range(10):  # no await: the pump never gets to run
            server.replica.do_vote(b"x%d" % i)
        assert server.shed == 1
        assert not server.replica.state.connected
        writer.close()
        await cluster.close()

    run(main())


def test_equivalent_to_simnet():
    script = [b"t1", b"t2", b"t1", b"t3"]

    config = SimConfig(check_profile(4, 0, 1), delta=1, max_rounds=12)
    sim = Simulation(config)
    c = sim.add_client("c")
    for k, tx in enumerate(script):
        sim.at(1 + 2 * k, lambda r, tx=tx: c.write(tx))
    sim.run()
    expected = {j: [e.tx for e in sim.replicas[j].state.log if not codec.is_heartbeat(e.tx)]
                for j in range(4)}

    async def main():
        cluster = await Cluster(4, scheme_by_name("hmac-test"), heartbeat_ms=QUIET).start()
        client = await TcpClient(cluster.pki, config.profile, cluster.endpoints).connect()
        accepted = {j: [] for j in range(4)}
        client.client.on_accept = lambda v: accepted[v.replica].append(v.tx)
        for tx in script:
            client.write(tx)
            await wait_until(lambda tx=tx: len(client.client.tsps.get(tx, {})) == 4)
            await asyncio.sleep(0.01)
        await client.close()
        await cluster.close()
        return accepted

    got = run(main())
    assert got == expected == {j: [b"t1", b"t2", b"t3"] for j in range(4)}


def test_measure_latency_smoke():
    s = run(measure_latency(4, check_profile(4, 0, 1), 10, scheme="hmac-test"))
    assert s.failed == 0 and len(s.samples) == 10
    assert 0 < s.p50 <= s.p95
    assert s.ci95 >= 0


def test_two_readers_share_writes():
    profiles = {kind: bench_profile(7, kind) for kind in ("omission", "byzantine")}
    out = run(measure_readers(7, profiles, 8, scheme="hmac-test", warmup=2))
    assert set(out) == set(profiles)
    for kind, s in out.items():
        assert s.profile == profiles[kind]
        assert len(s.samples) == 8 and s.failed == 0


def test_summary_statistics():
    s = LatencySummary(3, check_profile(3, 0, 0), samples=[float(i) for i in range(1, 101)])
    assert s.mean == 50.5
    assert s.p50 == 50 and s.p95 == 95
    assert s.ci95 == pytest.approx(1.96 * 29.011491975882016 / 10)
    assert math.isnan(LatencySummary(3, check_profile(3, 0, 0)).p50)


def test_port_conflict_raises():
    blocker = socket.socket()
    blocker.bind(("127.0.0.1", 0))
    blocker.listen()
    port = blocker.getsockname()[1]

    async def main():
        cluster = Cluster(1, scheme_by_name("hmac-test"), base_port=port)
        with pytest.raises(OSError):
            await cluster.start()

    try:
        run(main())
    finally:
        blocker.close()
