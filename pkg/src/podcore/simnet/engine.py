"""Deterministic round-based network.

A message sent in round ``r`` with delay ``d`` is delivered at the start of
round ``r + d``. Each round: due messages are delivered in a seeded shuffle,
then scheduled actions and pollers run, then every replica ends its round.
Every party's ``round()`` reads the simulator clock.
"""
from __future__ import annotations

import hashlib
import json
import random
from collections import defaultdict
from dataclasses import dataclass, field
from typing import Callable, Hashable, Iterable

from ..client import Client
from ..codec import FrameTag, decode_frame
from ..crypto import scheme_by_name
from ..replica import Replica
from ..types import FaultProfile, Pki, Vote, decode_vote_payload, make_keys
from .adversary import (
    BYZANTINE,
    Behavior,
    EquivocatingReplica,
    Kind,
    OmittingReplica,
    StaleTsReplica,
    check_budget,
    random_policy,
)

DROP = None


@dataclass
class SimConfig:
    profile: FaultProfile
    delta: int = 1
    jitter: int = 0
    seed: int = 0
    max_rounds: int = 40
    adversaries: list[Behavior] = field(default_factory=list)
    bound: int | None = None
    scheme: str = "hmac-test"
    sid: bytes = b"pod-sim"
    skip_idle_heartbeat: bool = False
    record_events: bool = True
    budget_override: bool = False

    def __post_init__(self) -> None:
        if self.delta < 1:
            raise ValueError("delta must be at least 1")
        if not 0 <= self.jitter < self.delta:
            raise ValueError("jitter must lie in [0, delta)")
        if self.bound is None:
            self.bound = self.delta
        if self.bound < self.delta:
            raise ValueError("bound Delta must be at least delta")
        check_budget(self.profile, self.adversaries, self.budget_override)

    @property
    def byzantine(self) -> set[int]:
        return {b.replica for b in self.adversaries if b.kind in BYZANTINE}

    @property
    def faulty(self) -> set[int]:
        return {b.replica for b in self.adversaries}


def replica_id(index: int) -> str:
    return f"R{index}"


def _digest(frame: bytes) -> str:
    return hashlib.blake2b(frame, digest_size=8).hexdigest()


class Simulation:
    def __init__(self, config: SimConfig) -> None:
        self.config = config
        self.profile = config.profile
        self.rng = random.Random(config.seed)
        self.scheme = scheme_by_name(config.scheme)
        key_rng = random.Random(f"keys:{config.seed}")
        self.keys = make_keys(self.scheme, self.profile.n, key_rng)
        self.pki = Pki(config.sid, self.scheme, tuple(k.pk for k in self.keys))
        self.now = 0
        self.events: list[dict] = []
        self.queue: dict[int, list[tuple[int, Hashable, Hashable, bytes]]] = defaultdict(list)
        self._seq = 0
        self.max_honest_delay = 0
        self.clients: dict[str, Client] = {}
        self.honest_clients: set[str] = set()
        self.join_round: dict[str, int] = {}
        self.link_delay: dict[tuple[Hashable, Hashable], int | None] = {}
        self.actions: dict[int, list[Callable[[int], None]]] = defaultdict(list)
        self.pollers: list[Callable[[int], None]] = []
        self.round_hooks: list[Callable[[int], None]] = []
        self.replicas = [self._make_replica(j) for j in range(self.profile.n)]

    # -- construction -----------------------------------------------------

    def _make_replica(self, j: int):
        behavior = next((b for b in self.config.adversaries if b.replica == j), None)
        sk = self.keys[j].sk
        send = self._replica_sender(j)
        clock = self.round
        skip = self.config.skip_idle_heartbeat
        if behavior is None or behavior.kind is Kind.DELAY_MAX:
            return Replica(j, sk, self.pki, send, clock, skip_idle_heartbeat=skip)
        if behavior.kind is Kind.EQUIVOCATE_SN:
            rng = random.Random(f"equivocate:{self.config.seed}:{j}")
            return EquivocatingReplica(
                j, sk, self.pki, send, clock, rng, random_policy(rng, self.config.delta)
            )
        if behavior.kind is Kind.STALE_TS:
            rng = random.Random(f"stale:{self.config.seed}:{j}")
            return StaleTsReplica(j, sk, self.pki, send, clock, behavior, rng,
                                  skip_idle_heartbeat=skip)
        return OmittingReplica(j, sk, self.pki, send, clock, behavior, skip_idle_heartbeat=skip)

    def round(self) -> int:
        return self.now

    def add_client(self, name: str, honest: bool = True, join_round: int | None = None,
                   filter_heartbeats: bool = True) -> Client:
        """Initial clients (no join round) are connected before round 0."""
        if name in self.clients:
            raise ValueError(f"duplicate client {name}")
        client = Client(
            self.pki,
            self.profile,
            self._client_sender(name),
            filter_heartbeats=filter_heartbeats,
            on_accept=self._logger(name, "accept") if self.config.record_events else None,
            on_reject=self._reject_logger(name) if self.config.record_events else None,
        )
        self.clients[name] = client
        if honest:
            self.honest_clients.add(name)
        if join_round is None:
            self.join_round[name] = 0
            frame_sender = client.send
            client.send = lambda j, frame: self.replicas[j].on_frame(name, frame)
            client.connect()
            client.send = frame_sender
        else:
            self.join_round[name] = join_round
            self.at(join_round, lambda r: client.connect())
        return client

    def at(self, round_: int, action: Callable[[int], None]) -> None:
        self.actions[round_].append(action)

    def every_round(self, poller: Callable[[int], None]) -> None:
        self.pollers.append(poller)

    def after_round(self, hook: Callable[[int], None]) -> None:
        self.round_hooks.append(hook)

    # -- messaging --------------------------------------------------------

    def _delay(self, src: Hashable, dst: Hashable) -> int | None:
        if (src, dst) in self.link_delay:
            return self.link_delay[(src, dst)]
        for b in self.config.adversaries:
            if b.kind is Kind.DELAY_MAX and src == replica_id(b.replica):
                return self.config.bound
        d = self.config.delta - self.rng.randint(0, self.config.jitter)
        return max(1, d)

    def _post(self, src: Hashable, dst: Hashable, frame: bytes) -> None:
        delay = self._delay(src, dst)
        if self.config.record_events:
            ev = {"r": self.now, "ev": "send", "src": src, "dst": dst,
                  "tag": FrameTag(frame[0]).name, "frame": frame.hex()}
            if delay is DROP:
                ev["ev"] = "drop"
            else:
                ev["at"] = self.now + delay
            self.events.append(ev)
        if delay is DROP:
            return
        if (src, dst) not in self.link_delay:
            self.max_honest_delay = max(self.max_honest_delay, delay)
        self._seq += 1
        self.queue[self.now + delay].append((self._seq, src, dst, frame))

    def _replica_sender(self, j: int):
        src = replica_id(j)
        return lambda client, frame: self._post(src, client, frame)

    def _client_sender(self, name: str):
        return lambda j, frame: self._post(name, replica_id(j), frame)

    def _logger(self, name: str, kind: str):
        def log(vote: Vote) -> None:
            self.events.append({"r": self.now, "ev": kind, "client": name,
                                "replica": vote.replica, "sn": vote.sn,
                                "tx": vote.tx.hex(), "ts": vote.ts})
        return log

    def _reject_logger(self, name: str):
        def log(vote: Vote, reason: str) -> None:
            self.events.append({"r": self.now, "ev": "reject", "client": name,
                                "replica": vote.replica, "sn": vote.sn,
                                "tx": vote.tx.hex(), "ts": vote.ts, "reason": reason})
        return log

    def _deliver(self, src: Hashable, dst: Hashable, frame: bytes) -> None:
        if self.config.record_events:
            self.events.append({"r": self.now, "ev": "deliver", "src": src, "dst": dst,
                                "digest": _digest(frame)})
        if isinstance(dst, str) and dst in self.clients:
            self.clients[dst].on_frame(int(str(src)[1:]), frame)
        else:
            self.replicas[int(str(dst)[1:])].on_frame(src, frame)

    # -- main loop ----------------------------------------------------------

    def step(self) -> None:
        r = self.now
        due = self.queue.pop(r, [])
        due.sort(key=lambda m: m[0])
        self.rng.shuffle(due)
        for _, src, dst, frame in due:
            self._deliver(src, dst, frame)
        for action in self.actions.pop(r, []):
            action(r)
        for poller in self.pollers:
            poller(r)
        for replica in self.replicas:
            replica.on_round_end(r)
        for hook in self.round_hooks:
            hook(r)
        self.now += 1

    def run(self, rounds: int | None = None) -> "Simulation":
        end = self.config.max_rounds if rounds is None else self.now + rounds
        while self.now <= end:
            self.step()
        return self

    # -- trace output ---------------------------------------------------------

    def trace_jsonl(self) -> str:
        return "".join(json.dumps(ev, sort_keys=True) + "\n" for ev in self.events)

    def trace_hash(self) -> str:
        return hashlib.sha256(self.trace_jsonl().encode()).hexdigest()

    def replica_votes(self, j: int) -> list[Vote]:
        return self.replicas[j].votes()


def extract_transcript(
    events: Iterable[dict],
    replicas: Iterable[int] | None = None,
    clients: Iterable[str] | None = None,
    rounds: tuple[int, int] | None = None,
) -> list[Vote]:
    """VOTE messages actually sent, optionally narrowed by sender, recipient and round."""
    want_r = None if replicas is None else {replica_id(j) for j in replicas}
    want_c = None if clients is None else set(clients)
    out: list[Vote] = []
    for ev in events:
        if ev.get("ev") != "send" or ev.get("tag") != "VOTE":
            continue
        if want_r is not None and ev["src"] not in want_r:
            continue
        if want_c is not None and ev["dst"] not in want_c:
            continue
        if rounds is not None and not rounds[0] <= ev["r"] <= rounds[1]:
            continue
        _, payload = decode_frame(bytes.fromhex(ev["frame"]))
        out.append(decode_vote_payload(payload)[1])
    return out
