"""Faulty replica state machines.

They speak the same wire protocol as honest replicas and sign with their own
keys; the simulator gives them no extra powers beyond choosing what to send.
"""
from __future__ import annotations

import enum
import random
from dataclasses import dataclass
from typing import Callable, Hashable

from .. import codec
from ..codec import CodecError, FrameTag
from ..replica import Replica, SendFn
from ..types import ConfigurationError, FaultProfile, Pki, Vote, vote_frame


class Kind(str, enum.Enum):
    EQUIVOCATE_SN = "EQUIVOCATE_SN"
    STALE_TS = "STALE_TS"
    OMIT_TO = "OMIT_TO"
    OMIT_ALL = "OMIT_ALL"
    CRASH_AT = "CRASH_AT"
    DELAY_MAX = "DELAY_MAX"


BYZANTINE = frozenset({Kind.EQUIVOCATE_SN, Kind.STALE_TS})
OMISSION = frozenset({Kind.OMIT_TO, Kind.OMIT_ALL, Kind.CRASH_AT, Kind.DELAY_MAX})


@dataclass(frozen=True)
class Behavior:
    replica: int
    kind: Kind
    param: str = ""

    def __str__(self) -> str:
        tail = f"@{self.param}" if self.param else ""
        return f"{self.kind.value}:{self.replica}{tail}"


def parse_behavior(text: str) -> Behavior:
    """``KIND:replica[@param]``, e.g. ``CRASH_AT:3@10`` or ``OMIT_TO:2@c0,c1``."""
    try:
        kind_text, rest = text.split(":", 1)
        replica_text, _, param = rest.partition("@")
        kind = Kind(kind_text.strip().upper())
        replica = int(replica_text)
    except ValueError:
        raise ConfigurationError(f"malformed adversary {text!r}") from None
    if kind is Kind.CRASH_AT:
        try:
            int(param)
        except ValueError:
            raise ConfigurationError(f"CRASH_AT needs a round, got {text!r}") from None
    if kind is Kind.OMIT_TO and not param:
        raise ConfigurationError(f"OMIT_TO needs targets, got {text!r}")
    return Behavior(replica, kind, param)


def check_budget(profile: FaultProfile, behaviors, override: bool = False) -> None:
    seen: set[int] = set()
    for b in behaviors:
        if not 0 <= b.replica < profile.n:
            raise ConfigurationError(f"adversary replica {b.replica} out of range")
        if b.replica in seen:
            raise ConfigurationError(f"replica {b.replica} given two behaviors")
        seen.add(b.replica)
    if override:
        return
    byz = sum(1 for b in behaviors if b.kind in BYZANTINE)
    faulty = len(seen)
    if byz > profile.beta:
        raise ConfigurationError(f"{byz} Byzantine replicas exceed beta={profile.beta}")
    if faulty > profile.beta + profile.gamma:
        raise ConfigurationError(
            f"{faulty} faulty replicas exceed beta+gamma={profile.beta + profile.gamma}"
        )


class OmittingReplica(Replica):
    """Honest logic whose outgoing messages are filtered; never sends wrong content."""

    def __init__(self, index, sk, pki, send, round_fn, behavior: Behavior, **kw) -> None:
        self.behavior = behavior
        self.dropped = 0
        self._real_send = send
        targets = set(behavior.param.split(",")) if behavior.kind is Kind.OMIT_TO else set()
        self._targets = targets
        self._crash_round = int(behavior.param) if behavior.kind is Kind.CRASH_AT else None
        super().__init__(index, sk, pki, self._filtered, round_fn, **kw)

    def crashed(self) -> bool:
        return self._crash_round is not None and self.round() >= self._crash_round

    def _filtered(self, client: Hashable, frame: bytes) -> None:
        kind = self.behavior.kind
        if kind is Kind.OMIT_ALL or self.crashed() or (
            kind is Kind.OMIT_TO and str(client) in self._targets
        ):
            self.dropped += 1
            return
        self._real_send(client, frame)

    def on_frame(self, client, frame) -> None:
        if not self.crashed():
            super().on_frame(client, frame)

    def on_round_end(self, round_: int) -> None:
        if not self.crashed():
            super().on_round_end(round_)


class StaleTsReplica(Replica):
    """Occasionally precedes a vote with a conflicting one at the same sn.

    The default variant backdates the injected vote below the replica's last
    timestamp. The ``dup`` variant re-votes an earlier transaction with a new
    timestamp. Honest clients reject both and keep them as evidence; the real
    vote with the same sn follows, so the stream itself does not stall.
    """

    def __init__(self, index, sk, pki, send, round_fn, behavior: Behavior,
                 rng: random.Random, rate: float = 0.3, **kw) -> None:
        super().__init__(index, sk, pki, send, round_fn, **kw)
        self.behavior = behavior
        self.variant = behavior.param or "stale"
        self.rng = rng
        self.rate = rate
        self.injected: list[Vote] = []

    def do_vote(self, tx: bytes) -> Vote:
        st = self.state
        if st.log and self.rng.random() < self.rate:
            bogus = self._bogus()
            if bogus is not None:
                self.injected.append(bogus)
                frame = vote_frame(self.pki.sid, bogus)
                for client in list(st.connected):
                    self.send(client, frame)
        return super().do_vote(tx)

    def _bogus(self) -> Vote | None:
        st = self.state
        sn = st.next_sn
        now = self.round()
        if self.variant == "dup":
            old = self.rng.choice(st.log)
            if old.ts == now:
                return None
            tx, ts = old.tx, now
        else:
            last = st.log[-1].ts
            if last == 0:
                return None
            tx, ts = b"stale-" + codec.heartbeat_tx(now), self.rng.randrange(last)
        sigma = self.pki.scheme.sign(self.sk, self.pki.vote_message(tx, ts, sn))
        return Vote(tx, ts, sn, sigma, self.index)


# Per-tx policy of an equivocating replica for one client group.
HONEST, OMIT, DELAY, BACKDATE, FUTURE = "honest", "omit", "delay", "backdate", "future"
Policy = Callable[[bytes, int], tuple[str, int]]


def random_policy(rng: random.Random, delta: int) -> Policy:
    actions = (HONEST, HONEST, OMIT, DELAY, BACKDATE, FUTURE)

    def choose(tx: bytes, group: int) -> tuple[str, int]:
        action = rng.choice(actions)
        return action, rng.randint(1, max(1, 2 * delta))

    return choose


class EquivocatingReplica:
    """Keeps one independent log per client group.

    Each group sees a gapless, internally consistent chain, but the chains
    disagree at equal sequence numbers, which is what ``identify`` detects
    once two groups' certificates are combined.
    """

    def __init__(
        self,
        index: int,
        sk: bytes,
        pki: Pki,
        send: SendFn,
        round_fn: Callable[[], int],
        rng: random.Random,
        policy: Policy,
        groups: int = 2,
        assign: Callable[[Hashable], int] | None = None,
    ) -> None:
        self.index = index
        self.pki = pki
        self.rng = rng
        self.policy = policy
        self.round = round_fn
        self._assign = assign
        self._group_of: dict[Hashable, int] = {}
        self._override: list[int | None] = [None] * groups
        self._pending: list[tuple[int, int, bytes]] = []
        self.logs = [
            Replica(index, sk, pki, send, self._clock(g)) for g in range(groups)
        ]

    def _clock(self, group: int) -> Callable[[], int]:
        def now() -> int:
            log = self.logs[group].state.log
            last = log[-1].ts if log else 0
            forced = self._override[group]
            base = self.round() if forced is None else forced
            return max(base, last)
        return now

    def group_of(self, client: Hashable) -> int:
        if client not in self._group_of:
            if self._assign is not None:
                self._group_of[client] = self._assign(client) % len(self.logs)
            else:
                self._group_of[client] = self.rng.randrange(len(self.logs))
        return self._group_of[client]

    @property
    def state(self):
        return self.logs[0].state

    def on_frame(self, client: Hashable, frame: bytes) -> None:
        try:
            tag, payload = codec.decode_frame(frame)
            if tag is FrameTag.CONNECT:
                if codec.parse_connect(payload) == self.pki.sid:
                    self.logs[self.group_of(client)].on_connect(client)
            elif tag is FrameTag.WRITE:
                sid, tx = codec.parse_write(payload)
                if sid == self.pki.sid:
                    self.on_write(tx)
        except CodecError:
            pass

    def on_disconnect(self, client: Hashable) -> None:
        self.logs[self.group_of(client)].on_disconnect(client)

    def on_write(self, tx: bytes) -> None:
        now = self.round()
        for g, replica in enumerate(self.logs):
            if tx in replica.state.seen:
                continue
            action, k = self.policy(tx, g)
            if action == OMIT:
                continue
            if action == DELAY:
                self._pending.append((now + k, g, tx))
            elif action == BACKDATE:
                self._vote_at(g, tx, max(0, now - k))
            elif action == FUTURE:
                self._vote_at(g, tx, now + k)
            else:
                replica.on_write(tx)

    def _vote_at(self, group: int, tx: bytes, ts: int) -> None:
        self._override[group] = ts
        try:
            self.logs[group].on_write(tx)
        finally:
            self._override[group] = None

    def on_round_end(self, round_: int) -> None:
        due = [p for p in self._pending if p[0] <= round_]
        self._pending = [p for p in self._pending if p[0] > round_]
        for _, g, tx in due:
            self.logs[g].on_write(tx)
        for replica in self.logs:
            replica.on_round_end(round_)

    def votes(self) -> list[Vote]:
        return [v for replica in self.logs for v in replica.votes()]
