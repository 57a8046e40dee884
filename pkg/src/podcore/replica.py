"""Honest replica state machine.

A replica never talks to other replicas. It timestamps every new transaction
with its current round, chains votes with a gapless sequence number, streams
votes to connected clients and replays its whole log to late joiners.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Callable, Hashable

from . import codec
from .codec import CodecError, FrameTag
from .types import Pki, Vote, vote_frame

log = logging.getLogger(__name__)

SendFn = Callable[[Hashable, bytes], None]
RoundFn = Callable[[], int]


class ReplicaError(RuntimeError):
    """Fatal replica failure (e.g. the signing key is unusable)."""


@dataclass
class LogEntry:
    tx: bytes
    ts: int
    sn: int
    sigma: bytes


@dataclass
class ReplicaState:
    # Insertion-ordered so fan-out order does not depend on string hashing.
    connected: dict = field(default_factory=dict)
    next_sn: int = 0
    log: list[LogEntry] = field(default_factory=list)
    seen: set[bytes] = field(default_factory=set)


class Replica:
    def __init__(
        self,
        index: int,
        sk: bytes,
        pki: Pki,
        send: SendFn,
        round_fn: RoundFn,
        skip_idle_heartbeat: bool = False,
    ) -> None:
        self.index = index
        self.sk = sk
        self.pki = pki
        self.send = send
        self.round = round_fn
        self.skip_idle_heartbeat = skip_idle_heartbeat
        self.state = ReplicaState()
        self._voted_this_round: int | None = None

    # -- events ----------------------------------------------------------

    def on_frame(self, client: Hashable, frame: bytes) -> None:
        try:
            tag, payload = codec.decode_frame(frame)
            if tag is FrameTag.CONNECT:
                if codec.parse_connect(payload) == self.pki.sid:
                    self.on_connect(client)
            elif tag is FrameTag.WRITE:
                sid, tx = codec.parse_write(payload)
                if sid == self.pki.sid:
                    self.on_write(tx)
        except CodecError as exc:
            log.debug("replica %d dropped malformed frame: %s", self.index, exc)

    def on_connect(self, client: Hashable) -> None:
        self.state.connected[client] = None
        for entry in self.state.log:
            self.send(client, self._frame(entry))

    def on_disconnect(self, client: Hashable) -> None:
        self.state.connected.pop(client, None)

    def on_write(self, tx: bytes) -> None:
        if tx in self.state.seen:
            return
        self.do_vote(tx)

    def on_round_end(self, round_: int) -> None:
        if self.skip_idle_heartbeat and self._voted_this_round == round_:
            return
        tx = codec.heartbeat_tx(round_)
        if tx not in self.state.seen:
            self.do_vote(tx)

    # -- voting ----------------------------------------------------------

    def do_vote(self, tx: bytes) -> Vote:
        st = self.state
        ts = self.round()
        sn = st.next_sn
        try:
            sigma = self.pki.scheme.sign(self.sk, self.pki.vote_message(tx, ts, sn))
        except Exception as exc:
            raise ReplicaError(f"replica {self.index} cannot sign: {exc}") from exc
        entry = LogEntry(tx, ts, sn, sigma)
        st.log.append(entry)
        st.seen.add(tx)
        frame = self._frame(entry)
        for client in list(st.connected):
            self.send(client, frame)
        st.next_sn += 1
        self._voted_this_round = ts
        return Vote(tx, ts, sn, sigma, self.index)

    def _frame(self, entry: LogEntry) -> bytes:
        vote = Vote(entry.tx, entry.ts, entry.sn, entry.sigma, self.index)
        return vote_frame(self.pki.sid, vote)

    def votes(self) -> list[Vote]:
        return [Vote(e.tx, e.ts, e.sn, e.sigma, self.index) for e in self.state.log]
