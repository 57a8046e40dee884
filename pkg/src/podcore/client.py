"""Client state machine: vote validation, trace computation and reads.

``ClientLogic`` holds everything that does not touch the network, so the
validator can replay certificates through the exact same code path. ``Client``
adds the CONNECT/WRITE plumbing.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Callable, Mapping, Sequence

from . import codec
from .codec import CodecError, FrameTag
from .types import (
    INF,
    Certificates,
    FaultProfile,
    MaxRound,
    PodData,
    Pki,
    TransactionTrace,
    Vote,
    decode_vote_payload,
    median_of,
)

log = logging.getLogger(__name__)

DEFAULT_BACKLOG_LIMIT = 10_000


# -- pure threshold functions ---------------------------------------------


def min_possible_ts(
    timestamps: Mapping[int, int], mrt: Sequence[int], profile: FaultProfile
) -> int:
    """Smallest median an adversary could still force for this tx."""
    filled = list(mrt)
    for j, ts in timestamps.items():
        filled[j] = ts
    filled.sort()
    filled = [0] * profile.beta + filled
    return median_of(filled[: profile.alpha])


def max_possible_ts(timestamps: Mapping[int, int], profile: FaultProfile) -> MaxRound:
    # Missing votes and the beta padding are all INF, which sorts last, so
    # only the real timestamps need sorting.
    missing = profile.n - len(timestamps)
    filled = sorted(timestamps.values()) + [INF] * (missing + profile.beta)
    return median_of(filled[-profile.alpha:])


def past_perfect_round(mrt: Sequence[int], profile: FaultProfile) -> int:
    values = [0] * profile.beta + sorted(mrt)
    return median_of(values[: profile.alpha])


def confirmed_round(timestamps: Mapping[int, int], profile: FaultProfile) -> int | None:
    if len(timestamps) < profile.alpha:
        return None
    return median_of(sorted(timestamps.values()))


def compute_trace(
    tx: bytes, timestamps: Mapping[int, int], mrt: Sequence[int], profile: FaultProfile
) -> TransactionTrace:
    return TransactionTrace(
        tx,
        min_possible_ts(timestamps, mrt, profile),
        max_possible_ts(timestamps, profile),
        confirmed_round(timestamps, profile),
    )


def compute_tx_set(
    tsps: Mapping[bytes, Mapping[int, int]],
    mrt: Sequence[int],
    profile: FaultProfile,
    filter_heartbeats: bool = True,
) -> dict[bytes, TransactionTrace]:
    return {
        tx: compute_trace(tx, stamps, mrt, profile)
        for tx, stamps in tsps.items()
        if not (filter_heartbeats and codec.is_heartbeat(tx))
    }


# -- vote processing ------------------------------------------------------


class Outcome:
    ACCEPTED = "accepted"
    BAD_SIG = "BAD_SIG"
    BACKLOGGED = "backlogged"
    OLD_SN = "old_sn"
    STALE_TS = "STALE_TS"
    DUP_TS_CONFLICT = "DUP_TS_CONFLICT"


@dataclass(frozen=True)
class Evidence:
    """A signed vote that contradicts another signed vote from the same replica."""

    reason: str
    vote: Vote
    prior: Vote | None


@dataclass
class ClientLogic:
    pki: Pki
    profile: FaultProfile
    filter_heartbeats: bool = True
    backlog_limit: int = DEFAULT_BACKLOG_LIMIT
    on_accept: Callable[[Vote], None] | None = None
    on_reject: Callable[[Vote, str], None] | None = None

    mrt: list[int] = field(init=False)
    next_sn: list[int] = field(init=False)
    tsps: dict[bytes, dict[int, int]] = field(init=False, default_factory=dict)
    c_pp: dict[int, Vote] = field(init=False, default_factory=dict)
    c_tx: dict[bytes, dict[int, Vote]] = field(init=False, default_factory=dict)
    backlog: list[dict[int, list[Vote]]] = field(init=False)
    _backlogged: list[int] = field(init=False)
    evidence: list[Evidence] = field(init=False, default_factory=list)
    diagnostics: list[str] = field(init=False, default_factory=list)
    _by_sn: dict[tuple[int, int], Vote] = field(init=False, default_factory=dict)

    def __post_init__(self) -> None:
        if self.pki.n != self.profile.n:
            raise ValueError(f"pki has {self.pki.n} keys but profile n={self.profile.n}")
        n = self.profile.n
        self.mrt = [0] * n
        self.next_sn = [0] * n
        self.backlog = [{} for _ in range(n)]
        self._backlogged = [0] * n

    def process_vote(self, vote: Vote) -> bool:
        """Run the four checks; True only if the vote itself was accepted."""
        outcome = self._check(vote)
        if outcome is Outcome.ACCEPTED:
            self._drain(vote.replica)
            return True
        return False

    def _check(self, vote: Vote) -> str:
        if not self.pki.verify_vote(vote):
            self._rejected(vote, Outcome.BAD_SIG)
            return Outcome.BAD_SIG
        r = vote.replica
        expected = self.next_sn[r]
        if vote.sn > expected:
            self._backlog(vote)
            return Outcome.BACKLOGGED
        if vote.sn < expected:
            prior = self._by_sn.get((r, vote.sn))
            if prior is not None and (prior.tx, prior.ts) != (vote.tx, vote.ts):
                self.evidence.append(Evidence("SN_EQUIVOCATION", vote, prior))
            self._rejected(vote, Outcome.OLD_SN)
            return Outcome.OLD_SN
        if vote.ts < self.mrt[r]:
            self.evidence.append(Evidence(Outcome.STALE_TS, vote, self.c_pp.get(r)))
            self._rejected(vote, Outcome.STALE_TS)
            return Outcome.STALE_TS
        stamps = self.tsps.get(vote.tx)
        if stamps is not None and r in stamps and stamps[r] != vote.ts:
            self.evidence.append(
                Evidence(Outcome.DUP_TS_CONFLICT, vote, self.c_tx[vote.tx][r])
            )
            self._rejected(vote, Outcome.DUP_TS_CONFLICT)
            return Outcome.DUP_TS_CONFLICT
        self._accept(vote)
        return Outcome.ACCEPTED

    def _accept(self, vote: Vote) -> None:
        r = vote.replica
        self.next_sn[r] = vote.sn + 1
        self.mrt[r] = vote.ts
        self.tsps.setdefault(vote.tx, {})[r] = vote.ts
        self.c_pp[r] = vote
        self.c_tx.setdefault(vote.tx, {})[r] = vote
        self._by_sn[(r, vote.sn)] = vote
        if self.on_accept is not None:
            self.on_accept(vote)

    def _rejected(self, vote: Vote, reason: str) -> None:
        if self.on_reject is not None:
            self.on_reject(vote, reason)

    def _backlog(self, vote: Vote) -> None:
        queue = self.backlog[vote.replica]
        held = queue.setdefault(vote.sn, [])
        for other in held:
            if other == vote:
                return
            if (other.tx, other.ts) != (vote.tx, vote.ts):
                self.evidence.append(Evidence("SN_EQUIVOCATION", vote, other))
        held.append(vote)
        self._backlogged[vote.replica] += 1
        while self._backlogged[vote.replica] > self.backlog_limit:
            oldest = next(iter(queue))
            dropped = queue[oldest].pop(0)
            if not queue[oldest]:
                del queue[oldest]
            self._backlogged[vote.replica] -= 1
            self.diagnostics.append(
                f"backlog overflow for replica {vote.replica}: dropped sn {dropped.sn}"
            )

    def _drain(self, replica: int) -> None:
        queue = self.backlog[replica]
        while queue:
            held = queue.pop(self.next_sn[replica], None)
            if held is None:
                return
            self._backlogged[replica] -= len(held)
            outcomes = [self._check(v) for v in held]
            if Outcome.ACCEPTED not in outcomes:
                return

    # -- reads ------------------------------------------------------------

    def read_data(self, filter_heartbeats: bool | None = None) -> PodData:
        flag = self.filter_heartbeats if filter_heartbeats is None else filter_heartbeats
        traces = compute_tx_set(self.tsps, self.mrt, self.profile, flag)
        return PodData(traces, past_perfect_round(self.mrt, self.profile), flag)

    def certificates(self) -> Certificates:
        return Certificates(
            dict(self.c_pp), {tx: dict(m) for tx, m in self.c_tx.items()}
        )

    def read(self, filter_heartbeats: bool | None = None) -> tuple[PodData, Certificates]:
        return self.read_data(filter_heartbeats), self.certificates()

    def trace(self, tx: bytes) -> TransactionTrace | None:
        stamps = self.tsps.get(tx)
        if stamps is None:
            return None
        return compute_trace(tx, stamps, self.mrt, self.profile)

    def r_perf(self) -> int:
        return past_perfect_round(self.mrt, self.profile)


SendFn = Callable[[int, bytes], None]


class Client(ClientLogic):
    """ClientLogic plus the frames it exchanges with replicas."""

    def __init__(
        self,
        pki: Pki,
        profile: FaultProfile,
        send: SendFn,
        *,
        filter_heartbeats: bool = True,
        backlog_limit: int = DEFAULT_BACKLOG_LIMIT,
        on_accept: Callable[[Vote], None] | None = None,
        on_reject: Callable[[Vote, str], None] | None = None,
    ) -> None:
        super().__init__(
            pki, profile, filter_heartbeats, backlog_limit, on_accept, on_reject
        )
        self.send = send
        self.malformed = 0

    def connect(self) -> None:
        frame = codec.encode_frame(FrameTag.CONNECT, codec.connect_payload(self.pki.sid))
        for j in range(self.profile.n):
            self.send(j, frame)

    def write(self, tx: bytes) -> None:
        frame = codec.encode_frame(FrameTag.WRITE, codec.write_payload(self.pki.sid, tx))
        for j in range(self.profile.n):
            self.send(j, frame)

    def on_frame(self, source: int, frame: bytes) -> bool:
        """Handle one VOTE frame from ``source``; foreign or malformed frames are dropped."""
        try:
            tag, payload = codec.decode_frame(frame)
            if tag is not FrameTag.VOTE:
                raise CodecError(f"client got a {tag.name} frame")
            sid, vote = decode_vote_payload(payload)
        except CodecError as exc:
            self.malformed += 1
            log.debug("client dropped frame from %s: %s", source, exc)
            return False
        if sid != self.pki.sid or vote.replica != source:
            self.malformed += 1
            return False
        return self.process_vote(vote)


# -- monotone view transformation -----------------------------------------


def _conf_key(r_conf: int | None) -> int:
    return -1 if r_conf is None else r_conf


def monotone_merge(
    old: tuple[PodData, Certificates], new: tuple[PodData, Certificates]
) -> tuple[PodData, Certificates]:
    """Fold a newer read into an older one so bounds only ever tighten."""
    old_data, old_certs = old
    new_data, new_certs = new
    traces: dict[bytes, TransactionTrace] = dict(old_data.traces)
    c_tx = {tx: dict(m) for tx, m in old_certs.c_tx.items()}
    for tx, fresh in new_data.traces.items():
        prev = traces.get(tx)
        adopt = prev is None or (
            fresh.r_min >= prev.r_min
            and fresh.r_max <= prev.r_max
            and _conf_key(fresh.r_conf) >= _conf_key(prev.r_conf)
        )
        if adopt:
            traces[tx] = fresh
            if tx in new_certs.c_tx:
                c_tx[tx] = dict(new_certs.c_tx[tx])
    for tx, votes in new_certs.c_tx.items():
        if tx not in new_data.traces and tx not in traces:
            c_tx[tx] = dict(votes)
    if new_data.r_perf > old_data.r_perf:
        r_perf, c_pp = new_data.r_perf, dict(new_certs.c_pp)
    else:
        r_perf, c_pp = old_data.r_perf, dict(old_certs.c_pp)
    data = PodData(traces, r_perf, new_data.heartbeats_filtered)
    return data, Certificates(c_pp, c_tx)
