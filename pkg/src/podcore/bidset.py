"""Censorship-resistant bid collection on top of a pod.

Bidders write ``ssid || 0x01 || bid`` at ``t0``. The sequencer waits until its
past-perfect round passes ``t0 + Delta``, then signs the set of bid
transactions it sees together with its past-perfection certificate and writes
that as a BIDS transaction. Consumers take the first BIDS confirmed by
``t0 + 3*Delta``, or fall back to an empty result once their own past-perfect
round passes that point.

Every role is a poller: the host (simnet or a real-time loop) calls ``poll``
once per round with the current round number.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Mapping

from .client import ClientLogic
from .codec import CodecError, Reader, put_bytes, put_u32
from .crypto import SignatureScheme
from .types import Vote, put_vote, read_vote

TAG_BID = 0x01
TAG_BIDS = 0x02
SIG_DOMAIN = b"pod-bidset-v1"


@dataclass(frozen=True)
class BidsetConfig:
    t0: int
    delta: int
    ssid: bytes
    sequencer_pk: bytes

    def __post_init__(self) -> None:
        if self.delta < 1:
            raise ValueError("Delta must be at least 1")
        if not self.ssid:
            raise ValueError("ssid must be nonempty")


def _prefix(ssid: bytes, tag: int) -> bytes:
    buf = bytearray()
    put_bytes(buf, ssid)
    buf.append(tag)
    return bytes(buf)


def bid_tx(ssid: bytes, bid: bytes) -> bytes:
    return _prefix(ssid, TAG_BID) + bid


def parse_tagged(tx: bytes) -> tuple[bytes, int, bytes] | None:
    """Split ``lp(ssid) || tag || body``; None if the bytes do not parse."""
    try:
        reader = Reader(tx)
        ssid = reader.lp_bytes()
        tag = reader.u8()
    except CodecError:
        return None
    return ssid, tag, tx[reader.pos:]


def is_bid_tx(ssid: bytes, tx: bytes) -> bool:
    parsed = parse_tagged(tx)
    return parsed is not None and parsed[0] == ssid and parsed[1] == TAG_BID


def bid_value(tx: bytes) -> bytes:
    parsed = parse_tagged(tx)
    if parsed is None or parsed[1] != TAG_BID:
        raise ValueError("not a bid transaction")
    return parsed[2]


@dataclass(frozen=True)
class BidsMessage:
    bids: tuple[bytes, ...]
    c_bid: Mapping[int, Vote]
    sigma: bytes


def _put_set_and_cert(buf: bytearray, sid: bytes, bids, c_bid: Mapping[int, Vote]) -> None:
    ordered = sorted(set(bids))
    put_u32(buf, len(ordered))
    for tx in ordered:
        put_bytes(buf, tx)
    put_u32(buf, len(c_bid))
    for replica in sorted(c_bid):
        put_u32(buf, replica)
        put_vote(buf, sid, c_bid[replica])


def signing_message(sid: bytes, ssid: bytes, bids, c_bid: Mapping[int, Vote]) -> bytes:
    buf = bytearray(SIG_DOMAIN)
    put_bytes(buf, ssid)
    _put_set_and_cert(buf, sid, bids, c_bid)
    return bytes(buf)


def sign_bids(scheme: SignatureScheme, sk: bytes, sid: bytes, ssid: bytes, bids, c_bid) -> bytes:
    return scheme.sign(sk, signing_message(sid, ssid, bids, c_bid))


def verify_bids(
    scheme: SignatureScheme, pk: bytes, sid: bytes, ssid: bytes, msg: BidsMessage
) -> bool:
    try:
        message = signing_message(sid, ssid, msg.bids, msg.c_bid)
    except CodecError:
        return False
    return scheme.verify(pk, message, msg.sigma)


def encode_bids_tx(sid: bytes, ssid: bytes, msg: BidsMessage) -> bytes:
    buf = bytearray(_prefix(ssid, TAG_BIDS))
    _put_set_and_cert(buf, sid, msg.bids, msg.c_bid)
    put_bytes(buf, msg.sigma)
    return bytes(buf)


def read_set_and_cert(reader: Reader, sid: bytes) -> tuple[tuple[bytes, ...], dict[int, Vote]]:
    bids = tuple(reader.lp_bytes() for _ in range(reader.u32()))
    if list(bids) != sorted(set(bids)):
        raise CodecError("bid set not in canonical order")
    c_bid: dict[int, Vote] = {}
    for _ in range(reader.u32()):
        replica = reader.u32()
        vote_sid, vote = read_vote(reader)
        if vote_sid != sid or vote.replica != replica or replica in c_bid:
            raise CodecError("malformed certificate entry")
        c_bid[replica] = vote
    return bids, c_bid


def decode_bids_tx(sid: bytes, ssid: bytes, tx: bytes) -> BidsMessage | None:
    """Parse a BIDS transaction for this sub-session, or None."""
    parsed = parse_tagged(tx)
    if parsed is None or parsed[0] != ssid or parsed[1] != TAG_BIDS:
        return None
    try:
        reader = Reader(parsed[2])
        bids, c_bid = read_set_and_cert(reader, sid)
        sigma = reader.lp_bytes()
        reader.expect_end()
    except CodecError:
        return None
    return BidsMessage(bids, c_bid, sigma)


# -- roles ----------------------------------------------------------------


class Bidder:
    def __init__(self, pod, config: BidsetConfig) -> None:
        self.pod = pod
        self.config = config

    def submit_bid(self, bid: bytes) -> bytes:
        tx = bid_tx(self.config.ssid, bid)
        self.pod.write(tx)
        return tx


SEQUENCER_MODES = ("honest", "censor", "silent", "equivocate")


class Sequencer:
    """Sequencer role; non-honest modes exist to exercise accountability."""

    def __init__(
        self,
        pod: ClientLogic,
        config: BidsetConfig,
        scheme: SignatureScheme,
        sk: bytes,
        mode: str = "honest",
        censor: bytes | None = None,
    ) -> None:
        if mode not in SEQUENCER_MODES:
            raise ValueError(f"unknown sequencer mode {mode!r}")
        self.pod = pod
        self.config = config
        self.scheme = scheme
        self.sk = sk
        self.mode = mode
        self.censor = censor
        self.done_round: int | None = None
        self.published: list[BidsMessage] = []

    def poll(self, round_: int) -> None:
        if self.done_round is not None or round_ < self.config.t0:
            return
        data, certs = self.pod.read()
        if data.r_perf <= self.config.t0 + self.config.delta:
            return
        self.done_round = round_
        if self.mode == "silent":
            return
        ssid = self.config.ssid
        bids = sorted(tx for tx in data.traces if is_bid_tx(ssid, tx))
        if self.mode == "censor" and self.censor is not None:
            bids = [tx for tx in bids if bid_value(tx) != self.censor]
        self._publish(bids, certs.c_pp)
        if self.mode == "equivocate" and bids:
            self._publish(bids[1:], certs.c_pp)

    def _publish(self, bids, c_pp) -> None:
        sid = self.pod.pki.sid
        sigma = sign_bids(self.scheme, self.sk, sid, self.config.ssid, bids, c_pp)
        msg = BidsMessage(tuple(sorted(set(bids))), dict(c_pp), sigma)
        self.published.append(msg)
        self.pod.write(encode_bids_tx(sid, self.config.ssid, msg))


@dataclass(frozen=True)
class Result:
    bids: tuple[bytes, ...]
    c_bid: Mapping[int, Vote]
    round: int
    bids_tx: bytes | None = None
    r_conf: int | None = None
    sigma: bytes = b""

    @property
    def empty(self) -> bool:
        return self.bids_tx is None


class Consumer:
    def __init__(self, pod: ClientLogic, config: BidsetConfig, scheme: SignatureScheme) -> None:
        self.pod = pod
        self.config = config
        self.scheme = scheme
        self.result: Result | None = None
        self.equivocation: list[BidsMessage] = []

    def poll(self, round_: int) -> Result | None:
        if self.result is not None or round_ < self.config.t0:
            return None
        cfg = self.config
        deadline = cfg.t0 + 3 * cfg.delta
        data, certs = self.pod.read()
        sid = self.pod.pki.sid
        found: list[tuple[int, bytes, BidsMessage]] = []
        for tx, trace in data.traces.items():
            if trace.r_conf is None or trace.r_conf > deadline:
                continue
            msg = decode_bids_tx(sid, cfg.ssid, tx)
            if msg is None or not verify_bids(self.scheme, cfg.sequencer_pk, sid, cfg.ssid, msg):
                continue
            found.append((trace.r_conf, tx, msg))
        if found:
            found.sort(key=lambda item: (item[0], item[1]))
            r_conf, tx, msg = found[0]
            if len({m.bids for _, _, m in found}) > 1:
                self.equivocation = [m for _, _, m in found]
            self.result = Result(msg.bids, msg.c_bid, round_, tx, r_conf, msg.sigma)
        elif data.r_perf > deadline:
            self.result = Result((), dict(certs.c_pp), round_)
        return self.result


# -- auction helpers ------------------------------------------------------


def bid_values(bids) -> list[int]:
    """Bids parsed as unsigned decimal integers; unparsable bids are skipped."""
    values = []
    for tx in bids:
        try:
            raw = bid_value(tx)
        except ValueError:
            raw = tx
        text = raw.decode("ascii", "replace")
        if text.isdigit():
            values.append(int(text))
    return values


def first_price(bids) -> tuple[int, int] | None:
    """(winning bid, price paid), or None for an empty auction."""
    values = sorted(bid_values(bids), reverse=True)
    if not values:
        return None
    return values[0], values[0]


def second_price(bids) -> tuple[int, int] | None:
    values = sorted(bid_values(bids), reverse=True)
    if not values:
        return None
    return values[0], values[1] if len(values) > 1 else values[0]
