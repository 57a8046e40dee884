"""Value types shared by every protocol role."""
from __future__ import annotations

import functools
import struct
from dataclasses import dataclass, field
from typing import Iterable, Mapping, Sequence, Union

from . import codec
from .codec import CodecError, Reader, put_bytes, put_u32, put_u64
from .crypto import SignatureScheme


class ConfigurationError(ValueError):
    """Raised for fault profiles or parameters that violate resilience bounds."""


@functools.total_ordering
class _Infinity:
    """Unbounded maximum round; compares greater than every integer round."""

    _instance: "_Infinity | None" = None

    def __new__(cls) -> "_Infinity":
        if cls._instance is None:
            cls._instance = super().__new__(cls)
        return cls._instance

    def __eq__(self, other: object) -> bool:
        return other is self

    def __lt__(self, other: object) -> bool:
        if other is self or isinstance(other, int):
            return False
        return NotImplemented

    def __hash__(self) -> int:
        return hash("podcore.INF")

    def __repr__(self) -> str:
        return "INF"

    def __reduce__(self):
        return (_Infinity, ())


INF = _Infinity()

Round = int
MaxRound = Union[int, _Infinity]


@dataclass(frozen=True)
class FaultProfile:
    n: int
    beta: int
    gamma: int

    @property
    def alpha(self) -> int:
        return self.n - self.beta - self.gamma


def check_profile(n: int, beta: int, gamma: int) -> FaultProfile:
    """Validate ``n >= 5*beta + 3*gamma + 1`` and build the profile."""
    for name, value in (("n", n), ("beta", beta), ("gamma", gamma)):
        if not isinstance(value, int) or value < 0:
            raise ConfigurationError(f"{name} must be a nonnegative integer, got {value!r}")
    bound = 5 * beta + 3 * gamma + 1
    if n < bound:
        raise ConfigurationError(
            f"resilience bound violated: n={n} < 5*beta + 3*gamma + 1 = {bound}"
        )
    return FaultProfile(n, beta, gamma)


def median_of(values: Sequence) -> object:
    """Element at index floor(len/2) of an ascending list."""
    if not values:
        raise ValueError("median of an empty list")
    return values[len(values) // 2]


@dataclass(frozen=True)
class Vote:
    tx: bytes
    ts: int
    sn: int
    sigma: bytes
    replica: int

    def key(self) -> tuple:
        return (self.replica, self.sn, self.tx, self.ts, self.sigma)


@dataclass(frozen=True)
class TransactionTrace:
    tx: bytes
    r_min: int
    r_max: MaxRound
    r_conf: int | None = None

    @property
    def confirmed(self) -> bool:
        return self.r_conf is not None


@dataclass(frozen=True)
class PodData:
    traces: Mapping[bytes, TransactionTrace]
    r_perf: int
    heartbeats_filtered: bool = True

    def __contains__(self, tx: object) -> bool:
        return tx in self.traces

    def get(self, tx: bytes) -> TransactionTrace | None:
        return self.traces.get(tx)

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, PodData):
            return NotImplemented
        return (
            self.r_perf == other.r_perf
            and self.heartbeats_filtered == other.heartbeats_filtered
            and dict(self.traces) == dict(other.traces)
        )

    __hash__ = None  # type: ignore[assignment]


@dataclass
class Certificates:
    c_pp: dict[int, Vote] = field(default_factory=dict)
    c_tx: dict[bytes, dict[int, Vote]] = field(default_factory=dict)

    def all_votes(self) -> list[Vote]:
        seen: dict[tuple, Vote] = {}
        for per_replica in self.c_tx.values():
            for vote in per_replica.values():
                seen.setdefault(vote.key(), vote)
        return list(seen.values())

    def copy(self) -> "Certificates":
        return Certificates(
            dict(self.c_pp), {tx: dict(m) for tx, m in self.c_tx.items()}
        )


@dataclass(frozen=True)
class Pki:
    """Session context known to every party: sid, scheme and replica keys."""

    sid: bytes
    scheme: SignatureScheme
    public_keys: tuple[bytes, ...]

    @property
    def n(self) -> int:
        return len(self.public_keys)

    def vote_message(self, tx: bytes, ts: int, sn: int) -> bytes:
        return codec.encode_vote_body(self.sid, tx, ts, sn)

    def verify_vote(self, vote: Vote) -> bool:
        if not 0 <= vote.replica < len(self.public_keys):
            return False
        try:
            message = self.vote_message(vote.tx, vote.ts, vote.sn)
        except CodecError:
            return False
        return self.scheme.verify(self.public_keys[vote.replica], message, vote.sigma)


def make_keys(scheme: SignatureScheme, n: int, rng=None):
    return [scheme.keygen(rng) for _ in range(n)]


# -- wire and file encodings ---------------------------------------------


def put_vote(buf: bytearray, sid: bytes, vote: Vote) -> None:
    buf += codec.encode_vote_body(sid, vote.tx, vote.ts, vote.sn)
    put_u32(buf, vote.replica)
    put_bytes(buf, vote.sigma)


def read_vote(reader: Reader) -> tuple[bytes, Vote]:
    body = codec.read_vote_body(reader)
    replica = reader.u32()
    sigma = reader.lp_bytes()
    return body.sid, Vote(body.tx, body.ts, body.sn, sigma, replica)


def encode_vote_payload(sid: bytes, vote: Vote) -> bytes:
    buf = bytearray()
    put_vote(buf, sid, vote)
    return bytes(buf)


_HEAD = struct.Struct(">BI")
_U32 = struct.Struct(">I")
_TAIL = struct.Struct(">QQI")


def decode_vote_payload(payload: bytes) -> tuple[bytes, Vote]:
    """Same layout as ``read_vote`` followed by end-of-input, unpacked directly."""
    try:
        version, sid_len = _HEAD.unpack_from(payload, 0)
        if version != codec.VOTE_BODY_VERSION:
            raise CodecError(f"unknown vote body version {version:#x}")
        pos = 5
        sid = payload[pos:pos + sid_len]
        pos += sid_len
        (tx_len,) = _U32.unpack_from(payload, pos)
        pos += 4
        tx = payload[pos:pos + tx_len]
        pos += tx_len
        ts, sn, replica = _TAIL.unpack_from(payload, pos)
        pos += 20
        (sig_len,) = _U32.unpack_from(payload, pos)
        pos += 4
    except struct.error:
        raise CodecError("truncated vote") from None
    if len(sid) != sid_len or len(tx) != tx_len or pos + sig_len != len(payload):
        raise CodecError("vote length mismatch")
    return bytes(sid), Vote(bytes(tx), ts, sn, bytes(payload[pos:]), replica)


def vote_frame(sid: bytes, vote: Vote) -> bytes:
    return codec.encode_frame(codec.FrameTag.VOTE, encode_vote_payload(sid, vote))


VIEW_MAGIC = b"PODV"
VIEW_VERSION = 1
_NO_CONF = 0
_HAS_CONF = 1
_FINITE = 0
_INFINITE = 1


def _put_trace(buf: bytearray, trace: TransactionTrace) -> None:
    put_bytes(buf, trace.tx)
    put_u64(buf, trace.r_min)
    if trace.r_max is INF:
        buf.append(_INFINITE)
    else:
        buf.append(_FINITE)
        put_u64(buf, trace.r_max)
    if trace.r_conf is None:
        buf.append(_NO_CONF)
    else:
        buf.append(_HAS_CONF)
        put_u64(buf, trace.r_conf)


def _read_trace(reader: Reader) -> TransactionTrace:
    tx = reader.lp_bytes()
    r_min = reader.u64()
    flag = reader.u8()
    if flag == _INFINITE:
        r_max: MaxRound = INF
    elif flag == _FINITE:
        r_max = reader.u64()
    else:
        raise CodecError(f"bad r_max flag {flag}")
    flag = reader.u8()
    if flag == _NO_CONF:
        r_conf = None
    elif flag == _HAS_CONF:
        r_conf = reader.u64()
    else:
        raise CodecError(f"bad r_conf flag {flag}")
    return TransactionTrace(tx, r_min, r_max, r_conf)


def put_certificates(buf: bytearray, sid: bytes, certs: Certificates) -> None:
    put_u32(buf, len(certs.c_pp))
    for replica in sorted(certs.c_pp):
        put_u32(buf, replica)
        put_vote(buf, sid, certs.c_pp[replica])
    put_u32(buf, len(certs.c_tx))
    for tx in sorted(certs.c_tx):
        put_bytes(buf, tx)
        votes = certs.c_tx[tx]
        put_u32(buf, len(votes))
        for replica in sorted(votes):
            put_u32(buf, replica)
            put_vote(buf, sid, votes[replica])


def read_certificates(reader: Reader) -> tuple[bytes | None, Certificates]:
    sids: set[bytes] = set()
    c_pp: dict[int, Vote] = {}
    for _ in range(reader.u32()):
        replica = reader.u32()
        sid, vote = read_vote(reader)
        sids.add(sid)
        c_pp[replica] = vote
    c_tx: dict[bytes, dict[int, Vote]] = {}
    for _ in range(reader.u32()):
        tx = reader.lp_bytes()
        per: dict[int, Vote] = {}
        for _ in range(reader.u32()):
            replica = reader.u32()
            sid, vote = read_vote(reader)
            sids.add(sid)
            per[replica] = vote
        c_tx[tx] = per
    if len(sids) > 1:
        raise CodecError("certificates mix session identifiers")
    return (sids.pop() if sids else None), Certificates(c_pp, c_tx)


def encode_view(sid: bytes, data: PodData, certs: Certificates) -> bytes:
    """Versioned serialization of a (PodData, Certificates) pair."""
    buf = bytearray(VIEW_MAGIC)
    buf.append(VIEW_VERSION)
    put_bytes(buf, sid)
    buf.append(1 if data.heartbeats_filtered else 0)
    put_u64(buf, data.r_perf)
    put_u32(buf, len(data.traces))
    for tx in sorted(data.traces):
        _put_trace(buf, data.traces[tx])
    put_certificates(buf, sid, certs)
    return bytes(buf)


def decode_view(blob: bytes) -> tuple[bytes, PodData, Certificates]:
    reader = Reader(blob)
    if reader.take(4) != VIEW_MAGIC:
        raise CodecError("not a pod view file")
    version = reader.u8()
    if version != VIEW_VERSION:
        raise CodecError(f"unsupported view version {version}")
    sid = reader.lp_bytes()
    filtered = reader.u8() == 1
    r_perf = reader.u64()
    traces: dict[bytes, TransactionTrace] = {}
    for _ in range(reader.u32()):
        trace = _read_trace(reader)
        if trace.tx in traces:
            raise CodecError("duplicate trace in view")
        traces[trace.tx] = trace
    cert_sid, certs = read_certificates(reader)
    reader.expect_end()
    if cert_sid is not None and cert_sid != sid:
        raise CodecError("certificate sid differs from view sid")
    return sid, PodData(traces, r_perf, filtered), certs


TRANSCRIPT_MAGIC = b"PODT"


def encode_transcript(sid: bytes, votes: Iterable[Vote]) -> bytes:
    votes = list(votes)
    buf = bytearray(TRANSCRIPT_MAGIC)
    buf.append(VIEW_VERSION)
    put_bytes(buf, sid)
    put_u32(buf, len(votes))
    for vote in votes:
        put_vote(buf, sid, vote)
    return bytes(buf)


def decode_transcript(blob: bytes) -> tuple[bytes, list[Vote]]:
    reader = Reader(blob)
    if reader.take(4) != TRANSCRIPT_MAGIC:
        raise CodecError("not a transcript file")
    if reader.u8() != VIEW_VERSION:
        raise CodecError("unsupported transcript version")
    sid = reader.lp_bytes()
    votes = []
    for _ in range(reader.u32()):
        vote_sid, vote = read_vote(reader)
        if vote_sid != sid:
            raise CodecError("transcript vote carries a foreign sid")
        votes.append(vote)
    reader.expect_end()
    return sid, votes
