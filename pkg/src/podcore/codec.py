"""Canonical byte layouts for signed vote bodies and wire frames.

Every integer is big-endian and fixed width; every variable-length field is a
4-byte length prefix followed by the raw bytes. The same bytes are signed by
replicas, carried in simnet recordings and written to TCP sockets.
"""
from __future__ import annotations

import struct
from dataclasses import dataclass
from enum import IntEnum

VOTE_BODY_VERSION = 0x01
MAX_FIELD_LEN = 0xFFFFFFFF
MAX_U64 = 0xFFFFFFFFFFFFFFFF

HEARTBEAT_PREFIX = b"HB"

_U32 = struct.Struct(">I")
_U64 = struct.Struct(">Q")


class CodecError(ValueError):
    """Raised for malformed or truncated encodings."""


class EncodingOverflow(CodecError):
    """A field does not fit in its length prefix or integer width."""


class FrameTag(IntEnum):
    CONNECT = 0x01
    WRITE = 0x02
    VOTE = 0x03


def put_bytes(buf: bytearray, value: bytes) -> None:
    if len(value) > MAX_FIELD_LEN:
        raise EncodingOverflow(f"field of {len(value)} bytes exceeds 2^32-1")
    buf += _U32.pack(len(value))
    buf += value


def put_u32(buf: bytearray, value: int) -> None:
    if not 0 <= value <= MAX_FIELD_LEN:
        raise EncodingOverflow(f"{value} does not fit in 32 bits")
    buf += _U32.pack(value)


def put_u64(buf: bytearray, value: int) -> None:
    if not 0 <= value <= MAX_U64:
        raise EncodingOverflow(f"{value} does not fit in 64 bits")
    buf += _U64.pack(value)


class Reader:
    """Cursor over a byte string; every read checks bounds."""

    def __init__(self, data: bytes, offset: int = 0) -> None:
        self.data = memoryview(data)
        self.pos = offset

    def remaining(self) -> int:
        return len(self.data) - self.pos

    def take(self, count: int) -> bytes:
        if count < 0 or self.pos + count > len(self.data):
            raise CodecError("truncated input")
        chunk = bytes(self.data[self.pos:self.pos + count])
        self.pos += count
        return chunk

    def u8(self) -> int:
        return self.take(1)[0]

    def u32(self) -> int:
        return _U32.unpack(self.take(4))[0]

    def u64(self) -> int:
        return _U64.unpack(self.take(8))[0]

    def lp_bytes(self) -> bytes:
        return self.take(self.u32())

    def expect_end(self) -> None:
        if self.remaining():
            raise CodecError(f"{self.remaining()} trailing bytes")


@dataclass(frozen=True)
class SignedVoteBody:
    sid: bytes
    tx: bytes
    ts: int
    sn: int


_BODY_HEAD = struct.Struct(">BI")
_BODY_TAIL = struct.Struct(">QQ")


def encode_vote_body(sid: bytes, tx: bytes, ts: int, sn: int) -> bytes:
    if len(sid) > MAX_FIELD_LEN or len(tx) > MAX_FIELD_LEN:
        raise EncodingOverflow("vote field exceeds 2^32-1 bytes")
    try:
        tail = _BODY_TAIL.pack(ts, sn)
    except struct.error:
        raise EncodingOverflow(f"ts={ts} or sn={sn} does not fit in 64 bits") from None
    return b"".join(
        (_BODY_HEAD.pack(VOTE_BODY_VERSION, len(sid)), sid, _U32.pack(len(tx)), tx, tail)
    )


def encode_body(body: SignedVoteBody) -> bytes:
    return encode_vote_body(body.sid, body.tx, body.ts, body.sn)


def read_vote_body(reader: Reader) -> SignedVoteBody:
    version = reader.u8()
    if version != VOTE_BODY_VERSION:
        raise CodecError(f"unknown vote body version {version:#x}")
    sid = reader.lp_bytes()
    tx = reader.lp_bytes()
    ts = reader.u64()
    sn = reader.u64()
    return SignedVoteBody(sid, tx, ts, sn)


def decode_vote_body(data: bytes) -> SignedVoteBody:
    reader = Reader(data)
    body = read_vote_body(reader)
    reader.expect_end()
    return body


def heartbeat_tx(round_: int) -> bytes:
    return HEARTBEAT_PREFIX + _U64.pack(round_)


def is_heartbeat(tx: bytes) -> bool:
    # A 10-byte client tx starting with b"HB" looks the same; reads can opt out.
    return len(tx) == len(HEARTBEAT_PREFIX) + 8 and tx.startswith(HEARTBEAT_PREFIX)


# -- frames ---------------------------------------------------------------

FRAME_HEADER = struct.Struct(">BI")


def encode_frame(tag: FrameTag, payload: bytes) -> bytes:
    if len(payload) > MAX_FIELD_LEN:
        raise EncodingOverflow("frame payload too large")
    return FRAME_HEADER.pack(int(tag), len(payload)) + payload


def decode_frame(data: bytes) -> tuple[FrameTag, bytes]:
    """Decode exactly one frame."""
    if len(data) < FRAME_HEADER.size:
        raise CodecError("truncated frame header")
    tag, length = FRAME_HEADER.unpack_from(data)
    if len(data) != FRAME_HEADER.size + length:
        raise CodecError("frame length mismatch")
    try:
        return FrameTag(tag), data[FRAME_HEADER.size:]
    except ValueError:
        raise CodecError(f"unknown frame tag {tag:#x}") from None


def connect_payload(sid: bytes) -> bytes:
    buf = bytearray()
    put_bytes(buf, sid)
    return bytes(buf)


def write_payload(sid: bytes, tx: bytes) -> bytes:
    buf = bytearray()
    put_bytes(buf, sid)
    put_bytes(buf, tx)
    return bytes(buf)


def parse_connect(payload: bytes) -> bytes:
    reader = Reader(payload)
    sid = reader.lp_bytes()
    reader.expect_end()
    return sid


def parse_write(payload: bytes) -> tuple[bytes, bytes]:
    reader = Reader(payload)
    sid = reader.lp_bytes()
    tx = reader.lp_bytes()
    reader.expect_end()
    return sid, tx
