"""Blame assignment from partial transcripts.

``identify`` names replicas that signed two different votes under one
sequence number. ``identify_sequencer`` decides whether a bidset sequencer
censored a timely bid, given the certificate for that bid and the signed BIDS
message the consumers acted on.
"""
from __future__ import annotations

import enum
from collections import defaultdict
from dataclasses import dataclass, field
from typing import Iterable, Mapping

from . import bidset
from .codec import CodecError, Reader, put_bytes, put_u32
from .crypto import SignatureScheme
from .types import Certificates, FaultProfile, Pki, Vote, median_of, put_vote, read_vote


def identify(votes: Iterable[Vote], pki: Pki) -> set[int]:
    slots: dict[tuple[int, int], set[tuple[bytes, int]]] = defaultdict(set)
    for vote in set(votes):
        if pki.verify_vote(vote):
            slots[(vote.replica, vote.sn)].add((vote.tx, vote.ts))
    return {replica for (replica, _), seen in slots.items() if len(seen) > 1}


def transcript_of(*sources) -> list[Vote]:
    """Flatten certificates, vote lists and client evidence into one vote list."""
    out: list[Vote] = []
    for source in sources:
        if isinstance(source, Certificates):
            out.extend(source.all_votes())
            out.extend(source.c_pp.values())
        elif isinstance(source, tuple) and len(source) == 2 and isinstance(source[1], Certificates):
            out.extend(source[1].all_votes())
        elif hasattr(source, "evidence") and hasattr(source, "c_tx"):
            out.extend(v for per in source.c_tx.values() for v in per.values())
            for item in source.evidence:
                out.append(item.vote)
                if item.prior is not None:
                    out.append(item.prior)
        else:
            out.extend(source)
    return out


class SequencerVerdict(enum.Enum):
    GUILTY = "guilty"
    NOT_GUILTY = "not_guilty"
    NOT_VALID_EVIDENCE = "not_valid_evidence"

    def __bool__(self) -> bool:
        return self is SequencerVerdict.GUILTY


@dataclass(frozen=True)
class SequencerEvidence:
    c_tx: Mapping[int, Vote]
    bids: tuple[bytes, ...]
    c_bid: Mapping[int, Vote]
    sigma: bytes
    ssid: bytes
    reason: str = field(default="", compare=False)


def identify_sequencer(
    evidence: SequencerEvidence,
    t0: int,
    delta: int,
    pki: Pki,
    profile: FaultProfile,
    sequencer_pk: bytes,
    scheme: SignatureScheme | None = None,
) -> SequencerVerdict:
    scheme = scheme or pki.scheme
    msg = bidset.BidsMessage(tuple(evidence.bids), evidence.c_bid, evidence.sigma)
    if tuple(sorted(set(msg.bids))) != msg.bids:
        return SequencerVerdict.NOT_VALID_EVIDENCE
    if not bidset.verify_bids(scheme, sequencer_pk, pki.sid, evidence.ssid, msg):
        return SequencerVerdict.NOT_VALID_EVIDENCE

    # Check 1: the certificate the sequencer signed must be made of real votes.
    for replica, vote in evidence.c_bid.items():
        if vote.replica != replica or not pki.verify_vote(vote):
            return SequencerVerdict.GUILTY

    # Check 2: the sequencer must have waited for past-perfection. Replicas
    # absent from the certificate count as round 0, as they do for a client.
    stamps = sorted(
        evidence.c_bid[j].ts if j in evidence.c_bid else 0 for j in range(profile.n)
    )
    stamps = [0] * profile.beta + stamps
    if median_of(stamps[: profile.alpha]) <= t0 + delta:
        return SequencerVerdict.GUILTY

    # Check 3: a bid confirmed by t0 + delta must be in the set.
    if len(evidence.c_tx) < profile.alpha:
        return SequencerVerdict.NOT_VALID_EVIDENCE
    votes = list(evidence.c_tx.values())
    target = votes[0].tx
    for replica, vote in evidence.c_tx.items():
        if vote.tx != target or vote.replica != replica or not pki.verify_vote(vote):
            return SequencerVerdict.NOT_VALID_EVIDENCE
    # Only bids of this auction are owed inclusion; anything else would let a
    # heartbeat or a foreign transaction frame an honest sequencer.
    if not bidset.is_bid_tx(evidence.ssid, target):
        return SequencerVerdict.NOT_VALID_EVIDENCE
    r_conf = median_of(sorted(v.ts for v in votes))
    if r_conf <= t0 + delta and target not in msg.bids:
        return SequencerVerdict.GUILTY
    return SequencerVerdict.NOT_GUILTY


def sequencer_equivocated(
    first: bidset.BidsMessage,
    second: bidset.BidsMessage,
    pki: Pki,
    ssid: bytes,
    sequencer_pk: bytes,
    scheme: SignatureScheme | None = None,
) -> bool:
    """Two validly signed BIDS messages with different bid sets."""
    scheme = scheme or pki.scheme
    return (
        first.bids != second.bids
        and bidset.verify_bids(scheme, sequencer_pk, pki.sid, ssid, first)
        and bidset.verify_bids(scheme, sequencer_pk, pki.sid, ssid, second)
    )


def assemble_evidence(
    holder, result_msg: bidset.BidsMessage, bid_tx: bytes, ssid: bytes
) -> SequencerEvidence:
    """Evidence for a censored ``bid_tx`` from any client's certificates."""
    c_tx = dict(holder.c_tx.get(bid_tx, {}))
    return SequencerEvidence(c_tx, result_msg.bids, dict(result_msg.c_bid), result_msg.sigma, ssid)


# -- evidence file --------------------------------------------------------

EVIDENCE_MAGIC = b"PODE"
EVIDENCE_VERSION = 1


def encode_evidence(sid: bytes, ev: SequencerEvidence) -> bytes:
    buf = bytearray(EVIDENCE_MAGIC)
    buf.append(EVIDENCE_VERSION)
    put_bytes(buf, sid)
    put_bytes(buf, ev.ssid)
    put_u32(buf, len(ev.c_tx))
    for replica in sorted(ev.c_tx):
        put_vote(buf, sid, ev.c_tx[replica])
    bidset._put_set_and_cert(buf, sid, ev.bids, ev.c_bid)
    put_bytes(buf, ev.sigma)
    return bytes(buf)


def decode_evidence(blob: bytes) -> tuple[bytes, SequencerEvidence]:
    reader = Reader(blob)
    if reader.take(4) != EVIDENCE_MAGIC:
        raise CodecError("not an evidence file")
    if reader.u8() != EVIDENCE_VERSION:
        raise CodecError("unsupported evidence version")
    sid = reader.lp_bytes()
    ssid = reader.lp_bytes()
    c_tx: dict[int, Vote] = {}
    for _ in range(reader.u32()):
        vote_sid, vote = read_vote(reader)
        if vote_sid != sid:
            raise CodecError("evidence vote carries a foreign sid")
        c_tx[vote.replica] = vote
    bids, c_bid = bidset.read_set_and_cert(reader, sid)
    sigma = reader.lp_bytes()
    reader.expect_end()
    return sid, SequencerEvidence(c_tx, bids, c_bid, sigma, ssid)
