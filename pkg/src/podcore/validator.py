"""Non-interactive validity check for a (PodData, Certificates) pair.

The certificates are replayed through a fresh ``ClientLogic``; the pod data is
valid only if that replay reproduces it exactly.
"""
from __future__ import annotations

from dataclasses import dataclass

from .client import ClientLogic, Outcome, compute_tx_set, past_perfect_round
from .types import Certificates, FaultProfile, PodData, Pki

BAD_SIG = "BAD_SIG"
SN_GAP = "SN_GAP"
STALE_TS = "STALE_TS"
DUP_TS_CONFLICT = "DUP_TS_CONFLICT"
TRACESET_MISMATCH = "TRACESET_MISMATCH"
RPERF_MISMATCH = "RPERF_MISMATCH"
CPP_NOT_IN_CTX = "CPP_NOT_IN_CTX"
CPP_NOT_MAX_SN = "CPP_NOT_MAX_SN"

REASONS = (
    BAD_SIG,
    SN_GAP,
    STALE_TS,
    DUP_TS_CONFLICT,
    TRACESET_MISMATCH,
    RPERF_MISMATCH,
    CPP_NOT_IN_CTX,
    CPP_NOT_MAX_SN,
)


@dataclass(frozen=True)
class Verdict:
    ok: bool
    reason: str | None = None
    detail: str = ""

    def __bool__(self) -> bool:
        return self.ok


def check(data: PodData, certs: Certificates, pki: Pki, profile: FaultProfile) -> Verdict:
    logic = ClientLogic(pki, profile, filter_heartbeats=data.heartbeats_filtered)
    votes = certs.all_votes()
    for vote in votes:
        if not 0 <= vote.replica < profile.n:
            return Verdict(False, BAD_SIG, f"unknown replica {vote.replica}")
    # The same (replica, sn) slot carrying two different votes is a gap in
    # the chain from the verifier's point of view: one of them cannot replay.
    votes.sort(key=lambda v: (v.replica, v.sn))
    for vote in votes:
        if not pki.verify_vote(vote):
            return Verdict(False, BAD_SIG, f"replica {vote.replica} sn {vote.sn}")
        if vote.sn != logic.next_sn[vote.replica]:
            return Verdict(
                False,
                SN_GAP,
                f"replica {vote.replica}: sn {vote.sn}, expected {logic.next_sn[vote.replica]}",
            )
        outcome = logic._check(vote)
        if outcome == Outcome.STALE_TS:
            return Verdict(False, STALE_TS, f"replica {vote.replica} sn {vote.sn}")
        if outcome == Outcome.DUP_TS_CONFLICT:
            return Verdict(False, DUP_TS_CONFLICT, f"replica {vote.replica} sn {vote.sn}")
        if outcome != Outcome.ACCEPTED:
            return Verdict(False, SN_GAP, f"replica {vote.replica} sn {vote.sn}: {outcome}")

    for replica, vote in certs.c_pp.items():
        held = certs.c_tx.get(vote.tx, {}).get(replica)
        if held != vote or vote.replica != replica:
            return Verdict(False, CPP_NOT_IN_CTX, f"replica {replica}")
        if vote.sn != logic.next_sn[replica] - 1:
            return Verdict(False, CPP_NOT_MAX_SN, f"replica {replica}")
    for replica in range(profile.n):
        if logic.next_sn[replica] and replica not in certs.c_pp:
            return Verdict(False, CPP_NOT_IN_CTX, f"replica {replica} missing from C_pp")

    expected = compute_tx_set(logic.tsps, logic.mrt, profile, data.heartbeats_filtered)
    if dict(data.traces) != expected:
        return Verdict(False, TRACESET_MISMATCH, _trace_diff(data.traces, expected))
    r_perf = past_perfect_round(logic.mrt, profile)
    if data.r_perf != r_perf:
        return Verdict(False, RPERF_MISMATCH, f"claimed {data.r_perf}, recomputed {r_perf}")
    return Verdict(True)


def valid(data: PodData, certs: Certificates, pki: Pki, profile: FaultProfile) -> bool:
    return check(data, certs, pki, profile).ok


def _trace_diff(claimed, expected) -> str:
    for tx in sorted(set(claimed) | set(expected)):
        if claimed.get(tx) != expected.get(tx):
            return f"tx {tx!r}: claimed {claimed.get(tx)}, recomputed {expected.get(tx)}"
    return ""
