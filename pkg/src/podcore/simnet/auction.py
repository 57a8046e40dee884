"""Bidset runs inside the simulator."""
from __future__ import annotations

import random
from dataclasses import dataclass, field

from ..accountability import (
    SequencerEvidence,
    SequencerVerdict,
    assemble_evidence,
    identify_sequencer,
    sequencer_equivocated,
)
from ..bidset import Bidder, BidsetConfig, BidsMessage, Consumer, Result, Sequencer, bid_tx
from ..types import FaultProfile
from .adversary import Behavior
from .engine import SimConfig, Simulation


@dataclass
class AuctionReport:
    t0: int
    bound: int
    delta: int
    mode: str
    bid_txs: list[bytes]
    results: dict[str, Result]
    sequencer_round: int | None
    published: list[BidsMessage]
    verdicts: dict[bytes, SequencerVerdict] = field(default_factory=dict)
    evidence: dict[bytes, SequencerEvidence] = field(default_factory=dict)
    equivocation_proved: bool = False
    sequencer_pk: bytes = b""
    sim: Simulation | None = None

    def termination_round(self) -> int | None:
        if len(self.results) == 0 or any(r is None for r in self.results.values()):
            return None
        return max(r.round for r in self.results.values())

    def agreed(self) -> bool:
        sets = {r.bids for r in self.results.values() if not r.empty}
        return len(sets) <= 1


def parse_mode(text: str) -> tuple[str, bytes | None]:
    """``honest``, ``silent``, ``equivocate`` or ``censor:<bid>``."""
    mode, _, arg = text.partition(":")
    if mode == "censor":
        if not arg:
            raise ValueError("censor mode needs a bid, e.g. censor:42")
        return mode, arg.encode()
    if mode not in ("honest", "silent", "equivocate") or arg:
        raise ValueError(f"unknown sequencer mode {text!r}")
    return mode, None


def run_auction(
    profile: FaultProfile,
    t0: int,
    bound: int,
    bids: list[bytes],
    sequencer: str = "honest",
    delta: int | None = None,
    jitter: int = 0,
    seed: int = 0,
    consumers: int = 2,
    adversaries: list[Behavior] | None = None,
    ssid: bytes = b"auction-1",
    late: list[tuple[int, bytes]] = (),
) -> AuctionReport:
    """Bidders submit at ``t0``; returns each consumer's Result and accountability verdicts.

    ``late`` holds extra (round, bid) submissions made by one more bidder.
    """
    mode, censored = parse_mode(sequencer)
    delta = bound if delta is None else delta
    rounds = t0 + 3 * bound + delta + 8
    config = SimConfig(profile=profile, delta=delta, jitter=jitter, seed=seed,
                       max_rounds=rounds, adversaries=adversaries or [], bound=bound,
                       record_events=False)
    sim = Simulation(config)
    key_rng = random.Random(f"sequencer:{seed}")
    seq_keys = sim.scheme.keygen(key_rng)
    cfg = BidsetConfig(t0, bound, ssid, seq_keys.pk)

    bidders = [Bidder(sim.add_client(f"bidder{i}"), cfg) for i in range(len(bids))]
    seq = Sequencer(sim.add_client("sequencer"), cfg, sim.scheme, seq_keys.sk, mode, censored)
    cons = {f"consumer{i}": Consumer(sim.add_client(f"consumer{i}"), cfg, sim.scheme)
            for i in range(consumers)}

    def submit(r: int) -> None:
        for bidder, bid in zip(bidders, bids):
            bidder.submit_bid(bid)

    sim.at(t0, submit)
    if late:
        straggler = Bidder(sim.add_client("late-bidder"), cfg)
        for round_, bid in late:
            sim.at(round_, lambda r, bid=bid: straggler.submit_bid(bid))
    sim.every_round(seq.poll)
    for consumer in cons.values():
        sim.every_round(consumer.poll)
    sim.run()

    report = AuctionReport(
        t0, bound, delta, sequencer,
        [bid_tx(ssid, b) for b in bids] + [bid_tx(ssid, b) for _, b in late],
        {name: c.result for name, c in cons.items()}, seq.done_round, list(seq.published),
        sequencer_pk=seq_keys.pk, sim=sim,
    )
    _judge(report, sim, cfg, cons)
    return report


def _judge(report: AuctionReport, sim: Simulation, cfg: BidsetConfig, cons: dict) -> None:
    """Build evidence from the first consumer and run the sequencer check for each bid."""
    name = sorted(cons)[0]
    consumer = cons[name]
    result = consumer.result
    if result is None or result.empty:
        return
    msg = BidsMessage(result.bids, result.c_bid, result.sigma)
    for tx in report.bid_txs:
        ev = assemble_evidence(consumer.pod, msg, tx, cfg.ssid)
        report.evidence[tx] = ev
        report.verdicts[tx] = identify_sequencer(
            ev, cfg.t0, cfg.delta, sim.pki, sim.profile, cfg.sequencer_pk
        )
    if consumer.equivocation:
        first, *rest = consumer.equivocation
        report.equivocation_proved = any(
            sequencer_equivocated(first, other, sim.pki, cfg.ssid, cfg.sequencer_pk)
            for other in rest
        )

