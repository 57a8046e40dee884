"""A hand-built safety violation with beta+1 colluding replicas.

Profile (9, 1, 1) with replicas R0 and R1 Byzantine (one more than beta) and
asynchronous links. Both colluders keep two logs: the one shown to ``c1``
never contains the target tx, the one shown to ``c2`` votes it at round 1.
Honest R2 and R3 also vote it at round 1, but their links to ``c1`` are cut.
R4-R6 only see the write at round 50 and R7, R8 never do.

``c1`` ends up past-perfect at round 11 without the tx, while ``c2`` confirms
it at round 1. Both views are valid, and the colluders signed two different
votes at the same sequence number, which ``identify`` finds in the union of
the two certificate sets.
"""
from __future__ import annotations

from dataclasses import dataclass

from ..accountability import identify, transcript_of
from ..types import Certificates, PodData, check_profile
from ..validator import check
from .adversary import HONEST, OMIT, Behavior, EquivocatingReplica, Kind
from .engine import DROP, SimConfig, Simulation, replica_id

TARGET = b"contested-tx"
COLLUDERS = (0, 1)
EARLY = (2, 3)
LATE = (4, 5, 6)
NEVER = (7, 8)


@dataclass
class CraftedReport:
    view1: tuple[PodData, Certificates]
    view2: tuple[PodData, Certificates]
    valid1: bool
    valid2: bool
    past_perfection_violated: bool
    blamed: set[int]
    colluders: set[int]
    beta: int
    sim: Simulation


def _policy(tx: bytes, group: int) -> tuple[str, int]:
    if tx == TARGET and group == 0:
        return OMIT, 0
    return HONEST, 0


def run_crafted(seed: int = 0, read1: int = 12, read2: int = 55) -> CraftedReport:
    profile = check_profile(9, 1, 1)
    config = SimConfig(
        profile=profile, delta=1, seed=seed, max_rounds=read2,
        adversaries=[Behavior(j, Kind.EQUIVOCATE_SN) for j in COLLUDERS],
        budget_override=True,
    )
    sim = Simulation(config)
    groups = {"c1": 0, "c2": 1}
    for j in COLLUDERS:
        sim.replicas[j] = EquivocatingReplica(
            j, sim.keys[j].sk, sim.pki, sim._replica_sender(j), sim.round,
            rng=sim.rng, policy=_policy, assign=lambda client: groups.get(str(client), 1),
        )
    c1 = sim.add_client("c1")
    c2 = sim.add_client("c2")
    writer = sim.add_client("w", honest=False)
    for j in COLLUDERS + EARLY:
        sim.link_delay[("w", replica_id(j))] = 1
    for j in LATE:
        sim.link_delay[("w", replica_id(j))] = 50
    for j in NEVER:
        sim.link_delay[("w", replica_id(j))] = DROP
    for j in EARLY:
        sim.link_delay[(replica_id(j), "c1")] = 10_000

    views: dict[str, tuple[PodData, Certificates]] = {}
    sim.at(0, lambda r: writer.write(TARGET))
    sim.at(read1, lambda r: views.__setitem__("c1", c1.read()))
    sim.at(read2, lambda r: views.__setitem__("c2", c2.read()))
    sim.run()

    d1, d2 = views["c1"], views["c2"]
    trace2 = d2[0].traces.get(TARGET)
    violated = (
        TARGET not in d1[0].traces
        and trace2 is not None
        and trace2.r_conf is not None
        and trace2.r_conf < d1[0].r_perf
    )
    blamed = identify(transcript_of(d1, d2), sim.pki)
    return CraftedReport(
        d1, d2,
        bool(check(*d1, sim.pki, profile)), bool(check(*d2, sim.pki, profile)),
        violated, blamed, set(COLLUDERS), profile.beta, sim,
    )
