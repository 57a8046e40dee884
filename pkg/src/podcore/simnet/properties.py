"""Executable pod properties over the reads recorded during a simulation."""
from __future__ import annotations

import random
from dataclasses import dataclass, field

from ..accountability import identify
from ..types import INF, PodData
from ..validator import check as validate
from .engine import Simulation

PROPERTIES = (
    "confirmation_within_2delta",
    "past_perfection_within_delta",
    "past_perfection_safety",
    "confirmation_bounds",
    "trace_invariant",
    "theta_timeliness",
    "monotonicity",
    "validity",
    "no_framing",
    "replica_log",
    "delivery_bound",
)


@dataclass
class Violation:
    prop: str
    detail: str


@dataclass
class PropertyReport:
    checked: dict[str, int] = field(default_factory=lambda: dict.fromkeys(PROPERTIES, 0))
    violations: list[Violation] = field(default_factory=list)

    def fail(self, prop: str, detail: str) -> None:
        self.violations.append(Violation(prop, detail))

    def tick(self, prop: str, count: int = 1) -> None:
        self.checked[prop] += count

    @property
    def ok(self) -> bool:
        return not self.violations

    def failed(self, prop: str) -> list[Violation]:
        return [v for v in self.violations if v.prop == prop]

    def summary(self) -> dict[str, dict]:
        out = {}
        for prop in PROPERTIES:
            bad = self.failed(prop)
            out[prop] = {
                "checked": self.checked[prop],
                "violations": len(bad),
                "example": bad[0].detail if bad else None,
            }
        return out


@dataclass
class View:
    client: str
    round: int
    data: PodData


class PropertyChecker:
    """Attach to a simulation before it runs; call ``finish`` afterwards.

    ``writes`` maps each honestly written tx to its write round and is filled
    in by the workload as writes happen.
    """

    def __init__(
        self, sim: Simulation, validity_samples: int = 1, max_violations: int = 50
    ) -> None:
        self.sim = sim
        self.delta = sim.config.delta
        self.report = PropertyReport()
        self.writes: dict[bytes, int] = {}
        self.views: list[View] = []
        self.last: dict[str, PodData] = {}
        self.max_violations = max_violations
        rng = random.Random(f"validity:{sim.config.seed}")
        horizon = max(1, sim.config.max_rounds)
        self.sample_rounds = {rng.randrange(horizon) for _ in range(validity_samples)}
        sim.every_round(self.observe)

    def _fail(self, prop: str, detail: str) -> None:
        if len(self.report.violations) < self.max_violations:
            self.report.fail(prop, f"seed={self.sim.config.seed} {detail}")
        else:
            self.report.violations.append(Violation(prop, "(suppressed)"))

    def observe(self, r: int) -> None:
        sim = self.sim
        for name in sorted(sim.honest_clients):
            client = sim.clients[name]
            joined = sim.join_round[name]
            if r < joined:
                continue
            data = client.read_data()
            self.views.append(View(name, r, data))
            self._check_view(name, joined, r, data)
            self._check_monotone(name, r, data)
            self.last[name] = data
            if r in self.sample_rounds:
                self._check_valid(name, r, data, client.certificates())

    def _check_view(self, name: str, joined: int, r: int, data: PodData) -> None:
        rep, d = self.report, self.delta
        initial = joined == 0
        if initial and r >= d:
            rep.tick("past_perfection_within_delta")
            if data.r_perf < r - d:
                self._fail("past_perfection_within_delta",
                           f"{name} round {r}: r_perf {data.r_perf} < {r - d}")
        for trace in data.traces.values():
            rep.tick("trace_invariant")
            if trace.r_conf is not None and not trace.r_min <= trace.r_conf <= trace.r_max:
                self._fail("trace_invariant", f"{name} round {r}: {trace}")
            if trace.r_min > trace.r_max:
                self._fail("trace_invariant", f"{name} round {r}: r_min > r_max in {trace}")
        for tx, w in self.writes.items():
            trace = data.traces.get(tx)
            if initial and r == w + 2 * d:
                rep.tick("confirmation_within_2delta")
                if trace is None or trace.r_conf is None:
                    self._fail("confirmation_within_2delta",
                               f"{name} round {r}: tx {tx!r} written at {w} unconfirmed")
            if trace is None:
                continue
            rep.tick("theta_timeliness")
            if trace.r_conf is not None and not w < trace.r_conf <= w + d:
                self._fail("theta_timeliness",
                           f"{name} round {r}: r_conf {trace.r_conf} outside ({w}, {w + d}]")
            if r >= max(w, joined) + 2 * d:
                if trace.r_max is INF or not w < trace.r_max <= w + d:
                    self._fail("theta_timeliness",
                               f"{name} round {r}: r_max {trace.r_max} outside ({w}, {w + d}]")
                elif trace.r_max - trace.r_min >= d:
                    self._fail("theta_timeliness",
                               f"{name} round {r}: r_max-r_min {trace.r_max - trace.r_min} >= {d}")

    def _check_monotone(self, name: str, r: int, data: PodData) -> None:
        prev = self.last.get(name)
        if prev is None:
            return
        self.report.tick("monotonicity")
        if data.r_perf < prev.r_perf:
            self._fail("monotonicity", f"{name} round {r}: r_perf {prev.r_perf} -> {data.r_perf}")
        for tx, old in prev.traces.items():
            new = data.traces.get(tx)
            if new is None:
                self._fail("monotonicity", f"{name} round {r}: tx {tx!r} disappeared")
            elif new.r_min < old.r_min or new.r_max > old.r_max or (
                old.r_conf is not None and new.r_conf is None
            ):
                self._fail("monotonicity", f"{name} round {r}: {old} -> {new}")

    def _check_valid(self, name: str, r: int, data, certs) -> None:
        sim = self.sim
        self.report.tick("validity")
        verdict = validate(data, certs, sim.pki, sim.profile)
        if not verdict:
            self._fail("validity", f"{name} round {r}: {verdict.reason} {verdict.detail}")

    # -- whole-run checks -------------------------------------------------

    def finish(self) -> PropertyReport:
        sim = self.sim
        rng = random.Random(f"final:{sim.config.seed}")
        name = rng.choice(sorted(sim.honest_clients))
        client = sim.clients[name]
        self._check_valid(name, sim.now - 1, client.read_data(), client.certificates())
        self._check_pairs()
        self._check_framing()
        self._check_replica_logs()
        self.report.tick("delivery_bound")
        if sim.max_honest_delay > sim.config.bound:
            self._fail("delivery_bound", f"delay {sim.max_honest_delay} > {sim.config.bound}")
        return self.report

    def _check_pairs(self) -> None:
        min_conf: dict[bytes, int] = {}
        max_conf: dict[bytes, int] = {}
        for view in self.views:
            for tx, trace in view.data.traces.items():
                if trace.r_conf is None:
                    continue
                if tx not in min_conf or trace.r_conf < min_conf[tx]:
                    min_conf[tx] = trace.r_conf
                if tx not in max_conf or trace.r_conf > max_conf[tx]:
                    max_conf[tx] = trace.r_conf
        by_conf = sorted(min_conf.items(), key=lambda kv: kv[1])
        for view in self.views:
            data = view.data
            self.report.tick("past_perfection_safety")
            for tx, conf in by_conf:
                if conf >= data.r_perf:
                    break
                if tx not in data.traces:
                    self._fail("past_perfection_safety",
                               f"{view.client} round {view.round} (r_perf {data.r_perf}) lacks "
                               f"tx {tx!r} confirmed elsewhere at {conf}")
            for tx, trace in data.traces.items():
                if tx not in min_conf:
                    continue
                self.report.tick("confirmation_bounds")
                if trace.r_min > min_conf[tx] or trace.r_max < max_conf[tx]:
                    self._fail("confirmation_bounds",
                               f"{view.client} round {view.round}: {trace} vs confirmed "
                               f"range [{min_conf[tx]}, {max_conf[tx]}]")

    def _check_framing(self) -> None:
        sim = self.sim
        votes = []
        for name in sorted(sim.honest_clients):
            client = sim.clients[name]
            votes.extend(v for per in client.c_tx.values() for v in per.values())
            for item in client.evidence:
                votes.append(item.vote)
                if item.prior is not None:
                    votes.append(item.prior)
        blamed = identify(votes, sim.pki)
        self.report.tick("no_framing")
        framed = blamed - sim.config.byzantine
        if framed:
            self._fail("no_framing", f"identify blamed honest replicas {sorted(framed)}")
        self.blamed = blamed

    def _check_replica_logs(self) -> None:
        sim = self.sim
        for j, replica in enumerate(sim.replicas):
            if j in sim.config.byzantine:
                continue
            self.report.tick("replica_log")
            entries = replica.state.log
            txs = [e.tx for e in entries]
            if [e.sn for e in entries] != list(range(len(entries))):
                self._fail("replica_log", f"R{j} sn gap")
            if any(a.ts > b.ts for a, b in zip(entries, entries[1:])):
                self._fail("replica_log", f"R{j} ts decreased")
            if len(set(txs)) != len(txs):
                self._fail("replica_log", f"R{j} duplicate tx")
