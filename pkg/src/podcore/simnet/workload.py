"""Random workloads, declarative scenarios and seed sweeps."""
from __future__ import annotations

import json
import random
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

from ..types import ConfigurationError, FaultProfile, check_profile
from .adversary import Behavior, Kind
from .engine import SimConfig, Simulation
from .properties import PROPERTIES, PropertyChecker, PropertyReport

SWEEP_KINDS = (Kind.EQUIVOCATE_SN, Kind.OMIT_ALL, Kind.STALE_TS)


@dataclass
class RunResult:
    sim: Simulation
    report: PropertyReport
    writes: dict[bytes, int]
    blamed: set[int]


def default_rounds(delta: int) -> int:
    return 6 * delta + 20


def run_random(
    config: SimConfig,
    clients: int = 3,
    late_joiners: int = 1,
    write_prob: float = 0.5,
    validity_samples: int = 1,
) -> RunResult:
    """Honest clients write unique txs at random rounds; every client reads every round."""
    sim = Simulation(config)
    wl = random.Random(f"workload:{config.seed}")
    names = [f"c{i}" for i in range(clients)]
    for name in names:
        sim.add_client(name)
    for k in range(late_joiners):
        sim.add_client(f"late{k}", join_round=wl.randint(1, max(1, config.max_rounds // 2)))
    checker = PropertyChecker(sim, validity_samples=validity_samples)
    last_write = config.max_rounds - 2 * config.delta
    counter = 0
    for r in range(1, last_write + 1):
        if wl.random() < write_prob:
            writer = wl.choice(names)
            tx = f"tx/{config.seed}/{counter}".encode()
            counter += 1
            sim.at(r, _writer(sim, checker, writer, tx))
    sim.run()
    report = checker.finish()
    return RunResult(sim, report, dict(checker.writes), checker.blamed)


def _writer(sim: Simulation, checker: PropertyChecker, name: str, tx: bytes):
    def act(r: int) -> None:
        checker.writes[tx] = r
        sim.clients[name].write(tx)
    return act


def draw_adversaries(profile: FaultProfile, rng: random.Random,
                     kinds: Sequence[Kind] = SWEEP_KINDS) -> list[Behavior]:
    """Fill the fault budget at random: up to beta Byzantine, the rest omission."""
    byz_kinds = [k for k in kinds if k in (Kind.EQUIVOCATE_SN, Kind.STALE_TS)]
    omit_kinds = [k for k in kinds if k not in byz_kinds]
    replicas = list(range(profile.n))
    rng.shuffle(replicas)
    out: list[Behavior] = []
    n_byz = rng.randint(0, profile.beta) if byz_kinds else 0
    for _ in range(n_byz):
        kind = rng.choice(byz_kinds)
        param = rng.choice(["", "dup"]) if kind is Kind.STALE_TS else ""
        out.append(Behavior(replicas.pop(), kind, param))
    room = profile.beta + profile.gamma - n_byz
    n_omit = rng.randint(0, room) if omit_kinds else 0
    for _ in range(n_omit):
        out.append(Behavior(replicas.pop(), rng.choice(omit_kinds)))
    return out


@dataclass
class SweepResult:
    runs: int = 0
    checked: dict[str, int] = field(default_factory=lambda: dict.fromkeys(PROPERTIES, 0))
    violations: dict[str, int] = field(default_factory=lambda: dict.fromkeys(PROPERTIES, 0))
    counterexamples: dict[str, str] = field(default_factory=dict)

    def add(self, report: PropertyReport) -> None:
        self.runs += 1
        for prop, count in report.checked.items():
            self.checked[prop] += count
        for v in report.violations:
            self.violations[v.prop] += 1
            self.counterexamples.setdefault(v.prop, v.detail)

    @property
    def ok(self) -> bool:
        return not any(self.violations.values())


def sweep(
    profiles: Iterable[FaultProfile],
    deltas: Iterable[int],
    seeds: Iterable[int],
    kinds: Sequence[Kind] = SWEEP_KINDS,
    jitter: bool = True,
    clients: int = 3,
    late_joiners: int = 1,
) -> SweepResult:
    result = SweepResult()
    seeds = list(seeds)
    for profile in profiles:
        for delta in deltas:
            for seed in seeds:
                result.add(run_sweep_seed(profile, delta, seed, kinds, jitter, clients,
                                          late_joiners).report)
    return result


def sweep_config(profile: FaultProfile, delta: int, seed: int,
                 kinds: Sequence[Kind] = SWEEP_KINDS, jitter: bool = True) -> SimConfig:
    rng = random.Random(f"sweep:{profile.n}:{profile.beta}:{profile.gamma}:{delta}:{seed}")
    return SimConfig(
        profile=profile,
        delta=delta,
        jitter=rng.randint(0, delta - 1) if jitter else 0,
        seed=seed,
        max_rounds=default_rounds(delta),
        adversaries=draw_adversaries(profile, rng, kinds),
        record_events=False,
    )


def run_sweep_seed(profile, delta, seed, kinds=SWEEP_KINDS, jitter=True, clients=3,
                   late_joiners=1) -> RunResult:
    config = sweep_config(profile, delta, seed, kinds, jitter)
    return run_random(config, clients=clients, late_joiners=late_joiners)


# -- declarative scenarios -------------------------------------------------


def config_from_dict(raw: dict) -> SimConfig:
    from .adversary import parse_behavior

    profile = check_profile(int(raw["n"]), int(raw.get("beta", 0)), int(raw.get("gamma", 0)))
    return SimConfig(
        profile=profile,
        delta=int(raw.get("delta", 1)),
        jitter=int(raw.get("jitter", 0)),
        seed=int(raw.get("seed", 0)),
        max_rounds=int(raw.get("rounds", 40)),
        adversaries=[parse_behavior(a) for a in raw.get("adversaries", [])],
        scheme=raw.get("scheme", "hmac-test"),
        skip_idle_heartbeat=bool(raw.get("skip_idle_heartbeat", False)),
    )


class ScenarioError(AssertionError):
    """A scripted assertion failed; carries the run for inspection."""

    def __init__(self, message: str, sim: Simulation) -> None:
        super().__init__(message)
        self.sim = sim


def run_scenario(scenario: dict, config: SimConfig | None = None) -> RunResult:
    """Run ``{"config": {...}, "actions": [{"round", "actor", "action", "args"}]}``.

    Supported actions: ``connect`` (late join), ``write``, ``read`` (records the
    view), and ``assert`` with ``confirmed`` / ``absent`` / ``r_perf_at_least``.
    Actors named in any action are honest clients connected before round 0
    unless they first appear in a ``connect`` action.
    """
    config = config or config_from_dict(scenario.get("config", {"n": 4}))
    actions = scenario.get("actions", [])
    sim = Simulation(config)
    late = {a["actor"]: int(a["round"]) for a in actions if a.get("action") == "connect"}
    for actor in sorted({a["actor"] for a in actions}):
        sim.add_client(actor, join_round=late.get(actor))
    checker = PropertyChecker(sim)
    reads: list[dict] = []
    failures: list[str] = []
    for a in actions:
        kind = a["action"]
        if kind not in ("connect", "write", "read", "assert"):
            raise ConfigurationError(f"unknown scenario action {kind!r}")
        if kind != "connect":
            sim.at(int(a["round"]), _scripted(sim, checker, a, reads, failures))
    sim.run()
    report = checker.finish()
    if failures:
        raise ScenarioError("; ".join(failures), sim)
    result = RunResult(sim, report, dict(checker.writes), checker.blamed)
    result.reads = reads  # type: ignore[attr-defined]
    return result


def _scripted(sim, checker, action, reads, failures):
    actor, kind, args = action["actor"], action["action"], action.get("args", {})

    def act(r: int) -> None:
        client = sim.clients[actor]
        if kind == "write":
            tx = args["tx"].encode()
            checker.writes[tx] = r
            client.write(tx)
        elif kind == "read":
            data = client.read_data()
            reads.append({"round": r, "actor": actor, "r_perf": data.r_perf,
                          "traces": {tx.decode(errors="replace"): [t.r_min, str(t.r_max), t.r_conf]
                                     for tx, t in sorted(data.traces.items())}})
        else:
            data = client.read_data()
            if "confirmed" in args:
                trace = data.traces.get(args["confirmed"].encode())
                if trace is None or trace.r_conf is None:
                    failures.append(f"round {r}: {actor} has not confirmed {args['confirmed']}")
            if "absent" in args and args["absent"].encode() in data.traces:
                failures.append(f"round {r}: {actor} unexpectedly holds {args['absent']}")
            if "r_perf_at_least" in args and data.r_perf < int(args["r_perf_at_least"]):
                failures.append(f"round {r}: {actor} r_perf {data.r_perf} too low")
    return act


def load_scenario(path: str | Path) -> dict:
    return json.loads(Path(path).read_text())
