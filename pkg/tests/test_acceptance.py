"""Acceptance criteria 1-10, each reported as one PASS/FAIL line.

The simulator sweep is shared by criteria 1, 2, 3, 5, 6 and 10 and runs once
per module. Every test asserts its criterion, so a FAIL line also fails the
test.
"""
import asyncio
import dataclasses
import random
import time

import pytest

from podcore.accountability import SequencerVerdict
from podcore.client import max_possible_ts, min_possible_ts, monotone_merge, past_perfect_round
from podcore.simnet import run_sweep_seed
from podcore.simnet.auction import run_auction
from podcore.simnet.crafted import run_crafted
from podcore.transport import bench_profile, measure_readers
from podcore.types import INF, PodData, TransactionTrace, check_profile
from podcore.validator import valid
from helpers import harvest_views, rmax_oracle, rmin_oracle, rperf_oracle

pytestmark = pytest.mark.slow

PROFILES = [(5, 0, 1), (9, 1, 1)]
DELTAS = [1, 3, 5]
SEEDS = 200


@dataclasses.dataclass
class SweepTotals:
    runs: int = 0
    seconds: float = 0.0
    checked: dict = dataclasses.field(default_factory=dict)
    violations: dict = dataclasses.field(default_factory=dict)
    examples: dict = dataclasses.field(default_factory=dict)
    framed: list = dataclasses.field(default_factory=list)

    def count(self, prop: str) -> tuple[int, int]:
        return self.checked.get(prop, 0), self.violations.get(prop, 0)

    def line(self, *props: str) -> tuple[bool, str]:
        parts, ok = [], True
        for prop in props:
            checked, bad = self.count(prop)
            ok = ok and checked > 0 and bad == 0
            parts.append(f"{prop} {checked - bad}/{checked}")
            if bad:
                parts.append(f"first: {self.examples[prop]}")
        return ok, "; ".join(parts)


@pytest.fixture(scope="module")
def sweep() -> SweepTotals:
    totals = SweepTotals()
    start = time.perf_counter()
    for prof in PROFILES:
        profile = check_profile(*prof)
        for delta in DELTAS:
            for seed in range(SEEDS):
                result = run_sweep_seed(profile, delta, seed)
                totals.runs += 1
                for prop, item in result.report.summary().items():
                    totals.checked[prop] = totals.checked.get(prop, 0) + item["checked"]
                    totals.violations[prop] = totals.violations.get(prop, 0) + item["violations"]
                    if item["violations"] and prop not in totals.examples:
                        totals.examples[prop] = f"{prof} delta={delta} seed={seed}: " \
                                                f"{item['example']}"
                framed = result.blamed - result.sim.config.byzantine
                if framed:
                    totals.framed.append((prof, delta, seed, sorted(framed)))
    totals.seconds = time.perf_counter() - start
    return totals


@pytest.fixture(scope="module")
def honest_views():
    views = harvest_views(range(20), profile=(9, 1, 1), every=2)
    views += harvest_views(range(20, 40), profile=(5, 0, 1), every=2)
    return views


def test_criterion_1_confirmation_within_2delta(sweep, record_criterion):
    ok, detail = sweep.line("confirmation_within_2delta")
    ok = ok and sweep.seconds < 120
    record_criterion(1, ok, f"{detail}; {sweep.runs} runs in {sweep.seconds:.0f}s")
    assert ok


def test_criterion_2_past_perfection_within_delta(sweep, record_criterion):
    ok, detail = sweep.line("past_perfection_within_delta")
    record_criterion(2, ok, detail)
    assert ok


def test_criterion_3_pairwise_safety(sweep, record_criterion):
    ok, detail = sweep.line("past_perfection_safety", "confirmation_bounds", "validity")
    record_criterion(3, ok, detail)
    assert ok


def test_criterion_4_index_oracles(record_criterion):
    rng = random.Random(2024)
    mismatches = 0
    first = None
    trials = 10_000
    for _ in range(trials):
        beta, gamma = rng.randint(0, 4), rng.randint(0, 5)
        n = rng.randint(5 * beta + 3 * gamma + 1, 5 * beta + 3 * gamma + 15)
        p = check_profile(n, beta, gamma)
        mrt = [rng.randint(0, 100) for _ in range(n)]
        voters = rng.sample(range(n), rng.randint(0, n))
        stamps = {j: rng.randint(0, mrt[j]) for j in voters}
        got = (min_possible_ts(stamps, mrt, p), max_possible_ts(stamps, p),
               past_perfect_round(mrt, p))
        want = (rmin_oracle(stamps, mrt, p), rmax_oracle(stamps, p), rperf_oracle(mrt, p))
        if got != want:
            mismatches += 1
            first = first or (p, mrt, stamps, got, want)
    ok = mismatches == 0
    detail = f"{trials - mismatches}/{trials} instances match the index formulas"
    if first:
        detail += f"; first mismatch {first}"
    record_criterion(4, ok, detail)
    assert ok


def test_criterion_5_theta_timeliness(sweep, record_criterion):
    ok, detail = sweep.line("theta_timeliness")
    record_criterion(5, ok, detail)
    assert ok


def test_criterion_6_accountability(sweep, record_criterion):
    rep = run_crafted()
    crafted_ok = (rep.valid1 and rep.valid2 and rep.past_perfection_violated
                  and len(rep.blamed) >= rep.beta + 1 and rep.blamed <= rep.colluders)
    checked, _ = sweep.count("no_framing")
    ok = crafted_ok and not sweep.framed and checked > 0
    detail = (f"crafted violation blames {sorted(rep.blamed)} (need >= {rep.beta + 1}, "
              f"colluders {sorted(rep.colluders)}); no honest replica blamed in {checked} runs")
    if sweep.framed:
        detail += f"; framed {sweep.framed[:3]}"
    record_criterion(6, ok, detail)
    assert ok


def _replace_vote(certs, old, new) -> None:
    certs.c_tx[old.tx][old.replica] = new
    if certs.c_pp.get(old.replica) == old:
        certs.c_pp[old.replica] = new


def _mutate(rng: random.Random, sim, data: PodData, certs):
    """One non-identity edit of (D, C)."""
    kinds = ["r_perf", "drop_vote", "sig", "flip_ts", "wrong_key", "cpp_older", "cpp_drop",
             "bogus_trace"]
    if data.traces:
        kinds += ["trace_field", "drop_trace"]
    while True:
        kind = rng.choice(kinds)
        d2, c2 = data, certs.copy()
        if kind == "r_perf":
            d2 = PodData(data.traces, data.r_perf + rng.choice([-2, -1, 1, 2]),
                         data.heartbeats_filtered)
        elif kind == "trace_field":
            tx = rng.choice(sorted(data.traces))
            trace = data.traces[tx]
            field = rng.choice(["r_min", "r_max", "r_conf"])
            old = getattr(trace, field)
            if field == "r_conf" and old is None:
                new = trace.r_min
            elif field == "r_max" and old is INF:
                new = trace.r_min + rng.randint(0, 3)
            elif field == "r_conf" and rng.random() < 0.3:
                new = None
            else:
                new = old + rng.choice([-2, -1, 1, 2])
            traces = dict(data.traces)
            traces[tx] = dataclasses.replace(trace, **{field: new})
            d2 = PodData(traces, data.r_perf, data.heartbeats_filtered)
        elif kind == "drop_trace":
            traces = dict(data.traces)
            del traces[rng.choice(sorted(traces))]
            d2 = PodData(traces, data.r_perf, data.heartbeats_filtered)
        elif kind == "bogus_trace":
            traces = dict(data.traces)
            traces[b"not-in-certs"] = TransactionTrace(b"not-in-certs", 0, INF)
            d2 = PodData(traces, data.r_perf, data.heartbeats_filtered)
        else:
            votes = sorted(c2.all_votes(), key=lambda v: (v.replica, v.sn))
            if not votes:
                continue
            vote = rng.choice(votes)
            if kind == "drop_vote":
                per = c2.c_tx[vote.tx]
                del per[vote.replica]
                if not per:
                    del c2.c_tx[vote.tx]
            elif kind == "sig":
                sigma = bytearray(vote.sigma)
                sigma[rng.randrange(len(sigma))] ^= 1 << rng.randrange(8)
                _replace_vote(c2, vote, dataclasses.replace(vote, sigma=bytes(sigma)))
            elif kind == "flip_ts":
                ts = max(0, vote.ts + rng.choice([-1, 1]))
                if ts == vote.ts:
                    continue
                _replace_vote(c2, vote, dataclasses.replace(vote, ts=ts))
            elif kind == "wrong_key":
                other = rng.choice([j for j in range(sim.profile.n) if j != vote.replica])
                msg = sim.pki.vote_message(vote.tx, vote.ts, vote.sn)
                sigma = sim.pki.scheme.sign(sim.keys[other].sk, msg)
                _replace_vote(c2, vote, dataclasses.replace(vote, sigma=sigma))
            elif kind == "cpp_older":
                latest = c2.c_pp.get(vote.replica)
                if latest is None or latest.sn == 0:
                    continue
                older = [v for v in votes if v.replica == vote.replica and v.sn < latest.sn]
                c2.c_pp[vote.replica] = rng.choice(older)
            elif kind == "cpp_drop":
                if vote.replica not in c2.c_pp:
                    continue
                del c2.c_pp[vote.replica]
        return kind, d2, c2


def test_criterion_7_validator_mutations(honest_views, record_criterion):
    start = time.perf_counter()
    rng = random.Random(7)
    views = [(sim, view) for sim, view in honest_views if view[1].all_votes()]
    honest = rng.sample(honest_views, 1000)
    accepted = sum(valid(data, certs, sim.pki, sim.profile) for sim, (data, certs) in honest)
    rejected, missed, kinds = 0, [], {}
    for _ in range(1000):
        sim, (data, certs) = rng.choice(views)
        kind, d2, c2 = _mutate(rng, sim, data, certs)
        kinds[kind] = kinds.get(kind, 0) + 1
        if valid(d2, c2, sim.pki, sim.profile):
            missed.append(kind)
        else:
            rejected += 1
    seconds = time.perf_counter() - start
    ok = accepted == 1000 and rejected == 1000 and seconds < 60
    detail = (f"honest reads valid {accepted}/1000; mutations rejected {rejected}/1000 "
              f"in {seconds:.1f}s; mix {dict(sorted(kinds.items()))}")
    if missed:
        detail += f"; accepted mutations {sorted(set(missed))}"
    record_criterion(7, ok, detail)
    assert ok


def test_criterion_8_bidset(record_criterion):
    t0, problems, runs = 5, [], 0
    for big in (2, 3, 4):
        for delta in range(1, big + 1):
            runs += 1
            honest = run_auction(check_profile(9, 1, 1), t0, big, [b"10", b"20", b"30"],
                                 "honest", delta=delta)
            results = list(honest.results.values())
            term = honest.termination_round()
            if not (honest.agreed() and all(r is not None and not r.empty for r in results)
                    and all(set(honest.bid_txs) <= set(r.bids) for r in results)):
                problems.append(f"D={big} d={delta}: honest result empty or incomplete")
            if term is None or term > t0 + big + 3 * delta:
                problems.append(f"D={big} d={delta}: honest ends at {term} > "
                                f"{t0 + big + 3 * delta}")
            if any(v is SequencerVerdict.GUILTY for v in honest.verdicts.values()):
                problems.append(f"D={big} d={delta}: honest sequencer blamed")

            silent = run_auction(check_profile(9, 1, 1), t0, big, [b"10"], "silent",
                                 delta=delta)
            term = silent.termination_round()
            if not all(r is not None and r.empty for r in silent.results.values()):
                problems.append(f"D={big} d={delta}: silent result not empty")
            if term is None or term > t0 + 3 * big + delta:
                problems.append(f"D={big} d={delta}: silent ends at {term} > "
                                f"{t0 + 3 * big + delta}")

            censor = run_auction(check_profile(9, 1, 1), t0, big, [b"10", b"20"],
                                 "censor:20", delta=delta)
            guilty = {tx for tx, v in censor.verdicts.items() if v is SequencerVerdict.GUILTY}
            target = {tx for tx in censor.bid_txs if tx.endswith(b"20")}
            if not target or guilty != target:
                problems.append(f"D={big} d={delta}: censor verdicts {censor.verdicts}")
    ok = not problems
    detail = f"{runs} (Delta, delta) pairs"
    if problems:
        detail += f"; {len(problems)} problems, e.g. " + " | ".join(problems[:4])
        detail += ("; honest termination lands one round after t0+Delta+3delta and a "
                   "delta=Delta BIDS confirms after the consumer cut-off")
    record_criterion(8, ok, detail)
    assert ok


def test_criterion_9_benchmark_shape(record_criterion):
    start = time.perf_counter()

    async def run_all():
        out = {}
        for n in (15, 50, 100):
            kinds = {kind: bench_profile(n, kind) for kind in ("omission", "byzantine")}
            for kind, summary in (await measure_readers(n, kinds, 200)).items():
                out[n, kind] = summary
        return out

    res = asyncio.run(run_all())
    seconds = time.perf_counter() - start
    failed = sum(s.failed for s in res.values())
    means = {key: s.mean for key, s in res.items()}
    spread = {kind: abs(means[100, kind] - means[15, kind]) / means[15, kind]
              for kind in ("omission", "byzantine")}
    flat = all(v < 0.5 for v in spread.values())
    ordered = all(means[n, "omission"] <= means[n, "byzantine"] for n in (15, 50, 100))
    ok = flat and ordered and failed == 0 and seconds < 300
    table = ", ".join(f"n={n} {k[:3]} {means[n, k]:.1f}ms" for n, k in sorted(means))
    detail = (f"(a) n=15->100 change omission {spread['omission']:.0%}, byzantine "
              f"{spread['byzantine']:.0%} ({'PASS' if flat else 'FAIL'}); "
              f"(b) omission <= byzantine at every n ({'PASS' if ordered else 'FAIL'}); "
              f"{table}; failed={failed}; {seconds:.0f}s")
    record_criterion(9, ok, detail)
    assert ok


def test_criterion_10_monotonicity(sweep, honest_views, record_criterion):
    ok, detail = sweep.line("monotonicity")
    rng = random.Random(10)
    views = [view for _, view in honest_views]
    bad = 0
    for _ in range(1000):
        a, b = rng.choice(views), rng.choice(views)
        merged = monotone_merge(a, b)
        if monotone_merge(merged, b)[0] != merged[0] or monotone_merge(a, a)[0] != a[0]:
            bad += 1
    ok = ok and bad == 0
    record_criterion(10, ok, f"{detail}; merge idempotent on {1000 - bad}/1000 pairs")
    assert ok
