"""Command-line entry point: simulate, bench, auction, verify, identify.

Exit codes: 0 when every checked property holds, 1 on a property violation
(or a guilty/invalid verdict), 2 on a configuration or input error.
"""
from __future__ import annotations

import argparse
import asyncio
import csv
import json
import logging
import math
import os
import statistics
import sys
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

from . import __version__
from .accountability import (
    SequencerVerdict,
    decode_evidence,
    encode_evidence,
    identify,
    identify_sequencer,
    transcript_of,
)
from .codec import CodecError
from .crypto import scheme_by_name
from .types import (
    ConfigurationError,
    FaultProfile,
    Pki,
    check_profile,
    decode_transcript,
    decode_view,
    encode_transcript,
    encode_view,
)
from .validator import check

log = logging.getLogger("podcore")

REPORT_SCHEMA = 1
BENCH_SCHEMA = 1
SESSION_SCHEMA = 1
BENCH_COLUMNS = (
    "schema_version", "n", "profile", "beta", "gamma", "alpha", "txs", "failed",
    "mean_ms", "p50_ms", "p95_ms", "ci95_ms",
)

EXIT_OK, EXIT_VIOLATION, EXIT_CONFIG = 0, 1, 2


class UsageError(Exception):
    pass


# -- session files ---------------------------------------------------------


def session_dict(pki: Pki, profile: FaultProfile, sequencer_pk: bytes | None = None) -> dict:
    out = {
        "schema_version": SESSION_SCHEMA,
        "sid": pki.sid.hex(),
        "scheme": pki.scheme.name,
        "public_keys": [pk.hex() for pk in pki.public_keys],
        "profile": {"n": profile.n, "beta": profile.beta, "gamma": profile.gamma},
    }
    if sequencer_pk is not None:
        out["sequencer_pk"] = sequencer_pk.hex()
    return out


def load_session(path: str) -> tuple[Pki, FaultProfile, bytes | None]:
    try:
        raw = json.loads(Path(path).read_text())
        pki = Pki(bytes.fromhex(raw["sid"]), scheme_by_name(raw["scheme"]),
                  tuple(bytes.fromhex(pk) for pk in raw["public_keys"]))
        prof = raw["profile"]
        profile = check_profile(int(prof["n"]), int(prof["beta"]), int(prof["gamma"]))
        seq = raw.get("sequencer_pk")
    except (OSError, ValueError, KeyError, TypeError) as exc:
        raise UsageError(f"cannot load session file {path}: {exc}") from None
    if profile.n != pki.n:
        raise UsageError("session profile n does not match the number of keys")
    return pki, profile, bytes.fromhex(seq) if seq else None


def _out_dir(args) -> Path | None:
    target = args.out or os.environ.get("POD_LOG_DIR")
    if not target:
        return None
    path = Path(target)
    path.mkdir(parents=True, exist_ok=True)
    return path


def _dump(path: Path, report: dict) -> None:
    path.write_text(json.dumps(report, indent=2, sort_keys=True) + "\n")


# -- simulate --------------------------------------------------------------


def _sim_config(args, seed: int):
    from .simnet.adversary import parse_behavior
    from .simnet.workload import default_rounds, sweep_config

    profile = check_profile(args.n, args.beta, args.gamma)
    config = sweep_config(profile, args.delta, seed)
    if args.jitter is not None:
        config.jitter = args.jitter
    if args.rounds is not None:
        config.max_rounds = args.rounds
    else:
        config.max_rounds = default_rounds(args.delta)
    if args.adversaries is not None:
        config.adversaries = [parse_behavior(a) for a in args.adversaries.split(";") if a]
    config.scheme = args.scheme
    config.__post_init__()
    return config


def _run_one(args, seed: int, record: bool):
    from .simnet.workload import run_random

    config = _sim_config(args, seed)
    config.record_events = record
    return config, run_random(config, clients=args.clients, late_joiners=args.late_joiners)


def _properties(summary: dict, seed: int | None) -> dict:
    out = {}
    for prop, item in summary.items():
        out[prop] = {
            "status": "FAIL" if item["violations"] else "PASS",
            "checked": item["checked"],
            "violations": item["violations"],
        }
        if item["violations"]:
            out[prop]["seed"] = seed
            out[prop]["example"] = item["example"]
    return out


def _config_echo(config) -> dict:
    p = config.profile
    return {
        "n": p.n, "beta": p.beta, "gamma": p.gamma, "alpha": p.alpha,
        "delta": config.delta, "jitter": config.jitter, "seed": config.seed,
        "rounds": config.max_rounds, "scheme": config.scheme,
        "adversaries": [str(b) for b in config.adversaries],
    }


def cmd_simulate(args) -> int:
    if args.scenario:
        return _simulate_scenario(args)
    if args.sweep_seeds:
        return _simulate_sweep(args)
    out = _out_dir(args)
    config, result = _run_one(args, args.seed, record=out is not None or args.trace_hash)
    sim = result.sim
    honest = sorted(sim.honest_clients)
    views = {name: sim.clients[name].read() for name in honest}
    blamed = identify(transcript_of(*views.values()), sim.pki)
    framed = sorted(blamed - config.byzantine)
    props = _properties(result.report.summary(), args.seed)
    props["no_framing"] = {"status": "FAIL" if framed else "PASS", "checked": 1,
                           "violations": len(framed)}
    if framed:
        props["no_framing"]["seed"] = args.seed
    report = {
        "schema_version": REPORT_SCHEMA,
        "command": "simulate",
        "config": _config_echo(config),
        "properties": props,
        "writes": len(result.writes),
        "blamed": sorted(blamed),
        "ok": all(p["status"] == "PASS" for p in props.values()),
    }
    if config.record_events:
        report["trace_sha256"] = sim.trace_hash()
    if out is not None:
        stem = f"simulate-s{args.seed}"
        (out / f"{stem}.trace.jsonl").write_text(sim.trace_jsonl())
        _dump(out / "session.json", session_dict(sim.pki, config.profile))
        for name, (data, certs) in views.items():
            (out / f"{stem}.{name}.view").write_bytes(encode_view(sim.pki.sid, data, certs))
        (out / f"{stem}.transcript").write_bytes(
            encode_transcript(sim.pki.sid, transcript_of(*views.values())))
        report["outputs"] = str(out)
        _dump(out / f"{stem}.report.json", report)
    _emit(args, report)
    return EXIT_OK if report["ok"] else EXIT_VIOLATION


def _sweep_worker(payload):
    args, seed = payload
    config, result = _run_one(args, seed, record=False)
    return seed, result.report.summary(), sorted(result.blamed - config.byzantine)


def _simulate_sweep(args) -> int:
    seeds = range(args.seed, args.seed + args.sweep_seeds)
    _sim_config(args, args.seed)  # validate flags before forking
    jobs = [(args, s) for s in seeds]
    if args.workers > 1:
        with ProcessPoolExecutor(args.workers) as pool:
            results = list(pool.map(_sweep_worker, jobs, chunksize=8))
    else:
        results = [_sweep_worker(job) for job in jobs]
    props: dict[str, dict] = {}
    for seed, summary, framed in results:
        summary = dict(summary)
        summary["no_framing"] = {"checked": 1, "violations": len(framed),
                                 "example": f"framed {framed}" if framed else None}
        for prop, item in summary.items():
            agg = props.setdefault(prop, {"status": "PASS", "checked": 0, "violations": 0,
                                          "failed_seeds": 0})
            agg["checked"] += item["checked"]
            agg["violations"] += item["violations"]
            if item["violations"]:
                agg["failed_seeds"] += 1
                if agg["status"] == "PASS":
                    agg.update(status="FAIL", seed=seed, example=item["example"])
    report = {
        "schema_version": REPORT_SCHEMA,
        "command": "simulate-sweep",
        "config": {"n": args.n, "beta": args.beta, "gamma": args.gamma, "delta": args.delta,
                   "first_seed": args.seed, "seeds": args.sweep_seeds},
        "properties": props,
        "ok": all(p["status"] == "PASS" for p in props.values()),
    }
    out = _out_dir(args)
    if out is not None:
        _dump(out / "sweep.report.json", report)
    _emit(args, report)
    return EXIT_OK if report["ok"] else EXIT_VIOLATION


def _simulate_scenario(args) -> int:
    from .simnet.workload import ScenarioError, load_scenario, run_scenario

    try:
        scenario = load_scenario(args.scenario)
    except (OSError, ValueError) as exc:
        raise UsageError(f"cannot load scenario: {exc}") from None
    failures: list[str] = []
    try:
        result = run_scenario(scenario)
        sim, summary = result.sim, result.report.summary()
        reads = result.reads  # type: ignore[attr-defined]
    except ScenarioError as exc:
        failures.append(str(exc))
        sim, summary, reads = exc.sim, {}, []
    props = _properties(summary, sim.config.seed)
    props["scenario_asserts"] = {"status": "FAIL" if failures else "PASS", "checked": 1,
                                 "violations": len(failures)}
    if failures:
        props["scenario_asserts"].update(seed=sim.config.seed, example=failures[0])
    report = {
        "schema_version": REPORT_SCHEMA,
        "command": "simulate-scenario",
        "config": _config_echo(sim.config),
        "properties": props,
        "reads": reads,
        "trace_sha256": sim.trace_hash(),
        "ok": all(p["status"] == "PASS" for p in props.values()),
    }
    out = _out_dir(args)
    if out is not None:
        (out / "scenario.trace.jsonl").write_text(sim.trace_jsonl())
        _dump(out / "scenario.report.json", report)
    _emit(args, report)
    return EXIT_OK if report["ok"] else EXIT_VIOLATION


def _emit(args, report: dict) -> None:
    if args.json:
        print(json.dumps(report, indent=2, sort_keys=True))
        return
    for prop, item in report.get("properties", {}).items():
        line = f"{item['status']} {prop} checked={item['checked']}"
        if item["status"] == "FAIL":
            line += f" seed={item.get('seed')}"
            if item.get("example") is not None:
                line += f" example={item['example']}"
            extra = {k: v for k, v in item.items()
                     if k not in ("status", "checked", "violations", "seed", "example")}
            if extra:
                line += " " + json.dumps(extra, sort_keys=True)
        print(line)
    for key in ("termination", "verdicts"):
        if key in report:
            print(f"{key}: {json.dumps(report[key], sort_keys=True)}")


# -- bench -----------------------------------------------------------------


def bench_rows(summaries) -> list[dict]:
    rows = []
    for s in summaries:
        rows.append({
            "schema_version": BENCH_SCHEMA,
            "n": s.n,
            "profile": "omission" if s.profile.beta == 0 else "byzantine",
            "beta": s.profile.beta,
            "gamma": s.profile.gamma,
            "alpha": s.profile.alpha,
            "txs": len(s.samples) + s.failed,
            "failed": s.failed,
            "mean_ms": f"{s.mean:.3f}",
            "p50_ms": f"{s.p50:.3f}",
            "p95_ms": f"{s.p95:.3f}",
            "ci95_ms": f"{s.ci95:.3f}",
        })
    return rows


def write_bench_csv(path: Path, rows) -> None:
    with path.open("w", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=BENCH_COLUMNS)
        writer.writeheader()
        writer.writerows(rows)


def _slope(summaries) -> tuple[float, float]:
    """Least-squares slope of latency on n over all samples, with a 95% half-width."""
    xs = [s.n for s in summaries for _ in s.samples]
    ys = [y for s in summaries for y in s.samples]
    if len(set(xs)) < 2:
        return math.nan, math.nan
    slope, intercept = statistics.linear_regression(xs, ys)
    mx = statistics.fmean(xs)
    resid = sum((y - intercept - slope * x) ** 2 for x, y in zip(xs, ys))
    sxx = sum((x - mx) ** 2 for x in xs)
    se = math.sqrt(resid / (len(xs) - 2) / sxx)
    return slope, 1.96 * se


def shape_checks(summaries) -> dict:
    by = {(s.n, "omission" if s.profile.beta == 0 else "byzantine"): s for s in summaries}
    ns = sorted({s.n for s in summaries})
    checks: dict[str, dict] = {}
    for kind in ("omission", "byzantine"):
        have = [by[(n, kind)] for n in ns if (n, kind) in by]
        if len(have) >= 2:
            lo, hi = have[0], have[-1]
            change = abs(hi.mean - lo.mean) / lo.mean
            slope, half = _slope(have)
            checks[f"flat_{kind}"] = {
                "status": "PASS" if change < 0.5 else "FAIL",
                "relative_change": round(change, 4),
                "slope_ms_per_replica": round(slope, 5),
                "slope_ci95": round(half, 5),
            }
    for n in ns:
        if (n, "omission") in by and (n, "byzantine") in by:
            om, bz = by[(n, "omission")].mean, by[(n, "byzantine")].mean
            checks[f"omission_le_byzantine_n{n}"] = {
                "status": "PASS" if om <= bz else "FAIL",
                "omission_ms": round(om, 3), "byzantine_ms": round(bz, 3),
            }
    return checks


async def _bench(args):
    from .transport import bench_profile, measure_readers

    summaries = []
    port = args.listen_base_port
    for n in args.n:
        log.info("bench n=%d profiles=%s", n, ",".join(args.profile))
        profiles = {kind: bench_profile(n, kind) for kind in args.profile}
        result = await measure_readers(
            n, profiles, args.txs, scheme=args.scheme, base_port=port,
            heartbeat_ms=args.heartbeat_ms, timeout=args.timeout, warmup=args.warmup)
        summaries.extend(result[kind] for kind in args.profile)
        if port:
            port += n
    return summaries


def cmd_bench(args) -> int:
    try:
        summaries = asyncio.run(_bench(args))
    except OSError as exc:
        raise UsageError(f"cannot start replicas: {exc}") from None
    rows = bench_rows(summaries)
    csv_path = Path(args.csv)
    write_bench_csv(csv_path, rows)
    checks = shape_checks(summaries)
    report = {
        "schema_version": REPORT_SCHEMA,
        "command": "bench",
        "config": {"n": args.n, "profiles": args.profile, "txs": args.txs,
                   "scheme": args.scheme, "heartbeat_ms": args.heartbeat_ms},
        "rows": rows,
        "properties": checks,
        "outputs": str(csv_path),
        "ok": all(c["status"] == "PASS" for c in checks.values())
              and not any(s.failed for s in summaries),
    }
    out = _out_dir(args)
    if out is not None:
        _dump(out / "bench.report.json", report)
    if args.json:
        print(json.dumps(report, indent=2, sort_keys=True))
    else:
        for row in rows:
            print(",".join(str(row[c]) for c in BENCH_COLUMNS))
        for name, item in checks.items():
            extra = {k: v for k, v in item.items() if k != "status"}
            print(f"{item['status']} {name} {json.dumps(extra, sort_keys=True)}")
    return EXIT_OK if report["ok"] else EXIT_VIOLATION


# -- auction ---------------------------------------------------------------


def cmd_auction(args) -> int:
    from .bidset import bid_value, first_price, second_price
    from .simnet.adversary import parse_behavior
    from .simnet.auction import parse_mode, run_auction

    profile = check_profile(args.n, args.beta, args.gamma)
    try:
        mode, censored = parse_mode(args.sequencer)
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    bids = [b.strip().encode() for b in args.bids.split(",") if b.strip()]
    delta = args.delta if args.delta is not None else args.Delta
    if not 1 <= delta <= args.Delta:
        raise UsageError("need 1 <= delta <= Delta")
    adversaries = [parse_behavior(a) for a in (args.adversaries or "").split(";") if a]
    rep = run_auction(profile, args.t0, args.Delta, bids, args.sequencer, delta=delta,
                      seed=args.seed, consumers=args.consumers, adversaries=adversaries)

    t0, big, d = args.t0, args.Delta, delta
    honest_bound = t0 + big + 3 * d
    silent_bound = t0 + 3 * big + d
    results = {}
    for name, res in rep.results.items():
        if res is None:
            results[name] = None
            continue
        values = [tx.decode(errors="replace") for tx in res.bids]
        results[name] = {"round": res.round, "empty": res.empty, "r_conf": res.r_conf,
                         "bids": values}
    term = rep.termination_round()
    first = next(iter(rep.results.values()), None)
    checks: dict[str, dict] = {}
    if mode in ("honest", "censor"):
        contains = all(
            r is not None and set(rep.bid_txs) <= set(r.bids) for r in rep.results.values())
        if mode == "honest":
            checks["agreement_nonempty"] = _status(
                rep.agreed() and all(r is not None and not r.empty for r in rep.results.values()))
            checks["contains_all_bids"] = _status(contains)
            checks["terminates_by_bound"] = _status(term is not None and term <= honest_bound,
                                                    round=term, bound=honest_bound)
            guilty = [tx for tx, v in rep.verdicts.items() if v is SequencerVerdict.GUILTY]
            checks["honest_not_blamed"] = _status(not guilty)
        else:
            target = [tx for tx in rep.bid_txs if tx.endswith(censored or b"\0")]
            ok = bool(target) and all(rep.verdicts.get(tx) is SequencerVerdict.GUILTY
                                      for tx in target)
            checks["censor_identified"] = _status(ok)
    elif mode == "silent":
        checks["empty_by_bound"] = _status(
            term is not None and term <= silent_bound
            and all(r is not None and r.empty for r in rep.results.values()),
            round=term, bound=silent_bound)
    else:
        checks["equivocation_proved"] = _status(rep.equivocation_proved)

    for item in checks.values():
        if item["status"] == "FAIL":
            item["seed"] = args.seed
    report = {
        "schema_version": REPORT_SCHEMA,
        "command": "auction",
        "config": {"n": profile.n, "beta": profile.beta, "gamma": profile.gamma,
                   "t0": t0, "Delta": big, "delta": d, "seed": args.seed,
                   "sequencer": args.sequencer, "bids": [b.decode() for b in bids]},
        "results": results,
        "termination": {"round": term, "sequencer_round": rep.sequencer_round,
                        "honest_bound": honest_bound, "silent_bound": silent_bound},
        "verdicts": {bid_value(tx).decode(errors="replace"): v.value
                     for tx, v in rep.verdicts.items()},
        "equivocation_proved": rep.equivocation_proved,
        "properties": checks,
    }
    if first is not None and not first.empty:
        report["first_price"] = first_price(first.bids)
        report["second_price"] = second_price(first.bids)
    out = _out_dir(args)
    if out is not None and rep.sim is not None:
        _dump(out / "auction.session.json", session_dict(rep.sim.pki, profile, rep.sequencer_pk))
        for i, (tx, ev) in enumerate(sorted(rep.evidence.items())):
            (out / f"auction.evidence.{i}").write_bytes(encode_evidence(rep.sim.pki.sid, ev))
        report["outputs"] = str(out)
        _dump(out / "auction.report.json", report)
    report["ok"] = all(c["status"] == "PASS" for c in checks.values())
    _emit(args, report)
    return EXIT_OK if report["ok"] else EXIT_VIOLATION


def _status(ok: bool, **extra) -> dict:
    return {"status": "PASS" if ok else "FAIL", "checked": 1, "violations": 0 if ok else 1,
            **extra}


# -- verification and accountability -------------------------------------


def _read_bytes(path: str) -> bytes:
    try:
        return Path(path).read_bytes()
    except OSError as exc:
        raise UsageError(f"cannot read {path}: {exc}") from None


def cmd_verify(args) -> int:
    pki, profile, _ = load_session(args.session)
    try:
        sid, data, certs = decode_view(_read_bytes(args.input))
    except CodecError as exc:
        raise UsageError(f"malformed view file: {exc}") from None
    if sid != pki.sid:
        print("SID_MISMATCH view belongs to another session", file=sys.stderr)
        return EXIT_VIOLATION
    verdict = check(data, certs, pki, profile)
    if verdict:
        print("VALID")
        return EXIT_OK
    print(f"{verdict.reason} {verdict.detail}", file=sys.stderr)
    print("INVALID")
    return EXIT_VIOLATION


def cmd_identify(args) -> int:
    pki, _, _ = load_session(args.session)
    try:
        sid, votes = decode_transcript(_read_bytes(args.transcript))
    except CodecError as exc:
        raise UsageError(f"malformed transcript: {exc}") from None
    if sid != pki.sid:
        raise UsageError("transcript belongs to another session")
    culprits = sorted(identify(votes, pki))
    for j in culprits:
        print(f"R{j}")
    return EXIT_VIOLATION if culprits else EXIT_OK


def cmd_identify_sequencer(args) -> int:
    pki, profile, seq_pk = load_session(args.session)
    if seq_pk is None:
        raise UsageError("session file has no sequencer_pk")
    try:
        sid, evidence = decode_evidence(_read_bytes(args.evidence))
    except CodecError as exc:
        raise UsageError(f"malformed evidence file: {exc}") from None
    if sid != pki.sid:
        raise UsageError("evidence belongs to another session")
    verdict = identify_sequencer(evidence, args.t0, args.delta, pki, profile, seq_pk)
    print(verdict.value)
    return EXIT_VIOLATION if verdict is SequencerVerdict.GUILTY else EXIT_OK


# -- argument parsing ------------------------------------------------------


def _profile_flags(p: argparse.ArgumentParser, n: int, beta: int, gamma: int) -> None:
    p.add_argument("--n", type=int, default=n)
    p.add_argument("--beta", type=int, default=beta)
    p.add_argument("--gamma", type=int, default=gamma)


def _common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--json", action="store_true", help="print the full JSON report")
    p.add_argument("--out", help="output directory (default: $POD_LOG_DIR)")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="podcore", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=__version__)
    parser.add_argument("-v", "--verbose", action="count", default=0)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", help="run the simulator and check every property")
    _profile_flags(p, 9, 1, 1)
    p.add_argument("--delta", type=int, default=1)
    p.add_argument("--jitter", type=int)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--rounds", type=int)
    p.add_argument("--scenario", help="JSON scenario file")
    p.add_argument("--adversaries", help="';'-separated KIND:replica[@param] list")
    p.add_argument("--sweep-seeds", type=int, default=0, help="run this many seeds")
    p.add_argument("--workers", type=int, default=1)
    p.add_argument("--clients", type=int, default=3)
    p.add_argument("--late-joiners", type=int, default=1)
    p.add_argument("--scheme", default="hmac-test", choices=["hmac-test", "ed25519"])
    p.add_argument("--trace-hash", action="store_true", help="record events and hash them")
    _common(p)
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("bench", help="loopback TCP latency benchmark")
    p.add_argument("--n", type=int, nargs="+", default=[15, 50, 100])
    p.add_argument("--profile", nargs="+", choices=["omission", "byzantine"],
                   default=["omission", "byzantine"])
    p.add_argument("--txs", type=int, default=200)
    p.add_argument("--listen-base-port", type=int, default=0)
    p.add_argument("--heartbeat-ms", type=int, default=50)
    p.add_argument("--timeout", type=float, default=5.0)
    p.add_argument("--warmup", type=int, default=10, help="unrecorded writes per n")
    p.add_argument("--scheme", default="ed25519", choices=["hmac-test", "ed25519"])
    p.add_argument("--csv", default="bench.csv")
    _common(p)
    p.set_defaults(func=cmd_bench)

    p = sub.add_parser("auction", help="run a bidset auction in the simulator")
    _profile_flags(p, 9, 1, 1)
    p.add_argument("--t0", type=int, default=5)
    p.add_argument("--Delta", type=int, default=3)
    p.add_argument("--delta", type=int, help="actual delay (default: Delta)")
    p.add_argument("--bids", default="10,20,30")
    p.add_argument("--sequencer", default="honest",
                   help="honest | censor:<bid> | silent | equivocate")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--consumers", type=int, default=2)
    p.add_argument("--adversaries")
    _common(p)
    p.set_defaults(func=cmd_auction)

    p = sub.add_parser("verify", help="check a serialized (D, C) view")
    p.add_argument("--input", required=True)
    p.add_argument("--session", required=True, help="session JSON with keys and profile")
    p.set_defaults(func=cmd_verify)

    p = sub.add_parser("identify", help="name replicas that signed conflicting votes")
    p.add_argument("--transcript", required=True)
    p.add_argument("--session", required=True)
    p.set_defaults(func=cmd_identify)

    p = sub.add_parser("identify-sequencer", help="judge a bidset sequencer")
    p.add_argument("--evidence", required=True)
    p.add_argument("--t0", type=int, required=True)
    p.add_argument("--delta", type=int, required=True)
    p.add_argument("--session", required=True)
    p.set_defaults(func=cmd_identify_sequencer)
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.WARNING - 10 * min(args.verbose, 2),
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except (ConfigurationError, UsageError) as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except ValueError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
