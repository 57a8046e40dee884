import dataclasses
import random

import pytest

from podcore.accountability import (
    SequencerVerdict,
    decode_evidence,
    encode_evidence,
    identify,
    identify_sequencer,
    sequencer_equivocated,
    transcript_of,
)
from podcore.bidset import BidsMessage, bid_tx, sign_bids
from podcore.codec import CodecError, heartbeat_tx
from podcore.simnet import Behavior, Kind, SimConfig, Simulation, extract_transcript
from podcore.simnet.auction import run_auction
from podcore.simnet.crafted import run_crafted
from podcore.types import check_profile
from helpers import make_pki, sign_vote

P = check_profile(9, 1, 1)


def test_identify_examples():
    keys, pki = make_pki(4)
    a = sign_vote(pki, keys, 2, b"txA", 5, 3)
    b = sign_vote(pki, keys, 2, b"txB", 5, 3)
    assert identify([a, b], pki) == {2}
    assert identify([], pki) == set()
    forged = dataclasses.replace(b, sigma=bytes(len(b.sigma)))
    assert identify([a, forged], pki) == set()
    assert identify([a, a], pki) == set()


def _two_client_run(adversaries, seed=0):
    sim = Simulation(SimConfig(P, delta=2, seed=seed, max_rounds=25, adversaries=adversaries))
    names = ["c0", "c1"]
    for name in names:
        sim.add_client(name)
    for r in range(1, 15):
        sim.at(r, lambda r: sim.clients[names[r % 2]].write(f"t{r}".encode()))
    sim.run()
    return sim


def test_honest_run_blames_nobody():
    sim = _two_client_run([])
    votes = extract_transcript(sim.events, set(range(9)), {"c0", "c1"}, None)
    assert identify(votes, sim.pki) == set()


def test_equivocator_is_named():
    sim = _two_client_run([Behavior(4, Kind.EQUIVOCATE_SN), Behavior(7, Kind.OMIT_ALL)], seed=3)
    votes = extract_transcript(sim.events, {4}, {"c0", "c1"}, None)
    assert identify(votes, sim.pki) == {4}
    assert identify(extract_transcript(sim.events, set(), set(), None), sim.pki) == set()


def test_crafted_violation_blames_colluders():
    rep = run_crafted()
    assert rep.valid1 and rep.valid2
    assert rep.past_perfection_violated
    assert rep.blamed == rep.colluders
    assert len(rep.blamed) >= rep.beta + 1


def test_transcript_of_mixes_sources():
    keys, pki = make_pki(4)
    a = sign_vote(pki, keys, 1, b"a", 1, 0)
    assert transcript_of([a], [a]) == [a, a]


# -- sequencer ---------------------------------------------------------------

@pytest.fixture(scope="module")
def censored():
    return run_auction(P, 5, 3, [b"10", b"20", b"30"], "censor:20", delta=1)


@pytest.fixture(scope="module")
def honest():
    return run_auction(P, 5, 3, [b"10", b"20", b"30"], "honest", delta=1)


def _judge(rep, ev, **kw):
    args = dict(t0=rep.t0, delta=rep.bound, pki=rep.sim.pki, profile=P,
                sequencer_pk=rep.sequencer_pk)
    args.update(kw)
    return identify_sequencer(ev, **args)


def test_censoring_sequencer_is_guilty(censored):
    tx = bid_tx(b"auction-1", b"20")
    assert censored.verdicts[tx] is SequencerVerdict.GUILTY
    assert _judge(censored, censored.evidence[tx])


def test_honest_sequencer_cannot_be_framed(honest):
    for tx, ev in honest.evidence.items():
        assert _judge(honest, ev) is SequencerVerdict.NOT_GUILTY


def _sequencer_sk(rep):
    key = rep.sim.scheme.keygen(random.Random(f"sequencer:{rep.sim.config.seed}"))
    assert key.pk == rep.sequencer_pk
    return key.sk


def test_early_certificate_is_guilty(honest):
    ev = next(iter(honest.evidence.values()))
    sk, sid = _sequencer_sk(honest), honest.sim.pki.sid
    # A certificate that shows no progress at all.
    sigma = sign_bids(honest.sim.scheme, sk, sid, ev.ssid, ev.bids, {})
    early = dataclasses.replace(ev, c_bid={}, sigma=sigma)
    assert _judge(honest, early) is SequencerVerdict.GUILTY
    # A certificate carrying a vote the replica never signed.
    j, vote = next(iter(ev.c_bid.items()))
    bad = dict(ev.c_bid)
    bad[j] = dataclasses.replace(vote, ts=vote.ts + 1)
    sigma = sign_bids(honest.sim.scheme, sk, sid, ev.ssid, ev.bids, bad)
    forged = dataclasses.replace(ev, c_bid=bad, sigma=sigma)
    assert _judge(honest, forged) is SequencerVerdict.GUILTY


def test_invalid_evidence(censored):
    ev = censored.evidence[bid_tx(b"auction-1", b"20")]
    few = dict(list(ev.c_tx.items())[:3])
    for edit in (dict(sigma=b"x" * 32), dict(c_tx=few), dict(ssid=b"other")):
        verdict = _judge(censored, dataclasses.replace(ev, **edit))
        assert verdict is SequencerVerdict.NOT_VALID_EVIDENCE, edit


def test_evidence_file_roundtrip(censored):
    ev = censored.evidence[bid_tx(b"auction-1", b"20")]
    sid, back = decode_evidence(encode_evidence(censored.sim.pki.sid, ev))
    assert sid == censored.sim.pki.sid
    assert back == ev
    assert _judge(censored, back)
    with pytest.raises(CodecError):
        decode_evidence(b"PODE\x09")


def test_equivocation_detection():
    rep = run_auction(P, 5, 3, [b"1", b"2"], "equivocate", delta=1)
    assert rep.equivocation_proved
    a, b = rep.published
    assert sequencer_equivocated(a, b, rep.sim.pki, b"auction-1", rep.sequencer_pk)
    assert not sequencer_equivocated(a, a, rep.sim.pki, b"auction-1", rep.sequencer_pk)
    forged = BidsMessage(b.bids, b.c_bid, b"\0" * len(b.sigma))
    assert not sequencer_equivocated(a, forged, rep.sim.pki, b"auction-1", rep.sequencer_pk)


def test_evidence_for_non_bid_tx_is_not_valid(honest):
    ev = next(iter(honest.evidence.values()))
    # A heartbeat confirmed early and absent from B would look like censorship.
    c_tx = honest.sim.clients["consumer0"].c_tx[heartbeat_tx(2)]
    assert len(c_tx) >= P.alpha
    framed = dataclasses.replace(ev, c_tx=dict(c_tx))
    assert _judge(honest, framed) is SequencerVerdict.NOT_VALID_EVIDENCE
