"""Shared builders for the test suite."""
from __future__ import annotations

import random

from podcore.crypto import scheme_by_name
from podcore.simnet import SimConfig, Simulation
from podcore.simnet.workload import sweep_config
from podcore.types import INF, FaultProfile, Pki, Vote, check_profile, make_keys


def make_pki(n: int, scheme: str = "hmac-test", seed: int = 0, sid: bytes = b"test-sid"):
    sch = scheme_by_name(scheme)
    keys = make_keys(sch, n, random.Random(seed))
    return keys, Pki(sid, sch, tuple(k.pk for k in keys))


def sign_vote(pki: Pki, keys, replica: int, tx: bytes, ts: int, sn: int) -> Vote:
    sigma = pki.scheme.sign(keys[replica].sk, pki.vote_message(tx, ts, sn))
    return Vote(tx, ts, sn, sigma, replica)


def chain(pki: Pki, keys, replica: int, entries) -> list[Vote]:
    """Votes with consecutive sn from a list of (tx, ts)."""
    return [sign_vote(pki, keys, replica, tx, ts, sn) for sn, (tx, ts) in enumerate(entries)]


def harvest_views(seeds, profile=(9, 1, 1), delta: int = 2, every: int = 3, clients: int = 3):
    """Honest (D, C) reads taken every few rounds from adversarial runs."""
    prof = check_profile(*profile)
    out = []
    for seed in seeds:
        config = sweep_config(prof, delta, seed)
        config.max_rounds = 30
        sim = Simulation(config)
        names = [f"c{i}" for i in range(clients)]
        for name in names:
            sim.add_client(name)
        rng = random.Random(seed)

        def act(r, sim=sim, rng=rng, names=names, seed=seed):
            if rng.random() < 0.6:
                sim.clients[rng.choice(names)].write(f"tx/{seed}/{r}".encode())
            if r % every == 0:
                for name in names:
                    out.append((sim, sim.clients[name].read()))

        sim.every_round(act)
        sim.run()
    return out


def small_sim(n=4, beta=0, gamma=1, delta=1, rounds=20, **kw) -> Simulation:
    profile = check_profile(n, beta, gamma)
    return Simulation(SimConfig(profile, delta=delta, max_rounds=rounds, **kw))


# Index oracles: read the answer straight out of the sorted n-element list.

def rmin_oracle(stamps, mrt, p: FaultProfile):
    filled = sorted(stamps.get(j, mrt[j]) for j in range(p.n))
    return filled[p.alpha // 2 - p.beta]


def rmax_oracle(stamps, p: FaultProfile):
    filled = sorted(stamps.get(j, INF) for j in range(p.n))
    return filled[p.n - p.alpha + p.alpha // 2 + p.beta]


def rperf_oracle(mrt, p: FaultProfile):
    return sorted(mrt)[p.alpha // 2 - p.beta]
