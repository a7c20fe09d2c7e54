"""Shared randomized-churn machinery for differential tests."""

import random

from deltanet.engine import Engine, Rule
from deltanet.oracle import AddressSim
from deltanet.prefix import Interval

NODES6 = ["s1", "s2", "s3", "s4", "s5", "DROP"]


def random_prefix_interval(rng: random.Random, k: int) -> Interval:
    length = rng.randint(0, k)
    base = rng.randrange(1 << k) & ~((1 << (k - length)) - 1)
    return Interval(base, base + (1 << (k - length)))


def random_rule(rng: random.Random, rid: int, nodes, k: int, max_prio: int = 12) -> Rule:
    src = rng.choice([n for n in nodes if n != "DROP"])
    dst = rng.choice([n for n in nodes if n != src])
    return Rule(rid, src, dst, rng.randint(1, max_prio), random_prefix_interval(rng, k))


def churn(
    rng: random.Random,
    engine: Engine,
    n_ops: int,
    nodes=NODES6,
    sim: AddressSim | None = None,
    p_add: float = 0.7,
    max_prio: int = 12,
):
    """Apply a random mixed add/del stream; yields (op_kind, payload, delta)."""
    live = list(engine._core.rule_ids())
    next_rid = max(live, default=-1) + 1
    for _ in range(n_ops):
        if live and rng.random() > p_add:
            rid = live.pop(rng.randrange(len(live)))
            delta = engine.remove_rule(rid)
            if sim is not None:
                sim.remove_rule(rid)
            yield "del", rid, delta
        else:
            rule = random_rule(rng, next_rid, nodes, engine.k, max_prio)
            next_rid += 1
            live.append(rule.rule_id)
            delta = engine.insert_rule(rule)
            if sim is not None:
                sim.add_rule(
                    rule.rule_id, rule.src, rule.dst, rule.priority,
                    rule.match.lo, rule.match.hi,
                )
            yield "add", rule, delta


def build_random_state(seed: int, n_ops: int, k: int = 8, backend=None, nodes=NODES6):
    rng = random.Random(seed)
    engine = Engine(k=k, backend=backend)
    sim = AddressSim(k)
    for _ in churn(rng, engine, n_ops, nodes, sim=sim):
        pass
    return engine, sim, rng


def coverage(e: Engine, label):
    """Label as maximal concrete address ranges (splits coalesced away)."""
    merged = []
    for iv in sorted(e.atom_intervals(label)):
        if merged and merged[-1][1] == iv.lo:
            merged[-1][1] = iv.hi
        else:
            merged.append([iv.lo, iv.hi])
    return [tuple(t) for t in merged]


def label_coverage(e: Engine):
    """Link -> address coverage, ignoring registered-but-empty links."""
    out = {}
    for link in e.links():
        label = e.label_of(*link)
        if label:
            out[link] = coverage(e, label)
    return out


def owners_by_address(e: Engine):
    out = {}
    for node in e.nodes():
        if node == "DROP":
            continue
        for addr in range(1 << e.k):
            rid = e.owner_rule_id(e.atom_at(addr), node)
            if rid is not None:
                out[(node, addr)] = rid
    return out
