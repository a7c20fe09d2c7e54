import random

import pytest

from deltanet.engine import DROP, Engine, Rule, available_backends
from deltanet.errors import DuplicateRuleId, UnknownLink, UnknownRuleId
from deltanet.labels import LabelSet
from deltanet.oracle import AddressSim, sim_vs_engine
from deltanet.prefix import Interval

from helpers import NODES6, build_random_state, churn, label_coverage, owners_by_address, random_rule


def intervals_of(engine, label):
    return sorted(engine.atom_intervals(label))


def label_intervals(engine, src, dst):
    return intervals_of(engine, engine.label_of(src, dst))


def two_rule_engine(backend, k=4):
    """The forwarding-table fixture: low-priority forward, high-priority drop."""
    e = Engine(k=k, backend=backend)
    e.insert_rule(Rule(1, "s", "t", 1, Interval(0, 16)))
    e.insert_rule(Rule(2, "s", DROP, 2, Interval(10, 12)))
    return e


def test_sole_rule_owns_its_atoms(backend):
    e = Engine(k=4, backend=backend)
    delta = e.insert_rule(Rule(1, "s", "t", 1, Interval(0, 16)))
    assert label_intervals(e, "s", "t") == [Interval(0, 16)]
    assert delta.added("s", "t") == e.label_of("s", "t")


def test_high_priority_steals_atoms(backend):
    e = two_rule_engine(backend)
    assert label_intervals(e, "s", DROP) == [Interval(10, 12)]
    assert label_intervals(e, "s", "t") == [Interval(0, 10), Interval(12, 16)]
    assert intervals_of(e, e.all_atoms()) == [
        Interval(0, 10),
        Interval(10, 12),
        Interval(12, 16),
    ]


def test_medium_priority_split(backend):
    # frozen from the per-address oracle at k=8: addresses 0-7 follow the
    # low rule, 8-9 the medium rule, 10-11 drop, 12-15 the low rule again
    e = Engine(k=8, backend=backend)
    e.insert_rule(Rule(1, "s", "t", 1, Interval(0, 16)))
    e.insert_rule(Rule(2, "s", DROP, 3, Interval(10, 12)))
    delta = e.insert_rule(Rule(3, "s", "u", 2, Interval(8, 12)))
    assert len(delta.split_pairs) == 1
    old, new = delta.split_pairs[0]
    assert e.interval_of(old) == Interval(0, 8)
    assert e.interval_of(new) == Interval(8, 10)
    assert label_intervals(e, "s", "u") == [Interval(8, 10)]
    assert label_intervals(e, "s", DROP) == [Interval(10, 12)]
    assert label_intervals(e, "s", "t") == [Interval(0, 8), Interval(12, 16)]
    sim = AddressSim(8)
    sim.add_rule(1, "s", "t", 1, 0, 16)
    sim.add_rule(2, "s", DROP, 3, 10, 12)
    sim.add_rule(3, "s", "u", 2, 8, 12)
    assert sim_vs_engine(e, sim) is None


def test_overlapping_insert_moves_swath(backend):
    # three chained rules whose prefixes all overlap; a higher-priority rule
    # at the first switch takes over three of the four refined atoms
    e = Engine(k=8, backend=backend)
    e.insert_rule(Rule(1, "s1", "s2", 1, Interval(0, 16)))
    e.insert_rule(Rule(2, "s2", "s3", 1, Interval(8, 24)))
    e.insert_rule(Rule(3, "s3", "s4", 1, Interval(12, 28)))
    delta = e.insert_rule(Rule(4, "s1", "s4", 9, Interval(4, 16)))
    assert len(delta.split_pairs) == 1
    assert label_intervals(e, "s1", "s4") == [
        Interval(4, 8),
        Interval(8, 12),
        Interval(12, 16),
    ]
    assert label_intervals(e, "s1", "s2") == [Interval(0, 4)]
    # net delta: the freshly split atom was added and immediately moved, so
    # it cancels on the old link; two previously-carried atoms show as removed
    assert len(delta.added("s1", "s4")) == 3
    assert len(delta.removed("s1", "s2")) == 2
    assert delta.added("s1", "s4") & delta.removed("s1", "s4") == LabelSet()


def test_remove_restores_previous_owner(backend):
    e = two_rule_engine(backend)
    e.remove_rule(2)
    assert label_intervals(e, "s", "t") == [
        Interval(0, 10),
        Interval(10, 12),
        Interval(12, 16),
    ]
    assert e.label_of("s", DROP) == LabelSet()


def test_remove_only_rule_empties_link(backend):
    e = Engine(k=4, backend=backend)
    e.insert_rule(Rule(1, "s", "t", 1, Interval(0, 16)))
    e.remove_rule(1)
    assert e.label_of("s", "t") == LabelSet()
    assert e.rule_count() == 0
    assert e.check_coherence() == []


def test_insert_remove_inversion_random(backend):
    # insert-then-remove may leave behind a new link, unused atom ids and
    # finer splits, but never a change in which addresses flow where
    for seed in range(10):
        e, sim, rng = build_random_state(seed, 60, backend=backend)
        before = label_coverage(e)
        owners_before = owners_by_address(e)
        rule = random_rule(rng, 10_000, NODES6, e.k)
        e.insert_rule(rule)
        e.remove_rule(rule.rule_id)
        assert label_coverage(e) == before
        assert owners_by_address(e) == owners_before


def test_label_of_unknown_link(backend):
    e = two_rule_engine(backend)
    with pytest.raises(UnknownLink):
        e.label_of("s", "nowhere")


def test_duplicate_and_unknown_rule_ids(backend):
    e = two_rule_engine(backend)
    with pytest.raises(DuplicateRuleId):
        e.insert_rule(Rule(1, "x", "y", 5, Interval(0, 8)))
    with pytest.raises(UnknownRuleId):
        e.remove_rule(99)
    # ids become reusable once removed
    e.remove_rule(1)
    e.insert_rule(Rule(1, "s", "t", 1, Interval(0, 16)))


def test_rule_validation(backend):
    e = Engine(k=4, backend=backend)
    with pytest.raises(ValueError):
        e.insert_rule(Rule(1, "s", "s", 1, Interval(0, 8)))
    with pytest.raises(ValueError):
        e.insert_rule(Rule(1, DROP, "s", 1, Interval(0, 8)))
    with pytest.raises(ValueError):
        e.insert_rule(Rule(1, "s", "t", 1, Interval(0, 17)))


def test_priority_tie_break_larger_id_wins(backend):
    e = Engine(k=4, backend=backend)
    e.insert_rule(Rule(1, "s", "t", 5, Interval(0, 8)))
    e.insert_rule(Rule(2, "s", "u", 5, Interval(0, 8)))
    assert e.priority_conflicts == 1
    assert label_intervals(e, "s", "u") == [Interval(0, 8)]
    assert e.label_of("s", "t") == LabelSet()
    # insertion order must not matter for the tie
    e2 = Engine(k=4, backend=backend)
    e2.insert_rule(Rule(2, "s", "u", 5, Interval(0, 8)))
    e2.insert_rule(Rule(1, "s", "t", 5, Interval(0, 8)))
    assert e2.dump() == e.dump()


def test_duplicate_exact_rule_allowed(backend):
    e = Engine(k=4, backend=backend)
    e.insert_rule(Rule(1, "s", "t", 5, Interval(0, 8)))
    e.insert_rule(Rule(2, "s", "t", 5, Interval(0, 8)))
    assert e.priority_conflicts == 1
    assert label_intervals(e, "s", "t") == [Interval(0, 8)]
    e.remove_rule(2)
    assert label_intervals(e, "s", "t") == [Interval(0, 8)]


def test_order_independence_of_final_state(backend):
    rng = random.Random(7)
    rules = [random_rule(rng, rid, NODES6, 8) for rid in range(40)]
    reference = None
    for _ in range(4):
        order = rules.copy()
        rng.shuffle(order)
        e = Engine(k=8, backend=backend)
        for r in order:
            e.insert_rule(r)
        dump = e.dump()
        if reference is None:
            reference = dump
        assert dump == reference


def test_checkpoint_restore(backend):
    e, sim, rng = build_random_state(3, 80, backend=backend)
    snap = e.checkpoint()
    before = e.dump()
    for _ in churn(rng, e, 100):
        pass
    assert e.dump() != before
    e.restore(snap)
    assert e.dump() == before
    e.restore(snap)  # idempotent
    assert e.dump() == before


def test_checkpoint_restore_empty(backend):
    e = Engine(k=8, backend=backend)
    snap = e.checkpoint()
    rng = random.Random(5)
    for _ in churn(rng, e, 50):
        pass
    e.restore(snap)
    assert e.rule_count() == 0
    assert all(e.label_of(*link) == LabelSet() for link in e.links())


def test_differential_vs_address_sim(backend):
    for seed in range(8):
        e, sim, _ = build_random_state(seed, 150, backend=backend)
        mismatch = sim_vs_engine(e, sim)
        assert mismatch is None, str(mismatch)
        assert e.check_coherence() == []


def test_delta_locality(backend):
    # changes touch only links at the rule's source, plus links that owned
    # a split atom
    e, sim, rng = build_random_state(11, 120, backend=backend)
    for kind, payload, delta in churn(rng, e, 60):
        if kind != "add":
            continue
        allowed_sources = {payload.src}
        old_atoms = [old for old, _ in delta.split_pairs]
        for link in delta.links():
            if link[0] in allowed_sources:
                continue
            label = e.label_of(*link)
            assert any(a in label for a in old_atoms), (
                f"delta touched {link} which is neither at the source nor "
                f"an owner of a split atom"
            )


def test_owner_is_unique_per_node(backend):
    e, _, _ = build_random_state(13, 200, backend=backend)
    for atom in range(e.atom_count()):
        for node in e.nodes():
            if node == DROP:
                continue
            carrying = [
                (src, dst)
                for src, dst in e.links()
                if src == node and atom in e.label_of(src, dst)
            ]
            assert len(carrying) <= 1
            link = e.owner_link(atom, node)
            assert carrying == ([link] if link else [])


def test_atom_bound_after_churn(backend):
    e = Engine(k=8, backend=backend)
    rng = random.Random(1)
    registrations = 0
    for kind, _, _ in churn(rng, e, 120):
        if kind == "add":
            registrations += 1
    assert e.atom_count() <= 2 * registrations + 1


def test_dump_atom_map_format(backend):
    e = Engine(k=4, backend=backend)
    e.insert_rule(Rule(1, "s", "t", 1, Interval(10, 12)))
    assert e.dump_atom_map() == "0\t0\n10\t1\n12\t2\n16\tinf\n"


@pytest.mark.skipif(len(available_backends()) < 2, reason="compiled core not built")
def test_backends_agree_exactly():
    """Differential check: both cores produce identical state and deltas."""
    rng1, rng2 = random.Random(42), random.Random(42)
    e1 = Engine(k=8, backend="python")
    e2 = Engine(k=8, backend="compiled")
    stream1 = churn(rng1, e1, 400)
    stream2 = churn(rng2, e2, 400)
    for (k1, _, d1), (k2, _, d2) in zip(stream1, stream2):
        assert k1 == k2
        assert d1.links() == d2.links()
        for link in d1.links():
            assert d1.added(*link) == d2.added(*link)
            assert d1.removed(*link) == d2.removed(*link)
        assert d1.split_pairs == list(d2.split_pairs)
    assert e1.dump() == e2.dump()
    assert e1.dump_atom_map() == e2.dump_atom_map()
    assert e1.priority_conflicts == e2.priority_conflicts
