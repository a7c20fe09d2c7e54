import io
import random

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from deltanet.engine import Engine
from deltanet.errors import DanglingDelete, MalformedTrace
from deltanet.prefix import AddressSpace
from deltanet.trace import (
    Topology,
    TraceOp,
    generate_dataset,
    load_plane,
    parse_trace,
    random_prefix_pool,
    replay,
    serialize_ops,
)


def parse_text(text, **kw):
    return list(parse_trace(io.StringIO(text), **kw))


def ring4():
    return Topology([("s1", "s2"), ("s2", "s3"), ("s3", "s4"), ("s4", "s1")])


def test_parse_add_and_del():
    ops = parse_text("+ 7 s1 s4 90 10.0.0.0/8\n- 7\n")
    assert ops[0] == TraceOp("add", 7, "s1", "s4", 90, "10.0.0.0/8")
    assert ops[1] == TraceOp("del", 7)


def test_parse_comments_and_blank_lines():
    ops = parse_text("# header\n\n+ 1 a b 5 0.0.0.0/0\n")
    assert len(ops) == 1


def test_dangling_delete():
    with pytest.raises(DanglingDelete) as exc:
        parse_text("+ 1 a b 5 0.0.0.0/0\n- 99\n")
    assert exc.value.line == 2


def test_double_add_rejected():
    with pytest.raises(MalformedTrace) as exc:
        parse_text("+ 1 a b 5 0.0.0.0/0\n+ 1 a b 5 0.0.0.0/0\n")
    assert exc.value.line == 2


def test_readd_after_delete_is_fine():
    ops = parse_text("+ 1 a b 5 0.0.0.0/0\n- 1\n+ 1 a c 5 0.0.0.0/0\n")
    assert len(ops) == 3


@pytest.mark.parametrize(
    "line",
    ["* 1", "+ 1 a b 5", "+ x a b 5 0.0.0.0/0", "+ 1 a b x 0.0.0.0/0", "- x"],
)
def test_syntax_errors_carry_line_numbers(line):
    with pytest.raises(MalformedTrace) as exc:
        parse_text(f"# one comment\n{line}\n")
    assert exc.value.line == 2


def test_bad_prefix_checked_when_space_given():
    with pytest.raises(MalformedTrace):
        parse_text("+ 1 a b 5 0.0.0.11/31\n", space=AddressSpace(32))


def test_unknown_node_with_topology():
    topo = ring4()
    with pytest.raises(MalformedTrace):
        parse_text("+ 1 s1 nowhere 5 0.0.0.0/0\n", topology=topo)
    ops = parse_text("+ 1 s1 DROP 5 0.0.0.0/0\n", topology=topo)
    assert ops[0].dst == "DROP"


ids = st.integers(min_value=0, max_value=2**32)


@settings(max_examples=100, deadline=None)
@given(
    st.lists(
        st.tuples(
            ids,
            st.sampled_from(["s1", "s2", "s3"]),
            st.sampled_from(["s4", "DROP"]),
            st.integers(min_value=0, max_value=2**16),
            st.integers(min_value=0, max_value=32),
        ),
        max_size=12,
        unique_by=lambda t: t[0],
    )
)
def test_serialize_parse_roundtrip(specs):
    from deltanet.prefix import IpPrefix, format_prefix

    ops = []
    for rid, src, dst, prio, length in specs:
        prefix = format_prefix(IpPrefix(0, 0), AddressSpace(32)) if length == 0 else (
            format_prefix(IpPrefix((1 << 32) - (1 << (32 - length)), length), AddressSpace(32))
        )
        ops.append(TraceOp("add", rid, src, dst, prio, prefix))
    ops.extend(TraceOp("del", rid) for rid, *_ in specs)
    assert parse_text(serialize_ops(ops)) == ops


def test_topology_load_save_roundtrip(tmp_path):
    topo = Topology([("a", "b"), ("b", "c")], hosts=["a", "c"])
    p = tmp_path / "topo.txt"
    topo.save(p)
    loaded = Topology.load(p)
    assert loaded.edges == topo.edges and loaded.hosts == topo.hosts
    assert loaded.is_connected()
    assert Topology([("a", "b"), ("c", "d")]).is_connected() is False


def test_topology_rejects_drop_and_self_edges():
    with pytest.raises(MalformedTrace):
        Topology([("a", "a")])
    with pytest.raises(MalformedTrace):
        Topology([("a", "DROP")])


def test_next_hops_tie_break():
    # diamond: two equal-length paths from d to a; the smaller neighbour wins
    topo = Topology([("a", "b"), ("a", "c"), ("b", "d"), ("c", "d")])
    hops = topo.next_hops_toward("d")
    assert hops["a"] == "b"
    assert hops["b"] == "d" and hops["c"] == "d"


def test_generate_ring_one_prefix(tmp_path):
    out = tmp_path / "trace.txt"
    stats = generate_dataset(ring4(), ["10.0.0.0/8"], out, assignment={"10.0.0.0/8": "s3"})
    assert stats == {"rules": 3, "skipped": 0, "ops": 3}
    ops = list(parse_trace(out))
    assert [op.src for op in ops] == ["s1", "s2", "s4"]
    assert all(op.kind == "add" for op in ops)


def test_generate_removal_doubles_ops(tmp_path):
    out = tmp_path / "trace.txt"
    prefixes = random_prefix_pool(5, 32, seed=3)
    stats = generate_dataset(ring4(), prefixes, out, removal="random_order", seed=3)
    assert stats["ops"] == 2 * stats["rules"]
    ops = list(parse_trace(out))
    assert len(ops) == stats["ops"]
    assert sum(op.kind == "del" for op in ops) == stats["rules"]


def test_generate_longest_prefix_policy(tmp_path):
    out = tmp_path / "trace.txt"
    generate_dataset(ring4(), ["10.0.0.0/8", "10.1.0.0/16"], out, policy="longest_prefix")
    for op in parse_trace(out):
        assert op.priority == int(op.prefix.split("/")[1])


def test_generate_deterministic(tmp_path):
    prefixes = random_prefix_pool(20, 32, seed=9)
    a, b = tmp_path / "a.txt", tmp_path / "b.txt"
    generate_dataset(ring4(), prefixes, a, removal="random_order", seed=42)
    generate_dataset(ring4(), prefixes, b, removal="random_order", seed=42)
    assert a.read_bytes() == b.read_bytes()
    c = tmp_path / "c.txt"
    generate_dataset(ring4(), prefixes, c, removal="random_order", seed=43)
    assert a.read_bytes() != c.read_bytes()


def test_generate_skips_unreachable(tmp_path):
    topo = Topology([("a", "b"), ("c", "d")])  # two components
    out = tmp_path / "trace.txt"
    stats = generate_dataset(topo, ["10.0.0.0/8"], out, assignment={"10.0.0.0/8": "a"})
    assert stats["rules"] == 1  # only b can reach a
    assert stats["skipped"] == 2


def test_random_prefix_pool_distinct_and_deterministic():
    pool = random_prefix_pool(50, 8, seed=1)
    assert len(set(pool)) == 50
    assert pool == random_prefix_pool(50, 8, seed=1)
    assert pool != random_prefix_pool(50, 8, seed=2)


def test_replay_ring_trace_loop_free(tmp_path, backend):
    out = tmp_path / "trace.txt"
    prefixes = random_prefix_pool(10, 32, seed=4)
    generate_dataset(ring4(), prefixes, out, seed=4)
    engine = Engine(k=32, backend=backend)
    csv_path = tmp_path / "metrics.csv"
    metrics = replay(parse_trace(out), engine, check="loops", metrics_out=csv_path)
    assert metrics.violations == 0
    assert metrics.total_atoms <= 2 * metrics.distinct_prefixes + 1
    assert engine.check_coherence() == []
    rows = csv_path.read_text().splitlines()
    assert rows[0] == "op_index,kind,micros,delta_atoms,changed_labels,violations"
    assert len(rows) == metrics.op_count + 1


def test_replay_adds_then_dels_leaves_empty(tmp_path, backend):
    out = tmp_path / "trace.txt"
    generate_dataset(ring4(), random_prefix_pool(8, 32, seed=5), out, removal="random_order", seed=5)
    engine = Engine(k=32, backend=backend)
    replay(parse_trace(out), engine)
    assert engine.rule_count() == 0
    assert all(not engine.label_of(*link) for link in engine.links())


def test_replay_detects_injected_loop(backend):
    text = (
        "+ 1 a b 1 0.0.0.0/8\n"
        "+ 2 b c 1 0.0.0.0/8\n"
        "+ 3 c a 1 0.0.0.0/8\n"
    )
    engine = Engine(k=32, backend=backend)
    metrics = replay(parse_text(text), engine, check="loops")
    assert metrics.violations == 1
    assert metrics.loop_reports


def test_load_plane_applies_adds_only(tmp_path):
    out = tmp_path / "trace.txt"
    generate_dataset(ring4(), random_prefix_pool(6, 32, seed=6), out, removal="random_order", seed=6)
    engine = Engine(k=32)
    count = load_plane(out, engine)
    assert count == engine.rule_count() > 0


def test_metrics_summary_fields():
    engine = Engine(k=32)
    metrics = replay(parse_text("+ 1 a b 1 10.0.0.0/8\n"), engine)
    text = metrics.summary()
    for needle in ("operations: 1", "total atoms:", "median op time", "ops under 250 us"):
        assert needle in text
