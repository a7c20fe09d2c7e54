import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from deltanet.atoms import INF_ATOM, AtomMap, DeltaPair
from deltanet.errors import BoundsNotRegistered, UnknownAtom
from deltanet.prefix import AddressSpace, Interval

K32 = AddressSpace(32)
MAX32 = K32.max_addr


def partition_oracle(space, intervals):
    """Independent route to the expected partition: collect bounds, sort."""
    bounds = {space.min_addr, space.max_addr}
    for iv in intervals:
        bounds.update((iv.lo, iv.hi))
    cuts = sorted(bounds)
    return [Interval(a, b) for a, b in zip(cuts, cuts[1:])]


def fig8_map():
    """The worked two-rule map: [10:12) high priority, [0:16) low."""
    m = AtomMap(K32)
    m.create_atoms(Interval(10, 12))
    m.create_atoms(Interval(0, 16))
    return m


def test_fig8_key_assignment():
    m = fig8_map()
    assert m.dump() == f"0\t0\n10\t1\n12\t2\n16\t3\n{MAX32}\tinf\n"
    assert m.atom_count == 4


def test_create_atoms_idempotent():
    m = fig8_map()
    before = m.dump()
    m.create_atoms(Interval(10, 12))
    assert m.dump() == before
    assert m.next_id == 4


def test_full_space_interval_is_noop():
    m = AtomMap(K32)
    m.create_atoms(Interval(0, MAX32))
    assert m.atom_count == 1
    assert m.next_id == 1


def test_split_returns_single_delta_pair():
    m = fig8_map()
    delta = m.create_atoms_plus(Interval(8, 12))
    assert delta == [DeltaPair(old=0, new=4)]
    assert m.interval_of(0) == Interval(0, 8)
    assert m.interval_of(4) == Interval(8, 10)


def test_no_split_when_bounds_exist():
    m = fig8_map()
    assert m.create_atoms_plus(Interval(10, 16)) == []


def test_fresh_map_two_splits():
    # hand simulation: inserting 10 splits [0:MAX) into [0:10)/[10:MAX),
    # then inserting 12 splits [10:MAX) into [10:12)/[12:MAX)
    m = AtomMap(K32)
    delta = m.create_atoms_plus(Interval(10, 12))
    assert delta == [DeltaPair(0, 1), DeltaPair(1, 2)]
    assert m.intervals() == partition_oracle(K32, [Interval(10, 12)])


def test_atoms_of_worked_examples():
    m = fig8_map()
    assert m.atoms_of(Interval(10, 12)) == [1]
    assert m.atoms_of(Interval(0, 16)) == [0, 1, 2]
    assert m.atoms_of(Interval(0, MAX32)) == [0, 1, 2, 3]


def test_atoms_of_requires_registered_bounds():
    m = fig8_map()
    with pytest.raises(BoundsNotRegistered):
        m.atoms_of(Interval(0, 8))


def test_interval_of():
    m = fig8_map()
    assert m.interval_of(1) == Interval(10, 12)
    with pytest.raises(UnknownAtom):
        m.interval_of(INF_ATOM)
    with pytest.raises(UnknownAtom):
        m.interval_of(99)


def test_atom_at():
    m = fig8_map()
    assert m.atom_at(0) == 0
    assert m.atom_at(11) == 1
    assert m.atom_at(12) == 2
    assert m.atom_at(MAX32 - 1) == 3
    with pytest.raises(UnknownAtom):
        m.atom_at(MAX32)


def small_intervals(k):
    hi = 1 << k
    return st.tuples(
        st.integers(min_value=0, max_value=hi - 1), st.integers(min_value=1, max_value=hi)
    ).map(lambda t: Interval(t[0], max(t[0] + 1, min(t[1] + t[0], hi))))


@settings(max_examples=200, deadline=None)
@given(st.lists(small_intervals(8), max_size=20))
def test_partition_invariant(intervals):
    space = AddressSpace(8)
    m = AtomMap(space)
    registrations = 0
    for iv in intervals:
        delta = m.create_atoms_plus(iv)
        assert len(delta) <= 2
        registrations += 1
        assert m.atom_count <= 2 * registrations + 1
    assert m.intervals() == partition_oracle(space, intervals)
    # ids denote disjoint intervals whose union is the space
    spans = sorted(m.interval_of(a) for a in m.live_atoms())
    assert spans == m.intervals()


@settings(max_examples=100, deadline=None)
@given(
    st.lists(small_intervals(8), min_size=1, max_size=12),
    st.randoms(use_true_random=False),
)
def test_order_independence(intervals, rng):
    space = AddressSpace(8)
    m1 = AtomMap(space)
    for iv in intervals:
        m1.create_atoms(iv)
    shuffled = intervals.copy()
    rng.shuffle(shuffled)
    m2 = AtomMap(space)
    for iv in shuffled:
        m2.create_atoms(iv)
    assert m1.intervals() == m2.intervals()


@settings(max_examples=100, deadline=None)
@given(st.lists(small_intervals(8), min_size=1, max_size=12), st.data())
def test_atoms_of_concatenates_exactly(intervals, data):
    space = AddressSpace(8)
    m = AtomMap(space)
    for iv in intervals:
        m.create_atoms(iv)
    probe = data.draw(st.sampled_from(intervals))
    pieces = [m.interval_of(a) for a in m.atoms_of(probe)]
    assert pieces[0].lo == probe.lo and pieces[-1].hi == probe.hi
    for left, right in zip(pieces, pieces[1:]):
        assert left.hi == right.lo


def test_copy_is_independent():
    m = fig8_map()
    c = m.copy()
    m.create_atoms(Interval(8, 12))
    assert c.atom_count == 4 and m.atom_count == 5


def test_ids_never_reused():
    m = AtomMap(AddressSpace(8))
    seen = set()
    for iv in [Interval(3, 9), Interval(1, 200), Interval(9, 100)]:
        for old, new in m.create_atoms_plus(iv):
            assert new not in seen
            seen.add(new)
            assert old < new
