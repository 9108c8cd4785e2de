from hypothesis import given, settings, strategies as st

from v6edge.bindings import BindingCheck, BindingTable, BindOutcome

from conftest import A


def test_register_and_cap():
    t = BindingTable(cap_k=4)
    assert t.try_register(A("fd00::1"), 2).outcome is BindOutcome.REGISTERED
    assert t.addr_count(2) == 1
    for i in range(2, 5):
        t.try_register(A(f"fd00::{i}"), 2)
    assert t.try_register(A("fd00::99"), 2).outcome is BindOutcome.CAP_EXCEEDED
    assert t.addr_count(2) == 4 and len(t) == 4


def test_already_bound_is_noop():
    t = BindingTable(cap_k=4)
    t.try_register(A("fd00::1"), 2)
    r = t.try_register(A("fd00::1"), 3)
    assert r.outcome is BindOutcome.ALREADY_BOUND and r.existing_port == 2
    assert t.addr_count(3) == 0 and t.port_of(A("fd00::1")) == 2


def test_check():
    t = BindingTable()
    t.try_register(A("fd00::1"), 2)
    assert t.check(A("fd00::1"), 2) is BindingCheck.MATCH
    assert t.check(A("fd00::1"), 5) is BindingCheck.MISMATCH
    assert t.check(A("fd00::9"), 2) is BindingCheck.UNKNOWN


def test_port_utilization():
    t = BindingTable(cap_k=8)
    assert t.port_utilization(ports=[1, 2]) == {1: (0, 8), 2: (0, 8)}
    for i in range(3):
        t.try_register(A(f"fd00::{i + 1}"), 1)
    util = t.port_utilization()
    assert util[1] == (3, 8)
    assert sum(n for n, _ in util.values()) == len(t)


def test_dump_orders_by_registration_time():
    t = BindingTable()
    t.try_register(A("fd00::2"), 2, timestamp=50)
    t.try_register(A("fd00::1"), 3, timestamp=10)
    assert [r["address"] for r in t.dump()] == ["fd00::1", "fd00::2"]


ops = st.lists(st.tuples(st.integers(0, 40), st.integers(0, 5)), max_size=300)


@settings(max_examples=100, deadline=None)
@given(ops, st.integers(1, 6))
def test_invariants_under_random_ops(seq, k):
    t = BindingTable(cap_k=k)
    first = {}
    for a, p in seq:
        addr = A(f"fd00::{a:x}")
        if t.try_register(addr, p).outcome is BindOutcome.REGISTERED:
            first[addr] = p
        for port in range(6):
            assert t.addr_count(port) <= k
            assert t.addr_count(port) == sum(1 for v in first.values() if v == port)
    for addr, p in first.items():
        assert t.port_of(addr) == p
