import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from fabricbod.reservations import FOREVER, ReservationCalendar

from oracles import per_tick_residual


def test_empty_calendar_full_residual():
    cal = ReservationCalendar(10000)
    assert cal.residual(0, 1000) == 10000
    assert cal.residual(5, 6) == 10000


def test_overlapping_allocations_sweep():
    # Frozen from the per-tick oracle: ticks 50..99 carry 600+300=900.
    cal = ReservationCalendar(1000)
    cal.allocate("s1", 0, 100, 600)
    cal.allocate("s2", 50, 150, 300)
    assert per_tick_residual(1000, [(0, 100, 600), (50, 150, 300)], 40, 120) == 100
    assert cal.residual(40, 120) == 100


def test_window_after_all_allocations():
    cal = ReservationCalendar(1000)
    cal.allocate("s1", 0, 100, 600)
    assert cal.residual(100, 200) == 1000


def test_half_open_windows_do_not_clash():
    cal = ReservationCalendar(1000)
    cal.allocate("s1", 0, 100, 800)
    cal.allocate("s2", 100, 200, 800)
    assert cal.residual(0, 100) == 200
    assert cal.residual(100, 200) == 200
    assert cal.peak_load(0, 200) == 800


def test_release_restores_residual():
    cal = ReservationCalendar(1000)
    before = cal.to_doc()
    cal.allocate("s1", 10, 20, 400)
    cal.hold_vlan("s1", 10, 20, 2)
    assert cal.residual(10, 20) == 600
    cal.release("s1")
    assert cal.to_doc() == before


def test_lowest_free_vlan_scan():
    cal = ReservationCalendar(1000)
    assert cal.lowest_free_vlan(0, 100) == 2
    cal.hold_vlan("a", 0, 100, 2)
    cal.hold_vlan("b", 0, 100, 3)
    assert cal.lowest_free_vlan(0, 100) == 4
    assert cal.lowest_free_vlan(100, 200) == 2  # past the holds
    cal.release("a")
    assert cal.lowest_free_vlan(0, 100) == 2


def test_vlan_uniqueness_is_time_scoped():
    cal = ReservationCalendar(1000)
    cal.hold_vlan("a", 0, 100, 2)
    assert not cal.vlan_is_free(2, 50, 60)
    assert cal.vlan_is_free(2, 100, 200)


def test_forever_holds():
    cal = ReservationCalendar(1000)
    cal.hold_vlan("ckt", 5, FOREVER, 2)
    assert cal.lowest_free_vlan(1000, FOREVER) == 3
    cal.release("ckt")
    assert cal.lowest_free_vlan(1000, FOREVER) == 2


@settings(max_examples=120, deadline=None)
@given(st.lists(
    st.tuples(st.integers(0, 40), st.integers(1, 20), st.integers(1, 500)),
    min_size=0, max_size=12),
    st.integers(0, 50), st.integers(1, 15))
def test_residual_matches_per_tick_oracle(allocs, win_start, win_len):
    cal = ReservationCalendar(1000)
    triples = []
    for i, (start, length, bw) in enumerate(allocs):
        cal.allocate(f"s{i}", start, start + length, bw)
        triples.append((start, start + length, bw))
    expected = per_tick_residual(1000, triples, win_start, win_start + win_len)
    assert cal.residual(win_start, win_start + win_len) == expected
