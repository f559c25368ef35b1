import datetime as dt
import io
import random

import numpy as np
import pytest
from hypothesis import given, strategies as st

from poigap.core_data import (BlockMap, DataError, ParseStats, PoiTable, TimeSlice, parse_blocks,
                              parse_calendar, parse_orders, parse_poi_table, slice_of)

BLOCKS = BlockMap(("A", "B"))
START = dt.date(2016, 3, 1)


def test_parse_order_line():
    recs = parse_orders(["o1\tNULL\tp1\tA\tB\t7.5\t2016-03-01 08:03:12\n"], BLOCKS)
    assert len(recs) == 1
    rec = recs[0]
    assert rec.driver_id is None and not rec.answered
    assert rec.start_block == 0 and rec.dest_block == "B" and rec.price == 7.5
    assert slice_of(rec.timestamp, START) == TimeSlice(0, 48)


def test_parse_orders_empty():
    assert parse_orders([], BLOCKS) == []
    assert parse_orders(io.StringIO(""), BLOCKS) == []


def test_parse_orders_keeps_order_and_null_dest():
    lines = ["o2\td9\tp1\tB\tNULL\t1\t2016-03-01 00:00:00", "o1\tNULL\tp2\tA\tA\t0\t2016-03-02 23:59:59"]
    recs = parse_orders(lines, BLOCKS)
    assert [r.order_id for r in recs] == ["o2", "o1"]
    assert recs[0].driver_id == "d9" and recs[0].dest_block is None


@pytest.mark.parametrize("line, fragment", [
    ("o1\tNULL\tp1\tA\tB\t7.5", "7 tab-separated"),
    ("o1\tNULL\tp1\tZZ\tB\t7.5\t2016-03-01 08:03:12", "'ZZ'"),
    ("o1\tNULL\tp1\tA\tB\t-1\t2016-03-01 08:03:12", "negative price"),
    ("o1\tNULL\tp1\tA\tB\tx\t2016-03-01 08:03:12", "bad price"),
    ("o1\tNULL\tp1\tA\tB\t1\t2016-03-01T08:03:12", "bad timestamp"),
    ("o1\tNULL\tp1\tA\tB\t1\t2016-13-01 08:03:12", "bad timestamp"),
])
def test_parse_orders_strict_errors(line, fragment):
    good = "o0\tNULL\tp1\tA\tB\t7.5\t2016-03-01 08:03:12"
    with pytest.raises(DataError, match=fragment) as info:
        parse_orders([good, line], BLOCKS)
    assert info.value.line == 2


def test_parse_orders_lenient_counts_skips():
    stats = ParseStats()
    lines = ["o0\tNULL\tp1\tA\tB\t7.5\t2016-03-01 08:03:12", "garbage", "o2\tNULL\tp1\tQ\tB\t1\t2016-03-01 08:03:12"]
    recs = parse_orders(lines, BLOCKS, strict=False, stats=stats)
    assert len(recs) == 1
    assert stats.lines == 3 and stats.skipped == 2 and len(stats.errors) == 2


def test_parse_poi_table_hand_example():
    t = parse_poi_table(["A 1#1:3 2#4:1", "B 2#4:5"])
    assert t.categories == ("1#1", "2#4")
    np.testing.assert_array_equal(t.counts, [[3, 1], [0, 5]])


def test_parse_poi_table_empty_row():
    t = parse_poi_table(["A 1#1:2", "B"], BLOCKS)
    np.testing.assert_array_equal(t.counts, [[2], [0]])


def test_parse_poi_table_missing_block_is_zero_row():
    t = parse_poi_table(["B 1#1:2"], BLOCKS)
    np.testing.assert_array_equal(t.counts, [[0], [2]])


@pytest.mark.parametrize("lines, fragment", [
    (["A 1#1:1", "A 1#2:1"], "duplicate block"),
    (["A 1#1:-1"], "negative count"),
    (["A 1#1:1.5"], "non-integer"),
    (["A 1#1"], "bad token"),
])
def test_parse_poi_table_errors(lines, fragment):
    with pytest.raises(DataError, match=fragment):
        parse_poi_table(lines)


labels = st.text(alphabet="0123456789#", min_size=1, max_size=5)


@st.composite
def poi_tables(draw):
    cats = sorted(draw(st.sets(labels, min_size=1, max_size=6)))
    n_blocks = draw(st.integers(1, 5))
    counts = draw(st.lists(st.lists(st.integers(0, 50), min_size=len(cats), max_size=len(cats)),
                           min_size=n_blocks, max_size=n_blocks))
    counts = np.array(counts)
    # every category must occur somewhere to survive the text round trip
    counts[0] = np.maximum(counts[0], 1)
    return PoiTable(tuple(cats), counts), BlockMap(tuple(f"b{i}" for i in range(n_blocks)))


@given(poi_tables())
def test_poi_table_round_trip(table_blocks):
    table, blocks = table_blocks
    text = table.to_text(blocks)
    assert parse_poi_table(text.splitlines(), blocks) == table


@given(poi_tables(), st.randoms(use_true_random=False))
def test_poi_table_line_order_independent(table_blocks, rnd):
    table, blocks = table_blocks
    lines = table.to_text(blocks).splitlines()
    rnd.shuffle(lines)
    assert parse_poi_table(lines, blocks) == table


def test_slice_of_examples():
    assert slice_of(dt.datetime(2016, 3, 1, 0, 0, 0), START) == TimeSlice(0, 0)
    assert slice_of(dt.datetime(2016, 3, 1, 23, 59, 59), START) == TimeSlice(0, 143)
    assert slice_of(dt.datetime(2016, 3, 3, 10, 15, 30), START) == TimeSlice(2, 61)


def test_slice_of_before_start():
    with pytest.raises(DataError):
        slice_of(dt.datetime(2016, 2, 29, 23, 59, 59), START)


seconds = st.integers(0, 40 * 86400)


@given(seconds, seconds)
def test_slice_of_monotone(a, b):
    origin = dt.datetime.combine(START, dt.time())
    t1, t2 = sorted((origin + dt.timedelta(seconds=a), origin + dt.timedelta(seconds=b)))
    s1, s2 = slice_of(t1, START), slice_of(t2, START)
    assert s1 <= s2
    assert 0 <= s1.slot < 144


def test_calendar_defaults_week():
    monday = dt.date(2016, 2, 29)
    cal = parse_calendar([], monday, 7)
    assert cal.day_types == ("W",) * 5 + ("H",) * 2


def test_calendar_override():
    cal = parse_calendar(["2016-03-08\tH"], dt.date(2016, 3, 7), 3)
    assert cal.day_types == ("W", "H", "W")


def test_calendar_training_range_length():
    cal = parse_calendar([], dt.date(2016, 2, 23), 24)
    assert len(cal) == 24


@pytest.mark.parametrize("line", ["2016-03-40\tH", "2016-03-08\tX", "2016-03-08"])
def test_calendar_errors(line):
    with pytest.raises(DataError, match="line 1"):
        parse_calendar([line], START, 3)


def test_parse_blocks():
    bm = parse_blocks(["h2\t2", "h1\t1"])
    assert bm.hashes == ("h1", "h2")
    assert bm.index("h2") == 1
    with pytest.raises(DataError):
        parse_blocks(["h1\t1", "h2\t3"])
    with pytest.raises(DataError):
        BlockMap(("a", "a"))


def test_block_map_text_round_trip():
    bm = BlockMap(tuple(f"x{i}" for i in range(5)))
    lines = bm.to_text().splitlines()
    random.Random(0).shuffle(lines)
    assert parse_blocks(lines) == bm
