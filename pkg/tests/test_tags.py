from __future__ import annotations

import pickle
import time

import pytest
from hypothesis import given
from hypothesis import strategies as st

from reactorrl.tags import (
    MAX_MICROSTEP,
    MAX_TIME,
    MSEC,
    STARTUP_TAG,
    LogicalDelay,
    Ordering,
    PhysicalClock,
    Tag,
    TagOverflowError,
    tag_after_delay,
    tag_compare,
)

tags = st.builds(Tag, st.integers(0, 10**12), st.integers(0, 50))


@pytest.mark.parametrize("a, b, expected", [
    (Tag(5 * MSEC, 0), Tag(5 * MSEC, 1), Ordering.LESS),
    (Tag(5 * MSEC, 1), Tag(6 * MSEC, 0), Ordering.LESS),
    (Tag(7 * MSEC, 2), Tag(7 * MSEC, 2), Ordering.EQUAL),
    (Tag(6 * MSEC, 0), Tag(5 * MSEC, 9), Ordering.GREATER),
])
def test_compare_examples(a, b, expected):
    assert tag_compare(a, b) is expected


@pytest.mark.parametrize("tag, delay, expected", [
    (Tag(20 * MSEC, 0), LogicalDelay(10 * MSEC), Tag(30 * MSEC, 0)),
    (Tag(20 * MSEC, 3), LogicalDelay(0), Tag(20 * MSEC, 4)),
    (Tag(0, 0), LogicalDelay(0), Tag(0, 1)),
    (Tag(20 * MSEC, 3), 5 * MSEC, Tag(25 * MSEC, 0)),
])
def test_after_delay_examples(tag, delay, expected):
    assert tag_after_delay(tag, delay) == expected
    assert type(tag_after_delay(tag, delay)) is Tag


def test_delay_kind():
    assert LogicalDelay(0).kind == "zero"
    assert LogicalDelay(1).kind == "strict-positive"
    assert LogicalDelay.ms(1.5).nanos == 1_500_000
    with pytest.raises(ValueError):
        LogicalDelay(-1)
    with pytest.raises(ValueError):
        tag_after_delay(STARTUP_TAG, -5)


def test_overflow():
    with pytest.raises(TagOverflowError):
        tag_after_delay(Tag(MAX_TIME - 1, 0), 2)
    with pytest.raises(TagOverflowError):
        tag_after_delay(Tag(0, MAX_MICROSTEP), 0)
    with pytest.raises(TagOverflowError):
        Tag(0, MAX_MICROSTEP + 1)
    with pytest.raises(ValueError):
        Tag(-1, 0)


def test_serialization_round_trip():
    t = Tag(5_000_000, 1)
    assert str(t) == "5000000:1"
    assert Tag.parse("5000000:1") == t
    assert pickle.loads(pickle.dumps(t)) == t
    assert type(pickle.loads(pickle.dumps(t))) is Tag
    with pytest.raises(ValueError):
        Tag.parse("5000000")


@given(tags, tags, tags)
def test_order_is_total_and_transitive(a, b, c):
    ab, ba = tag_compare(a, b), tag_compare(b, a)
    assert ab == -ba  # antisymmetry
    assert (ab is Ordering.EQUAL) == (a == b)
    if ab is Ordering.LESS and tag_compare(b, c) is Ordering.LESS:
        assert tag_compare(a, c) is Ordering.LESS
    assert (a < b) == ((a.time, a.microstep) < (b.time, b.microstep))


@given(tags, st.integers(1, 10**9))
def test_positive_delay_resets_microstep(t, d):
    nxt = tag_after_delay(t, d)
    assert nxt > t and nxt.microstep == 0 and nxt.time == t.time + d


@given(tags)
def test_zero_delay_bumps_microstep(t):
    nxt = tag_after_delay(t, LogicalDelay(0))
    assert nxt > t and nxt.time == t.time and nxt.microstep == t.microstep + 1


def test_physical_clock():
    clock = PhysicalClock()
    a = clock.now()
    assert 0 <= a < 50 * MSEC
    b = clock.now()
    assert b >= a
    time.sleep(0.005)
    assert clock.now() - b >= 5 * MSEC
