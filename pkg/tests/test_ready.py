from __future__ import annotations

import threading
import time

import pytest

from reactorrl.scheduler import AdmissionGate, AtomicCounter, EventQueue, LateEventError, ReadyQueue, countdown
from reactorrl.tags import Tag


def test_pop_order_then_empty():
    q = ReadyQueue(8)
    q.stage(["a", "b", "c"])
    assert [q.claim() for _ in range(4)] == [2, 1, 0, -1]
    q.stage(["x"])
    assert q.pop() == "x"
    assert q.pop("none") == "none"


def test_stage_over_capacity():
    with pytest.raises(ValueError):
        ReadyQueue(2).stage([1, 2, 3])
    with pytest.raises(ValueError):
        ReadyQueue(0)


def test_countdown_and_counter():
    c = countdown(3)
    assert [c() for _ in range(5)] == [2, 1, 0, -1, -2]
    a = AtomicCounter(2)
    assert [a.decrement(), a.decrement(), a.decrement()] == [1, 0, -1]
    a.reset(1)
    assert a.decrement() == 0


@pytest.mark.parametrize("threads", [2, 8])
def test_concurrent_claims_are_exact(threads):
    """Every staged index is claimed exactly once across threads, over many stages."""
    q = ReadyQueue(500)
    claimed: list[list[int]] = [[] for _ in range(threads)]
    stages = 200
    start = threading.Barrier(threads + 1)
    done = threading.Barrier(threads + 1)

    def worker(k):
        for _ in range(stages):
            start.wait()
            while (i := q.claim()) >= 0:
                claimed[k].append(q[i])
            done.wait()

    ts = [threading.Thread(target=worker, args=(k,)) for k in range(threads)]
    for t in ts:
        t.start()
    for s in range(stages):
        q.stage([(s, j) for j in range(1 + s % 500)])
        start.wait()
        done.wait()
    for t in ts:
        t.join()
    got = sorted(x for part in claimed for x in part)
    assert got == sorted((s, j) for s in range(stages) for j in range(1 + s % 500))


def test_gate_admits_at_most_sleepers():
    gate = AdmissionGate()
    admitted = []

    def sleeper():
        admitted.append(gate.wait())

    assert gate.admit(3) == 0  # nobody asleep, no permits banked
    ts = [threading.Thread(target=sleeper) for _ in range(3)]
    for t in ts:
        t.start()
    while gate.sleeping < 3:
        time.sleep(0.001)
    assert gate.admit(2) == 2
    while len(admitted) < 2:
        time.sleep(0.001)
    time.sleep(0.01)
    assert admitted == [True, True] and gate.sleeping == 1
    gate.close()
    for t in ts:
        t.join()
    assert admitted == [True, True, False]


def test_event_queue_groups_and_replaces():
    q = EventQueue()
    t1, t2 = Tag(5, 0), Tag(5, 1)
    q.push(t2, "b", 1)
    q.push(t1, "a", 1)
    assert q.push(t1, "a", 2) is True
    q.push(t1, "c", 3)
    assert len(q) == 3 and q.peek() == t1
    tag, slot = q.pop()
    assert tag == t1 and slot == {"a": 2, "c": 3}
    assert (q.enqueued, q.replaced) == (3, 1)
    with pytest.raises(LateEventError):
        q.push(t1, "z")
    q.advance_floor(Tag(9, 0))
    with pytest.raises(LateEventError):
        q.push(Tag(9, 0), "z")
    assert q.count_after(Tag(0, 0)) == 1
