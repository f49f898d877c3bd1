from __future__ import annotations

import csv
import io
import math

import pytest

from reactorrl.bench import (
    CSV_COLUMNS,
    BenchResult,
    bench_broadcast_gather,
    bench_env_throughput,
    bench_marl,
    bench_parallel_q,
    emit_report,
    linear_fit,
    summarize,
)
from reactorrl.bench.broadcast import make_payload
from reactorrl.bench.report import to_csv
from reactorrl.bench.stats import parse_bytes, parse_list
from reactorrl.rl.config import RLConfig


def fake_results(reps: int = 1) -> list[BenchResult]:
    out = []
    for runtime in ("reactor", "actor"):
        for k, n in enumerate((2, 4, 8, 16)):
            vals = [1.0 + k + 0.1 * r + (runtime == "actor") for r in range(reps)]
            out.append(BenchResult("broadcast-gather", runtime, "actors", n, [int(v * 1e6) for v in vals],
                                   "overhead_ms", vals, 42, 8, 2))
    return out


def test_summary_and_ci():
    s = summarize([1.0, 2.0, 3.0, 4.0])
    assert s.mean == 2.5 and s.std == pytest.approx(1.2909944)
    # t(0.995, 3) = 5.8409
    assert s.ci99 == pytest.approx(5.8409 * 1.2909944 / 2, rel=1e-4)
    assert s.low < s.mean < s.high
    assert math.isinf(summarize([1.0]).ci99)
    with pytest.raises(ValueError):
        summarize([])


def test_linear_fit():
    f = linear_fit([1, 2, 3], [2, 4, 6])
    assert (f.slope, f.intercept, f.r2) == pytest.approx((2.0, 0.0, 1.0))
    with pytest.raises(ValueError):
        linear_fit([1], [1])


def test_parse_list_and_bytes():
    assert parse_list("2,4,8,16") == [2, 4, 8, 16]
    assert parse_list("100..500") == [100, 200, 300, 400, 500]
    assert parse_list("2..10") == [2, 4, 6, 8, 10]
    assert parse_list("1..9:4") == [1, 5, 9]
    assert parse_list([3, 1]) == [3, 1] and parse_list(7) == [7]
    for bad in ("", "5..1", "1..3:0"):
        with pytest.raises(ValueError):
            parse_list(bad)
    assert parse_bytes("10MB") == 10 * 2**20 == parse_bytes("10MiB")
    assert parse_bytes("1KB") == 1024 and parse_bytes("512") == 512


def test_payload_is_seeded():
    assert make_payload(1000, 1) == make_payload(1000, 1) != make_payload(1000, 2)
    assert len(make_payload(12345, 0)) == 12345


def test_csv_eight_results():
    text = to_csv(fake_results())
    lines = text.splitlines()
    assert len(lines) == 9
    assert tuple(lines[0].split(",")) == CSV_COLUMNS
    row = next(csv.DictReader(io.StringIO(text)))
    assert (row["family"], row["runtime"], row["param_value"], row["reps"], row["warmup"]) == \
        ("broadcast-gather", "reactor", "2", "1", "2")


def test_csv_keeps_every_repetition():
    lines = to_csv(fake_results(reps=3)).splitlines()
    assert len(lines) == 1 + 8 * 3


def test_emit_report_deterministic(tmp_path):
    a = emit_report(fake_results(3), tmp_path / "a")
    b = emit_report(fake_results(3), tmp_path / "b")
    assert [p.name for p in a] == ["broadcast-gather.csv", "broadcast-gather_actors.svg"]
    for pa, pb in zip(a, b):
        assert pa.read_bytes() == pb.read_bytes()
    assert b"<svg" in a[1].read_bytes()


def test_emit_report_empty_writes_nothing(tmp_path):
    out = tmp_path / "out"
    with pytest.raises(ValueError):
        emit_report([], out)
    assert not out.exists()


def test_emit_report_unwritable(tmp_path):
    blocker = tmp_path / "file"
    blocker.write_text("x")
    with pytest.raises(OSError):
        emit_report(fake_results(), blocker / "sub")


def test_result_validation():
    with pytest.raises(ValueError):
        BenchResult("nope", "reactor", "x", 1, [1], "m", [1.0], 0, 1, 0)
    with pytest.raises(ValueError):
        BenchResult("parallel-q", "ray", "x", 1, [1], "m", [1.0], 0, 1, 0)
    with pytest.raises(ValueError):
        BenchResult("parallel-q", "actor", "x", 1, [1, 2], "m", [1.0], 0, 1, 0)


def test_small_broadcast_sweep():
    res = bench_broadcast_gather([2, 4], [4096], reps=3, warmup=1, workers=2)
    assert [(r.runtime, r.param_value) for r in res] == [("reactor", 2), ("actor", 2), ("reactor", 4), ("actor", 4)]
    assert all(r.reps == 3 and r.mean > 0 for r in res)
    sizes = bench_broadcast_gather([2], [1024, 2048], reps=3, warmup=0, workers=2)
    assert {r.param_name for r in sizes} == {"bytes"}


def test_small_throughput_counts_equal_work():
    res = bench_env_throughput(["blackjack", "image80"], workers=2, steps=400, steps_per_call=50, reps=3, warmup=0)
    assert len(res) == 4
    assert len({r.notes["steps"] for r in res}) == 1
    assert all(r.metric_name == "obs_per_sec" and r.mean > 0 for r in res)


def test_small_parallel_q_learns_identically():
    cfg = RLConfig(iterations=10, banks=2, width=2, steps_per_rollout=8)
    res = bench_parallel_q([8, 16], cfg, reps=3, warmup=0, workers=2)  # raises if parameters differ
    assert [(r.runtime, r.param_value) for r in res] == [("reactor", 8), ("actor", 8), ("reactor", 16), ("actor", 16)]


def test_small_marl_counts_equal_work():
    res = bench_marl(agents=[2, 3], episodes=[4], reps=3, warmup=0, workers=2, sweep="agents")
    assert [r.param_value for r in res] == [2, 2, 3, 3]
    assert res[0].notes["steps"] == res[1].notes["steps"]
    with pytest.raises(ValueError):
        bench_marl(agents=[2], episodes=[4], sweep="both")


@pytest.mark.parametrize("call", [
    lambda: bench_broadcast_gather([], [1]),
    lambda: bench_broadcast_gather([2], [1], reps=2),
    lambda: bench_env_throughput([]),
    lambda: bench_parallel_q([]),
    lambda: bench_marl(agents=[], episodes=[1]),
])
def test_empty_sweeps_and_few_reps_rejected(call):
    with pytest.raises(ValueError):
        call()


@pytest.mark.xfail(strict=False, reason="the actor baseline still pickles every batch with one worker; "
                                        "measured reactor/actor 1.08-1.49 on blackjack")
def test_single_worker_control_within_ten_percent():
    res = bench_env_throughput(["blackjack"], workers=1, steps=30_000, reps=3, warmup=1, seed=0)
    m = {r.runtime: r.mean for r in res}
    assert abs(m["reactor"] / m["actor"] - 1) <= 0.10


def test_coordination_floor_single_actor_empty_payload():
    res = bench_broadcast_gather([1], [0], reps=5, warmup=1, workers=1)
    m = {r.runtime: r.mean for r in res}
    assert m["reactor"] < m["actor"]
