from __future__ import annotations

import logging
import threading
import time

import pytest

from programs import random_program
from reactorrl import MSEC, ReactorClass, Runtime, RuntimeConfig, Tag, compile_program
from reactorrl.rl.config import RLConfig
from reactorrl.rl.dataflow import appendix_program, run_pipeline
from reactorrl.scheduler import EffectError, ReactionFault, RuntimeTerminated


def runtime(main: ReactorClass, **cfg) -> Runtime:
    g, lm = compile_program(main)
    cfg.setdefault("fast", True)
    return Runtime(g, lm, RuntimeConfig(**cfg))


def single(cls: ReactorClass, name: str = "r") -> ReactorClass:
    main = ReactorClass("Main")
    main.new(name, cls)
    return main


def test_periodic_timer_with_timeout():
    r = ReactorClass("Ticker")
    r.timer("t", offset=0, period=MSEC)
    r.state("fired", factory=lambda p: [])

    @r.reaction(["t"])
    def tick(ctx):
        ctx.state.fired.append(ctx.tag)

    rt = runtime(single(r), timeout=10 * MSEC)
    rep = rt.run()
    assert rt.state_of("r").fired == [Tag(k * MSEC, 0) for k in range(11)]
    assert rep.final_tag == Tag(10 * MSEC, 0)


def test_empty_program_stops_after_startup():
    rep = runtime(ReactorClass("Main")).run()
    assert rep.events_executed == 0
    assert rep.reactions_executed == 0
    assert rep.executed_tags[0] == Tag(0, 0)
    assert rep.tags_processed <= 2


def test_appendix_reaction_count_independent_of_workers():
    cfg = RLConfig(iterations=1000, steps_per_rollout=8, batch_size=8)
    one = run_pipeline(cfg, workers=1)
    four = run_pipeline(cfg, workers=4)
    assert one.report.reactions_executed == four.report.reactions_executed
    assert one.param_hashes == four.param_hashes


def scheduler_program(min_delay: int, extra: int = 0) -> ReactorClass:
    r = ReactorClass("S")
    r.timer("t", offset=20 * MSEC)
    r.action("a", min_delay=min_delay)
    r.state("scheduled", None)
    r.state("seen", factory=lambda p: [])

    @r.reaction(["t"], effects=["a"])
    def go(ctx):
        ctx.state.scheduled = ctx.schedule("a", "x", extra)

    @r.reaction(["a"])
    def got(ctx):
        ctx.state.seen.append((ctx.tag, ctx.get("a")))

    return single(r)


@pytest.mark.parametrize("min_delay, expected", [(0, Tag(20 * MSEC, 1)), (5 * MSEC, Tag(25 * MSEC, 0))])
def test_schedule_action_tag_rule(min_delay, expected):
    rt = runtime(scheduler_program(min_delay))
    rt.run()
    st = rt.state_of("r")
    assert st.scheduled == expected
    assert st.seen == [(expected, "x")]


def test_schedule_extra_delay_adds():
    rt = runtime(scheduler_program(2 * MSEC, 3 * MSEC))
    rt.run()
    assert rt.state_of("r").scheduled == Tag(25 * MSEC, 0)


def test_same_tag_schedule_last_write_wins(caplog):
    r = ReactorClass("S")
    r.action("a")
    r.state("seen", factory=lambda p: [])

    @r.reaction(["startup"], effects=["a"])
    def twice(ctx):
        ctx.schedule("a", 1)
        ctx.schedule("a", 2)

    @r.reaction(["a"])
    def got(ctx):
        ctx.state.seen.append(ctx.get("a"))

    rt = runtime(single(r))
    with caplog.at_level(logging.WARNING, logger="reactorrl"):
        rep = rt.run()
    assert rt.state_of("r").seen == [2]
    assert rep.events_replaced == 1
    assert any("last write wins" in m for m in caplog.messages)


def test_port_value_seen_downstream_same_tag():
    src = ReactorClass("Src")
    src.output("o")

    @src.reaction(["startup"], effects=["o"])
    def emit(ctx):
        ctx.set("o", 42)

    dst = ReactorClass("Dst")
    dst.input("i")
    dst.state("got", None)

    @dst.reaction(["i"])
    def read(ctx):
        ctx.state.got = (ctx.tag, ctx.get("i"))

    main = ReactorClass("Main")
    main.new("s", src)
    main.new("d", dst)
    main.connect("s.o", "d.i")
    g, lm = compile_program(main)
    assert lm[g.reaction("d.r0").index] > lm[g.reaction("s.r0").index]
    rt = Runtime(g, lm, RuntimeConfig(fast=True))
    rt.run()
    assert rt.state_of("d").got == (Tag(0, 0), 42)


def test_absent_input_and_presence():
    src = ReactorClass("Src")
    src.output("o", 2)

    @src.reaction(["startup"], effects=["o"])
    def emit(ctx):
        ctx.set("o", "only", channel=1)

    dst = ReactorClass("Dst")
    dst.input("i", 2)
    dst.state("seen", None)

    @dst.reaction(["i"])
    def read(ctx):
        ctx.state.seen = (ctx.get_all("i"), ctx.present("i", 0), ctx.present("i", 1), ctx.width("i"))

    main = ReactorClass("Main")
    main.new("s", src)
    main.new("d", dst)
    main.connect("s.o", "d.i")
    rt = runtime(main)
    rt.run()
    assert rt.state_of("d").seen == ([None, "only"], False, True, 2)


def test_undeclared_effect_faults():
    r = ReactorClass("R")
    r.output("o")

    @r.reaction(["startup"])
    def sneaky(ctx):
        ctx.set("o", 1)

    with pytest.raises(ReactionFault) as exc:
        runtime(single(r)).run()
    assert exc.value.reaction_id == "r.r0"
    assert isinstance(exc.value.__cause__, EffectError)


def test_fault_reports_reaction_and_stops():
    r = ReactorClass("R")
    r.timer("t", period=MSEC)
    r.state("n", 0)

    @r.reaction(["t"])
    def boom(ctx):
        ctx.state.n += 1
        if ctx.state.n == 3:
            raise RuntimeError("bad")

    rt = runtime(single(r, "bad_one"), timeout=100 * MSEC)
    with pytest.raises(ReactionFault) as exc:
        rt.run()
    f = exc.value
    assert (f.reaction_id, f.reactor, f.tag) == ("bad_one.r0", "bad_one", Tag(2 * MSEC, 0))
    assert "RuntimeError" in f.report.fault
    assert rt.state_of("bad_one").n == 3


def test_deadline_handler_runs_when_late():
    r = ReactorClass("R")
    r.state("ran", None)

    @r.reaction(["startup"], name="slow")
    def slow(ctx):
        time.sleep(0.002)

    def late(ctx):
        ctx.state.ran = "handler"

    @r.reaction(["startup"], deadline=0, on_deadline=late, name="guarded")
    def guarded(ctx):
        ctx.state.ran = "body"

    rt = runtime(single(r))
    rep = rt.run()
    assert rt.state_of("r").ran == "handler"
    assert rep.deadline_misses == 1


def test_no_deadline_body_runs():
    r = ReactorClass("R")
    r.state("ran", None)

    @r.reaction(["startup"])
    def body(ctx):
        time.sleep(0.001)
        ctx.state.ran = "body"

    rt = runtime(single(r))
    rt.run()
    assert rt.state_of("r").ran == "body"


def shutdown_program(n: int = 3) -> ReactorClass:
    main = ReactorClass("Main")
    ctrl = ReactorClass("Ctrl")
    ctrl.timer("t", offset=9 * MSEC)
    ctrl.timer("late", offset=10 * MSEC)
    ctrl.state("final", None)
    ctrl.state("late_ran", False)

    @ctrl.reaction(["t"])
    def stop(ctx):
        ctx.state.final = ctx.request_shutdown()

    @ctrl.reaction(["late"])
    def never(ctx):
        ctx.state.late_ran = True

    main.new("ctrl", ctrl)
    down = ReactorClass("Down")
    down.state("count", 0)
    down.state("tag", None)

    @down.reaction(["shutdown"])
    def bye(ctx):
        ctx.state.count += 1
        ctx.state.tag = ctx.tag

    for k in range(n):
        main.new(f"d{k}", down)
    return main


def test_request_shutdown():
    rt = runtime(shutdown_program())
    rep = rt.run()
    ctrl = rt.state_of("ctrl")
    assert ctrl.final == Tag(9 * MSEC, 1)
    assert rep.final_tag == Tag(9 * MSEC, 1)
    assert not ctrl.late_ran
    assert rep.events_dropped == 1
    for k in range(3):
        assert rt.state_of(f"d{k}").count == 1
        assert rt.state_of(f"d{k}").tag == Tag(9 * MSEC, 1)


def test_schedule_after_shutdown_rejected():
    r = ReactorClass("R")
    r.action("a", min_delay=MSEC)
    r.state("result", "unset")

    @r.reaction(["startup"], effects=["a"])
    def go(ctx):
        ctx.request_shutdown()
        ctx.state.result = ctx.schedule("a")

    rt = runtime(single(r))
    rep = rt.run()
    assert rt.state_of("r").result is None
    assert rep.schedules_rejected == 1


def test_conservation_and_monotone_tags():
    for seed in range(5):
        g, lm = compile_program(random_program(seed))
        rep = Runtime(g, lm, RuntimeConfig(workers=3, fast=True, timeout=6 * MSEC)).run()
        tags = rep.executed_tags
        assert all(a < b for a, b in zip(tags, tags[1:]))
        assert rep.events_enqueued == rep.events_executed + rep.events_pending + rep.events_dropped


def test_level_safety_debug_log():
    """No reaction of level L starts before every level < L reaction of the tag ended."""
    g, lm = compile_program(random_program(11))
    rep = Runtime(g, lm, RuntimeConfig(workers=4, fast=True, debug=True, timeout=8 * MSEC)).run()
    log = sorted(rep.level_log, key=lambda x: x[3])
    open_by_tag: dict[int, dict[int, int]] = {}
    for serial, level, kind, _ in log:
        levels = open_by_tag.setdefault(serial, {})
        if kind == "S":
            assert all(n == 0 for lv, n in levels.items() if lv < level)
            levels[level] = levels.get(level, 0) + 1
        else:
            levels[level] -= 1
    assert log


def physical_program() -> ReactorClass:
    r = ReactorClass("Ext")
    r.physical_action("ext")
    r.state("seen", factory=lambda p: [])

    @r.reaction(["ext"])
    def got(ctx):
        ctx.state.seen.append((ctx.tag, ctx.get("ext")))
        if ctx.get("ext") == "stop":
            ctx.request_shutdown()

    return single(r)


def test_inject_physical_event_from_thread():
    g, lm = compile_program(physical_program())
    rt = Runtime(g, lm, RuntimeConfig(keepalive=True))
    tags = []

    def inject():
        time.sleep(0.01)
        before = rt.physical_now()
        tags.append((before, rt.inject_physical_event("r.ext", 1)))
        tags.append((rt.physical_now(), rt.inject_physical_event("r.ext", "stop")))

    th = threading.Thread(target=inject)
    th.start()
    rep = rt.run()
    th.join()
    (p1, t1), (p2, t2) = tags
    assert t1.time >= p1 and t2 >= t1
    seen = rt.state_of("r").seen
    assert [v for _, v in seen] == [1, "stop"]
    assert rep.final_tag > t2
    with pytest.raises(RuntimeTerminated):
        rt.inject_physical_event("r.ext", 3)


def test_physical_tag_not_before_current_logical_time():
    """Logical time ran ahead of the wall clock (fast mode): injection lands after it."""
    r = ReactorClass("R")
    r.physical_action("ext")
    r.action("tick", min_delay=5 * MSEC)
    r.state("tag", None)
    r.state("hops", 0)

    @r.reaction(["startup", "tick"], effects=["tick"])
    def advance(ctx):
        ctx.state.hops += 1
        if ctx.state.hops < 4:
            ctx.schedule("tick")
        else:
            ctx.state.tag = ctx.tag

    @r.reaction(["ext"])
    def ext(ctx):
        pass

    g, lm = compile_program(single(r))
    rt = Runtime(g, lm, RuntimeConfig(fast=True, keepalive=True))
    result = []

    def inject():
        while rt.state_of("r").tag is None:
            time.sleep(0.001)
        result.append(rt.inject_physical_event("r.ext"))
        rt.request_shutdown()

    th = threading.Thread(target=inject)
    th.start()
    rt.run()
    th.join()
    assert result[0] > rt.state_of("r").tag


def test_logical_action_cannot_be_injected():
    r = ReactorClass("R")
    r.action("a")
    r.add_reaction(lambda ctx: None, ["a"])
    g, lm = compile_program(single(r))
    rt = Runtime(g, lm, RuntimeConfig())
    with pytest.raises(ValueError):
        rt.inject_physical_event("r.a")
    with pytest.raises(KeyError):
        rt.action_index("r.missing")


def test_real_time_mode_waits_for_wall_clock():
    r = ReactorClass("R")
    r.timer("t", offset=20 * MSEC)
    r.state("lag", None)

    @r.reaction(["t"])
    def at(ctx):
        ctx.state.lag = ctx.lag()

    g, lm = compile_program(single(r))
    rt = Runtime(g, lm, RuntimeConfig(fast=False))
    t0 = time.perf_counter()
    rt.run()
    assert time.perf_counter() - t0 >= 0.019
    assert rt.state_of("r").lag >= 0


def test_runtime_runs_once_and_validates_config():
    rt = runtime(ReactorClass("Main"))
    rt.run()
    with pytest.raises(RuntimeError):
        rt.run()
    with pytest.raises(ValueError):
        RuntimeConfig(workers=0)


def test_trace_csv_format():
    g, lm = compile_program(random_program(2))
    rep = Runtime(g, lm, RuntimeConfig(fast=True, trace=True, timeout=5 * MSEC)).run()
    lines = rep.trace_csv().splitlines()
    assert lines[0] == "tag,reaction_id,value_hash"
    tag, rid, h = lines[1].split(",")
    assert Tag.parse(tag) == Tag(0, 0) and len(h) == 16
    assert len(lines) - 1 == rep.reactions_executed


def test_bank_reactions_share_one_level_and_run_in_parallel_workers():
    worker = ReactorClass("W", {"bank_index": 0})
    worker.state("thread", None)

    @worker.reaction(["startup"])
    def which(ctx):
        time.sleep(0.01)  # releases the interpreter lock
        ctx.state.thread = threading.current_thread().name

    main = ReactorClass("Main")
    main.new("w", worker, bank=4)
    rt = runtime(main, workers=4)
    rep = rt.run()
    assert rep.level_occupancy == {0: 4}
    names = {rt.state_of(f"w[{b}]").thread for b in range(4)}
    assert len(names) > 1
