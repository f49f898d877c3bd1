"""Program generators shared by the test modules."""

from __future__ import annotations

import random
from typing import Sequence

from reactorrl import MSEC, ReactorClass


def mix(*values: object) -> int:
    """Deterministic small-int digest of ints, None and lists (no str hashing)."""
    h = 17
    for v in values:
        if isinstance(v, list):
            v = mix(*v)
        elif v is None:
            v = -7
        h = (h * 1_000_003 + int(v)) % 1_000_000_007
    return h


def one_reaction_per_node(n: int, edges: Sequence[tuple[int, int]]) -> ReactorClass:
    """Node i becomes reactor ``n{i}`` with one reaction; edge u->v is a port connection."""
    preds: dict[int, list[int]] = {i: [] for i in range(n)}
    succs: dict[int, list[int]] = {i: [] for i in range(n)}
    for u, v in edges:
        preds[v].append(u)
        succs[u].append(v)
    main = ReactorClass("Main")
    for i in range(n):
        cls = ReactorClass(f"Node{i}")
        for u in preds[i]:
            cls.input(f"i{u}")
        for v in succs[i]:
            cls.output(f"o{v}")
        triggers = [f"i{u}" for u in preds[i]] or ["startup"]
        outs = [f"o{v}" for v in succs[i]]

        def body(ctx, outs=outs):
            for o in outs:
                ctx.set(o, 1)

        cls.add_reaction(body, triggers, effects=outs, name="node")
        main.new(f"n{i}", cls)
    for u, v in edges:
        main.connect(f"n{u}.o{v}", f"n{v}.i{u}")
    return main


def random_program(seed: int) -> ReactorClass:
    """A randomized, physically-free program with banks, multiports, timers,
    logical actions, delayed feedback and several reactions per reactor.

    All values derive from reaction inputs and reactor state, so the run is
    fully determined by the program. Runs are bounded by timer/action counters;
    pass a ``timeout`` as well to be safe.
    """
    rng = random.Random(seed)
    width = rng.randint(2, 5)
    n_stages = rng.randint(1, 3)
    ticks = rng.randint(4, 9)

    hub = ReactorClass("Hub")
    hub.timer("tick", offset=0, period=rng.choice([MSEC, 2 * MSEC]))
    hub.output("out", width)
    hub.input("back")
    hub.action("again", min_delay=0)
    hub.state("n", 0)
    hub.state("acc", 0)

    @hub.reaction(["tick"], effects=["out", "again"], name="fan_out")
    def fan_out(ctx):
        ctx.state.n += 1
        if ctx.state.n <= ticks:
            for c in range(width):
                ctx.set("out", mix(ctx.state.n, c, ctx.state.acc), channel=c)
            if ctx.state.n % 2:
                ctx.schedule("again", ctx.state.n)

    @hub.reaction(["again"], sources=["back"], name="echo_again")
    def echo_again(ctx):
        ctx.state.acc = mix(ctx.state.acc, ctx.get("again"), ctx.get("back"))

    @hub.reaction(["back"], name="absorb")
    def absorb(ctx):
        ctx.state.acc = mix(ctx.state.acc, ctx.get("back"))

    main = ReactorClass("Main")
    main.new("hub", hub)
    prev = "hub.out"
    for s in range(n_stages):
        worker = ReactorClass(f"Stage{s}", {"bank_index": 0})
        worker.input("inp")
        worker.output("out")
        worker.state("count", 0)
        delay = rng.choice([0, 0, MSEC // 2])
        worker.action("later", min_delay=delay)
        extra = rng.random() < 0.5

        @worker.reaction(["inp"], effects=["out", "later"], name="work")
        def work(ctx, s=s):
            ctx.state.count += 1
            v = mix(ctx.get("inp"), ctx.bank_index, ctx.state.count, s)
            if v % 3:
                ctx.set("out", v)
            if v % 4 == 0:
                ctx.schedule("later", v)

        @worker.reaction(["later"], effects=["out"], name="late")
        def late(ctx):
            ctx.set("out", mix(ctx.get("later"), ctx.state.count))

        if extra:
            @worker.reaction(["inp", "later"], name="observe")
            def observe(ctx):
                ctx.state.count = mix(ctx.state.count, ctx.get("inp"), ctx.get("later")) % 97

        name = f"stage{s}"
        main.new(name, worker, bank=width)
        main.connect(prev, f"{name}.inp")
        prev = f"{name}.out"

    sink = ReactorClass("Sink")
    sink.input("inp", width)
    sink.output("total")
    sink.state("seen", factory=lambda p: [])

    @sink.reaction(["inp"], effects=["total"], name="gather")
    def gather(ctx):
        vals = ctx.get_all("inp")
        ctx.state.seen.append(mix(vals))
        ctx.set("total", mix(vals))

    @sink.reaction(["shutdown"], name="finish")
    def finish(ctx):
        ctx.state.seen.append(-1)

    main.new("sink", sink)
    main.connect(prev, "sink.inp")
    # delayed feedback closes the loop without a zero-delay cycle
    main.connect("sink.total", "hub.back", delay=rng.choice([MSEC // 4, MSEC]))
    return main
