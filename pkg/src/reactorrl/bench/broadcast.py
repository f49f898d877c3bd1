"""Broadcast one payload to N workers and gather N replies.

Reactor side: a coordinator writes the payload to a width-N multiport; each
bank member answers with the value it received. One round is one tag, and a
round's span runs from one broadcast to the next, so it includes tag
advancement. Actor side: :meth:`ActorSystem.broadcast_gather` on echo actors.
"""

from __future__ import annotations

import logging
import time

import numpy as np
import psutil

from ..actors import ActorSystem, echo
from ..graph import compile_program
from ..program import ReactorClass
from ..scheduler import Runtime, RuntimeConfig
from .report import BenchResult
from .stats import paused_gc

log = logging.getLogger(__name__)

FAMILY = "broadcast-gather"


def make_payload(nbytes: int, seed: int) -> bytes:
    """Pseudorandom bytes so that copies cannot be elided or compressed."""
    return np.random.default_rng(seed).bytes(nbytes)


def broadcast_program(n: int, payload: bytes, rounds: int) -> ReactorClass:
    coord = ReactorClass("Coordinator")
    coord.output("out", n)
    coord.input("replies", n)
    coord.action("next")
    coord.state("stamps", factory=lambda p: [])
    coord.state("done", 0)
    coord.state("gathered", 0)

    @coord.reaction(["startup", "next"], effects=["out"], name="broadcast")
    def broadcast(ctx):
        ctx.state.stamps.append(time.perf_counter_ns())
        if ctx.state.done < rounds:
            ctx.set_all("out", payload)

    @coord.reaction(["replies"], effects=["next"], name="gather")
    def gather(ctx):
        ctx.state.gathered += sum(v is not None for v in ctx.get_all("replies"))
        ctx.state.done += 1
        ctx.schedule("next")

    worker = ReactorClass("Echo")
    worker.input("inp")
    worker.output("reply")

    @worker.reaction(["inp"], effects=["reply"], name="echo")
    def reply(ctx):
        ctx.set("reply", ctx.get("inp"))

    main = ReactorClass("Main")
    main.new("coord", coord)
    main.new("workers", worker, bank=n)
    main.connect("coord.out", "workers.inp")
    main.connect("workers.reply", "coord.replies")
    return main


def reactor_rounds(n: int, payload: bytes, reps: int, warmup: int, workers: int) -> list[int]:
    g, lm = compile_program(broadcast_program(n, payload, reps + warmup))
    rt = Runtime(g, lm, RuntimeConfig(workers=workers, fast=True))
    rt.run()
    st = rt.state_of("coord")
    if st.gathered != n * (reps + warmup):
        raise RuntimeError(f"gathered {st.gathered} replies, expected {n * (reps + warmup)}")
    spans = np.diff(st.stamps).tolist()
    return [int(s) for s in spans[warmup:]]


def actor_rounds(n: int, payload: bytes, reps: int, warmup: int) -> list[int]:
    keep = len(payload) < 64 * 2**20
    with ActorSystem() as system:
        refs = [system.spawn(echo, name=f"echo-{i}") for i in range(n)]
        inbox = system.inbox()
        spans = []
        for i in range(reps + warmup):
            t0 = time.perf_counter_ns()
            replies = system.broadcast_gather(refs, payload, keep_replies=keep, inbox=inbox, timeout=600)
            spans.append(time.perf_counter_ns() - t0)
            if keep and len(replies) != n:
                raise RuntimeError("missing replies")
            del replies
    return spans[warmup:]


def memory_needed(n: int, nbytes: int, runtime: str) -> int:
    """Rough peak estimate: the reactor shares one buffer, actors hold serialized and live copies."""
    if runtime == "reactor":
        return 2 * nbytes
    return (3 + min(n, 4) * 2) * nbytes


def fits_in_memory(n: int, nbytes: int, runtime: str) -> bool:
    return memory_needed(n, nbytes, runtime) < 0.8 * psutil.virtual_memory().available


def bench_broadcast_gather(actors: list[int], sizes: list[int], *, runtimes=("reactor", "actor"),
                           reps: int = 10, warmup: int = 2, workers: int = 8, seed: int = 42,
                           param_name: str | None = None) -> list[BenchResult]:
    """One result per (runtime, N, size). Oversized runs are skipped with a warning."""
    if reps < 3:
        raise ValueError("at least 3 repetitions")
    if not actors or not sizes:
        raise ValueError("empty sweep")
    sweep = param_name or ("bytes" if len(sizes) > 1 and len(actors) == 1 else "actors")
    results: list[BenchResult] = []
    for size in sizes:
        payload = make_payload(size, seed)
        for n in actors:
            # interleave runtimes per point so drift affects both alike
            for runtime in runtimes:
                if not fits_in_memory(n, size, runtime):
                    log.warning("skipping %s N=%d size=%d: estimated %.1f GB exceeds available memory",
                                runtime, n, size, memory_needed(n, size, runtime) / 2**30)
                    continue
                with paused_gc():
                    if runtime == "reactor":
                        spans = reactor_rounds(n, payload, reps, warmup, workers)
                        w = workers
                    else:
                        spans = actor_rounds(n, payload, reps, warmup)
                        w = n
                results.append(BenchResult(
                    FAMILY, runtime, sweep, size if sweep == "bytes" else n, spans,
                    "overhead_ms", [s / 1e6 for s in spans], seed, w, warmup,
                    notes={"actors": n, "bytes": size}))
    return results
