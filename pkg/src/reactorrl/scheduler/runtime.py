"""Level-stepped multi-worker execution of a :class:`~reactorrl.graph.ProgramGraph`.

Per tag the runtime releases every event at the minimal tag, marks the
triggers present, and stages triggered reactions level by level through a
:class:`~reactorrl.scheduler.ready.ReadyQueue`. There is no scheduler thread:
the worker whose completion drains a level stages the next level or advances
logical time. Reactions triggered by port writes are collected per level as
they happen, so only reactions whose triggers are actually present get staged.
"""

from __future__ import annotations

import csv
import hashlib
import io
import itertools
import logging
import threading
import time
from dataclasses import dataclass, field
from types import MappingProxyType, SimpleNamespace
from typing import Any, Callable, Mapping, Sequence

import numpy as np

from ..graph import LevelMap, ProgramGraph, Reaction, assign_levels, validate_causality
from ..tags import STARTUP_TAG, LogicalDelay, PhysicalClock, Tag, as_nanos, tag_after_delay
from . import affinity
from .events import EventQueue
from .ready import AdmissionGate, ReadyQueue, countdown

log = logging.getLogger(__name__)


class RuntimeTerminated(RuntimeError):
    """The runtime is no longer accepting events."""


class EffectError(RuntimeError):
    """A reaction touched a port, action or state it did not declare."""


class ReactionFault(RuntimeError):
    """A reaction body raised; the run was stopped."""

    def __init__(self, reaction_id: str, reactor: str, tag: Tag, report: ExecutionReport | None = None):
        super().__init__(f"reaction {reaction_id} of {reactor} failed at tag {tag}")
        self.reaction_id = reaction_id
        self.reactor = reactor
        self.tag = tag
        self.report = report


@dataclass
class RuntimeConfig:
    workers: int = 1
    keepalive: bool = False
    timeout: int | LogicalDelay | None = None  # logical nanoseconds
    pin_fast_cores: bool = False
    seed: int = 0
    # Extensions: ``fast`` lets logical time run ahead of the wall clock;
    # ``trace`` records (tag, reaction, input hash); ``debug`` logs level boundaries.
    fast: bool = False
    trace: bool = False
    debug: bool = False

    def __post_init__(self) -> None:
        if self.workers < 1:
            raise ValueError(f"workers must be >= 1, got {self.workers}")
        if self.timeout is not None:
            self.timeout = as_nanos(self.timeout)


@dataclass(frozen=True)
class TraceRecord:
    tag: Tag
    reaction_id: str
    value_hash: str


@dataclass
class ExecutionReport:
    tags_processed: int = 0
    reactions_executed: int = 0
    wall_ns: int = 0
    level_occupancy: dict[int, int] = field(default_factory=dict)
    events_enqueued: int = 0
    events_executed: int = 0
    events_pending: int = 0
    events_dropped: int = 0
    events_replaced: int = 0
    schedules_rejected: int = 0
    deadline_misses: int = 0
    final_tag: Tag | None = None
    executed_tags: list[Tag] = field(default_factory=list)
    trace: list[TraceRecord] = field(default_factory=list)
    level_log: list[tuple[int, int, str, int]] = field(default_factory=list)
    fault: str | None = None

    def trace_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["tag", "reaction_id", "value_hash"])
        for rec in self.trace:
            w.writerow([str(rec.tag), rec.reaction_id, rec.value_hash])
        return buf.getvalue()


def value_bytes(value: Any) -> bytes:
    """Stable byte encoding of a port value for trace hashing."""
    if value is None:
        return b"\x00none"
    if isinstance(value, (bytes, bytearray, memoryview)):
        return b"\x01" + bytes(value)
    if isinstance(value, np.ndarray):
        return b"\x02" + str(value.dtype).encode() + repr(value.shape).encode() + value.tobytes()
    return b"\x03" + repr(value).encode()


class ReactionContext:
    """What a reaction body sees: its reactor's state, declared inputs and effects."""

    __slots__ = ("_rt", "_write", "_values", "_stamps", "_reads", "_writes", "_read_actions",
                 "_effect_actions", "_timers", "_reaction", "state", "params", "name",
                 "bank_index", "rng")

    def __init__(self, rt: Runtime, reaction: Reaction, state: SimpleNamespace, rng: np.random.Generator):
        g = rt.graph
        inst = g.instances[reaction.instance]
        self._rt = rt
        self._write = rt._write
        self._values = rt._values
        self._stamps = rt._stamps
        self._reaction = reaction
        self._reads = dict(reaction.reads)
        self._writes = dict(reaction.writes)
        self._read_actions = dict(reaction.read_actions)
        self._effect_actions = dict(reaction.effect_actions)
        self._timers = {g.timers[t].name: t for t in reaction.trigger_timers}
        self.state = state
        self.params: Mapping[str, Any] = inst.params
        self.name = inst.name or "main"
        self.bank_index = inst.bank_index
        self.rng = rng

    @property
    def tag(self) -> Tag:
        return self._rt._tag

    @property
    def reaction_id(self) -> str:
        return self._reaction.id

    def physical_now(self) -> int:
        return self._rt.clock.now()

    def lag(self) -> int:
        """Physical time minus logical time, in nanoseconds."""
        return self._rt.clock.now() - self._rt._tag[0]

    # -- inputs -----------------------------------------------------------

    def _channels(self, name: str) -> tuple[int, ...]:
        chans = self._reads.get(name)
        if chans is None:
            raise EffectError(f"{self._reaction.id} did not declare {name!r} as a trigger or source")
        return chans

    def get(self, name: str, channel: int | None = None, default: Any = None) -> Any:
        """Value of a port channel (or action) if present at this tag, else ``default``."""
        chans = self._reads.get(name)
        if chans is None:
            a = self._read_actions.get(name)
            if a is None:
                self._channels(name)
            rt = self._rt
            return rt._action_values[a] if rt._action_stamps[a] == rt._serial else default
        if channel is None:
            if len(chans) != 1:
                raise EffectError(f"{name!r} is a multiport; pass channel= or use get_all()")
            c = chans[0]
        else:
            c = chans[channel]
        return self._values[c] if self._stamps[c] == self._rt._serial else default

    def get_all(self, name: str, default: Any = None) -> list[Any]:
        serial = self._rt._serial
        values, stamps = self._values, self._stamps
        return [values[c] if stamps[c] == serial else default for c in self._channels(name)]

    def present(self, name: str, channel: int | None = None) -> bool:
        rt = self._rt
        serial = rt._serial
        if name == "startup":
            return rt._serial == 1
        if name == "shutdown":
            return rt._at_final
        if name in self._timers:
            return rt._timer_stamps[self._timers[name]] == serial
        chans = self._reads.get(name)
        if chans is None:
            a = self._read_actions.get(name)
            if a is None:
                self._channels(name)
            return rt._action_stamps[a] == serial
        if channel is not None:
            return self._stamps[chans[channel]] == serial
        stamps = self._stamps
        return any(stamps[c] == serial for c in chans)

    def width(self, name: str) -> int:
        chans = self._reads.get(name) or self._writes.get(name)
        if chans is None:
            raise EffectError(f"{self._reaction.id} has no port {name!r}")
        return len(chans)

    # -- effects ----------------------------------------------------------

    def set(self, name: str, value: Any, channel: int | None = None) -> None:
        chans = self._writes.get(name)
        if chans is None:
            raise EffectError(f"{self._reaction.id} did not declare {name!r} as an effect")
        if channel is None:
            if len(chans) != 1:
                raise EffectError(f"{name!r} is a multiport; pass channel= or use set_all()")
            self._write(chans[0], value)
        else:
            self._write(chans[channel], value)

    def set_all(self, name: str, value: Any) -> None:
        """Write the same value (shared, not copied) to every channel of a port."""
        chans = self._writes.get(name)
        if chans is None:
            raise EffectError(f"{self._reaction.id} did not declare {name!r} as an effect")
        write = self._write
        for c in chans:
            write(c, value)

    def set_each(self, name: str, values: Sequence[Any]) -> None:
        """Write ``values[i]`` to channel ``i`` of a multiport; lengths must match."""
        chans = self._writes.get(name)
        if chans is None:
            raise EffectError(f"{self._reaction.id} did not declare {name!r} as an effect")
        if len(values) != len(chans):
            raise EffectError(f"{name!r} has {len(chans)} channels, got {len(values)} values")
        write = self._write
        for c, v in zip(chans, values):
            write(c, v)

    def schedule(self, action: str, value: Any = None, delay: LogicalDelay | int = 0) -> Tag | None:
        a = self._effect_actions.get(action)
        if a is None:
            raise EffectError(f"{self._reaction.id} did not declare action {action!r} as an effect")
        return self._rt._schedule(a, value, delay if type(delay) is int and delay >= 0 else as_nanos(delay))

    def request_shutdown(self) -> Tag:
        return self._rt.request_shutdown()


class Runtime:
    """Executes one program once. Not reusable after :meth:`run` returns."""

    def __init__(self, graph: ProgramGraph, levels: LevelMap | None = None,
                 config: RuntimeConfig | None = None) -> None:
        if levels is None:
            validate_causality(graph)
            levels = assign_levels(graph)
        self.graph = graph
        self.levels = levels
        self.config = config or RuntimeConfig()
        self.clock = PhysicalClock()

        g = graph
        n_ch = len(g.channels)
        n_act = len(g.actions)
        self._n_ch = n_ch
        self._n_act = n_act
        self._values: list[Any] = [None] * n_ch
        self._stamps: list[int] = [0] * n_ch
        self._action_values: list[Any] = [None] * n_act
        self._action_stamps: list[int] = [0] * n_act
        self._timer_stamps: list[int] = [0] * len(g.timers)
        self._level_of = levels.levels
        depth = max(levels.depth, 1)
        self._depth = depth
        self._pending: list[list[int]] = [[] for _ in range(depth)]
        self._occupancy: list[int] = [0] * depth
        self._multi = self.config.workers > 1
        self._queued: list[int] = [0] * len(g.reactions)

        lv = self._level_of

        def triggers_of(items: Sequence[int]) -> tuple[tuple[int, int], ...]:
            return tuple((r, lv[r]) for r in sorted(set(items)))

        readers: dict[int, list[int]] = {}
        act_readers: dict[int, list[int]] = {}
        timer_readers: dict[int, list[int]] = {}
        for r in g.reactions:
            for c in r.trigger_channels:
                readers.setdefault(c, []).append(r.index)
            for a in r.trigger_actions:
                act_readers.setdefault(a, []).append(r.index)
            for t in r.trigger_timers:
                timer_readers.setdefault(t, []).append(r.index)
        delayed: dict[int, list[tuple[int, int]]] = {}
        physical: dict[int, list[int]] = {}
        for e in g.channel_edges:
            if e.kind == "physical":
                physical.setdefault(e.src, []).append(e.dst)
            elif e.delay is not None:
                delayed.setdefault(e.src, []).append((e.dst, e.delay))
        self._fanout = g.closure
        self._chan_triggers = tuple(
            triggers_of([r for d in g.closure[c] for r in readers.get(d, ())]) for c in range(n_ch))
        self._chan_remote = tuple(
            (tuple(x for d in g.closure[c] for x in delayed.get(d, ())),
             tuple(x for d in g.closure[c] for x in physical.get(d, ())))
            if any(d in delayed or d in physical for d in g.closure[c]) else None
            for c in range(n_ch))
        self._action_triggers = tuple(triggers_of(act_readers.get(a, ())) for a in range(n_act))
        self._timer_triggers = tuple(triggers_of(timer_readers.get(t, ())) for t in range(len(g.timers)))
        self._startup_triggers = triggers_of([r.index for r in g.reactions if r.on_startup])
        self._shutdown_triggers = triggers_of([r.index for r in g.reactions if r.on_shutdown])
        self._action_info = tuple((a.kind == "physical", a.min_delay) for a in g.actions)
        self._action_by_name = {
            f"{g.instances[a.instance].name or 'main'}.{a.name}": a.index for a in g.actions}

        # the raw lock is taken directly on hot paths; waits and notifies go through the condition
        self._lock = threading.Lock()
        self._cond = threading.Condition(self._lock)
        self._eq = EventQueue()
        self._tag: Tag = STARTUP_TAG
        self._serial = 0
        self._final: Tag | None = None
        if self.config.timeout is not None:
            self._final = Tag(self.config.timeout, 0)
        self._at_final = False
        self._started = False
        self._stopping = False
        self._terminated = False
        self._faults: list[tuple[int, BaseException]] = []
        self._rejected = 0
        self._deadline_misses: list[int] = []

        self._ready: ReadyQueue[int] = ReadyQueue(max(levels.max_width, 1))
        self._finish: Callable[[], int] = countdown(0)
        self._cur_level = 0
        self._gate = AdmissionGate()
        self._report = ExecutionReport()
        self._trace: list[tuple[int, Tag, int, str]] = []
        self._level_seq = itertools.count().__next__
        self._level_log: list[tuple[int, int, str, int]] = []

        self._states: list[SimpleNamespace] = []
        for inst in g.instances:
            ns = SimpleNamespace()
            for sd in inst.cls.states.values():
                setattr(ns, sd.name, sd.make(inst.params))
            self._states.append(ns)
        rngs = [np.random.default_rng([self.config.seed, inst.index]) for inst in g.instances]
        self._contexts = [ReactionContext(self, r, self._states[r.instance], rngs[r.instance])
                          for r in g.reactions]
        self._bodies = [r.decl.body for r in g.reactions]
        self._deadlines = [r.decl.deadline for r in g.reactions]
        # reactions that need no tracing, logging or deadline check run inline in _work
        bare = not (self.config.trace or self.config.debug)
        self._plain = [bare and d is None for d in self._deadlines]

        for t in g.timers:
            self._eq.push(Tag(t.offset, 0), n_ch + n_act + t.index, None)

    # -- public surface ---------------------------------------------------

    def physical_now(self) -> int:
        return self.clock.now()

    @property
    def current_tag(self) -> Tag:
        return self._tag

    def state_of(self, instance: str) -> SimpleNamespace:
        return self._states[self.graph.instance(instance).index]

    def action_index(self, ref: str | int) -> int:
        if isinstance(ref, int):
            return ref
        try:
            return self._action_by_name[ref]
        except KeyError:
            raise KeyError(f"no action {ref!r}; known: {sorted(self._action_by_name)}") from None

    def schedule_action(self, action: str | int, value: Any = None,
                        extra_delay: LogicalDelay | int = 0) -> Tag | None:
        """Schedule a logical action relative to the current tag."""
        a = self.action_index(action)
        if self.graph.actions[a].kind == "physical":
            return self.inject_physical_event(a, value)
        return self._schedule(a, value, as_nanos(extra_delay))

    def inject_physical_event(self, action: str | int, value: Any = None) -> Tag:
        """Thread-safe entry for asynchronous external events."""
        a = self.action_index(action)
        act = self.graph.actions[a]
        if act.kind != "physical":
            raise ValueError(f"action {action!r} is logical; use schedule_action")
        with self._lock:
            if self._terminated:
                raise RuntimeTerminated("runtime already terminated")
            tag = self._physical_tag(act.min_delay)
            if self._final is not None and tag > self._final:
                raise RuntimeTerminated(f"injection at {tag} is after the shutdown tag {self._final}")
            self._eq.push(tag, self._n_ch + a, value)
            self._cond.notify_all()
        return tag

    def request_shutdown(self) -> Tag:
        with self._lock:
            t = self._tag.next_microstep() if self._started else Tag(0, 1)
            if self._final is None or t < self._final:
                self._final = t
            self._cond.notify_all()
            return self._final

    def run(self) -> ExecutionReport:
        if self._started:
            raise RuntimeError("a Runtime runs once")
        cfg = self.config
        self.clock.restart()
        saved = affinity.current_affinity() if cfg.pin_fast_cores else None
        threads = []
        for wid in range(1, cfg.workers):
            th = threading.Thread(target=self._worker_main, args=(wid,),
                                  name=f"reactor-worker-{wid}", daemon=True)
            th.start()
            threads.append(th)
        t0 = time.perf_counter_ns()
        try:
            if cfg.pin_fast_cores:
                affinity.pin_current_thread(0)
            self._next_tag()
            self._worker_loop()
        finally:
            self._terminate()
            for th in threads:
                th.join()
            if saved is not None:
                affinity.restore_affinity(saved)
        rep = self._finish_report(time.perf_counter_ns() - t0)
        if self._faults:
            r, exc = min(self._faults, key=lambda f: f[0])
            rx = self.graph.reactions[r]
            fault = ReactionFault(rx.id, self.graph.instances[rx.instance].name or "main", rep.final_tag, rep)
            raise fault from exc
        return rep

    # -- internals: effects ------------------------------------------------

    def _physical_tag(self, min_delay: int) -> Tag:
        tag = Tag(self.clock.now() + min_delay, 0)
        cur = self._tag
        if self._started and tag <= cur:
            tag = Tag(cur[0], cur[1] + 1)
        return tag

    def _write(self, c: int, value: Any) -> None:
        serial = self._serial
        values, stamps = self._values, self._stamps
        for d in self._fanout[c]:
            values[d] = value
            stamps[d] = serial
        queued, pending = self._queued, self._pending
        for r, lvl in self._chan_triggers[c]:
            if queued[r] != serial:
                queued[r] = serial
                pending[lvl].append(r)
        remote = self._chan_remote[c]
        if remote is not None:
            delayed, physical = remote
            with self._lock:
                for d, nanos in delayed:
                    tag = tag_after_delay(self._tag, nanos)
                    if self._final is not None and tag > self._final:
                        self._rejected += 1
                        continue
                    self._replace_warn(self._eq.push(tag, d, value), tag, d)
                for d in physical:
                    tag = self._physical_tag(0)
                    if self._final is not None and tag > self._final:
                        self._rejected += 1
                        continue
                    self._replace_warn(self._eq.push(tag, d, value), tag, d)
                self._cond.notify_all()

    def _replace_warn(self, replaced: bool, tag: Tag, key: int) -> None:
        if replaced:
            log.warning("event for trigger %s at %s replaced an earlier one (last write wins)",
                        self._trigger_name(key), tag)

    def _trigger_name(self, key: int) -> str:
        g = self.graph
        if key < self._n_ch:
            return g.channels[key].label(g.instances)
        if key < self._n_ch + self._n_act:
            a = g.actions[key - self._n_ch]
            return f"{g.instances[a.instance].name or 'main'}.{a.name}"
        t = g.timers[key - self._n_ch - self._n_act]
        return f"{g.instances[t.instance].name or 'main'}.{t.name}"

    def _schedule(self, a: int, value: Any, extra: int) -> Tag | None:
        physical, min_delay = self._action_info[a]
        if physical:
            return self.inject_physical_event(a, value)
        with self._lock:
            tag = tag_after_delay(self._tag, min_delay + extra)
            if self._final is not None and tag > self._final:
                self._rejected += 1
                log.debug("schedule of %s at %s rejected: after shutdown tag %s",
                          self._trigger_name(self._n_ch + a), tag, self._final)
                return None
            self._replace_warn(self._eq.push(tag, self._n_ch + a, value), tag, self._n_ch + a)
        return tag

    # -- internals: execution ----------------------------------------------

    def _worker_main(self, wid: int) -> None:
        if self.config.pin_fast_cores:
            affinity.pin_current_thread(wid)
        if self._gate.wait():
            self._worker_loop()

    def _worker_loop(self) -> None:
        gate = self._gate
        while not self._stopping:
            self._work()
            if self._stopping or not gate.wait():
                return

    def _work(self) -> None:
        """Claim and run staged reactions until the queue is drained."""
        ready = self._ready
        buffer = ready.buffer
        execute = self._execute
        plain = self._plain
        bodies, contexts = self._bodies, self._contexts
        while True:
            i = ready._take()  # claim() without the extra call
            if i < 0:
                return
            r = buffer[i]
            if plain[r]:
                try:
                    bodies[r](contexts[r])
                except BaseException as exc:  # noqa: BLE001 - reported through ReactionFault
                    self._faults.append((r, exc))
            else:
                execute(r)
            if self._finish() == 0:
                self._level_done()
                if self._stopping:
                    return

    def _execute(self, r: int) -> None:
        ctx = self._contexts[r]
        cfg = self.config
        if cfg.debug:
            self._level_log.append((self._serial, self._cur_level, "S", self._level_seq()))
        if cfg.trace:
            self._record_trace(r)
        try:
            dl = self._deadlines[r]
            if dl is not None and self.clock.now() - self._tag[0] > dl.nanos:
                self._deadline_misses.append(r)
                dl.handler(ctx)
            else:
                self._bodies[r](ctx)
        except BaseException as exc:  # noqa: BLE001 - reported through ReactionFault
            self._faults.append((r, exc))
        if cfg.debug:
            self._level_log.append((self._serial, self._cur_level, "E", self._level_seq()))

    def _record_trace(self, r: int) -> None:
        rx = self.graph.reactions[r]
        h = hashlib.blake2b(digest_size=8)
        serial = self._serial
        for name in sorted(rx.reads):
            for c in rx.reads[name]:
                h.update(name.encode())
                h.update(value_bytes(self._values[c]) if self._stamps[c] == serial else b"\xffabsent")
        for name in sorted(rx.read_actions):
            a = rx.read_actions[name]
            h.update(name.encode())
            h.update(value_bytes(self._action_values[a]) if self._action_stamps[a] == serial
                     else b"\xffabsent")
        self._trace.append((serial, self._tag, r, h.hexdigest()))

    def _stage(self, level: int, items: list[int]) -> None:
        # entries are unique: _trigger and _write stamp each reaction once per tag
        self._pending[level] = []
        n = len(items)
        self._cur_level = level
        self._occupancy[level] += n
        self._finish = countdown(n)
        if n > 1:
            items.sort()
            self._ready.stage(items)
            if self._multi:
                self._gate.admit(min(self.config.workers, n) - 1)
        else:
            self._ready.stage(items)

    def _stage_from(self, start: int) -> bool:
        pending = self._pending
        for level in range(start, self._depth):
            if pending[level]:
                self._stage(level, pending[level])
                return True
        return False

    def _level_done(self) -> None:
        """Called by exactly one worker: the one that finished the level's last reaction."""
        if self._faults:
            self._terminate()
            return
        pending = self._pending
        for level in range(self._cur_level + 1, self._depth):
            if pending[level]:
                self._stage(level, pending[level])
                return
        if self._at_final:
            self._terminate()
            return
        self._next_tag()

    def _trigger(self, triggers: tuple[tuple[int, int], ...]) -> None:
        serial = self._serial
        queued, pending = self._queued, self._pending
        for r, lvl in triggers:
            if queued[r] != serial:
                queued[r] = serial
                pending[lvl].append(r)

    def _next_tag(self) -> None:
        """Advance logical time until some reaction is staged or the program ends."""
        cfg = self.config
        eq = self._eq
        n_ch, n_act = self._n_ch, self._n_act
        lock = self._lock
        while True:
            with lock:
                while True:
                    nxt = eq.peek()
                    if not self._started:
                        candidate = STARTUP_TAG
                        break
                    final = self._final
                    if final is not None and (nxt is None or nxt > final):
                        candidate = final
                    elif nxt is None:
                        if cfg.keepalive and not self._stopping:
                            self._cond.wait()
                            continue
                        candidate = self._final = self._tag.next_microstep()
                    else:
                        candidate = nxt
                    if not cfg.fast:
                        lag = candidate[0] - self.clock.now()
                        if lag > 0:
                            self._cond.wait(lag / 1e9)
                            continue
                    break
                if nxt is not None and nxt == candidate:
                    events = eq.pop()[1]
                else:
                    events = {}
                    eq.advance_floor(candidate)
                self._tag = candidate
                self._serial += 1
                self._started = True
                is_final = candidate == self._final
            rep = self._report
            rep.tags_processed += 1
            rep.events_executed += len(events)
            rep.executed_tags.append(candidate)
            serial = self._serial
            queued, pending = self._queued, self._pending
            if serial == 1:
                self._trigger(self._startup_triggers)
            for key, value in events.items():
                if key < n_ch:
                    self._write(key, value)
                elif key < n_ch + n_act:
                    a = key - n_ch
                    self._action_values[a] = value
                    self._action_stamps[a] = serial
                    for r, lvl in self._action_triggers[a]:
                        if queued[r] != serial:
                            queued[r] = serial
                            pending[lvl].append(r)
                else:
                    t = key - n_ch - n_act
                    self._timer_stamps[t] = serial
                    self._trigger(self._timer_triggers[t])
                    period = self.graph.timers[t].period
                    if period > 0:
                        with self._lock:
                            nxt_tag = Tag(candidate[0] + period, 0)
                            eq.push(nxt_tag, key, None)
            if is_final:
                self._at_final = True
                self._trigger(self._shutdown_triggers)
            if self._stage_from(0):
                return
            if is_final:
                self._terminate()
                return

    def _terminate(self) -> None:
        with self._lock:
            self._stopping = True
            self._terminated = True
            self._cond.notify_all()
        self._gate.close()

    def _finish_report(self, wall_ns: int) -> ExecutionReport:
        rep = self._report
        rep.wall_ns = wall_ns
        rep.level_occupancy = {lvl: n for lvl, n in enumerate(self._occupancy) if n}
        rep.reactions_executed = sum(self._occupancy)
        rep.final_tag = self._tag
        eq = self._eq
        with self._lock:
            left = len(eq)
            beyond = eq.count_after(self._tag) if self._at_final else 0
        rep.events_dropped = beyond
        rep.events_pending = left - beyond
        rep.events_enqueued = eq.enqueued
        rep.events_replaced = eq.replaced
        rep.schedules_rejected = self._rejected
        rep.deadline_misses = len(self._deadline_misses)
        if self._faults:
            r, exc = min(self._faults, key=lambda f: f[0])
            rep.fault = f"{self.graph.reactions[r].id}: {type(exc).__name__}: {exc}"
        g = self.graph
        order = {r.index: (self._level_of[r.index], r.index) for r in g.reactions}
        rep.trace = [TraceRecord(tag, g.reactions[r].id, h)
                     for serial, tag, r, h in sorted(self._trace, key=lambda x: (x[0], order[x[2]]))]
        rep.level_log = list(self._level_log)
        return rep


def run(graph: ProgramGraph, levels: LevelMap | None = None,
        config: RuntimeConfig | None = None) -> ExecutionReport:
    return Runtime(graph, levels, config).run()
