"""Flattening, causality checking and level assignment.

:func:`build_program` expands banks and multiports of a main reactor class
into individual instances and channels, fans out connections, and derives the
action-port graph (APG): reaction-to-reaction dependencies from declaration
order within a reactor and from effect ports feeding triggered or read ports
over zero-delay logical connections. :func:`assign_levels` turns the APG into
the level map used by the scheduler.
"""

from __future__ import annotations

import json
import re
from collections import defaultdict
from dataclasses import dataclass, field
from types import MappingProxyType
from typing import Any, Iterable, Mapping, Sequence

from .program import SHUTDOWN, STARTUP, ConnectionDecl, ReactionDecl, ReactorClass

# --------------------------------------------------------------------------
# errors


class ProgramError(Exception):
    """One structured validation problem."""

    kind = "error"

    def __init__(self, message: str, **details: Any) -> None:
        super().__init__(message)
        self.message = message
        self.details = details


class InstantiationCycle(ProgramError):
    kind = "instantiation-cycle"


class WidthMismatch(ProgramError):
    kind = "width-mismatch"


class MultipleWriters(ProgramError):
    kind = "multiple-writers"


class UnresolvedReference(ProgramError):
    kind = "unresolved-reference"


class InvalidConnection(ProgramError):
    kind = "invalid-connection"


class ProgramValidationError(ValueError):
    """Raised by :func:`build_program`; ``errors`` lists every problem found."""

    def __init__(self, errors: Sequence[ProgramError]) -> None:
        self.errors = list(errors)
        lines = "\n".join(f"  [{e.kind}] {e.message}" for e in self.errors)
        super().__init__(f"{len(self.errors)} validation error(s):\n{lines}")


class CycleError(ValueError):
    """Zero-delay causality loop; ``cycle`` lists reaction ids, first repeated last."""

    def __init__(self, cycle: Sequence[str]) -> None:
        self.cycle = list(cycle)
        super().__init__("causality cycle: " + " -> ".join(self.cycle))


# --------------------------------------------------------------------------
# flattened program


@dataclass(frozen=True)
class Instance:
    index: int
    name: str
    cls: ReactorClass
    params: Mapping[str, Any]
    bank_index: int | None
    parent: int | None


@dataclass(frozen=True)
class Channel:
    index: int
    instance: int
    port: str
    ch: int
    direction: str

    def label(self, instances: Sequence[Instance]) -> str:
        return f"{instances[self.instance].name or 'main'}.{self.port}[{self.ch}]"


@dataclass(frozen=True)
class Action:
    index: int
    instance: int
    name: str
    kind: str
    min_delay: int


@dataclass(frozen=True)
class Timer:
    index: int
    instance: int
    name: str
    offset: int
    period: int


@dataclass(frozen=True)
class ChannelEdge:
    src: int
    dst: int
    kind: str  # "logical" | "physical"
    delay: int | None  # None = zero-delay logical (same tag)
    link: int  # index of the originating connection declaration


@dataclass(frozen=True)
class Reaction:
    """A reaction of one flattened instance.

    ``reads``/``writes`` map local reference names to channel indices;
    ``trigger_channels``/``trigger_actions``/... are the resolved trigger set.
    """

    index: int
    id: str
    instance: int
    position: int
    decl: ReactionDecl
    reads: Mapping[str, tuple[int, ...]]
    writes: Mapping[str, tuple[int, ...]]
    read_actions: Mapping[str, int]
    effect_actions: Mapping[str, int]
    trigger_channels: tuple[int, ...]
    trigger_actions: tuple[int, ...]
    trigger_timers: tuple[int, ...]
    on_startup: bool
    on_shutdown: bool

    @property
    def name(self) -> str:
        return self.decl.name


@dataclass(frozen=True, eq=False)
class ProgramGraph:
    instances: tuple[Instance, ...]
    channels: tuple[Channel, ...]
    ports: Mapping[tuple[int, str], tuple[int, ...]]
    actions: tuple[Action, ...]
    timers: tuple[Timer, ...]
    reactions: tuple[Reaction, ...]
    channel_edges: tuple[ChannelEdge, ...]
    apg_edges: tuple[tuple[int, int, str], ...]
    # per channel: every channel reached by a write over zero-delay logical edges (incl. itself)
    closure: tuple[tuple[int, ...], ...]
    links: tuple[ConnectionDecl, ...] = field(default=())

    def instance(self, name: str) -> Instance:
        for inst in self.instances:
            if inst.name == name:
                return inst
        raise KeyError(name)

    def reaction(self, rid: str) -> Reaction:
        for r in self.reactions:
            if r.id == rid:
                return r
        raise KeyError(rid)

    def structure(self) -> tuple:
        """Hashable structural summary, used for equality of two builds."""
        return (
            tuple((i.name, i.cls.name, i.bank_index, i.parent, tuple(sorted(i.params.items(), key=str)))
                  for i in self.instances),
            tuple((c.instance, c.port, c.ch, c.direction) for c in self.channels),
            tuple((a.instance, a.name, a.kind, a.min_delay) for a in self.actions),
            tuple((t.instance, t.name, t.offset, t.period) for t in self.timers),
            tuple((r.id, r.trigger_channels, r.trigger_actions, r.trigger_timers,
                   r.on_startup, r.on_shutdown,
                   tuple(sorted(r.reads.items())), tuple(sorted(r.writes.items())))
                  for r in self.reactions),
            self.channel_edges,
            self.apg_edges,
        )

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, ProgramGraph):
            return NotImplemented
        return self.structure() == other.structure()

    def __hash__(self) -> int:
        return hash(self.structure())


@dataclass(frozen=True)
class LevelMap:
    levels: tuple[int, ...]  # indexed by reaction index
    counts: tuple[int, ...]  # reactions per level

    def __getitem__(self, reaction_index: int) -> int:
        return self.levels[reaction_index]

    @property
    def depth(self) -> int:
        return len(self.counts)

    @property
    def max_width(self) -> int:
        return max(self.counts, default=0)


# --------------------------------------------------------------------------
# building

_REF = re.compile(r"^(?:(?P<inter>interleaved)\((?P<iref>[^()]+)\)|(?P<ref>[^()]+))$")


class _Builder:
    def __init__(self) -> None:
        self.errors: list[ProgramError] = []
        self.instances: list[Instance] = []
        self.channels: list[Channel] = []
        self.ports: dict[tuple[int, str], tuple[int, ...]] = {}
        self.actions: list[Action] = []
        self.action_index: dict[tuple[int, str], int] = {}
        self.timers: list[Timer] = []
        self.timer_index: dict[tuple[int, str], int] = {}
        self.children: dict[tuple[int, str], list[int]] = {}
        self.edges: list[ChannelEdge] = []
        self.links: list[ConnectionDecl] = []
        self.reaction_writers: dict[int, list[str]] = defaultdict(list)
        self._pending_reactions: list[tuple[int, int, ReactionDecl]] = []

    # -- instantiation ----------------------------------------------------

    def instantiate(
        self,
        cls: ReactorClass,
        name: str,
        params: Mapping[str, Any],
        bank_index: int | None,
        parent: int | None,
        stack: tuple[ReactorClass, ...],
    ) -> int:
        merged = dict(cls.parameters)
        merged.update(params)
        if bank_index is not None:
            merged["bank_index"] = bank_index
        idx = len(self.instances)
        self.instances.append(Instance(idx, name, cls, MappingProxyType(merged), bank_index, parent))

        for port in cls.ports.values():
            width = port.width
            if isinstance(width, str):
                value = merged.get(width)
                if not isinstance(value, int) or value < 1:
                    self.errors.append(UnresolvedReference(
                        f"{name}.{port.name}: width parameter {width!r} is {value!r}",
                        instance=name, port=port.name))
                    value = 1
                width = value
            chans = []
            for ch in range(width):
                c = Channel(len(self.channels), idx, port.name, ch, port.direction)
                self.channels.append(c)
                chans.append(c.index)
            self.ports[(idx, port.name)] = tuple(chans)
        for act in cls.actions.values():
            self.action_index[(idx, act.name)] = len(self.actions)
            self.actions.append(Action(len(self.actions), idx, act.name, act.kind, act.min_delay))
        for tm in cls.timers.values():
            self.timer_index[(idx, tm.name)] = len(self.timers)
            self.timers.append(Timer(len(self.timers), idx, tm.name, tm.offset, tm.period))

        stack = stack + (cls,)
        prefix = "" if parent is None and not name else f"{name}."
        for child in cls.instances.values():
            if child.cls in stack:
                chain = " -> ".join(c.name for c in stack + (child.cls,))
                self.errors.append(InstantiationCycle(
                    f"{cls.name} contains itself transitively: {chain}",
                    chain=[c.name for c in stack + (child.cls,)]))
                continue
            members: list[int] = []
            if child.bank is None:
                members.append(self.instantiate(
                    child.cls, f"{prefix}{child.name}", child.params, None, idx, stack))
            else:
                for b in range(child.bank):
                    members.append(self.instantiate(
                        child.cls, f"{prefix}{child.name}[{b}]", child.params, b, idx, stack))
            self.children[(idx, child.name)] = members

        for position, decl in enumerate(cls.reactions):
            self._pending_reactions.append((idx, position, decl))
        for conn in cls.connections:
            self._connect(idx, conn)
        return idx

    # -- references -------------------------------------------------------

    def _resolve_port_ref(self, owner: int, ref: str) -> tuple[list[int], str, str] | None:
        """Return (channels, role, label) where role is "own" or "child"."""
        m = _REF.match(ref.strip())
        if not m:
            self.errors.append(UnresolvedReference(f"malformed port reference {ref!r}"))
            return None
        interleaved = m.group("inter") is not None
        body = (m.group("iref") or m.group("ref")).strip()
        inst = self.instances[owner]
        if "." not in body:
            if interleaved:
                self.errors.append(UnresolvedReference(f"{inst.name}: interleaved() needs inst.port"))
                return None
            chans = self.ports.get((owner, body))
            if chans is None:
                self.errors.append(UnresolvedReference(
                    f"{inst.name or '<main>'}: no port {body!r}", instance=inst.name, ref=ref))
                return None
            return list(chans), "own", body
        child_name, _, port = body.partition(".")
        members = self.children.get((owner, child_name))
        if members is None:
            self.errors.append(UnresolvedReference(
                f"{inst.name or '<main>'}: no contained instance {child_name!r}", ref=ref))
            return None
        per_member = []
        for mi in members:
            chans = self.ports.get((mi, port))
            if chans is None:
                self.errors.append(UnresolvedReference(
                    f"{self.instances[mi].name}: no port {port!r}", ref=ref))
                return None
            per_member.append(chans)
        if interleaved:
            width = max(len(c) for c in per_member)
            flat = [c[k] for k in range(width) for c in per_member if k < len(c)]
        else:
            flat = [ch for c in per_member for ch in c]
        return flat, "child", body

    def _connect(self, owner: int, conn: ConnectionDecl) -> None:
        link = len(self.links)
        self.links.append(conn)
        owner_name = self.instances[owner].name or "<main>"
        src: list[int] = []
        dst: list[int] = []
        for side, refs, out in (("source", conn.sources, src), ("destination", conn.destinations, dst)):
            for ref in refs:
                resolved = self._resolve_port_ref(owner, ref)
                if resolved is None:
                    return
                chans, role, _ = resolved
                direction = self.channels[chans[0]].direction
                # sources: own inputs or child outputs; destinations: own outputs or child inputs
                ok_dir = ("input" if role == "own" else "output") if side == "source" else (
                    "output" if role == "own" else "input")
                if direction != ok_dir:
                    self.errors.append(InvalidConnection(
                        f"{owner_name}: {ref!r} cannot be a connection {side}", ref=ref))
                    return
                out.extend(chans)
        left, right = len(src), len(dst)
        label = f"{', '.join(conn.sources)} -> {', '.join(conn.destinations)}"
        if conn.broadcast:
            if left > right:
                self.errors.append(WidthMismatch(
                    f"{owner_name}: broadcast {label} has {left} source channels for {right} destinations",
                    left=left, right=right))
                return
            pairs = [(src[k % left], dst[k]) for k in range(right)]
        else:
            if left != right:
                self.errors.append(WidthMismatch(
                    f"{owner_name}: {label} connects {left} channels to {right}",
                    left=left, right=right))
                return
            pairs = list(zip(src, dst))
        delay = None if conn.delay is None else conn.delay.nanos
        for s, d in pairs:
            self.edges.append(ChannelEdge(s, d, conn.kind, delay, link))

    # -- reactions --------------------------------------------------------

    def reactions(self) -> list[Reaction]:
        out: list[Reaction] = []
        for idx, position, decl in self._pending_reactions:
            inst = self.instances[idx]
            rid = f"{inst.name or 'main'}.r{position}"
            reads: dict[str, tuple[int, ...]] = {}
            writes: dict[str, tuple[int, ...]] = {}
            read_actions: dict[str, int] = {}
            effect_actions: dict[str, int] = {}
            trig_ch: list[int] = []
            trig_act: list[int] = []
            trig_tm: list[int] = []
            startup = shutdown = False

            def lookup(ref: str, role: str) -> None:
                nonlocal startup, shutdown
                if role == "trigger" and ref == STARTUP:
                    startup = True
                    return
                if role == "trigger" and ref == SHUTDOWN:
                    shutdown = True
                    return
                if "." not in ref:
                    if (idx, ref) in self.action_index:
                        a = self.action_index[(idx, ref)]
                        if role == "effect":
                            if self.actions[a].kind == "physical":
                                self.errors.append(UnresolvedReference(
                                    f"{rid}: physical action {ref!r} cannot be a reaction effect"))
                            effect_actions[ref] = a
                        else:
                            read_actions[ref] = a
                            if role == "trigger":
                                trig_act.append(a)
                        return
                    if (idx, ref) in self.timer_index:
                        if role != "trigger":
                            self.errors.append(UnresolvedReference(f"{rid}: timer {ref!r} can only trigger"))
                            return
                        trig_tm.append(self.timer_index[(idx, ref)])
                        return
                resolved = self._resolve_port_ref(idx, ref)
                if resolved is None:
                    return
                chans, kind, _ = resolved
                direction = self.channels[chans[0]].direction
                wants = "output" if kind == "child" else "input"
                if role == "effect":
                    wants = "input" if kind == "child" else "output"
                if direction != wants:
                    self.errors.append(UnresolvedReference(
                        f"{rid}: {ref!r} ({kind} {direction}) cannot be a {role}"))
                    return
                if role == "effect":
                    writes[ref] = tuple(chans)
                    if kind == "child":
                        for c in chans:
                            self.reaction_writers[c].append(rid)
                else:
                    reads[ref] = tuple(chans)
                    if role == "trigger":
                        trig_ch.extend(chans)

            for ref in decl.triggers:
                lookup(ref, "trigger")
            for ref in decl.sources:
                lookup(ref, "source")
            for ref in decl.effects:
                lookup(ref, "effect")
            out.append(Reaction(
                index=len(out), id=rid, instance=idx, position=position, decl=decl,
                reads=MappingProxyType(reads), writes=MappingProxyType(writes),
                read_actions=MappingProxyType(read_actions),
                effect_actions=MappingProxyType(effect_actions),
                trigger_channels=tuple(dict.fromkeys(trig_ch)),
                trigger_actions=tuple(dict.fromkeys(trig_act)),
                trigger_timers=tuple(dict.fromkeys(trig_tm)),
                on_startup=startup, on_shutdown=shutdown,
            ))
        return out


def build_program(main: ReactorClass, **params: Any) -> ProgramGraph:
    """Flatten ``main`` into a :class:`ProgramGraph`.

    Raises :class:`ProgramValidationError` listing every problem found.
    """
    b = _Builder()
    b.instantiate(main, "", params, None, None, ())
    reactions = b.reactions()
    channels = b.channels

    writers: dict[int, list[str]] = defaultdict(list)
    for e in b.edges:
        writers[e.dst].append(f"connection {b.links[e.link].sources} -> {b.links[e.link].destinations}")
    for c, rids in b.reaction_writers.items():
        writers[c].extend(f"reaction {rid}" for rid in rids)
    for c in sorted(writers):
        if len(writers[c]) > 1:
            b.errors.append(MultipleWriters(
                f"{channels[c].label(b.instances)} has {len(writers[c])} writers: {'; '.join(writers[c])}",
                channel=channels[c].label(b.instances), writers=writers[c]))
    if b.errors:
        raise ProgramValidationError(b.errors)

    zero_out: dict[int, list[int]] = defaultdict(list)
    for e in b.edges:
        if e.kind == "logical" and e.delay is None:
            zero_out[e.src].append(e.dst)
    closure: list[tuple[int, ...]] = []
    for c in range(len(channels)):
        seen = [c]
        mark = {c}
        stack = [c]
        while stack:
            for d in zero_out.get(stack.pop(), ()):
                if d not in mark:
                    mark.add(d)
                    seen.append(d)
                    stack.append(d)
        closure.append(tuple(seen))

    readers: dict[int, list[int]] = defaultdict(list)
    for r in reactions:
        for chans in r.reads.values():
            for c in chans:
                readers[c].append(r.index)

    apg: set[tuple[int, int, str]] = set()
    last_in_instance: dict[int, int] = {}
    for r in reactions:
        prev = last_in_instance.get(r.instance)
        if prev is not None:
            apg.add((prev, r.index, "order"))
        last_in_instance[r.instance] = r.index
    for r in reactions:
        for chans in r.writes.values():
            for c in chans:
                for d in closure[c]:
                    for v in readers.get(d, ()):
                        apg.add((r.index, v, "port"))
    # an order edge and a port edge between the same pair collapse to one dependency
    dedup: dict[tuple[int, int], str] = {}
    for u, v, kind in sorted(apg):
        dedup.setdefault((u, v), kind)

    return ProgramGraph(
        instances=tuple(b.instances),
        channels=tuple(channels),
        ports=MappingProxyType(dict(b.ports)),
        actions=tuple(b.actions),
        timers=tuple(b.timers),
        reactions=tuple(reactions),
        channel_edges=tuple(b.edges),
        apg_edges=tuple((u, v, k) for (u, v), k in sorted(dedup.items())),
        closure=tuple(closure),
        links=tuple(b.links),
    )


# --------------------------------------------------------------------------
# causality and levels


def _successors(n: int, edges: Iterable[tuple[int, int]]) -> list[list[int]]:
    succ: list[list[int]] = [[] for _ in range(n)]
    for u, v in edges:
        succ[u].append(v)
    for s in succ:
        s.sort()
    return succ


def find_cycle(n: int, edges: Iterable[tuple[int, int]]) -> list[int] | None:
    """Some directed cycle as a node list (first node not repeated), or None."""
    succ = _successors(n, edges)
    color = [0] * n  # 0 white, 1 on stack, 2 done
    parent = [-1] * n
    for root in range(n):
        if color[root]:
            continue
        stack = [(root, iter(succ[root]))]
        color[root] = 1
        while stack:
            node, it = stack[-1]
            for v in it:
                if color[v] == 0:
                    color[v] = 1
                    parent[v] = node
                    stack.append((v, iter(succ[v])))
                    break
                if color[v] == 1:
                    cycle = [node]
                    while cycle[-1] != v:
                        cycle.append(parent[cycle[-1]])
                    cycle.reverse()
                    return cycle
            else:
                color[node] = 2
                stack.pop()
    return None


def longest_path_levels(n: int, edges: Iterable[tuple[int, int]]) -> list[int]:
    """Length of the longest path ending at each node of a DAG."""
    edges = list(edges)
    succ = _successors(n, edges)
    indeg = [0] * n
    for _, v in edges:
        indeg[v] += 1
    level = [0] * n
    ready = [i for i in range(n) if indeg[i] == 0]
    seen = 0
    while ready:
        u = ready.pop()
        seen += 1
        for v in succ[u]:
            if level[u] + 1 > level[v]:
                level[v] = level[u] + 1
            indeg[v] -= 1
            if indeg[v] == 0:
                ready.append(v)
    if seen != n:
        raise ValueError("graph has a cycle")
    return level


def validate_causality(g: ProgramGraph) -> None:
    """Raise :class:`CycleError` if the zero-delay APG has a cycle."""
    cycle = find_cycle(len(g.reactions), ((u, v) for u, v, _ in g.apg_edges))
    if cycle is None:
        return
    ids = [g.reactions[i].id for i in cycle]
    start = ids.index(min(ids))
    ids = ids[start:] + ids[:start]
    raise CycleError(ids + [ids[0]])


def assign_levels(g: ProgramGraph) -> LevelMap:
    levels = longest_path_levels(len(g.reactions), ((u, v) for u, v, _ in g.apg_edges))
    depth = max(levels, default=-1) + 1
    counts = [0] * depth
    for lv in levels:
        counts[lv] += 1
    return LevelMap(tuple(levels), tuple(counts))


def compile_program(main: ReactorClass, **params: Any) -> tuple[ProgramGraph, LevelMap]:
    """build_program + validate_causality + assign_levels."""
    g = build_program(main, **params)
    validate_causality(g)
    return g, assign_levels(g)


# --------------------------------------------------------------------------
# export


def _graph_levels(g: ProgramGraph, levels: LevelMap | None) -> list[int | None]:
    if levels is not None:
        return list(levels.levels)
    try:
        validate_causality(g)
    except CycleError:
        return [None] * len(g.reactions)
    return list(assign_levels(g).levels)


def _edge_kind(e: ChannelEdge) -> str:
    if e.kind == "physical":
        return "physical"
    return "logical" if e.delay is None else "logical-delayed"


def export_graph(g: ProgramGraph, format: str = "dot", levels: LevelMap | None = None) -> str:
    """Render ``g`` as ``"dot"`` or ``"json"`` text. Output is stable."""
    if format not in ("dot", "json"):
        raise ValueError(f"unsupported graph format {format!r}")
    lv = _graph_levels(g, levels)
    reactors = [i for i in g.instances if i.parent is not None]
    chan_label = [c.label(g.instances) for c in g.channels]

    if format == "json":
        doc = {
            "reactors": [{"name": i.name, "class": i.cls.name, "bank_index": i.bank_index}
                         for i in reactors],
            "reactions": [{"id": r.id, "reactor": g.instances[r.instance].name or "main",
                           "name": r.name, "level": lv[r.index]} for r in g.reactions],
            "edges": [{"from": chan_label[e.src], "to": chan_label[e.dst], "kind": _edge_kind(e)}
                      for e in g.channel_edges]
            + [{"from": g.reactions[u].id, "to": g.reactions[v].id, "kind": f"apg-{k}"}
               for u, v, k in g.apg_edges],
        }
        return json.dumps(doc, indent=2) + "\n"

    def q(s: str) -> str:
        return '"' + s.replace('"', '\\"') + '"'

    lines = ["digraph program {", "  rankdir=LR;", "  node [fontname=Helvetica];"]
    by_instance: dict[int, list] = defaultdict(list)
    for r in g.reactions:
        by_instance[r.instance].append(r)
    for i in g.instances:
        if i.parent is None and not by_instance.get(i.index):
            continue
        name = i.name or "main"
        lines.append(f"  subgraph {q('cluster_' + name)} {{")
        lines.append(f"    label={q(name + ' : ' + i.cls.name)};")
        lines.append(f"    {q(name)} [shape=box, label={q(name)}];")
        for r in by_instance.get(i.index, ()):
            lines.append(f"    {q(r.id)} [shape=ellipse, label={q(f'{r.name} L{lv[r.index]}')}];")
        lines.append("  }")
    for e in g.channel_edges:
        src = g.instances[g.channels[e.src].instance].name or "main"
        dst = g.instances[g.channels[e.dst].instance].name or "main"
        style = {"logical": "solid", "logical-delayed": "dashed", "physical": "dotted"}[_edge_kind(e)]
        label = f"{chan_label[e.src]} -> {chan_label[e.dst]}"
        lines.append(f"  {q(src)} -> {q(dst)} [style={style}, label={q(label)}];")
    for u, v, k in g.apg_edges:
        lines.append(f"  {q(g.reactions[u].id)} -> {q(g.reactions[v].id)} [color=gray, label={q(k)}];")
    lines.append("}")
    return "\n".join(lines) + "\n"
