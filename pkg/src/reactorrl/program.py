"""Declarative reactor classes.

A :class:`ReactorClass` collects ports, actions, timers, state variables,
ordered reactions, contained instances and connections. Nothing here runs;
:func:`reactorrl.graph.build_program` flattens a main class into a
:class:`~reactorrl.graph.ProgramGraph`.

Example::

    counter = ReactorClass("Counter")
    counter.timer("tick", period=MSEC)
    counter.output("count")
    counter.state("n", 0)

    @counter.reaction(triggers=["tick"], effects=["count"])
    def _(ctx):
        ctx.state.n += 1
        ctx.set("count", ctx.state.n)
"""

from __future__ import annotations

import copy
import re
from dataclasses import dataclass, field
from typing import Any, Callable, Iterable, Mapping, Sequence

from .tags import LogicalDelay, as_nanos

STARTUP = "startup"
SHUTDOWN = "shutdown"

_NAME = re.compile(r"^[A-Za-z_][A-Za-z0-9_]*$")
_BUILTIN_TRIGGERS = {STARTUP, SHUTDOWN}


class DeclarationError(ValueError):
    """Malformed reactor class declaration."""


def _check_name(name: str, what: str) -> str:
    if not _NAME.match(name):
        raise DeclarationError(f"invalid {what} name {name!r}")
    return name


@dataclass(frozen=True)
class PortDecl:
    name: str
    direction: str  # "input" | "output"
    width: int | str = 1  # int, or the name of an integer parameter


@dataclass(frozen=True)
class ActionDecl:
    name: str
    kind: str = "logical"  # "logical" | "physical"
    min_delay: int = 0


@dataclass(frozen=True)
class TimerDecl:
    name: str
    offset: int = 0
    period: int = 0  # 0 = fire once


@dataclass(frozen=True)
class StateDecl:
    name: str
    initial: Any = None
    factory: Callable[[Mapping[str, Any]], Any] | None = None

    def make(self, params: Mapping[str, Any]) -> Any:
        if self.factory is not None:
            return self.factory(params)
        return copy.deepcopy(self.initial)


@dataclass(frozen=True)
class Deadline:
    nanos: int
    handler: Callable[[Any], None]


@dataclass(frozen=True)
class ReactionDecl:
    body: Callable[[Any], None]
    triggers: tuple[str, ...]
    sources: tuple[str, ...] = ()
    effects: tuple[str, ...] = ()
    deadline: Deadline | None = None
    name: str = ""


@dataclass(frozen=True)
class InstanceDecl:
    name: str
    cls: ReactorClass
    bank: int | None = None  # None = single instance
    params: Mapping[str, Any] = field(default_factory=dict)


@dataclass(frozen=True)
class ConnectionDecl:
    sources: tuple[str, ...]
    destinations: tuple[str, ...]
    kind: str = "logical"  # "logical" | "physical"
    broadcast: bool = False
    delay: LogicalDelay | None = None


class ReactorClass:
    """A reactor class: the unit of composition."""

    def __init__(self, name: str, parameters: Mapping[str, Any] | None = None) -> None:
        self.name = _check_name(name, "class")
        self.parameters: dict[str, Any] = dict(parameters or {})
        self.ports: dict[str, PortDecl] = {}
        self.actions: dict[str, ActionDecl] = {}
        self.timers: dict[str, TimerDecl] = {}
        self.states: dict[str, StateDecl] = {}
        self.reactions: list[ReactionDecl] = []
        self.instances: dict[str, InstanceDecl] = {}
        self.connections: list[ConnectionDecl] = []

    def __repr__(self) -> str:
        return f"ReactorClass({self.name!r})"

    # -- declarations -----------------------------------------------------

    def _claim(self, name: str, what: str) -> str:
        _check_name(name, what)
        if name in _BUILTIN_TRIGGERS:
            raise DeclarationError(f"{name!r} is reserved")
        for table in (self.ports, self.actions, self.timers, self.instances):
            if name in table:
                raise DeclarationError(f"{self.name}: duplicate declaration {name!r}")
        return name

    def input(self, name: str, width: int | str = 1) -> str:
        self.ports[self._claim(name, "port")] = PortDecl(name, "input", _check_width(width))
        return name

    def output(self, name: str, width: int | str = 1) -> str:
        self.ports[self._claim(name, "port")] = PortDecl(name, "output", _check_width(width))
        return name

    def action(self, name: str, kind: str = "logical", min_delay: LogicalDelay | int = 0) -> str:
        if kind not in ("logical", "physical"):
            raise DeclarationError(f"unknown action kind {kind!r}")
        self.actions[self._claim(name, "action")] = ActionDecl(name, kind, as_nanos(min_delay))
        return name

    def physical_action(self, name: str, min_delay: LogicalDelay | int = 0) -> str:
        return self.action(name, "physical", min_delay)

    def timer(self, name: str, offset: LogicalDelay | int = 0, period: LogicalDelay | int = 0) -> str:
        self.timers[self._claim(name, "timer")] = TimerDecl(name, as_nanos(offset), as_nanos(period))
        return name

    def state(
        self,
        name: str,
        initial: Any = None,
        *,
        factory: Callable[[Mapping[str, Any]], Any] | None = None,
    ) -> str:
        _check_name(name, "state")
        if name in self.states:
            raise DeclarationError(f"{self.name}: duplicate state {name!r}")
        self.states[name] = StateDecl(name, initial, factory)
        return name

    def reaction(
        self,
        triggers: Iterable[str],
        *,
        sources: Iterable[str] = (),
        effects: Iterable[str] = (),
        deadline: LogicalDelay | int | None = None,
        on_deadline: Callable[[Any], None] | None = None,
        name: str | None = None,
    ) -> Callable[[Callable[[Any], None]], Callable[[Any], None]]:
        """Decorator appending a reaction. Declaration order is execution order."""
        if (deadline is None) != (on_deadline is None):
            raise DeclarationError("a deadline needs exactly one handler")

        def register(body: Callable[[Any], None]) -> Callable[[Any], None]:
            self.add_reaction(
                body,
                triggers,
                sources=sources,
                effects=effects,
                deadline=None if deadline is None else Deadline(as_nanos(deadline), on_deadline),
                name=name,
            )
            return body

        return register

    def add_reaction(
        self,
        body: Callable[[Any], None],
        triggers: Iterable[str],
        *,
        sources: Iterable[str] = (),
        effects: Iterable[str] = (),
        deadline: Deadline | None = None,
        name: str | None = None,
    ) -> ReactionDecl:
        triggers = tuple(triggers)
        if not triggers:
            raise DeclarationError(f"{self.name}: reaction needs at least one trigger")
        decl = ReactionDecl(
            body=body,
            triggers=triggers,
            sources=tuple(sources),
            effects=tuple(effects),
            deadline=deadline,
            name=name or getattr(body, "__name__", "") or f"reaction_{len(self.reactions)}",
        )
        self.reactions.append(decl)
        return decl

    def new(self, name: str, cls: ReactorClass, *, bank: int | None = None, **params: Any) -> str:
        """Contain an instance (or a bank of ``bank`` instances) of ``cls``."""
        if bank is not None and bank < 1:
            raise DeclarationError(f"bank width must be >= 1, got {bank}")
        self.instances[self._claim(name, "instance")] = InstanceDecl(name, cls, bank, dict(params))
        return name

    def connect(
        self,
        sources: str | Sequence[str],
        destinations: str | Sequence[str],
        *,
        kind: str = "logical",
        broadcast: bool = False,
        delay: LogicalDelay | int | None = None,
    ) -> ConnectionDecl:
        """Connect ports. ``broadcast=True`` is the iterated ``(src)+ -> dst`` form.

        Endpoints are ``"port"`` (own port), ``"inst.port"`` (a contained
        instance or bank) or ``"interleaved(inst.port)"`` which enumerates a
        bank's multiport channel-major instead of member-major.
        """
        if kind not in ("logical", "physical"):
            raise DeclarationError(f"unknown connection kind {kind!r}")
        if kind == "physical" and delay is not None:
            raise DeclarationError("physical connections take no logical delay")
        srcs = (sources,) if isinstance(sources, str) else tuple(sources)
        dsts = (destinations,) if isinstance(destinations, str) else tuple(destinations)
        if not srcs or not dsts:
            raise DeclarationError("connection needs at least one source and destination")
        conn = ConnectionDecl(
            srcs,
            dsts,
            kind,
            broadcast,
            None if delay is None else LogicalDelay(as_nanos(delay)),
        )
        self.connections.append(conn)
        return conn


def _check_width(width: int | str) -> int | str:
    if isinstance(width, str):
        return _check_name(width, "width parameter")
    if width < 1:
        raise DeclarationError(f"port width must be >= 1, got {width}")
    return width
