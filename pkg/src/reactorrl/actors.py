"""Mailbox actors with copy-on-send, the baseline coordination model.

Every actor is a thread draining a bounded ``queue.Queue``. Messages are
pickled when sent and unpickled by the receiver, so a receiver never shares
memory with the sender. That serialization is the cost class the reactor
runtime avoids by handing immutable values between reactions.
"""

from __future__ import annotations

import itertools
import logging
import pickle
import queue
import threading
import time
from dataclasses import dataclass
from typing import Any, Callable, Sequence

log = logging.getLogger(__name__)

DEFAULT_CAPACITY = 1024
_PROTOCOL = 5


class ActorDeadError(RuntimeError):
    """The target actor's behavior raised and it stopped processing."""


class GatherTimeout(TimeoutError):
    """Not every reply arrived in time."""


def dumps(obj: Any) -> bytes:
    return pickle.dumps(obj, protocol=_PROTOCOL)


loads = pickle.loads


@dataclass(frozen=True)
class Envelope:
    data: bytes  # pickled payload
    sender: int | None
    reply_to: ActorRef | None
    tag: Any = None


class ActorContext:
    """Handed to a behavior alongside each message."""

    __slots__ = ("system", "self_ref", "sender", "tag")

    def __init__(self, system: ActorSystem, self_ref: ActorRef) -> None:
        self.system = system
        self.self_ref = self_ref
        self.sender: int | None = None
        self.tag: Any = None


class ActorRef:
    """Address of an actor. Sending copies the payload."""

    __slots__ = ("id", "name", "capacity", "_mailbox", "_system", "dead", "error")

    def __init__(self, system: ActorSystem, actor_id: int, name: str, capacity: int) -> None:
        self.id = actor_id
        self.name = name
        self.capacity = capacity
        self._mailbox: queue.Queue[Envelope | None] = queue.Queue(capacity)
        self._system = system
        self.dead = False
        self.error: BaseException | None = None

    def __repr__(self) -> str:
        state = "dead" if self.dead else "alive"
        return f"ActorRef({self.id}, {self.name!r}, {state})"

    def send(self, payload: Any, *, sender: ActorRef | int | None = None,
             reply_to: ActorRef | None = None, tag: Any = None) -> None:
        self.send_serialized(dumps(payload), sender=sender, reply_to=reply_to, tag=tag)

    def send_serialized(self, data: bytes, *, sender: ActorRef | int | None = None,
                        reply_to: ActorRef | None = None, tag: Any = None) -> None:
        """Send an already pickled payload; blocks while the mailbox is full."""
        if self.dead:
            raise ActorDeadError(f"actor {self.name} is dead: {self.error!r}")
        sid = sender.id if isinstance(sender, ActorRef) else sender
        self._mailbox.put(Envelope(data, sid, reply_to, tag))

    def tell(self, payload: Any, **kw: Any) -> None:
        self.send(payload, **kw)


class Inbox(ActorRef):
    """A mailbox read by the calling thread instead of a behavior thread."""

    def receive(self, timeout: float | None = None) -> tuple[Any, int | None, Any]:
        """(payload copy, sender id, tag)."""
        try:
            env = self._mailbox.get(timeout=timeout)
        except queue.Empty:
            raise GatherTimeout(f"no message within {timeout}s") from None
        assert env is not None
        return loads(env.data), env.sender, env.tag


class ActorSystem:
    """Owns actor threads. Use as a context manager or call :meth:`shutdown`."""

    def __init__(self) -> None:
        self._ids = itertools.count()
        self._tokens = itertools.count()
        self._actors: list[ActorRef] = []
        self._threads: list[threading.Thread] = []
        self._lock = threading.Lock()
        self._closed = False

    def __enter__(self) -> ActorSystem:
        return self

    def __exit__(self, *exc: object) -> None:
        self.shutdown()

    def spawn(self, behavior: Callable[[Any, ActorContext], Any], *, name: str | None = None,
              capacity: int = DEFAULT_CAPACITY) -> ActorRef:
        """Start an actor. ``behavior(payload, ctx)``'s return value is sent to ``reply_to``."""
        if self._closed:
            raise RuntimeError("actor system is shut down")
        aid = next(self._ids)
        ref = ActorRef(self, aid, name or f"actor-{aid}", capacity)
        th = threading.Thread(target=self._loop, args=(ref, behavior), name=ref.name, daemon=True)
        with self._lock:
            self._actors.append(ref)
            self._threads.append(th)
        th.start()
        return ref

    def inbox(self, name: str = "inbox", capacity: int = 0) -> Inbox:
        """A mailbox for the calling thread. ``capacity=0`` means unbounded."""
        aid = next(self._ids)
        return Inbox(self, aid, name, capacity)

    def _loop(self, ref: ActorRef, behavior: Callable[[Any, ActorContext], Any]) -> None:
        ctx = ActorContext(self, ref)
        mailbox = ref._mailbox
        while True:
            env = mailbox.get()
            if env is None:
                return
            ctx.sender = env.sender
            ctx.tag = env.tag
            try:
                result = behavior(loads(env.data), ctx)
                if env.reply_to is not None:
                    env.reply_to.send(result, sender=ref, tag=env.tag)
            except BaseException as exc:  # noqa: BLE001 - the actor dies, the system survives
                ref.error = exc
                ref.dead = True
                log.warning("actor %s died: %r", ref.name, exc)
                self._drain(ref)
                return

    @staticmethod
    def _drain(ref: ActorRef) -> None:
        while True:
            try:
                ref._mailbox.get_nowait()
            except queue.Empty:
                return

    def ask(self, ref: ActorRef, payload: Any, timeout: float | None = 10.0) -> Any:
        inbox = self.inbox("ask")
        ref.send(payload, reply_to=inbox)
        return inbox.receive(timeout)[0]

    def broadcast_gather(self, refs: Sequence[ActorRef], payload: Any, *,
                         timeout: float | None = 30.0, keep_replies: bool = True,
                         inbox: Inbox | None = None) -> list[Any]:
        """Copy-send ``payload`` to every actor and wait for one reply from each.

        The payload is serialized once and each receiver deserializes its own
        copy, as with an object store. Replies come back in ``refs`` order.
        With ``keep_replies=False`` each reply is still received (and
        deserialized) but dropped, bounding memory for huge payloads.
        """
        ids = [r.id for r in refs]
        if len(set(ids)) != len(ids):
            raise ValueError("broadcast_gather needs distinct actors")
        dead = [r for r in refs if r.dead]
        if dead:
            raise GatherTimeout(f"{len(dead)} actor(s) dead, replies can never arrive: "
                                f"{', '.join(r.name for r in dead)}")
        inbox = inbox or self.inbox("gather")
        data = dumps(payload)
        token = next(self._tokens)
        for r in refs:
            r.send_serialized(data, reply_to=inbox, tag=token)
        del data
        slot = {aid: k for k, aid in enumerate(ids)}
        replies: list[Any] = [None] * len(refs)
        seen: set[int] = set()
        deadline = None if timeout is None else time.monotonic() + timeout
        while len(seen) < len(refs):
            left = None if deadline is None else max(0.0, deadline - time.monotonic())
            try:
                value, sender, tag = inbox.receive(left)
            except GatherTimeout:
                missing = [r.name for r in refs if r.id not in seen]
                raise GatherTimeout(f"replies missing from {', '.join(missing)}") from None
            if tag != token or sender not in slot or sender in seen:
                continue
            seen.add(sender)
            if keep_replies:
                replies[slot[sender]] = value
            del value
        return replies

    @property
    def actors(self) -> list[ActorRef]:
        return list(self._actors)

    def shutdown(self, timeout: float = 5.0) -> None:
        if self._closed:
            return
        self._closed = True
        for ref in self._actors:
            if not ref.dead:
                try:
                    ref._mailbox.put(None, timeout=timeout)
                except queue.Full:
                    log.warning("actor %s mailbox full at shutdown", ref.name)
        for th in self._threads:
            th.join(timeout)


def echo(payload: Any, ctx: ActorContext) -> Any:
    return payload
