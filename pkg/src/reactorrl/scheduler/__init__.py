"""Multi-worker, level-stepped runtime."""

from .events import EventQueue, LateEventError
from .ready import AdmissionGate, AtomicCounter, ReadyQueue, countdown
from .runtime import (
    EffectError,
    ExecutionReport,
    ReactionContext,
    ReactionFault,
    Runtime,
    RuntimeConfig,
    RuntimeTerminated,
    TraceRecord,
    run,
)

__all__ = [
    "AdmissionGate", "AtomicCounter", "EffectError", "EventQueue", "ExecutionReport",
    "LateEventError", "ReactionContext", "ReactionFault", "ReadyQueue", "Runtime",
    "RuntimeConfig", "RuntimeTerminated", "TraceRecord", "countdown", "run",
]
