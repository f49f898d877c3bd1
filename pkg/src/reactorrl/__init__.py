"""Reactor-model runtime with reinforcement-learning dataflows and an actor baseline."""

from .graph import (
    CycleError,
    LevelMap,
    ProgramGraph,
    ProgramValidationError,
    assign_levels,
    build_program,
    compile_program,
    export_graph,
    validate_causality,
)
from .program import ReactorClass
from .scheduler import ExecutionReport, ReactionFault, Runtime, RuntimeConfig, run
from .tags import MSEC, NSEC, SEC, USEC, LogicalDelay, Tag

__version__ = "0.1.0"

__all__ = [
    "CycleError", "ExecutionReport", "LevelMap", "LogicalDelay", "MSEC", "NSEC", "ProgramGraph",
    "ProgramValidationError", "ReactionFault", "ReactorClass", "Runtime", "RuntimeConfig", "SEC",
    "Tag", "USEC", "assign_levels", "build_program", "compile_program", "export_graph", "run",
    "validate_causality",
]
