"""Benchmarks comparing the reactor runtime with the actor baseline."""

from .broadcast import bench_broadcast_gather
from .marl import bench_marl
from .parallel_q import bench_parallel_q, learning_check
from .report import CSV_COLUMNS, BenchResult, emit_report
from .stats import Summary, linear_fit, summarize
from .throughput import bench_env_throughput

__all__ = [
    "BenchResult", "CSV_COLUMNS", "Summary", "bench_broadcast_gather", "bench_env_throughput",
    "bench_marl", "bench_parallel_q", "emit_report", "learning_check", "linear_fit", "summarize",
]
