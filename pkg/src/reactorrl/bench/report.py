"""Benchmark results, CSV rows and SVG charts."""

from __future__ import annotations

import csv
import io
import os
import tempfile
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

from .stats import Summary, summarize

FAMILIES = ("broadcast-gather", "env-throughput", "parallel-q", "marl-inference")
RUNTIMES = ("reactor", "actor")

CSV_COLUMNS = ("family", "runtime", "param_name", "param_value", "rep", "wall_ns",
               "metric_name", "metric_value", "seed", "workers", "reps", "warmup")

_AXES = {
    "broadcast-gather": {"actors": ("number of actors", "mean overhead (ms)"),
                         "bytes": ("object size (MB)", "mean overhead (ms)")},
    "env-throughput": {"env": ("environment", "observations / second")},
    "parallel-q": {"batch": ("mini-batch size", "training time (ms)")},
    "marl-inference": {"episodes": ("episodes", "inference time (ms)"),
                       "agents": ("number of agents", "inference time (ms)")},
}


@dataclass
class BenchResult:
    family: str
    runtime: str
    param_name: str
    param_value: int | float | str
    wall_ns: list[int]
    metric_name: str
    metric_values: list[float]
    seed: int
    workers: int
    warmup: int
    notes: dict[str, object] = field(default_factory=dict)

    def __post_init__(self) -> None:
        if self.family not in FAMILIES:
            raise ValueError(f"unknown family {self.family!r}")
        if self.runtime not in RUNTIMES:
            raise ValueError(f"unknown runtime {self.runtime!r}")
        if len(self.wall_ns) != len(self.metric_values):
            raise ValueError("one metric value per repetition")

    @property
    def reps(self) -> int:
        return len(self.wall_ns)

    @property
    def summary(self) -> Summary:
        return summarize(self.metric_values)

    @property
    def mean(self) -> float:
        return self.summary.mean

    def rows(self) -> Iterable[list[object]]:
        for rep, (ns, value) in enumerate(zip(self.wall_ns, self.metric_values)):
            yield [self.family, self.runtime, self.param_name, self.param_value, rep, ns,
                   self.metric_name, repr(float(value)), self.seed, self.workers,
                   self.reps, self.warmup]


def to_csv(results: Sequence[BenchResult]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(CSV_COLUMNS)
    for res in results:
        w.writerows(res.rows())
    return buf.getvalue()


def _svg(results: Sequence[BenchResult], family: str, param_name: str) -> str:
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    xlabel, ylabel = _AXES.get(family, {}).get(param_name, (param_name, results[0].metric_name))
    with matplotlib.rc_context({"svg.hashsalt": "reactorrl", "svg.fonttype": "none",
                                "font.size": 9}):
        fig, ax = plt.subplots(figsize=(5.0, 3.4))
        categorical = any(isinstance(r.param_value, str) for r in results)
        labels: list[object] = []
        for r in results:
            if r.param_value not in labels:
                labels.append(r.param_value)
        for k, runtime in enumerate(RUNTIMES):
            rs = [r for r in results if r.runtime == runtime]
            if not rs:
                continue
            means = [r.summary.mean for r in rs]
            errs = [r.summary.ci99 if r.reps > 1 else 0.0 for r in rs]
            if categorical:
                xs = [labels.index(r.param_value) + (k - 0.5) * 0.38 for r in rs]
                ax.bar(xs, means, width=0.38, yerr=errs, capsize=3, label=runtime)
            else:
                xs = [float(r.param_value) for r in rs]
                if param_name == "bytes":
                    xs = [x / 2**20 for x in xs]
                ax.errorbar(xs, means, yerr=errs, marker="o", capsize=3, label=runtime)
        if categorical:
            ax.set_xticks(range(len(labels)), [str(v) for v in labels])
        ax.set_xlabel(xlabel)
        ax.set_ylabel(ylabel)
        ax.set_title(f"{family} ({param_name})")
        ax.legend(frameon=False)
        ax.grid(alpha=0.3)
        fig.tight_layout()
        buf = io.StringIO()
        fig.savefig(buf, format="svg", metadata={"Date": None})
        plt.close(fig)
    return buf.getvalue()


def _atomic_write(path: Path, text: str) -> None:
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.")
    try:
        with os.fdopen(fd, "w") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def emit_report(results: Sequence[BenchResult], out_dir: str | Path, stem: str | None = None) -> list[Path]:
    """Write one CSV plus one SVG per (family, swept parameter). Nothing is written on error."""
    if not results:
        raise ValueError("no benchmark results to report")
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    if not os.access(out, os.W_OK):
        raise PermissionError(f"cannot write to {out}")
    groups: dict[tuple[str, str], list[BenchResult]] = {}
    for r in results:
        groups.setdefault((r.family, r.param_name), []).append(r)
    families = sorted({r.family for r in results})
    stem = stem or "_".join(families)
    texts: dict[Path, str] = {out / f"{stem}.csv": to_csv(results)}
    for (family, param), rs in groups.items():
        texts[out / f"{family}_{param}.svg"] = _svg(rs, family, param)
    for path, text in texts.items():
        _atomic_write(path, text)
    return list(texts)
