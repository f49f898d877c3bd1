"""Summary statistics for repeated timings."""

from __future__ import annotations

import contextlib
import gc
import math
from dataclasses import dataclass
from typing import Iterator, Sequence

import numpy as np
from scipy import stats


@dataclass(frozen=True)
class Summary:
    n: int
    mean: float
    std: float
    ci99: float  # half-width of the 99% Student-t interval

    @property
    def low(self) -> float:
        return self.mean - self.ci99

    @property
    def high(self) -> float:
        return self.mean + self.ci99


def summarize(samples: Sequence[float], confidence: float = 0.99) -> Summary:
    x = np.asarray(samples, dtype=np.float64)
    n = len(x)
    if n == 0:
        raise ValueError("no samples")
    mean = float(x.mean())
    if n == 1:
        return Summary(1, mean, 0.0, math.inf)
    std = float(x.std(ddof=1))
    half = float(stats.t.ppf(0.5 + confidence / 2, n - 1) * std / math.sqrt(n))
    return Summary(n, mean, std, half)


@dataclass(frozen=True)
class Fit:
    slope: float
    intercept: float
    r2: float


def linear_fit(x: Sequence[float], y: Sequence[float]) -> Fit:
    """Least-squares line through ``(x, y)``."""
    if len(x) < 2:
        raise ValueError("a line needs at least two points")
    res = stats.linregress(np.asarray(x, dtype=np.float64), np.asarray(y, dtype=np.float64))
    return Fit(float(res.slope), float(res.intercept), float(res.rvalue ** 2))


def parse_list(text: str | Sequence[int] | int) -> list[int]:
    """``"2,4,8"``, ``"100..500"`` (step = start), ``"1..9:2"`` or already a list."""
    if isinstance(text, int):
        return [text]
    if not isinstance(text, str):
        return [int(v) for v in text]
    out: list[int] = []
    for part in text.split(","):
        part = part.strip()
        if not part:
            continue
        if ".." in part:
            lo_s, _, rest = part.partition("..")
            hi_s, _, step_s = rest.partition(":")
            lo, hi = int(lo_s), int(hi_s)
            step = int(step_s) if step_s else lo
            if step <= 0 or hi < lo:
                raise ValueError(f"bad range {part!r}")
            out.extend(range(lo, hi + 1, step))
        else:
            out.append(int(part))
    if not out:
        raise ValueError(f"empty list {text!r}")
    return out


def parse_bytes(text: str | int) -> int:
    """``10485760``, ``10MB``, ``1KiB`` ..."""
    if isinstance(text, int):
        return text
    t = text.strip().upper().replace("IB", "B")
    for suffix, mult in (("KB", 2**10), ("MB", 2**20), ("GB", 2**30), ("B", 1)):
        if t.endswith(suffix):
            return int(float(t[: -len(suffix)]) * mult)
    return int(t)


@contextlib.contextmanager
def paused_gc() -> Iterator[None]:
    """Collect, then keep the cyclic collector off while timing (as ``timeit`` does)."""
    was_enabled = gc.isenabled()
    gc.collect()
    gc.disable()
    try:
        yield
    finally:
        if was_enabled:
            gc.enable()
