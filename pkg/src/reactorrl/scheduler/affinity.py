"""Best-effort CPU pinning that prefers performance cores."""

from __future__ import annotations

import glob
import logging
import os
from functools import lru_cache

log = logging.getLogger(__name__)


def _parse_cpu_list(text: str) -> list[int]:
    cpus: list[int] = []
    for part in text.strip().split(","):
        if not part:
            continue
        lo, _, hi = part.partition("-")
        cpus.extend(range(int(lo), int(hi or lo) + 1))
    return cpus


def _allowed() -> set[int]:
    if hasattr(os, "sched_getaffinity"):
        return set(os.sched_getaffinity(0))
    return set(range(os.cpu_count() or 1))


@lru_cache(maxsize=1)
def preferred_cpus() -> tuple[int, ...]:
    """One logical CPU per physical core, performance cores first.

    Hybrid Intel parts expose their P-cores in ``/sys/devices/cpu_core/cpus``;
    elsewhere every core counts as a performance core.
    """
    allowed = _allowed()
    perf: set[int] | None = None
    try:
        with open("/sys/devices/cpu_core/cpus") as fh:
            perf = set(_parse_cpu_list(fh.read()))
    except OSError:
        pass
    seen_cores: set[tuple[str, str]] = set()
    firsts: list[int] = []
    for path in sorted(glob.glob("/sys/devices/system/cpu/cpu[0-9]*/topology/core_id"),
                       key=lambda p: int(p.split("/")[-3][3:])):
        cpu = int(path.split("/")[-3][3:])
        if cpu not in allowed:
            continue
        try:
            with open(path) as fh:
                core = fh.read().strip()
            with open(path.replace("core_id", "physical_package_id")) as fh:
                pkg = fh.read().strip()
        except OSError:
            continue
        if (pkg, core) in seen_cores:
            continue
        seen_cores.add((pkg, core))
        firsts.append(cpu)
    if not firsts:
        firsts = sorted(allowed)
    if perf:
        firsts = [c for c in firsts if c in perf] + [c for c in firsts if c not in perf]
    return tuple(firsts)


def physical_cores() -> int:
    """Physical cores usable by this process."""
    return max(1, len(preferred_cpus()))


def pin_current_thread(slot: int) -> bool:
    """Pin the calling thread to the ``slot``-th preferred CPU; no-op where unsupported."""
    cpus = preferred_cpus()
    if not cpus or not hasattr(os, "sched_setaffinity"):
        return False
    try:
        os.sched_setaffinity(0, {cpus[slot % len(cpus)]})
    except OSError as exc:  # containers may forbid it
        log.debug("pinning failed: %s", exc)
        return False
    return True


def current_affinity() -> set[int] | None:
    if hasattr(os, "sched_getaffinity"):
        return set(os.sched_getaffinity(0))
    return None


def restore_affinity(cpus: set[int] | None) -> None:
    if cpus and hasattr(os, "sched_setaffinity"):
        try:
            os.sched_setaffinity(0, cpus)
        except OSError:
            pass
