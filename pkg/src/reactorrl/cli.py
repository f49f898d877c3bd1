"""Command line: ``reactorrl bench|graph|run``.

Exit codes: 0 on clean shutdown, 2 when a reaction faults, 1 on other errors.
``REACTOR_WORKERS`` overrides the worker count of the reactor runtime.
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from pathlib import Path
from typing import Sequence

from .graph import CycleError, ProgramValidationError, build_program, export_graph, assign_levels, validate_causality
from .scheduler import ReactionFault

log = logging.getLogger("reactorrl")

EXIT_OK, EXIT_ERROR, EXIT_FAULT = 0, 1, 2


def _workers(arg: int | None, default: int) -> int:
    env = os.environ.get("REACTOR_WORKERS")
    if env:
        try:
            value = int(env)
        except ValueError:
            raise SystemExit(f"REACTOR_WORKERS must be an integer, got {env!r}") from None
        if value < 1:
            raise SystemExit("REACTOR_WORKERS must be >= 1")
        return value
    return arg if arg is not None else default


def _runtimes(value: str) -> tuple[str, ...]:
    if value == "both":
        return ("reactor", "actor")
    if value not in ("reactor", "actor"):
        raise ValueError(f"runtime must be reactor, actor or both, got {value!r}")
    return (value,)


def _config(path: str | None, overrides: dict) -> "RLConfig":
    from .rl.config import RLConfig

    cfg = RLConfig.load(path) if path else RLConfig()
    changes = {k: v for k, v in overrides.items() if v is not None}
    return cfg.replace(**changes) if changes else cfg


def cmd_bench(args: argparse.Namespace) -> int:
    from .bench.report import emit_report
    from .bench.stats import linear_fit, parse_bytes, parse_list

    workers = _workers(args.workers, 8)
    runtimes = _runtimes(args.runtime)
    results = []
    family = args.family
    if family == "broadcast-gather":
        from .bench.broadcast import bench_broadcast_gather

        actors = parse_list(args.actors)
        sizes = [parse_bytes(s) for s in args.bytes.split(",")]
        results = bench_broadcast_gather(actors, sizes, runtimes=runtimes, reps=args.reps,
                                         warmup=args.warmup, workers=workers, seed=args.seed)
        print("note: the actor baseline pickles every message (copy-on-send) to model "
              "object-store serialization; the reactor runtime shares immutable values.")
    elif family == "env-throughput":
        from .bench.throughput import bench_env_throughput

        results = bench_env_throughput(args.env.split(","), workers=workers, steps=args.steps,
                                       reps=args.reps, warmup=args.warmup, seed=args.seed,
                                       runtimes=runtimes)
    elif family == "parallel-q":
        from .bench.parallel_q import bench_parallel_q, learning_check

        cfg = _config(args.config, {"seed": args.seed, "iterations": args.iterations})
        results = bench_parallel_q(parse_list(args.batch), cfg, reps=args.reps, warmup=args.warmup,
                                   workers=workers, runtimes=runtimes)
        if args.learning_iterations:
            lc = cfg.replace(iterations=args.learning_iterations, eval_episodes=args.eval_episodes)
            greedy, rand, curve = learning_check(lc, workers=workers)
            print(f"learning check: greedy mean return {greedy:+.4f} vs random {rand:+.4f}")
            if args.out:
                _write_curve(Path(args.out) / "learning_curve.csv", curve)
    elif family == "marl-inference":
        from .bench.marl import bench_marl

        agents = parse_list(args.agents)
        episodes = parse_list(args.episodes)
        for sweep in args.sweep.split(","):
            results += bench_marl(agents=agents, episodes=episodes, reps=args.reps, warmup=args.warmup,
                                  workers=workers, seed=args.seed, sweep=sweep, runtimes=runtimes)
    for r in results:
        s = r.summary
        print(f"{r.family:16s} {r.runtime:7s} {r.param_name}={r.param_value!s:>10s} "
              f"{r.metric_name}={s.mean:.4g} ±{s.ci99:.3g} (99% CI, n={s.n})")
    _print_slopes(results, linear_fit)
    if args.out:
        for p in emit_report(results, args.out):
            print(f"wrote {p}")
    return EXIT_OK


def _print_slopes(results, linear_fit) -> None:
    groups: dict[tuple[str, str], dict[str, list]] = {}
    for r in results:
        if isinstance(r.param_value, str):
            continue
        groups.setdefault((r.family, r.param_name), {}).setdefault(r.runtime, []).append(r)
    for (family, param), by_rt in groups.items():
        fits = {rt: linear_fit([float(r.param_value) for r in rs], [r.mean for r in rs])
                for rt, rs in by_rt.items() if len(rs) >= 2}
        if len(fits) == 2 and fits["actor"].slope:
            print(f"{family} slope vs {param}: reactor {fits['reactor'].slope:.4g}, "
                  f"actor {fits['actor'].slope:.4g}, ratio {fits['reactor'].slope / fits['actor'].slope:.3f}")


def _write_curve(path: Path, curve) -> None:
    import csv

    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["iteration", "mean_return", "wall_ms"])
        for it, ret, ms in curve:
            w.writerow([it, f"{ret:.6f}", f"{ms:.3f}"])


def cmd_graph(args: argparse.Namespace) -> int:
    from .rl.dataflow import appendix_program

    cfg = _config(args.config, {"banks": args.banks, "width": args.width})
    g = build_program(appendix_program(cfg, zero_delay=args.zero_delay))
    try:
        validate_causality(g)
        levels = assign_levels(g)
    except CycleError as exc:
        print(f"causality error: {' -> '.join(exc.cycle)}", file=sys.stderr)
        levels = None
        if not args.force:
            return EXIT_ERROR
    text = export_graph(g, args.format, levels=levels)
    if args.output:
        Path(args.output).write_text(text)
    else:
        sys.stdout.write(text)
    return EXIT_OK


def cmd_run(args: argparse.Namespace) -> int:
    from .graph import compile_program
    from .rl.dataflow import appendix_program, learning_curve
    from .scheduler import Runtime, RuntimeConfig

    cfg = _config(args.config, {"seed": args.seed, "iterations": args.iterations})
    g, lm = compile_program(appendix_program(cfg))
    rt = Runtime(g, lm, RuntimeConfig(workers=_workers(args.workers, 1), seed=cfg.seed,
                                      fast=True, trace=bool(args.trace)))
    try:
        report = rt.run()
    except ReactionFault as fault:
        print(f"reaction fault: {fault} ({fault.__cause__!r})", file=sys.stderr)
        if args.trace and fault.report is not None:
            Path(args.trace).write_text(fault.report.trace_csv())
        return EXIT_FAULT
    if args.trace:
        Path(args.trace).write_text(report.trace_csv())
    rollouts = [rt.state_of(f"rollout[{b}]") for b in range(cfg.banks)]
    curve = learning_curve([r.returns for r in rollouts], rollouts[0].stamps, cfg.curve_every)
    if args.curve:
        _write_curve(Path(args.curve), curve)
    hashes = [rt.state_of(f"learner[{b}]").param_hashes[-1] for b in range(cfg.banks)]
    print(json.dumps({
        "tags_processed": report.tags_processed,
        "reactions_executed": report.reactions_executed,
        "wall_ms": round(report.wall_ns / 1e6, 3),
        "final_tag": str(report.final_tag),
        "final_param_hashes": hashes,
    }, indent=2))
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="reactorrl", description=__doc__.splitlines()[0])
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    b = sub.add_parser("bench", help="run a benchmark family on both runtimes")
    b.add_argument("family", choices=["broadcast-gather", "env-throughput", "parallel-q", "marl-inference"])
    b.add_argument("--runtime", default="both")
    b.add_argument("--actors", default="2,4,8,16")
    b.add_argument("--bytes", default="10485760", help="payload size(s), comma separated")
    b.add_argument("--workers", type=int, default=None)
    b.add_argument("--env", default="blackjack,gridworld,image80")
    b.add_argument("--steps", type=int, default=100_000, help="env steps per repetition")
    b.add_argument("--batch", default="100..500")
    b.add_argument("--iterations", type=int, default=None, help="training iterations per run")
    b.add_argument("--learning-iterations", type=int, default=0)
    b.add_argument("--eval-episodes", type=int, default=20_000)
    b.add_argument("--config", default=None)
    b.add_argument("--agents", default="2..10")
    b.add_argument("--episodes", default="100..1000")
    b.add_argument("--sweep", default="episodes,agents")
    b.add_argument("--reps", type=int, default=10)
    b.add_argument("--warmup", type=int, default=2)
    b.add_argument("--seed", type=int, default=42)
    b.add_argument("--out", default=None)
    b.set_defaults(func=cmd_bench)

    g = sub.add_parser("graph", help="export the RL dataflow graph")
    g.add_argument("--format", choices=["dot", "json"], default="dot")
    g.add_argument("--config", default=None)
    g.add_argument("--banks", type=int, default=None)
    g.add_argument("--width", type=int, default=None)
    g.add_argument("--zero-delay", action="store_true", help="literal cyclic wiring (rejected)")
    g.add_argument("--force", action="store_true", help="export even if causality fails")
    g.add_argument("-o", "--output", default=None)
    g.set_defaults(func=cmd_graph)

    r = sub.add_parser("run", help="train the RL pipeline from a config file")
    r.add_argument("config", nargs="?", default=None)
    r.add_argument("--workers", type=int, default=None)
    r.add_argument("--iterations", type=int, default=None)
    r.add_argument("--seed", type=int, default=None)
    r.add_argument("--trace", default=None, metavar="CSV")
    r.add_argument("--curve", default=None, metavar="CSV")
    r.set_defaults(func=cmd_run)
    return p


def main(argv: Sequence[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except ReactionFault as fault:
        print(f"reaction fault: {fault}", file=sys.stderr)
        return EXIT_FAULT
    except (ProgramValidationError, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
