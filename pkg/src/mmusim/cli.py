"""``mmu-sim``: run one experiment or an L4 sweep and write reports.

Exit codes: 0 success, 1 configuration error, 2 trace error, 3 internal
invariant violation.
"""

from __future__ import annotations

import argparse
import os
import sys
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path
from typing import Iterable, Sequence

from . import config as cfgmod
from .cachehier import configure_l4
from .config import ExperimentConfig, format_size
from .engine import Report, _fmt, check_report, l4hit_tlbmiss_per_1k, run
from .errors import ConfigError, InvariantViolation, ParseError
from .workload import Event, read_trace, synth_events

EXIT_OK, EXIT_CONFIG, EXIT_TRACE, EXIT_INVARIANT = 0, 1, 2, 3

SWEEP_COLUMNS = ("l4_size", "l4_block", "ideal_tlb", "l4_hit_rate",
                 "l4hit_tlbmiss_per_1k", "avg_walk_cycles", "est_ipc")


class TraceError(Exception):
    """A trace file could not be opened or parsed."""


def events_for(config: ExperimentConfig) -> Iterable[Event]:
    if config.trace is not None:
        return read_trace(config.trace)
    return synth_events(config.synth, config.synth_events)


def run_experiment(config: ExperimentConfig) -> Report:
    try:
        report = run(config.machine, config.engine, events_for(config), config.echo())
    except ParseError as exc:
        raise TraceError(f"{config.trace}: {exc}") from None
    except OSError as exc:
        raise TraceError(f"{config.trace}: {exc.strerror or exc}") from None
    check_report(report)
    return report


def sweep_point(config: ExperimentConfig, l4_size: int, l4_block: int,
                ideal: bool) -> ExperimentConfig:
    """*config* with the L4 geometry and TLB mode of one sweep point."""
    values = dict(config.settings)
    values.update({"cache.l4.enabled": True, "cache.l4.size": l4_size,
                   "cache.l4.block": l4_block, "engine.ideal_tlb": ideal})
    try:
        configure_l4(l4_size, l4_block, values["cache.l4.assoc"], values["cache.l4.latency"])
    except ValueError as exc:
        raise ConfigError("sweep.l4.size", str(exc)) from None
    return cfgmod.build(values)


def _run_point(config: ExperimentConfig):
    # worker entry: exceptions become values so the coordinator picks the exit code
    try:
        return run_experiment(config)
    except (TraceError, InvariantViolation, ConfigError) as exc:
        return exc


def run_sweep(config: ExperimentConfig, jobs: int = 1) -> tuple[list[tuple], list[Report], str]:
    """Run every sweep point; returns ``(points, reports, csv)`` in point order."""
    points = config.sweep.points()
    configs = [sweep_point(config, *p) for p in points]
    if jobs > 1 and len(configs) > 1:
        with ProcessPoolExecutor(max_workers=min(jobs, len(configs))) as pool:
            results = list(pool.map(_run_point, configs))
    else:
        results = [_run_point(c) for c in configs]
    for r in results:
        if isinstance(r, Exception):
            raise r
    return points, results, sweep_csv(points, results)


def sweep_csv(points: Sequence[tuple], reports: Sequence[Report]) -> str:
    rows = [",".join(SWEEP_COLUMNS)]
    for (size, block, ideal), rep in zip(points, reports):
        per1k, _ = l4hit_tlbmiss_per_1k(rep)
        rows.append(",".join([str(size), str(block), str(ideal).lower(), _fmt(rep.l4_hit_rate),
                              str(per1k), _fmt(rep.avg_walk_cycles), _fmt(rep.est_ipc)]))
    return "\n".join(rows) + "\n"


def emit_report(report: Report, path) -> list[Path]:
    """Write ``summary.txt``, ``histogram.csv`` and ``locality.csv`` under *path*."""
    out = Path(path)
    out.mkdir(parents=True, exist_ok=True)
    files = [(out / "summary.txt", report.to_text()),
             (out / "histogram.csv", report.histogram_csv()),
             (out / "locality.csv", report.locality_csv())]
    for file, text in files:
        file.write_text(text, encoding="utf-8")
    return [f for f, _ in files]


def _point_dir(size: int, block: int, ideal: bool) -> str:
    return f"l4_{format_size(size)}_b{block}_{'ideal' if ideal else 'base'}"


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(
        prog="mmu-sim",
        description="Trace-driven TLB, page-walk and cache hierarchy simulator.",
        formatter_class=argparse.RawDescriptionHelpFormatter,
        epilog="configuration keys and defaults (file format: key = value):\n"
               + cfgmod.describe_defaults()
               + "\n\nseed precedence: --seed, then engine.seed, then $MMU_SIM_SEED, then 0."
               + "\nexit codes: 0 ok, 1 config error, 2 trace error, 3 invariant violation.")
    p.add_argument("--config", metavar="PATH", help="experiment file (key = value lines)")
    p.add_argument("--trace", metavar="PATH", help="trace file; replaces the synthetic workload")
    p.add_argument("--out", metavar="DIR", default="out", help="output directory (default: out)")
    p.add_argument("--sweep", action="store_true", help="run the L4 size x block x TLB-mode sweep")
    p.add_argument("--ideal-tlb", action="store_true", help="ideal TLB: no walks, no pollution")
    p.add_argument("--seed", type=int, metavar="N")
    p.add_argument("--max-events", type=int, metavar="N")
    p.add_argument("--jobs", type=int, default=1, metavar="N", help="parallel sweep points")
    return p


def load(args: argparse.Namespace) -> ExperimentConfig:
    text = ""
    if args.config:
        try:
            text = Path(args.config).read_text(encoding="utf-8")
        except OSError as exc:
            raise ConfigError(args.config, f"cannot read config: {exc.strerror}") from None
    given = cfgmod.parse_values(text)
    if "engine.seed" not in given and os.environ.get("MMU_SIM_SEED"):
        try:
            given["engine.seed"] = int(os.environ["MMU_SIM_SEED"], 0)
        except ValueError:
            raise ConfigError("MMU_SIM_SEED", "not an integer") from None
    if args.seed is not None:
        given["engine.seed"] = args.seed
    if args.max_events is not None:
        given["engine.max_events"] = args.max_events
    if args.ideal_tlb:
        given["engine.ideal_tlb"] = True
    if args.trace:
        given = {k: v for k, v in given.items() if not k.startswith("synth.")}
        given["workload.trace"] = args.trace
    if args.jobs < 1:
        raise ConfigError("--jobs", "must be at least 1")
    return cfgmod.build({**cfgmod.defaults(), **given}, frozenset(given))


def main(argv: Sequence[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        config = load(args)
        out = Path(args.out)
        if args.sweep:
            points, reports, csv = run_sweep(config, args.jobs)
            for point, rep in zip(points, reports):
                for f in emit_report(rep, out / _point_dir(*point)):
                    print(f)
            combined = out / "sweep.csv"
            combined.write_text(csv, encoding="utf-8")
            print(combined)
        else:
            for f in emit_report(run_experiment(config), out):
                print(f)
    except ConfigError as exc:
        print(f"mmu-sim: config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except TraceError as exc:
        print(f"mmu-sim: trace error: {exc}", file=sys.stderr)
        return EXIT_TRACE
    except InvariantViolation as exc:
        print(f"mmu-sim: invariant violated: {exc}", file=sys.stderr)
        return EXIT_INVARIANT
    except OSError as exc:
        print(f"mmu-sim: cannot write {exc.filename}: {exc.strerror}", file=sys.stderr)
        return EXIT_CONFIG
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
