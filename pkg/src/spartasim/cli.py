"""Command-line front end.

Subcommands:
  gen    generate a synthetic trace file
  run    replay one configuration and report statistics as JSON
  sweep  execute a named experiment recipe and emit CSV

Exit codes: 0 success, 1 run failure, 2 usage or configuration error.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from . import analysis, engine, recipes, traceio, workloads
from .config import ConfigError, SystemConfig, parse_count, parse_page_size, parse_size
from .workloads import KINDS, WorkloadSpec


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="spartasim",
        description="Trace-driven simulator for partitioned, memory-side "
                    "address translation.")
    sub = parser.add_subparsers(dest="command", required=True)

    gen = sub.add_parser("gen", help="generate a synthetic trace file")
    gen.add_argument("--kind", required=True, choices=KINDS)
    gen.add_argument("--footprint", default="1GiB", help="data size (e.g. 1GiB)")
    gen.add_argument("--ops", default="100k", help="operation count (e.g. 1M)")
    gen.add_argument("--seed", type=int, default=0)
    gen.add_argument("--threads", type=int, default=1)
    gen.add_argument("--asid", type=int, default=0)
    gen.add_argument("--chunk", type=int, default=1,
                     help="round-robin interleave chunk for multi-thread traces")
    gen.add_argument("--out", required=True, help="output path (.txt for text)")

    run = sub.add_parser("run", help="run one configuration")
    run.add_argument("--config", required=True, help="YAML config path")
    run.add_argument("--mode", choices=["conv", "sparta", "ideal"])
    run.add_argument("--partitions", type=int)
    run.add_argument("--page-size", dest="page_size")
    run.add_argument("--tlb-entries", dest="tlb_entries", type=int,
                     help="memory-side TLB entries")
    run.add_argument("--accel-tlb-entries", dest="accel_tlb_entries", type=int)
    run.add_argument("--cache", choices=["none", "virtual", "physical"])
    run.add_argument("--threads", type=int)
    run.add_argument("--seed", type=int)
    run.add_argument("--out", help="write the JSON report here instead of stdout")

    sweep = sub.add_parser("sweep", help="run a named experiment recipe")
    sweep.add_argument("recipe", nargs="?", default="",
                       help=f"one of: {', '.join(sorted(recipes.RECIPES))}")
    sweep.add_argument("--out", help="CSV output path (default stdout)")
    sweep.add_argument("--jobs", type=int, default=1)
    sweep.add_argument("--footprint")
    sweep.add_argument("--ops", help="force an op count per workload")
    sweep.add_argument("--budget", help="approximate records per run")
    sweep.add_argument("--seed", type=int)
    sweep.add_argument("--workloads", help="comma-separated workload kinds")
    sweep.add_argument("--entries", help="comma-separated TLB entry counts")
    sweep.add_argument("--partitions", help="comma-separated partition counts")
    sweep.add_argument("--threads", help="comma-separated thread counts")
    return parser


def _cmd_gen(args: argparse.Namespace) -> int:
    spec = WorkloadSpec(kind=args.kind,
                        footprint_bytes=parse_size(args.footprint),
                        ops=parse_count(args.ops),
                        seed=args.seed, threads=args.threads, asid=args.asid)
    traces = workloads.generate(spec)
    records = list(engine.interleave(traces, args.chunk))
    out = Path(args.out)
    try:
        if str(out).endswith(".txt"):
            count = traceio.write_text_trace(out, records)
        else:
            count = traceio.write_trace(out, records)
    except OSError as exc:
        print(f"error: cannot write {out}: {exc}", file=sys.stderr)
        return 1
    shift = 12
    pages = len({(r.asid, r.vaddr >> shift) for r in records})
    print(f"records={count} distinct_4k_pages={pages} path={out}")
    return 0


def _apply_overrides(cfg: SystemConfig, args: argparse.Namespace) -> None:
    if args.mode:
        cfg.mode = args.mode
    if args.partitions is not None:
        cfg.partitions = args.partitions
    if args.page_size is not None:
        cfg.page_size = parse_page_size(args.page_size)
    if args.tlb_entries is not None:
        cfg.mem_tlb_entries = args.tlb_entries
    if args.accel_tlb_entries is not None:
        cfg.accel_tlb_entries = args.accel_tlb_entries
    if args.cache is not None:
        cfg.cache = engine.CacheConfig(kind=args.cache)
    if args.seed is not None:
        cfg.seed = args.seed
        if cfg.workload is not None:
            from dataclasses import replace
            cfg.workload = replace(cfg.workload, seed=args.seed)
    if args.threads is not None and cfg.workload is not None:
        from dataclasses import replace
        cfg.workload = replace(cfg.workload, threads=args.threads)


def _cmd_run(args: argparse.Namespace) -> int:
    cfg = SystemConfig.load(args.config)
    _apply_overrides(cfg, args)
    cfg.validate()
    if cfg.trace_path is not None:
        total = None
        records = traceio.open_trace(cfg.trace_path)
        if not cfg.trace_path.endswith(".txt"):
            size = Path(cfg.trace_path).stat().st_size
            total = (size - len(traceio.MAGIC)) // traceio.RECORD.size
        stats = engine.run(cfg.engine_config(), records, total=total)
    else:
        traces = workloads.generate(cfg.workload)
        records = list(engine.interleave(traces, cfg.chunk))
        stats = engine.run(cfg.engine_config(), records)
    report = stats.to_dict()
    if stats.accesses:
        cpi = analysis.cpi(stats)
        report["ns_per_insn"] = cpi.ns_per_insn
        report["cycles_per_insn"] = cpi.cycles_per_insn
    text = json.dumps(report, indent=2, sort_keys=True)
    if args.out:
        Path(args.out).write_text(text + "\n")
    else:
        print(text)
    return 0


def _parse_int_list(text: str) -> list[int]:
    return [int(x) for x in text.split(",") if x.strip()]


def _cmd_sweep(args: argparse.Namespace) -> int:
    recipe = recipes.RECIPES.get(args.recipe)
    if recipe is None:
        print(f"error: unknown recipe {args.recipe!r}; available: "
              f"{', '.join(sorted(recipes.RECIPES))}", file=sys.stderr)
        return 2
    opts: dict = {}
    if args.footprint:
        opts["footprint"] = parse_size(args.footprint)
    if args.ops:
        opts["ops"] = parse_count(args.ops)
    if args.budget:
        opts["budget"] = parse_count(args.budget)
    if args.seed is not None:
        opts["seed"] = args.seed
    if args.workloads:
        kinds = [k.strip() for k in args.workloads.split(",") if k.strip()]
        for kind in kinds:
            if kind not in KINDS:
                print(f"error: unknown workload {kind!r}", file=sys.stderr)
                return 2
        opts["workloads"] = kinds
    if args.entries:
        opts["entries"] = _parse_int_list(args.entries)
    if args.partitions:
        opts["partitions"] = _parse_int_list(args.partitions)
    if args.threads:
        opts["threads"] = _parse_int_list(args.threads)
    columns, rows = recipe(opts, jobs=max(1, args.jobs))
    if args.out:
        with open(args.out, "w") as fh:
            analysis.write_csv(fh, rows, columns)
    else:
        analysis.write_csv(sys.stdout, rows, columns)
    return 0


def main(argv: list[str] | None = None) -> int:
    parser = _build_parser()
    args = parser.parse_args(argv)
    try:
        if args.command == "gen":
            return _cmd_gen(args)
        if args.command == "run":
            return _cmd_run(args)
        return _cmd_sweep(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except (ValueError, OSError, RuntimeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
