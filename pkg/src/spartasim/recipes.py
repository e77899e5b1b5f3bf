"""Named experiment recipes.

Each recipe expands into a deterministic list of run points, executes them
(optionally in parallel worker processes), and yields CSV rows in a fixed
order. Desk-scale defaults keep every recipe in the minutes range; footprint,
operation count, entry lists and workload sets can be overridden.
"""

from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor

from . import analysis, engine, workloads
from .config import SystemConfig
from .engine import CACHE_NONE, CACHE_PHYSICAL, CACHE_VIRTUAL, CacheConfig
from .latency import MODE_CONV, MODE_IDEAL, MODE_SPARTA, LatencyParams, Topology, normalized_miss_penalty
from .workloads import (KIND_BST_EXTERNAL, KIND_BST_INTERNAL, KIND_HASH_TABLE,
                        KIND_SKIP_LIST, KINDS, WorkloadSpec)

DEFAULT_WORKLOADS = list(KINDS)
DEFAULT_ENTRIES = [4, 16, 64, 256, 1024, 2048]
DEFAULT_RECORD_BUDGET = 150_000

_trace_cache: dict = {}


def records_per_op(kind: str, footprint: int) -> float:
    """Rough trace records emitted per operation, for budget scaling."""
    if kind == KIND_HASH_TABLE:
        return 1.7
    nodes = max(2, footprint // workloads.NODE_BYTES)
    if kind == KIND_SKIP_LIST:
        return 1.5 * max(1, int(math.log2(nodes)))
    keys = max(2, footprint // (workloads.NODE_BYTES + workloads.LEAF_BYTES))
    if kind == KIND_BST_EXTERNAL:
        return math.ceil(math.log2(keys + 1)) + 1
    return math.ceil(math.log2(nodes + 1))


def ops_for_budget(kind: str, footprint: int, budget: int) -> int:
    return max(1, int(budget / records_per_op(kind, footprint)))


def _records_for(specs: tuple[WorkloadSpec, ...], chunk: int = 1) -> list:
    key = (specs, chunk)
    cached = _trace_cache.get(key)
    if cached is not None:
        return cached
    if len(specs) == 1:
        traces = workloads.generate(specs[0])
    else:
        traces = workloads.gen_multiprog(list(specs))
    records = list(engine.interleave(traces, chunk))
    if len(_trace_cache) > 8:
        _trace_cache.clear()
    _trace_cache[key] = records
    return records


def _run_point(point: dict) -> dict:
    """Execute one run point; returns the row (without derived ratios)."""
    specs = point["specs"]
    cfg: SystemConfig = point["config"]
    records = _records_for(specs, cfg.chunk)
    stats = engine.run(cfg.engine_config(), records)
    row = dict(point["row"])
    row["miss_ratio"] = round(stats.translation_miss_ratio(), 6)
    row["exposed_share"] = (round(stats.exposed_ns / stats.latency_ns, 6)
                            if stats.latency_ns else 0.0)
    cpi = analysis.cpi(stats)
    row["ns_per_insn"] = round(cpi.ns_per_insn, 6)
    if point.get("observe_threads") is not None:
        tids = point["observe_threads"]
        hits = sum(stats.threads[t].mem_tlb_hits for t in tids if t in stats.threads)
        misses = sum(stats.threads[t].mem_tlb_misses for t in tids if t in stats.threads)
        row["miss_ratio"] = round(misses / (hits + misses), 6) if hits + misses else 0.0
    return row


def _execute(points: list[dict], jobs: int) -> list[dict]:
    if jobs <= 1:
        return [_run_point(p) for p in points]
    with ProcessPoolExecutor(max_workers=jobs) as pool:
        return list(pool.map(_run_point, points))


def _base_config(**kw) -> SystemConfig:
    cfg = SystemConfig()
    cfg.sockets = kw.pop("sockets", 4)
    cfg.channels_per_socket = kw.pop("channels_per_socket", 1)
    cfg.memory_bytes = kw.pop("memory_bytes", 2 << 30)
    cfg.warmup = kw.pop("warmup", 0.1)
    for name, value in kw.items():
        setattr(cfg, name, value)
    return cfg


def recipe_penalty(opts: dict, jobs: int = 1) -> tuple[list[str], list[dict]]:
    """Analytic miss-penalty comparison for a 2-socket and an 8-socket box."""
    lat = opts.get("latency", LatencyParams())
    topologies = [Topology(2, 4, 8), Topology(8, 4, 32)]
    rows = []
    for r in normalized_miss_penalty(topologies, lat):
        rows.append({
            "sockets": r["sockets"],
            "partitions": r["partitions"],
            "conv_penalty_ns": round(r["conv_penalty_ns"], 6),
            "sparta_penalty_ns": round(r["sparta_penalty_ns"], 6),
            "ratio": round(r["ratio"], 6),
        })
    return ["sockets", "partitions", "conv_penalty_ns", "sparta_penalty_ns",
            "ratio"], rows


def recipe_tlb_sweep(opts: dict, jobs: int = 1) -> tuple[list[str], list[dict]]:
    """Translation miss ratio vs TLB entries for conventional translation and
    partitioned memory-side translation, at both page sizes."""
    kinds = opts.get("workloads", DEFAULT_WORKLOADS)
    entries = opts.get("entries", DEFAULT_ENTRIES)
    footprint = opts.get("footprint", 1 << 30)
    ops = opts.get("ops")
    budget = opts.get("budget", DEFAULT_RECORD_BUDGET)
    seed = opts.get("seed", 7)
    modes = [(MODE_CONV, 1), (MODE_SPARTA, 4), (MODE_SPARTA, 128)]
    points = []
    for kind in kinds:
        kind_ops = ops or ops_for_budget(kind, footprint, budget)
        spec = WorkloadSpec(kind, footprint, kind_ops, seed)
        for page_size in (4096, 2 << 20):
            for mode, parts in modes:
                for n in entries:
                    cfg = _base_config(mode=mode, page_size=page_size,
                                       partitions=parts if mode != MODE_CONV else 128,
                                       cache=CacheConfig(CACHE_NONE))
                    if mode == MODE_CONV:
                        cfg.accel_tlb_entries = n
                    else:
                        cfg.mem_tlb_entries = n
                        cfg.accel_tlb_entries = 0
                    cfg.workload = spec
                    label = mode if mode == MODE_CONV else f"{mode}-{parts}"
                    points.append({
                        "specs": (spec,), "config": cfg,
                        "row": {"workload": kind, "mode": label,
                                "partitions": cfg.partitions,
                                "page_size": page_size, "tlb_entries": n},
                    })
    rows = _execute(points, jobs)
    return ["workload", "mode", "partitions", "page_size", "tlb_entries",
            "miss_ratio", "exposed_share", "ns_per_insn"], rows


def recipe_contention(opts: dict, jobs: int = 1) -> tuple[list[str], list[dict]]:
    """Shared memory-side TLB miss ratio as threads and partitions scale."""
    kinds = opts.get("workloads", [KIND_HASH_TABLE, KIND_BST_EXTERNAL])
    threads_list = opts.get("threads", [1, 2, 4, 8, 16])
    partitions_list = opts.get("partitions", [1, 4, 16, 64])
    footprint = opts.get("footprint", 1 << 30)
    ops = opts.get("ops")
    budget = opts.get("budget", DEFAULT_RECORD_BUDGET)
    seed = opts.get("seed", 7)
    points = []
    for kind in kinds:
        kind_ops = ops or ops_for_budget(kind, footprint, budget)
        for parts in partitions_list:
            for threads in threads_list:
                spec = WorkloadSpec(kind, footprint, kind_ops, seed,
                                    threads=threads)
                cfg = _base_config(mode=MODE_SPARTA, partitions=parts,
                                   sockets=1, cache=CacheConfig(CACHE_NONE))
                cfg.accel_tlb_entries = 0
                cfg.mem_tlb_entries = opts.get("entries", [128])[0]
                cfg.workload = spec
                points.append({
                    "specs": (spec,), "config": cfg,
                    "row": {"workload": kind, "partitions": parts,
                            "threads": threads,
                            "tlb_entries": cfg.mem_tlb_entries},
                })
    rows = _execute(points, jobs)
    return ["workload", "partitions", "threads", "tlb_entries", "miss_ratio",
            "exposed_share", "ns_per_insn"], rows


def recipe_multiprog(opts: dict, jobs: int = 1) -> tuple[list[str], list[dict]]:
    """Miss ratio seen by one application as unrelated applications join."""
    footprint = opts.get("footprint", 1 << 30)
    ops = opts.get("ops")
    budget = opts.get("budget", DEFAULT_RECORD_BUDGET)
    seed = opts.get("seed", 7)
    partitions_list = opts.get("partitions", [1, 16])
    schedule = [
        ("bst_e x1", [(KIND_BST_EXTERNAL, 1)]),
        ("bst_e x2", [(KIND_BST_EXTERNAL, 2)]),
        ("bst_e x4", [(KIND_BST_EXTERNAL, 4)]),
        ("+hash x4", [(KIND_BST_EXTERNAL, 4), (KIND_HASH_TABLE, 4)]),
        ("+bst_i+skip", [(KIND_BST_EXTERNAL, 4), (KIND_HASH_TABLE, 4),
                         (KIND_BST_INTERNAL, 4), (KIND_SKIP_LIST, 4)]),
    ]
    points = []
    for parts in partitions_list:
        for label, mix in schedule:
            specs = tuple(
                WorkloadSpec(
                    kind, footprint // len(mix),
                    ops or ops_for_budget(kind, footprint // len(mix),
                                          budget // len(mix)),
                    seed, threads=threads, asid=i)
                for i, (kind, threads) in enumerate(mix)
            )
            cfg = _base_config(mode=MODE_SPARTA, partitions=parts, sockets=1,
                               cache=CacheConfig(CACHE_NONE))
            cfg.accel_tlb_entries = 0
            cfg.mem_tlb_entries = opts.get("entries", [128])[0]
            cfg.workload = specs[0]
            observe = list(range(mix[0][1]))  # threads of the first app
            points.append({
                "specs": specs, "config": cfg, "observe_threads": observe,
                "row": {"point": label, "partitions": parts,
                        "threads": sum(t for _, t in mix),
                        "tlb_entries": cfg.mem_tlb_entries},
            })
    rows = _execute(points, jobs)
    return ["point", "partitions", "threads", "tlb_entries", "miss_ratio",
            "exposed_share", "ns_per_insn"], rows


def _perf_points(kind: str, footprint: int, ops: int, seed: int,
                 partitions_list: list[int], entries: int) -> list[dict]:
    spec = WorkloadSpec(kind, footprint, ops, seed)  # ops pre-scaled by caller
    cache = CacheConfig(CACHE_VIRTUAL)
    points = []

    def add(label: str, mode: str, page: int, parts: int) -> None:
        cfg = _base_config(mode=mode, page_size=page, partitions=parts,
                           cache=cache)
        cfg.mem_tlb_entries = entries
        cfg.accel_tlb_entries = entries if mode == MODE_CONV else 0
        cfg.allow_accel_tlb_with_virtual_cache = mode == MODE_CONV
        cfg.workload = spec
        points.append({
            "specs": (spec,), "config": cfg,
            "row": {"workload": kind, "mode": label, "partitions": parts,
                    "page_size": page, "tlb_entries": entries},
        })

    add("conv-4k", MODE_CONV, 4096, max(partitions_list))
    add("conv-2m", MODE_CONV, 2 << 20, max(partitions_list))
    for parts in partitions_list:
        add(f"sparta-{parts}-4k", MODE_SPARTA, 4096, parts)
        add(f"sparta-{parts}-2m", MODE_SPARTA, 2 << 20, parts)
    add("ideal", MODE_IDEAL, 4096, max(partitions_list))
    return points


def recipe_perf(opts: dict, jobs: int = 1) -> tuple[list[str], list[dict]]:
    """End-to-end speedup over the conventional 4 KB baseline."""
    kinds = opts.get("workloads", DEFAULT_WORKLOADS)
    footprint = opts.get("footprint", 1 << 30)
    ops = opts.get("ops")
    budget = opts.get("budget", DEFAULT_RECORD_BUDGET)
    seed = opts.get("seed", 7)
    partitions_list = opts.get("partitions", [8, 32, 128])
    entries = opts.get("entries", [128])[0]
    points = []
    for kind in kinds:
        kind_ops = ops or ops_for_budget(kind, footprint, budget)
        points.extend(_perf_points(kind, footprint, kind_ops, seed,
                                   partitions_list, entries))
    rows = _execute(points, jobs)
    baseline = {r["workload"]: r["ns_per_insn"] for r in rows
                if r["mode"] == "conv-4k"}
    for row in rows:
        row["speedup"] = round(baseline[row["workload"]] / row["ns_per_insn"], 6)
    return ["workload", "mode", "partitions", "page_size", "tlb_entries",
            "miss_ratio", "exposed_share", "ns_per_insn", "speedup"], rows


def recipe_cache_sens(opts: dict, jobs: int = 1) -> tuple[list[str], list[dict]]:
    """Accelerator-side TLB sizing under physical caches, with the
    virtual-cache, no-TLB design as the final point."""
    kinds = opts.get("workloads", DEFAULT_WORKLOADS)
    footprint = opts.get("footprint", 1 << 30)
    ops = opts.get("ops")
    budget = opts.get("budget", DEFAULT_RECORD_BUDGET)
    seed = opts.get("seed", 7)
    entry_list = opts.get("entries", [1, 2, 4, 8, 16, 32, 64, 128])
    parts = opts.get("partitions", [8])[0]
    points = []
    for kind in kinds:
        spec = WorkloadSpec(kind, footprint,
                            ops or ops_for_budget(kind, footprint, budget),
                            seed)
        base = _base_config(mode=MODE_CONV, partitions=parts,
                            cache=CacheConfig(CACHE_PHYSICAL))
        base.accel_tlb_entries = 128
        base.workload = spec
        points.append({
            "specs": (spec,), "config": base,
            "row": {"workload": kind, "mode": "conv-base",
                    "accel_tlb_entries": 128},
        })
        for n in entry_list:
            cfg = _base_config(mode=MODE_SPARTA, partitions=parts,
                               cache=CacheConfig(CACHE_PHYSICAL))
            cfg.accel_tlb_entries = n
            cfg.accel_tlb_ways = min(4, n)
            cfg.workload = spec
            points.append({
                "specs": (spec,), "config": cfg,
                "row": {"workload": kind, "mode": f"sparta-{parts}",
                        "accel_tlb_entries": n},
            })
        virt = _base_config(mode=MODE_SPARTA, partitions=parts,
                            cache=CacheConfig(CACHE_VIRTUAL))
        virt.accel_tlb_entries = 0
        virt.workload = spec
        points.append({
            "specs": (spec,), "config": virt,
            "row": {"workload": kind, "mode": f"sparta-{parts}-virtual",
                    "accel_tlb_entries": 0},
        })
    rows = _execute(points, jobs)
    baseline = {r["workload"]: r["ns_per_insn"] for r in rows
                if r["mode"] == "conv-base"}
    for row in rows:
        row["speedup"] = round(baseline[row["workload"]] / row["ns_per_insn"], 6)
    return ["workload", "mode", "accel_tlb_entries", "miss_ratio",
            "exposed_share", "ns_per_insn", "speedup"], rows


RECIPES = {
    "penalty": recipe_penalty,
    "tlb-sweep": recipe_tlb_sweep,
    "contention": recipe_contention,
    "multiprog": recipe_multiprog,
    "perf": recipe_perf,
    "cache-sens": recipe_cache_sens,
}
