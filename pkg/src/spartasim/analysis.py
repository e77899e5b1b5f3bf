"""Performance model and miss classification.

The CPI model treats accelerators as in-order cores: non-memory instructions
retire at a base CPI, memory instructions stall for the measured mean access
latency (which already includes any exposed translation time). Speedups are
ratios of ns-per-instruction.

The 3C classifier splits the misses of a set-associative structure into
compulsory (first touch), capacity (fully-associative same-size structure
also misses) and conflict (the remainder) in one pass, with a parallel
fully-associative LRU oracle.
"""

from __future__ import annotations

import csv
from collections import OrderedDict
from dataclasses import dataclass
from typing import IO, Iterable

from .engine import RunStats
from .traceio import TraceRecord


@dataclass(frozen=True)
class CpiParams:
    base_cpi: float = 1.0
    cycle_time_ns: float = 0.5
    mem_op_fraction: float | None = None  # None: measure from the run

    def __post_init__(self) -> None:
        if self.base_cpi < 1:
            raise ValueError("base_cpi must be >= 1")
        if self.cycle_time_ns <= 0:
            raise ValueError("cycle_time_ns must be positive")
        if self.mem_op_fraction is not None and not 0 < self.mem_op_fraction <= 1:
            raise ValueError("mem_op_fraction must be in (0, 1]")


@dataclass(frozen=True)
class CpiResult:
    ns_per_insn: float
    cycles_per_insn: float
    mem_op_fraction: float
    mean_latency_ns: float


def cpi(stats: RunStats, params: CpiParams = CpiParams()) -> CpiResult:
    """Nanoseconds and cycles per instruction for a completed run."""
    if stats.accesses == 0:
        raise ValueError("cannot compute CPI with zero accesses")
    f = params.mem_op_fraction
    if f is None:
        f = stats.mem_op_fraction()
    mean_lat = stats.mean_latency_ns()
    ns = params.base_cpi * params.cycle_time_ns * (1.0 - f) + f * mean_lat
    return CpiResult(ns, ns / params.cycle_time_ns, f, mean_lat)


def speedup(baseline: CpiResult, candidate: CpiResult) -> float:
    return baseline.ns_per_insn / candidate.ns_per_insn


@dataclass
class ThreeCBreakdown:
    compulsory: int = 0
    capacity: int = 0
    conflict: int = 0

    @property
    def total(self) -> int:
        return self.compulsory + self.capacity + self.conflict


def classify_3c(keys: Iterable[int], entries: int, ways: int) -> ThreeCBreakdown:
    """Classify the misses of a `sets x ways` LRU structure over integer keys.

    Set index is key mod set count. The three classes always sum to the
    structure's total misses; conflict is zero when ways == entries and can
    in principle go negative on adversarial patterns where full associativity
    underperforms (the classes still sum to the total).
    """
    if entries < 1 or ways < 1 or entries % ways:
        raise ValueError("entries must be a positive multiple of ways")
    sets = entries // ways
    seen: set[int] = set()
    fa: OrderedDict[int, None] = OrderedDict()
    sa: list[OrderedDict[int, None]] = [OrderedDict() for _ in range(sets)]
    compulsory = fa_misses = sa_misses = 0
    for key in keys:
        if key not in seen:
            seen.add(key)
            compulsory += 1
        if key in fa:
            fa.move_to_end(key)
        else:
            fa_misses += 1
            if len(fa) >= entries:
                fa.popitem(last=False)
            fa[key] = None
        sset = sa[key % sets]
        if key in sset:
            sset.move_to_end(key)
        else:
            sa_misses += 1
            if len(sset) >= ways:
                sset.popitem(last=False)
            sset[key] = None
    return ThreeCBreakdown(compulsory, fa_misses - compulsory,
                           sa_misses - fa_misses)


def classify_trace(records: Iterable[TraceRecord], entries: int, ways: int,
                   page_size: int = 4096) -> ThreeCBreakdown:
    """3C breakdown of a trace's page-granular keys."""
    shift = page_size.bit_length() - 1
    keys = ((rec.asid << 36) | (rec.vaddr >> shift) for rec in records)
    return classify_3c(keys, entries, ways)


CSV_COLUMNS = ["workload", "mode", "partitions", "page_size", "tlb_entries",
               "miss_ratio", "exposed_share", "ns_per_insn", "speedup"]


def result_row(workload: str, tlb_entries: int, stats: RunStats,
               cpi_result: CpiResult | None = None,
               speedup_value: float | None = None) -> dict:
    """One CSV row for a finished run."""
    row = {
        "workload": workload,
        "mode": stats.mode,
        "partitions": stats.partitions,
        "page_size": stats.page_size,
        "tlb_entries": tlb_entries,
        "miss_ratio": round(stats.translation_miss_ratio(), 6),
        "exposed_share": round(stats.exposed_ns / stats.latency_ns, 6)
        if stats.latency_ns else 0.0,
        "ns_per_insn": round(cpi_result.ns_per_insn, 6) if cpi_result else "",
        "speedup": round(speedup_value, 6) if speedup_value is not None else "",
    }
    return row


def write_csv(fh: IO[str], rows: Iterable[dict],
              columns: list[str] | None = None) -> None:
    cols = columns or CSV_COLUMNS
    writer = csv.DictWriter(fh, fieldnames=cols, lineterminator="\n")
    writer.writeheader()
    for row in rows:
        writer.writerow({c: row.get(c, "") for c in cols})
