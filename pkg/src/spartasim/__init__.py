"""Trace-driven simulator for split, memory-side address translation.

Accelerator memory references are replayed against either a conventional
execution-side TLB or a partitioned memory system where each partition owns a
shared TLB and an inverted page table co-located with its data, overlapping
translation with data fetch. An emulated OS memory manager enforces the
partition-constrained page placement that makes the routing work, and a CPI
layer converts run statistics into end-to-end performance estimates.
"""

from .addrspace import PAGE_2M, PAGE_4K, PageGeometry, frame_partition, partition_index, split
from .analysis import CpiParams, CpiResult, ThreeCBreakdown, classify_3c, cpi, speedup
from .config import ConfigError, SystemConfig
from .engine import CacheConfig, EngineConfig, RunStats, interleave, run
from .ipt import InvertedPageTable, IptConfig, IptEntry, WalkResult, ipt_hash
from .latency import (AccessOutcome, LatencyParams, Topology, conv_latency,
                      net_time, normalized_miss_penalty, sparta_latency)
from .osmm import AddressSpace, FaultStats, MemoryManager
from .tlb import TlbConfig, TlbEntry, TlbModel, TlbStats, miss_ratio
from .traceio import TraceRecord, read_trace, write_trace
from .workloads import WorkloadSpec, gen_multiprog, generate

__version__ = "0.1.0"
