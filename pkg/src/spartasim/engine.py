"""Trace-driven simulation core.

Replays memory references through the configured pipeline: optional
accelerator-side cache and TLB, then either conventional translation (global
per-thread TLB, one-reference page walk on a miss) or split translation
(partition routing by page hash, shared memory-side per-partition TLBs backed
by co-located inverted page tables). Pages are demand-allocated by the memory
manager on first touch. Latency and exposed-translation time are charged per
access from the closed-form timelines.

The `ideal` mode runs the split pipeline with exposed translation subtracted,
leaving identical data-path costs.
"""

from __future__ import annotations

from collections import OrderedDict
from dataclasses import dataclass, field, replace
from typing import Iterable, Iterator, Sequence

from .addrspace import PageGeometry
from .latency import (MODE_CONV, MODE_IDEAL, MODE_SPARTA, LatencyParams,
                      Topology, mean_net_time)
from .osmm import FaultStats, MemoryManager
from .tlb import TlbConfig, TlbEntry, TlbHierarchy, TlbModel, TlbStats
from .traceio import TraceRecord

CACHE_NONE = "none"
CACHE_VIRTUAL = "virtual"
CACHE_PHYSICAL = "physical"


@dataclass(frozen=True)
class CacheConfig:
    kind: str = CACHE_NONE
    size: int = 16 * 1024
    ways: int = 4
    line: int = 64

    def __post_init__(self) -> None:
        if self.kind not in (CACHE_NONE, CACHE_VIRTUAL, CACHE_PHYSICAL):
            raise ValueError(f"unknown cache kind {self.kind!r}")
        if self.kind != CACHE_NONE and self.size % (self.ways * self.line):
            raise ValueError("cache size must be a multiple of ways * line")

    @property
    def set_count(self) -> int:
        return self.size // (self.ways * self.line)


class Cache:
    """Per-accelerator set-associative LRU cache over line-granular keys."""

    def __init__(self, config: CacheConfig):
        self.config = config
        self.hits = 0
        self.misses = 0
        self._sets: list[OrderedDict] = [OrderedDict()
                                         for _ in range(config.set_count)]
        self._set_count = config.set_count

    def access(self, line_key: int) -> bool:
        """Probe and, on a miss, fill. Returns True on a hit."""
        sset = self._sets[line_key % self._set_count]
        if line_key in sset:
            sset.move_to_end(line_key)
            self.hits += 1
            return True
        self.misses += 1
        if len(sset) >= self.config.ways:
            sset.popitem(last=False)
        sset[line_key] = None
        return False

    def fill(self, line_key: int) -> None:
        """Insert a line delivered by a reply, without counting a probe."""
        sset = self._sets[line_key % self._set_count]
        if line_key in sset:
            sset.move_to_end(line_key)
            return
        if len(sset) >= self.config.ways:
            sset.popitem(last=False)
        sset[line_key] = None


@dataclass(frozen=True)
class EngineConfig:
    mode: str
    geom: PageGeometry
    topo: Topology
    lat: LatencyParams = LatencyParams()
    mem_tlb_entries: int = 128
    mem_tlb_ways: int = 4
    mem_tlb_levels: int = 1
    mem_tlb_l2_entries: int = 1024
    accel_tlb_entries: int = 128
    accel_tlb_ways: int = 4
    cache: CacheConfig = CacheConfig()
    ipt_hash: str = "xor_fold"
    warmup_fraction: float = 0.1

    def __post_init__(self) -> None:
        if self.mode not in (MODE_CONV, MODE_SPARTA, MODE_IDEAL):
            raise ValueError(f"unknown mode {self.mode!r}")
        if self.mode != MODE_CONV and self.geom.partition_count != self.topo.partitions:
            raise ValueError("partition count of geometry and topology differ")
        if self.mem_tlb_levels not in (1, 2):
            raise ValueError("mem_tlb_levels must be 1 or 2")
        if not 0.0 <= self.warmup_fraction < 1.0:
            raise ValueError("warmup_fraction must be in [0, 1)")


@dataclass
class ThreadStats:
    accesses: int = 0
    insns: int = 0
    cache_hits: int = 0
    cache_misses: int = 0
    accel_tlb_hits: int = 0
    accel_tlb_misses: int = 0
    mem_tlb_hits: int = 0
    mem_tlb_misses: int = 0
    ipt_walks: int = 0
    ipt_probes: int = 0
    latency_ns: float = 0.0
    exposed_ns: float = 0.0

    def reset(self) -> None:
        for name in self.__dataclass_fields__:
            setattr(self, name, 0.0 if name.endswith("_ns") else 0)


@dataclass
class RunStats:
    """Counters for one run; aggregates are sums over per-thread stats.

    ``insns`` counts each reference plus its preceding non-memory
    instructions, so mem_op_fraction = accesses / insns.
    """

    mode: str
    page_size: int
    partitions: int
    records: int = 0
    warmup_records: int = 0
    threads: dict[int, ThreadStats] = field(default_factory=dict)
    mem_tlb: list[TlbStats] = field(default_factory=list)
    mem_tlb_noncold_misses: int = 0
    faults: FaultStats = field(default_factory=FaultStats)
    distinct_pages: int = 0

    def _sum(self, name: str):
        return sum(getattr(t, name) for t in self.threads.values())

    @property
    def accesses(self) -> int:
        return self._sum("accesses")

    @property
    def insns(self) -> int:
        return self._sum("insns")

    @property
    def cache_hits(self) -> int:
        return self._sum("cache_hits")

    @property
    def cache_misses(self) -> int:
        return self._sum("cache_misses")

    @property
    def accel_tlb_hits(self) -> int:
        return self._sum("accel_tlb_hits")

    @property
    def accel_tlb_misses(self) -> int:
        return self._sum("accel_tlb_misses")

    @property
    def mem_tlb_hits(self) -> int:
        return self._sum("mem_tlb_hits")

    @property
    def mem_tlb_misses(self) -> int:
        return self._sum("mem_tlb_misses")

    @property
    def ipt_walks(self) -> int:
        return self._sum("ipt_walks")

    @property
    def ipt_probes(self) -> int:
        return self._sum("ipt_probes")

    @property
    def latency_ns(self) -> float:
        return self._sum("latency_ns")

    @property
    def exposed_ns(self) -> float:
        return self._sum("exposed_ns")

    def mem_tlb_miss_ratio(self) -> float:
        lookups = self.mem_tlb_hits + self.mem_tlb_misses
        if lookups == 0:
            raise ValueError("no memory-side TLB lookups")
        return self.mem_tlb_misses / lookups

    def accel_tlb_miss_ratio(self) -> float:
        lookups = self.accel_tlb_hits + self.accel_tlb_misses
        if lookups == 0:
            raise ValueError("no accelerator TLB lookups")
        return self.accel_tlb_misses / lookups

    def translation_miss_ratio(self) -> float:
        """Miss ratio of whichever TLB performs the translation in this mode."""
        if self.mode == MODE_CONV:
            return self.accel_tlb_miss_ratio()
        return self.mem_tlb_miss_ratio()

    def mean_latency_ns(self) -> float:
        if self.accesses == 0:
            raise ValueError("no accesses")
        return self.latency_ns / self.accesses

    def mem_op_fraction(self) -> float:
        if self.insns == 0:
            raise ValueError("no instructions")
        return self.accesses / self.insns

    def to_dict(self) -> dict:
        d = {
            "mode": self.mode,
            "page_size": self.page_size,
            "partitions": self.partitions,
            "records": self.records,
            "warmup_records": self.warmup_records,
            "accesses": self.accesses,
            "insns": self.insns,
            "cache_hits": self.cache_hits,
            "cache_misses": self.cache_misses,
            "accel_tlb_hits": self.accel_tlb_hits,
            "accel_tlb_misses": self.accel_tlb_misses,
            "mem_tlb_hits": self.mem_tlb_hits,
            "mem_tlb_misses": self.mem_tlb_misses,
            "mem_tlb_noncold_misses": self.mem_tlb_noncold_misses,
            "ipt_walks": self.ipt_walks,
            "ipt_probes": self.ipt_probes,
            "minor_faults": self.faults.minor_faults,
            "major_faults": self.faults.major_faults,
            "cow_faults": self.faults.cow_faults,
            "evictions": self.faults.evictions,
            "distinct_pages": self.distinct_pages,
            "latency_ns": self.latency_ns,
            "exposed_ns": self.exposed_ns,
            "threads": {
                str(tid): vars(ts).copy() for tid, ts in sorted(self.threads.items())
            },
            "mem_tlb_per_partition": [vars(s).copy() for s in self.mem_tlb],
        }
        if self.accesses:
            d["mean_latency_ns"] = self.mean_latency_ns()
            d["exposed_share"] = (self.exposed_ns / self.latency_ns
                                  if self.latency_ns else 0.0)
            d["mem_op_fraction"] = self.mem_op_fraction()
        return d


def interleave(traces: Sequence[Iterable[TraceRecord]],
               chunk: int = 1) -> Iterator[TraceRecord]:
    """Deterministic round-robin merge preserving per-source order."""
    if not traces:
        raise ValueError("at least one trace required")
    if chunk < 1:
        raise ValueError("chunk must be >= 1")
    iters = [iter(t) for t in traces]
    live = list(range(len(iters)))
    while live:
        finished = []
        for idx in live:
            it = iters[idx]
            for _ in range(chunk):
                rec = next(it, None)
                if rec is None:
                    finished.append(idx)
                    break
                yield rec
        for idx in finished:
            live.remove(idx)


def run(config: EngineConfig, records: Iterable[TraceRecord],
        mm: MemoryManager | None = None, total: int | None = None) -> RunStats:
    """Replay a trace and return its statistics.

    ``total`` lets a streaming source state its length so the warmup boundary
    can be computed without materializing it; unsized sources with a nonzero
    warmup fraction are materialized.
    """
    geom = config.geom
    topo = config.topo
    lat = config.lat
    sparta_like = config.mode != MODE_CONV
    ideal = config.mode == MODE_IDEAL
    pcount = geom.partition_count
    page_shift = geom.page_shift
    line_shift = config.cache.line.bit_length() - 1

    if config.warmup_fraction > 0.0 and total is None:
        if not hasattr(records, "__len__"):
            records = list(records)
        total = len(records)  # type: ignore[arg-type]
    boundary = int(total * config.warmup_fraction) if total else 0

    # Precomputed network costs: one-way time per (source socket, partition),
    # and the uniform-expectation walk cost per source socket.
    psocket = [topo.partition_socket(p) for p in range(topo.partitions)]
    net = [[lat.noc_hop_ns + (lat.offchip_ns if psocket[p] != s else 0.0)
            for p in range(topo.partitions)] for s in range(topo.sockets)]
    conv_walk = [2 * mean_net_time(topo, lat, s) + lat.dram_ns
                 for s in range(topo.sockets)]
    probe = lat.tlb_probe_ns
    dram = lat.dram_ns
    mux = lat.mux_ns
    cache_ns = lat.cache_ns
    # topology partition of a frame (geometry partitions mirror the topology)
    frames_per_tpart = geom.total_frames // topo.partitions

    if mm is None:
        mm = MemoryManager(geom, constrained=sparta_like,
                           ipt_hash=config.ipt_hash)

    mem_tlbs: list = []
    if sparta_like:
        for _ in range(pcount):
            l1 = TlbConfig(config.mem_tlb_entries, config.mem_tlb_ways,
                           geom.page_size, index_divisor=pcount)
            if config.mem_tlb_levels == 2:
                l2 = TlbConfig(config.mem_tlb_l2_entries, config.mem_tlb_ways,
                               geom.page_size, index_divisor=pcount)
                mem_tlbs.append(TlbHierarchy(l1, l2))
            else:
                mem_tlbs.append(TlbModel(l1))

    cache_kind = config.cache.kind
    use_accel_tlb = (config.accel_tlb_entries > 0
                     and (not sparta_like or cache_kind == CACHE_PHYSICAL))

    stats = RunStats(config.mode, geom.page_size, pcount)
    threads = stats.threads
    accel_tlbs: dict[int, TlbModel] = {}
    caches: dict[int, Cache] = {}
    sockets: dict[int, int] = {}
    seen_pages: set[tuple[int, int]] = set()   # (asid, vpn) ever touched
    mem_seen: set[tuple[int, int]] = set()     # (vpn, asid) seen by mem TLBs

    def on_unmap(asid: int, vpn: int, pfn: int, partition: int) -> None:
        if sparta_like:
            mem_tlbs[partition].invalidate(vpn, asid)
        for t in accel_tlbs.values():
            t.invalidate(vpn, asid)

    mm.on_unmap = on_unmap

    def thread_state(tid: int) -> ThreadStats:
        ts = ThreadStats()
        threads[tid] = ts
        sockets[tid] = tid % topo.sockets
        if use_accel_tlb:
            accel_tlbs[tid] = TlbModel(TlbConfig(config.accel_tlb_entries,
                                                 config.accel_tlb_ways,
                                                 geom.page_size))
        if cache_kind != CACHE_NONE:
            caches[tid] = Cache(config.cache)
        return ts

    def reset_counters() -> None:
        for ts in threads.values():
            ts.reset()
        for t in mem_tlbs:
            t.stats = TlbStats()
            if isinstance(t, TlbHierarchy):
                t.l1.stats = TlbStats()
                t.l2.stats = TlbStats()
        for t in accel_tlbs.values():
            t.stats = TlbStats()
        for c in caches.values():
            c.hits = 0
            c.misses = 0
        stats.mem_tlb_noncold_misses = 0
        mm.stats = FaultStats()
        stats.faults = mm.stats

    stats.faults = mm.stats
    processed = 0

    for rec in records:
        if processed == boundary and boundary:
            reset_counters()
            stats.warmup_records = boundary
        processed += 1
        tid, asid, vaddr, _is_write, insns = rec
        ts = threads.get(tid)
        if ts is None:
            ts = thread_state(tid)
        ts.accesses += 1
        ts.insns += insns + 1
        vpn = vaddr >> page_shift

        # Demand paging: resolve (or fault in) the frame.
        space = mm.spaces.get(asid)
        if space is None:
            space = mm.create_space(asid)
        pfn = space.mappings.get(vpn)
        if pfn is None:
            pfn = mm.alloc_private(space, vaddr)
        seen_pages.add((asid, vpn))

        src = sockets[tid]

        # Accelerator-local cache, virtually addressed: hits need nothing else.
        if cache_kind == CACHE_VIRTUAL:
            cache = caches[tid]
            if cache.access((asid << 42) | (vaddr >> line_shift)):
                ts.cache_hits += 1
                ts.latency_ns += cache_ns
                continue
            ts.cache_misses += 1

        if not sparta_like:
            # Conventional: per-thread TLB covers all of memory; a miss costs
            # one page-table reference at the uniform-expected distance.
            tlb = accel_tlbs[tid]
            entry = tlb.lookup(vpn, asid)
            data_net = net[src][pfn // frames_per_tpart]
            if entry is not None:
                ts.accel_tlb_hits += 1
                exposed = probe
                walk = 0.0
            else:
                ts.accel_tlb_misses += 1
                walk = conv_walk[src]
                exposed = probe + walk
                tlb.fill(TlbEntry(vpn, asid, pfn))
            if cache_kind == CACHE_PHYSICAL:
                cache = caches[tid]
                pline = ((pfn << page_shift) | (vaddr & (geom.page_size - 1))) >> line_shift
                if cache.access(pline):
                    ts.cache_hits += 1
                    ts.latency_ns += probe + walk + cache_ns
                    ts.exposed_ns += exposed
                    continue
                ts.cache_misses += 1
            ts.latency_ns += probe + walk + 2 * data_net + dram
            ts.exposed_ns += exposed
            continue

        # Split translation: route by page hash.
        part = vpn % pcount
        one_way = net[src][psocket[part]]
        accel_filled_here = False

        if use_accel_tlb:
            tlb = accel_tlbs[tid]
            entry = tlb.lookup(vpn, asid)
            if entry is not None:
                ts.accel_tlb_hits += 1
                cache = caches[tid]
                pline = ((pfn << page_shift) | (vaddr & (geom.page_size - 1))) >> line_shift
                if cache.access(pline):
                    ts.cache_hits += 1
                    latency = probe + cache_ns
                    exposed = probe
                else:
                    # Physical-address request: bypasses memory-side TLBs.
                    ts.cache_misses += 1
                    latency = probe + one_way + mux + dram + one_way
                    exposed = probe
                if ideal:
                    latency -= exposed
                    exposed = 0.0
                ts.latency_ns += latency
                ts.exposed_ns += exposed
                continue
            ts.accel_tlb_misses += 1
            accel_filled_here = True

        mem = mem_tlbs[part]
        entry = mem.lookup(vpn, asid)
        if entry is not None:
            ts.mem_tlb_hits += 1
            latency = one_way + mux + probe + dram + one_way
            exposed = probe
        else:
            ts.mem_tlb_misses += 1
            if (vpn, asid) in mem_seen:
                stats.mem_tlb_noncold_misses += 1
            else:
                mem_seen.add((vpn, asid))
            walk_res = mm.partitions[part].ipt.walk(vpn, asid)
            if walk_res.pfn != pfn:
                raise RuntimeError(
                    f"inverted page table of partition {part} returned "
                    f"{walk_res.pfn} for vpn {vpn:#x}, expected {pfn}")
            ts.ipt_walks += 1
            ts.ipt_probes += walk_res.probes
            pte_time = walk_res.probes * dram
            mem.fill(TlbEntry(vpn, asid, pfn))
            latency = one_way + mux + probe + pte_time + dram + one_way
            exposed = probe + pte_time

        if accel_filled_here:
            # Reply carries the translation along with the data; the cache
            # was never probed (no physical address was available) so the
            # access counts as a miss and the returned line is installed.
            accel_tlbs[tid].fill(TlbEntry(vpn, asid, pfn))
            pline = ((pfn << page_shift) | (vaddr & (geom.page_size - 1))) >> line_shift
            caches[tid].fill(pline)
            ts.cache_misses += 1

        if ideal:
            latency -= exposed
            exposed = 0.0
        ts.latency_ns += latency
        ts.exposed_ns += exposed

    stats.records = processed
    stats.distinct_pages = len(seen_pages)
    if sparta_like:
        stats.mem_tlb = [t.stats for t in mem_tlbs]
    return stats
