"""Closed-form access-latency timelines.

Models four event sequences over a socket/channel topology: conventional
translation with an execution-side TLB hit or miss (translation serialized
before the data fetch), and split translation with a memory-side TLB hit or
miss (translation overlapped with reaching the data's partition, page-table
entry co-located with the data). All functions are pure; every latency is the
sum of its listed components.
"""

from __future__ import annotations

from dataclasses import dataclass

MODE_CONV = "conv"
MODE_SPARTA = "sparta"
MODE_IDEAL = "ideal"


@dataclass(frozen=True)
class LatencyParams:
    """Component latencies in nanoseconds. Defaults are plumbing values;
    experiments pin them explicitly."""

    tlb_probe_ns: float = 1.0
    noc_hop_ns: float = 10.0
    offchip_ns: float = 40.0
    dram_ns: float = 50.0
    cache_ns: float = 2.0
    mux_ns: float = 0.0

    def __post_init__(self) -> None:
        for name in ("tlb_probe_ns", "noc_hop_ns", "offchip_ns", "dram_ns",
                     "cache_ns", "mux_ns"):
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be >= 0")


@dataclass(frozen=True)
class Topology:
    """Sockets, channels and the partition-to-socket placement.

    Partitions split the socket space evenly: partition p lives on socket
    p * sockets // partitions.
    """

    sockets: int = 2
    channels_per_socket: int = 2
    partitions: int = 2

    def __post_init__(self) -> None:
        if self.sockets < 1 or self.channels_per_socket < 1 or self.partitions < 1:
            raise ValueError("topology counts must be positive")
        if self.partitions % self.sockets and self.sockets % self.partitions:
            raise ValueError("partitions must evenly subdivide or group sockets")

    def partition_socket(self, partition: int) -> int:
        if not 0 <= partition < self.partitions:
            raise ValueError(f"partition {partition} out of range")
        return partition * self.sockets // self.partitions


@dataclass(slots=True)
class AccessOutcome:
    mode: str
    latency: float
    exposed_translation: float
    acc_tlb: str = "absent"   # hit | miss | absent
    cache: str = "absent"     # hit | miss | absent
    mem_tlb: str = "n/a"      # hit | miss | n/a


def net_time(topo: Topology, src_socket: int, partition: int,
             params: LatencyParams) -> float:
    """One-way network time from an accelerator's socket to a partition."""
    crossing = topo.partition_socket(partition) != src_socket
    return params.noc_hop_ns + (params.offchip_ns if crossing else 0.0)


def mean_net_time(topo: Topology, params: LatencyParams,
                  src_socket: int | None = None) -> float:
    """Expected one-way network time over uniformly chosen partitions.

    With no source given, the source socket is averaged uniformly as well,
    giving noc + offchip * (sockets - 1) / sockets for even layouts.
    """
    sources = range(topo.sockets) if src_socket is None else [src_socket]
    total = 0.0
    for src in sources:
        for part in range(topo.partitions):
            total += net_time(topo, src, part, params)
    return total / (len(sources) * topo.partitions)


def conv_latency(params: LatencyParams, topo: Topology, src_socket: int,
                 data_partition: int, tlb_hit: bool,
                 walk_net_ns: float | None = None) -> AccessOutcome:
    """Conventional timeline: probe the accelerator TLB, walk on a miss
    (one memory reference, anywhere in memory), then fetch the data.

    The walk's network time defaults to the uniform expectation since the
    page-table entry has no locality to the data.
    """
    probe = params.tlb_probe_ns
    data_net = net_time(topo, src_socket, data_partition, params)
    data_path = 2 * data_net + params.dram_ns
    if tlb_hit:
        return AccessOutcome(MODE_CONV, probe + data_path, probe,
                             acc_tlb="hit")
    if walk_net_ns is None:
        walk_net_ns = mean_net_time(topo, params, src_socket)
    walk = 2 * walk_net_ns + params.dram_ns
    return AccessOutcome(MODE_CONV, probe + walk + data_path, probe + walk,
                         acc_tlb="miss")


def sparta_latency(params: LatencyParams, topo: Topology, src_socket: int,
                   partition: int, mem_tlb_hit: bool,
                   walk_probes: int = 1) -> AccessOutcome:
    """Split-translation timeline: the request travels to the page's
    partition while carrying the virtual address; the partition's TLB probe
    and any page-table probes are the only exposed translation time, since
    the page-table entry and the data live in the same partition."""
    probe = params.tlb_probe_ns
    net = net_time(topo, src_socket, partition, params)
    if mem_tlb_hit:
        latency = net + params.mux_ns + probe + params.dram_ns + net
        return AccessOutcome(MODE_SPARTA, latency, probe, mem_tlb="hit")
    pte_time = params.dram_ns * walk_probes
    latency = net + params.mux_ns + probe + pte_time + params.dram_ns + net
    return AccessOutcome(MODE_SPARTA, latency, probe + pte_time,
                         mem_tlb="miss")


def accel_cache_path(params: LatencyParams, mode: str, cache_kind: str,
                     accel_tlb_hit: bool, cache_hit: bool) -> AccessOutcome | None:
    """Outcome for accesses resolved at the accelerator, or None when the
    request must proceed to memory.

    Virtual caches hit with no translation at all. Physical caches need an
    accelerator-TLB hit to be probed; on an accelerator-TLB miss in split
    mode the request goes to memory as-is and the reply carries both the
    data and the translation.
    """
    if cache_kind == "virtual" and cache_hit:
        return AccessOutcome(mode, params.cache_ns, 0.0, cache="hit")
    if cache_kind == "physical" and accel_tlb_hit and cache_hit:
        return AccessOutcome(mode, params.tlb_probe_ns + params.cache_ns,
                             params.tlb_probe_ns, acc_tlb="hit", cache="hit")
    return None


def conv_miss_penalty(topo: Topology, params: LatencyParams) -> float:
    """Exposed translation added by a conventional TLB miss: one page-table
    reference with two network traversals, beyond the probe paid either way."""
    return 2 * mean_net_time(topo, params) + params.dram_ns


def sparta_miss_penalty(params: LatencyParams, mean_walk_probes: float = 1.0) -> float:
    """Exposed translation added by a memory-side TLB miss: the in-partition
    page-table access only; the network is already overlapped."""
    return params.dram_ns * mean_walk_probes


def normalized_miss_penalty(topologies: list[Topology], params: LatencyParams,
                            mean_walk_probes: float = 1.0) -> list[dict]:
    """Per-topology miss penalties and the split/conventional ratio."""
    rows = []
    for topo in topologies:
        conv = conv_miss_penalty(topo, params)
        sparta = sparta_miss_penalty(params, mean_walk_probes)
        rows.append({
            "sockets": topo.sockets,
            "partitions": topo.partitions,
            "conv_penalty_ns": conv,
            "sparta_penalty_ns": sparta,
            "ratio": sparta / conv if conv else 1.0,
        })
    return rows
