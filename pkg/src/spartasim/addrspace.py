"""Address arithmetic and partition routing.

Physical memory is divided into equally sized partitions; each partition owns a
contiguous range of page frames. A virtual page is routed to a partition by a
hash of its page number, so the partition of an address is known before any
translation takes place. The default (and only built-in) hash is
``vpn mod partition_count``; alternates can be injected per call.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

VADDR_BITS = 48
VPN_BITS = 36
PFN_BITS = 36
ASID_BITS = 12

VADDR_LIMIT = 1 << VADDR_BITS
ASID_LIMIT = 1 << ASID_BITS

PAGE_4K = 4096
PAGE_2M = 2 * 1024 * 1024

# vpn, partition_count -> partition index
PartitionHash = Callable[[int, int], int]


@dataclass(frozen=True)
class PageGeometry:
    """Page size and partition layout of physical memory.

    Frames are laid out contiguously per partition: partition p owns frames
    [p * partition_capacity, (p + 1) * partition_capacity).
    """

    page_size: int
    partition_count: int
    partition_capacity: int

    def __post_init__(self) -> None:
        if self.page_size not in (PAGE_4K, PAGE_2M):
            raise ValueError(f"unsupported page size {self.page_size}")
        if self.partition_count < 1:
            raise ValueError("partition_count must be >= 1")
        if self.partition_capacity < 1:
            raise ValueError("partition_capacity must be >= 1")

    @property
    def page_shift(self) -> int:
        return self.page_size.bit_length() - 1

    @property
    def total_frames(self) -> int:
        return self.partition_count * self.partition_capacity

    @property
    def total_bytes(self) -> int:
        return self.total_frames * self.page_size


def check_vaddr(vaddr: int) -> int:
    if not 0 <= vaddr < VADDR_LIMIT:
        raise ValueError(f"virtual address {vaddr:#x} outside {VADDR_BITS}-bit space")
    return vaddr


def check_asid(asid: int) -> int:
    if not 0 <= asid < ASID_LIMIT:
        raise ValueError(f"asid {asid} outside {ASID_BITS}-bit space")
    return asid


def vpn_of(vaddr: int, geom: PageGeometry) -> int:
    return vaddr >> geom.page_shift


def split(vaddr: int, geom: PageGeometry) -> tuple[int, int]:
    """Split an address into (vpn, page offset)."""
    return vaddr >> geom.page_shift, vaddr & (geom.page_size - 1)


def join(vpn: int, offset: int, geom: PageGeometry) -> int:
    return (vpn << geom.page_shift) | offset


def partition_index(vaddr: int, geom: PageGeometry,
                    hash_fn: PartitionHash | None = None) -> int:
    """Partition that the page holding `vaddr` must map into.

    Total over all addresses; every address on one page routes identically.
    """
    vpn = vaddr >> geom.page_shift
    if hash_fn is not None:
        return hash_fn(vpn, geom.partition_count)
    return vpn % geom.partition_count


def partition_of_vpn(vpn: int, geom: PageGeometry,
                     hash_fn: PartitionHash | None = None) -> int:
    if hash_fn is not None:
        return hash_fn(vpn, geom.partition_count)
    return vpn % geom.partition_count


def frame_partition(pfn: int, geom: PageGeometry) -> int:
    """Partition owning frame `pfn` under the contiguous physical layout."""
    if not 0 <= pfn < geom.total_frames:
        raise ValueError(f"pfn {pfn} outside physical memory "
                         f"({geom.total_frames} frames)")
    return pfn // geom.partition_capacity


def partition_frames(partition: int, geom: PageGeometry) -> range:
    """Frame numbers owned by a partition."""
    if not 0 <= partition < geom.partition_count:
        raise ValueError(f"partition {partition} out of range")
    start = partition * geom.partition_capacity
    return range(start, start + geom.partition_capacity)
