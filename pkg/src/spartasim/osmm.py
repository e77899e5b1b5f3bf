"""Emulated OS memory manager with partition-constrained page placement.

Enforces the core mapping rule: a virtual page may only map to a frame in the
partition selected by its page-number hash. Private pages allocate from that
partition's free list on first touch; shared mappings and remaps slide the
virtual region upward until its per-page partition sequence matches the
frames'; copy-on-write copies stay inside the original frame's partition.
Each partition keeps its own free list, inverted page table, and clock
eviction hand.

With ``constrained=False`` the same machinery acts as a conventional
allocator: frames come from any partition, round-robin, and no mapping rule
is enforced.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass, field
from typing import Callable

from .addrspace import PageGeometry, frame_partition, partition_of_vpn, split
from .ipt import InvertedPageTable, IptConfig, IptEntry, slots_for_capacity

# asid, vpn, pfn, partition -> None; fired when a mapping is destroyed
UnmapHook = Callable[[int, int, int, int], None]

KIND_PRIVATE = "private"
KIND_SHARED = "shared"
KIND_REMAPPED = "remapped"


class OutOfMemory(Exception):
    pass


class NoCongruentRegion(Exception):
    pass


class MappingError(Exception):
    pass


@dataclass(slots=True)
class Vma:
    start_vpn: int
    npages: int
    kind: str
    writable: bool = True

    @property
    def end_vpn(self) -> int:
        return self.start_vpn + self.npages

    def contains(self, vpn: int) -> bool:
        return self.start_vpn <= vpn < self.end_vpn

    def overlaps(self, start: int, npages: int) -> bool:
        return start < self.end_vpn and self.start_vpn < start + npages


@dataclass
class AddressSpace:
    asid: int
    vmas: list[Vma] = field(default_factory=list)
    mappings: dict[int, int] = field(default_factory=dict)  # vpn -> pfn
    evicted: set[int] = field(default_factory=set)

    def vma_at(self, vpn: int) -> Vma | None:
        for vma in self.vmas:
            if vma.contains(vpn):
                return vma
        return None


@dataclass(slots=True)
class FrameInfo:
    owners: set[tuple[int, int]] = field(default_factory=set)  # (asid, vpn)
    ref_bit: bool = True

    @property
    def refcount(self) -> int:
        return len(self.owners)


@dataclass
class FaultStats:
    minor_faults: int = 0
    major_faults: int = 0
    cow_faults: int = 0
    evictions: int = 0


class PartitionState:
    def __init__(self, partition: int, geom: PageGeometry, ipt_hash: str,
                 load_factor: float):
        self.partition = partition
        base = partition * geom.partition_capacity
        self.free: deque[int] = deque(range(base, base + geom.partition_capacity))
        self.resident: dict[int, FrameInfo] = {}
        self.ipt = InvertedPageTable(IptConfig(
            slot_count=slots_for_capacity(geom.partition_capacity, load_factor),
            load_factor_target=load_factor,
            hash_kind=ipt_hash,
        ))
        self._ring: deque[int] = deque()  # clock order; may hold stale pfns

    def note_resident(self, pfn: int) -> None:
        self._ring.append(pfn)

    def clock_victim(self, pinned: set[int]) -> int:
        """Second-chance scan: clear referenced frames, evict the first
        unreferenced unpinned one."""
        passes = 0
        limit = 2 * len(self._ring) + 1
        while self._ring and passes < limit:
            pfn = self._ring[0]
            info = self.resident.get(pfn)
            if info is None:
                self._ring.popleft()  # stale: frame was freed
                continue
            passes += 1
            if pfn in pinned:
                self._ring.rotate(-1)
                continue
            if info.ref_bit:
                info.ref_bit = False
                self._ring.rotate(-1)
                continue
            self._ring.popleft()
            return pfn
        raise OutOfMemory(f"partition {self.partition}: no evictable frame")


class MemoryManager:
    """Page allocator, mapper and evictor over partitioned physical memory."""

    def __init__(self, geom: PageGeometry, constrained: bool = True,
                 ipt_hash: str = "xor_fold", load_factor: float = 0.25,
                 on_unmap: UnmapHook | None = None,
                 event_log: list[str] | None = None):
        self.geom = geom
        self.constrained = constrained
        self.on_unmap = on_unmap
        self.event_log = event_log
        self.stats = FaultStats()
        self.spaces: dict[int, AddressSpace] = {}
        self.partitions = [
            PartitionState(p, geom, ipt_hash, load_factor)
            for p in range(geom.partition_count)
        ]
        self.pinned: set[int] = set()
        self._rr = 0  # unconstrained allocation cursor
        self._vpn_limit = 1 << (48 - geom.page_shift)

    # -- address spaces -----------------------------------------------------

    def create_space(self, asid: int) -> AddressSpace:
        if asid in self.spaces:
            raise MappingError(f"asid {asid} already exists")
        space = AddressSpace(asid)
        self.spaces[asid] = space
        return space

    def add_vma(self, space: AddressSpace, start_vpn: int, npages: int,
                kind: str = KIND_PRIVATE, writable: bool = True) -> Vma:
        if any(v.overlaps(start_vpn, npages) for v in space.vmas):
            raise MappingError("virtual regions may not overlap")
        vma = Vma(start_vpn, npages, kind, writable)
        space.vmas.append(vma)
        return vma

    # -- frame supply -------------------------------------------------------

    def _alloc_in_partition(self, partition: int) -> int:
        state = self.partitions[partition]
        if not state.free:
            victim = state.clock_victim(self.pinned)
            self._evict_frame(victim, partition)
        return state.free.popleft()

    def _alloc_any(self) -> int:
        count = self.geom.partition_count
        for off in range(count):
            state = self.partitions[(self._rr + off) % count]
            if state.free:
                self._rr = (self._rr + off + 1) % count
                return state.free.popleft()
        partition = self._rr % count
        self._rr = (self._rr + 1) % count
        return self._alloc_in_partition(partition)

    def _evict_frame(self, pfn: int, partition: int) -> None:
        state = self.partitions[partition]
        info = state.resident.pop(pfn)
        for asid, vpn in sorted(info.owners):
            space = self.spaces[asid]
            del space.mappings[vpn]
            space.evicted.add(vpn)
            state.ipt.invalidate(vpn, asid)
            if self.on_unmap:
                self.on_unmap(asid, vpn, pfn, partition)
        self.stats.evictions += 1
        self._log("evict", info_vpn(info), pfn, partition)
        state.free.append(pfn)

    def _install(self, space: AddressSpace, vpn: int, pfn: int,
                 partition: int, flags: int = 0) -> None:
        space.mappings[vpn] = pfn
        state = self.partitions[partition]
        info = state.resident.get(pfn)
        if info is None:
            info = FrameInfo()
            state.resident[pfn] = info
            state.note_resident(pfn)
        info.owners.add((space.asid, vpn))
        info.ref_bit = True
        state.ipt.insert(IptEntry(vpn, space.asid, pfn, flags))

    def _drop_mapping(self, space: AddressSpace, vpn: int,
                      free_if_orphaned: bool = True) -> int:
        pfn = space.mappings.pop(vpn)
        partition = frame_partition(pfn, self.geom)
        state = self.partitions[partition]
        info = state.resident[pfn]
        info.owners.discard((space.asid, vpn))
        state.ipt.invalidate(vpn, space.asid)
        if self.on_unmap:
            self.on_unmap(space.asid, vpn, pfn, partition)
        if free_if_orphaned and not info.owners:
            del state.resident[pfn]
            state.free.append(pfn)
        return pfn

    # -- fault paths ----------------------------------------------------------

    def target_partition(self, vpn: int) -> int:
        return partition_of_vpn(vpn, self.geom) if self.constrained else -1

    def alloc_private(self, space: AddressSpace, vaddr: int,
                      frame_hint: int | None = None) -> int:
        """Handle a fault on a private page: take a frame from the partition
        the page's hash selects (any free frame there is legal; a hint may
        pick one explicitly) and record the mapping."""
        vpn, _ = split(vaddr, self.geom)
        existing = space.mappings.get(vpn)
        if existing is not None:
            return existing
        vma = space.vma_at(vpn)
        if space.vmas and (vma is None or vma.kind != KIND_PRIVATE):
            raise MappingError(f"vpn {vpn:#x} not inside a private region")
        if self.constrained:
            partition = partition_of_vpn(vpn, self.geom)
            if frame_hint is not None:
                state = self.partitions[partition]
                if frame_partition(frame_hint, self.geom) != partition:
                    raise MappingError(
                        f"hint frame {frame_hint} outside partition {partition}")
                if frame_hint not in state.free:
                    raise MappingError(f"hint frame {frame_hint} not free")
                state.free.remove(frame_hint)
                pfn = frame_hint
            else:
                pfn = self._alloc_in_partition(partition)
        else:
            pfn = self._alloc_any()
            partition = frame_partition(pfn, self.geom)
        if vpn in space.evicted:
            space.evicted.discard(vpn)
            self.stats.major_faults += 1
        else:
            self.stats.minor_faults += 1
        self._install(space, vpn, pfn, partition)
        self._log("alloc", vpn, pfn, partition)
        return pfn

    def demand_page(self, space: AddressSpace, vaddr: int) -> tuple[int, str]:
        """Resolve a touch: returns (pfn, 'resident' | 'minor' | 'major')."""
        vpn, _ = split(vaddr, self.geom)
        existing = space.mappings.get(vpn)
        if existing is not None:
            part = frame_partition(existing, self.geom)
            self.partitions[part].resident[existing].ref_bit = True
            return existing, "resident"
        was_evicted = vpn in space.evicted
        pfn = self.alloc_private(space, vaddr)
        return pfn, "major" if was_evicted else "minor"

    def cow_fault(self, space: AddressSpace, vaddr: int) -> int:
        """First write to a shared read-only page: copy it into a fresh frame
        of the same partition. A sole owner upgrades in place instead."""
        vpn, _ = split(vaddr, self.geom)
        orig = space.mappings.get(vpn)
        if orig is None:
            raise MappingError(f"cow fault on unmapped vpn {vpn:#x}")
        partition = frame_partition(orig, self.geom)
        state = self.partitions[partition]
        info = state.resident[orig]
        if info.refcount <= 1:
            self._log("upgrade", vpn, orig, partition)
            return orig
        # Pin the original: the copy's allocation may have to evict, and the
        # victim scan must not tear down the mapping being copied.
        self.pinned.add(orig)
        try:
            copy = self._alloc_in_partition(partition)
        finally:
            self.pinned.discard(orig)
        info.owners.discard((space.asid, vpn))
        state.ipt.invalidate(vpn, space.asid)
        space.mappings.pop(vpn)
        self._install(space, vpn, copy, partition)
        self.stats.cow_faults += 1
        self._log("cow", vpn, copy, partition)
        return copy

    # -- shared mappings and remaps -------------------------------------------

    def _region_is_free(self, space: AddressSpace, start: int, npages: int) -> bool:
        if any(v.overlaps(start, npages) for v in space.vmas):
            return False
        return not any((start + i) in space.mappings for i in range(npages))

    def _find_congruent_region(self, space: AddressSpace, seq: list[int],
                               hint_vpn: int) -> int:
        """Smallest free region start >= hint whose page partition sequence
        equals `seq` under the routing hash."""
        count = self.geom.partition_count
        npages = len(seq)
        for i in range(1, npages):
            if seq[i] != (seq[0] + i) % count:
                raise NoCongruentRegion(
                    "frame partition sequence is not consecutive; no virtual "
                    "region can reproduce it")
        start = hint_vpn + (seq[0] - hint_vpn) % count
        while start + npages <= self._vpn_limit:
            if self._region_is_free(space, start, npages):
                return start
            start += count
        raise NoCongruentRegion("virtual address space exhausted")

    def map_shared(self, space: AddressSpace, frames: list[int],
                   hint_vpn: int) -> range:
        """Map existing frames at the first free region at or above the hint
        whose partition sequence matches the frames'."""
        if not frames:
            raise MappingError("empty frame list")
        seq = []
        for pfn in frames:
            partition = frame_partition(pfn, self.geom)
            if pfn not in self.partitions[partition].resident:
                raise MappingError(f"frame {pfn} is not resident")
            seq.append(partition)
        if not self.constrained:
            seq = [0] * len(frames)  # any region works; degenerate sequence
            start = hint_vpn
            while not self._region_is_free(space, start, len(frames)):
                start += 1
        else:
            start = self._find_congruent_region(space, seq, hint_vpn)
        self.add_vma(space, start, len(frames), KIND_SHARED)
        for i, pfn in enumerate(frames):
            partition = frame_partition(pfn, self.geom)
            self._install(space, start + i, pfn, partition)
            self._log("shared", start + i, pfn, partition)
        return range(start, start + len(frames))

    def mremap(self, space: AddressSpace, old_start_vpn: int, npages: int,
               new_hint_vpn: int) -> range:
        """Move a fully mapped region: same frames, new congruent virtual
        range. The old range must exactly cover one mapped region."""
        vma = next((v for v in space.vmas
                    if v.start_vpn == old_start_vpn and v.npages == npages), None)
        if vma is None and space.vmas:
            raise MappingError("mremap must cover exactly one region")
        frames = []
        for i in range(npages):
            pfn = space.mappings.get(old_start_vpn + i)
            if pfn is None:
                raise MappingError("old range is not fully mapped")
            frames.append(pfn)
        seq = [frame_partition(pfn, self.geom) for pfn in frames]
        if vma is not None:
            space.vmas.remove(vma)
        for i in range(npages):
            self._drop_mapping(space, old_start_vpn + i, free_if_orphaned=False)
        if self.constrained:
            start = self._find_congruent_region(space, seq, new_hint_vpn)
        else:
            start = new_hint_vpn
            while not self._region_is_free(space, start, npages):
                start += 1
        self.add_vma(space, start, npages, KIND_REMAPPED,
                     writable=vma.writable if vma else True)
        for i, pfn in enumerate(frames):
            partition = frame_partition(pfn, self.geom)
            self._install(space, start + i, pfn, partition)
            self._log("remap", start + i, pfn, partition)
        return range(start, start + npages)

    # -- bookkeeping ----------------------------------------------------------

    def _log(self, kind: str, vpn: int, pfn: int, partition: int) -> None:
        if self.event_log is not None:
            self.event_log.append(f"{kind} vpn={vpn:#x} pfn={pfn} part={partition}")

    def check_invariants(self) -> None:
        """Full sweep: mapping rule, mapping/IPT agreement, frame conservation,
        owner symmetry. Raises AssertionError on any violation."""
        for state in self.partitions:
            cap = self.geom.partition_capacity
            assert len(state.free) + len(state.resident) == cap, (
                f"partition {state.partition}: frame conservation violated")
            for pfn, info in state.resident.items():
                assert info.owners, f"resident frame {pfn} with no owners"
                for asid, vpn in info.owners:
                    space = self.spaces[asid]
                    assert space.mappings.get(vpn) == pfn, (
                        f"owner ({asid},{vpn:#x}) does not map frame {pfn}")
        for space in self.spaces.values():
            for vpn, pfn in space.mappings.items():
                partition = frame_partition(pfn, self.geom)
                if self.constrained:
                    assert partition == partition_of_vpn(vpn, self.geom), (
                        f"asid {space.asid} vpn {vpn:#x} -> pfn {pfn}: "
                        f"mapping rule violated")
                walk = self.partitions[partition].ipt.walk(vpn, space.asid)
                assert walk.pfn == pfn, (
                    f"IPT of partition {partition} disagrees on vpn {vpn:#x}")
            ipt_total = sum(
                1 for st in self.partitions for e in st.ipt.valid_entries()
                if e.asid == space.asid)
            assert ipt_total == len(space.mappings), (
                f"asid {space.asid}: IPT holds {ipt_total} entries for "
                f"{len(space.mappings)} mappings")


def info_vpn(info: FrameInfo) -> int:
    """Representative vpn of a frame's owners, for log lines."""
    return min((vpn for _, vpn in info.owners), default=0)
