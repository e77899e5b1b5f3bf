"""Set-associative translation cache with per-set LRU replacement.

The same model serves as an accelerator-side TLB (indexed by raw VPN), a
memory-side per-partition TLB (indexed by the partition-local page number via
``index_divisor``), or one level of a two-level hierarchy. Entries are tagged
by (vpn, asid): threads of one address space share entries, distinct address
spaces never alias.
"""

from __future__ import annotations

from collections import OrderedDict
from dataclasses import dataclass, field


@dataclass(slots=True)
class TlbEntry:
    vpn: int
    asid: int
    pfn: int
    flags: int = 0
    valid: bool = True


@dataclass(frozen=True)
class TlbConfig:
    """Sizing of one TLB level.

    ``index_divisor`` scales the set index: sets are selected by
    (vpn // index_divisor) mod set_count. Memory-side per-partition TLBs use
    the partition count as divisor, because the VPNs reaching one partition
    are congruent modulo that count and would otherwise pile into one set.
    """

    entries: int
    ways: int = 4
    page_size: int = 4096
    index_divisor: int = 1

    def __post_init__(self) -> None:
        if self.entries < 1 or self.ways < 1:
            raise ValueError("entries and ways must be positive")
        if self.entries % self.ways:
            raise ValueError(f"entries ({self.entries}) not divisible by "
                             f"ways ({self.ways})")
        if self.index_divisor < 1:
            raise ValueError("index_divisor must be >= 1")

    @property
    def set_count(self) -> int:
        return self.entries // self.ways


@dataclass(slots=True)
class TlbStats:
    lookups: int = 0
    hits: int = 0
    misses: int = 0
    fills: int = 0
    evictions: int = 0


class TlbModel:
    """One set-associative TLB with strict LRU per set."""

    def __init__(self, config: TlbConfig):
        self.config = config
        self.stats = TlbStats()
        # One OrderedDict per set, ordered LRU -> MRU, keyed by (vpn, asid).
        self._sets: list[OrderedDict[tuple[int, int], TlbEntry]] = [
            OrderedDict() for _ in range(config.set_count)
        ]
        self._divisor = config.index_divisor
        self._set_count = config.set_count

    def set_index(self, vpn: int) -> int:
        return (vpn // self._divisor) % self._set_count

    def lookup(self, vpn: int, asid: int) -> TlbEntry | None:
        """Probe for (vpn, asid); a hit promotes the entry to MRU."""
        self.stats.lookups += 1
        sset = self._sets[self.set_index(vpn)]
        entry = sset.get((vpn, asid))
        if entry is None:
            self.stats.misses += 1
            return None
        sset.move_to_end((vpn, asid))
        self.stats.hits += 1
        return entry

    def fill(self, entry: TlbEntry) -> TlbEntry | None:
        """Insert an entry, returning the LRU victim if the set overflowed.

        A duplicate (vpn, asid) replaces the existing entry in place.
        """
        if not entry.valid:
            raise ValueError("cannot fill an invalid entry")
        key = (entry.vpn, entry.asid)
        sset = self._sets[self.set_index(entry.vpn)]
        self.stats.fills += 1
        if key in sset:
            sset[key] = entry
            sset.move_to_end(key)
            return None
        victim = None
        if len(sset) >= self.config.ways:
            _, victim = sset.popitem(last=False)
            self.stats.evictions += 1
        sset[key] = entry
        return victim

    def invalidate(self, vpn: int, asid: int) -> bool:
        sset = self._sets[self.set_index(vpn)]
        return sset.pop((vpn, asid), None) is not None

    def entries(self) -> list[TlbEntry]:
        out: list[TlbEntry] = []
        for sset in self._sets:
            out.extend(sset.values())
        return out

    def __len__(self) -> int:
        return sum(len(s) for s in self._sets)


class TlbHierarchy:
    """Two-level inclusive TLB: small L1 backed by a larger L2.

    The hierarchy presents the same lookup/fill/invalidate surface as a single
    TLB; ``stats`` counts hierarchy-level outcomes (hit in either level is a
    hit). Fills go to both levels; an L2 eviction invalidates L1 to preserve
    inclusion.
    """

    def __init__(self, l1: TlbConfig, l2: TlbConfig):
        if l2.entries < l1.entries:
            raise ValueError("second level must not be smaller than the first")
        self.l1 = TlbModel(l1)
        self.l2 = TlbModel(l2)
        self.stats = TlbStats()

    def lookup(self, vpn: int, asid: int) -> TlbEntry | None:
        self.stats.lookups += 1
        entry = self.l1.lookup(vpn, asid)
        if entry is None:
            entry = self.l2.lookup(vpn, asid)
            if entry is not None:
                self.l1.fill(TlbEntry(entry.vpn, entry.asid, entry.pfn,
                                      entry.flags))
        if entry is None:
            self.stats.misses += 1
        else:
            self.stats.hits += 1
        return entry

    def fill(self, entry: TlbEntry) -> TlbEntry | None:
        self.stats.fills += 1
        self.l1.fill(TlbEntry(entry.vpn, entry.asid, entry.pfn, entry.flags))
        victim = self.l2.fill(entry)
        if victim is not None:
            self.stats.evictions += 1
            self.l1.invalidate(victim.vpn, victim.asid)
        return victim

    def invalidate(self, vpn: int, asid: int) -> bool:
        in_l1 = self.l1.invalidate(vpn, asid)
        in_l2 = self.l2.invalidate(vpn, asid)
        return in_l1 or in_l2


def miss_ratio(stats: TlbStats) -> float:
    if stats.lookups == 0:
        raise ValueError("miss ratio undefined with zero lookups")
    return stats.misses / stats.lookups
