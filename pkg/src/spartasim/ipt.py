"""Per-partition inverted page table.

An open-addressed hash table mapping (vpn, asid) to a frame within the owning
partition. Collisions are resolved by linear probing; invalidation leaves a
tombstone so probe chains through the dead slot stay intact. Two hash
strategies are provided: k-bit XOR folding of the 48-bit (asid, vpn) key
(default, requires a power-of-two slot count) and a plain modulo of the
ASID-mixed VPN.

Sized at the default load-factor target of 1/4, the table costs 64 bytes of
slot storage per 4 KB frame (1.5625% of partition memory).
"""

from __future__ import annotations

from collections import Counter
from dataclasses import dataclass

ENTRY_BYTES = 16
KEY_BITS = 48  # asid[12] ++ vpn[36]

HASH_XOR_FOLD = "xor_fold"
HASH_MODULO = "modulo"


@dataclass(slots=True)
class IptEntry:
    vpn: int
    asid: int
    pfn: int
    flags: int = 0
    valid: bool = True


@dataclass(frozen=True)
class IptConfig:
    slot_count: int
    load_factor_target: float = 0.25
    hash_kind: str = HASH_XOR_FOLD

    def __post_init__(self) -> None:
        if self.slot_count < 1:
            raise ValueError("slot_count must be positive")
        if not 0.0 < self.load_factor_target <= 1.0:
            raise ValueError("load_factor_target must be in (0, 1]")
        if self.hash_kind not in (HASH_XOR_FOLD, HASH_MODULO):
            raise ValueError(f"unknown hash kind {self.hash_kind!r}")
        if self.hash_kind == HASH_XOR_FOLD and self.slot_count & (self.slot_count - 1):
            raise ValueError("xor_fold requires a power-of-two slot count")


def slots_for_capacity(capacity: int, load_factor_target: float = 0.25) -> int:
    """Slot count for a partition of `capacity` frames: capacity divided by
    the load-factor target, rounded up to a power of two."""
    if capacity < 1:
        raise ValueError("capacity must be positive")
    needed = -(-capacity // max(load_factor_target, 1e-12))
    needed = int(needed)
    return 1 << max(0, (needed - 1).bit_length())


def ipt_hash(vpn: int, asid: int, cfg: IptConfig) -> int:
    """Home slot for a (vpn, asid) key."""
    if cfg.hash_kind == HASH_MODULO:
        # Mix the asid into the high VPN bits so address spaces with equal
        # low VPN bits do not systematically collide.
        return (vpn ^ (asid << 36)) % cfg.slot_count
    key = (asid << 36) | vpn
    k = cfg.slot_count.bit_length() - 1
    mask = cfg.slot_count - 1
    h = 0
    while key:
        h ^= key & mask
        key >>= k
    return h


@dataclass(slots=True)
class WalkResult:
    pfn: int | None
    probes: int

    @property
    def present(self) -> bool:
        return self.pfn is not None


class InvertedPageTable:
    """Open-addressed (vpn, asid) -> pfn table for one partition."""

    def __init__(self, config: IptConfig):
        self.config = config
        self._slots: list[IptEntry | None] = [None] * config.slot_count
        self._valid_count = 0

    @property
    def valid_count(self) -> int:
        return self._valid_count

    @property
    def load_factor(self) -> float:
        return self._valid_count / self.config.slot_count

    @property
    def table_bytes(self) -> int:
        return self.config.slot_count * ENTRY_BYTES

    def walk(self, vpn: int, asid: int) -> WalkResult:
        """Linear probe from the home slot.

        Stops at the matching valid entry or at the first never-used slot;
        tombstones are probed through. A full table with no match exhausts
        after slot_count probes.
        """
        n = self.config.slot_count
        idx = ipt_hash(vpn, asid, self.config)
        probes = 0
        for _ in range(n):
            probes += 1
            entry = self._slots[idx]
            if entry is None:
                return WalkResult(None, probes)
            if entry.valid and entry.vpn == vpn and entry.asid == asid:
                return WalkResult(entry.pfn, probes)
            idx = (idx + 1) % n
        return WalkResult(None, probes)

    def insert(self, entry: IptEntry) -> int:
        """Place the entry, returning the slot used.

        An existing valid mapping for the same (vpn, asid) is updated in
        place; otherwise the entry goes to the first reusable slot (tombstone
        or never-used) on its probe sequence.
        """
        if not entry.valid:
            raise ValueError("cannot insert an invalid entry")
        n = self.config.slot_count
        idx = ipt_hash(entry.vpn, entry.asid, self.config)
        first_free = -1
        for _ in range(n):
            slot = self._slots[idx]
            if slot is None:
                target = first_free if first_free >= 0 else idx
                self._slots[target] = entry
                self._valid_count += 1
                return target
            if slot.valid:
                if slot.vpn == entry.vpn and slot.asid == entry.asid:
                    self._slots[idx] = entry
                    return idx
            elif first_free < 0:
                first_free = idx
            idx = (idx + 1) % n
        if first_free >= 0:
            self._slots[first_free] = entry
            self._valid_count += 1
            return first_free
        raise RuntimeError("inverted page table exhausted")

    def invalidate(self, vpn: int, asid: int) -> bool:
        """Clear the valid bit, leaving the slot as a tombstone."""
        n = self.config.slot_count
        idx = ipt_hash(vpn, asid, self.config)
        for _ in range(n):
            entry = self._slots[idx]
            if entry is None:
                return False
            if entry.valid and entry.vpn == vpn and entry.asid == asid:
                entry.valid = False
                self._valid_count -= 1
                return True
            idx = (idx + 1) % n
        return False

    def probe_histogram(self) -> Counter[int]:
        """Walk probes needed for every valid entry, as {probes: count}."""
        hist: Counter[int] = Counter()
        for entry in self._slots:
            if entry is not None and entry.valid:
                hist[self.walk(entry.vpn, entry.asid).probes] += 1
        return hist

    def mean_probes(self) -> float:
        hist = self.probe_histogram()
        total = sum(hist.values())
        if total == 0:
            return 1.0
        return sum(p * c for p, c in hist.items()) / total

    def valid_entries(self) -> list[IptEntry]:
        return [e for e in self._slots if e is not None and e.valid]

    # Snapshot format: one 16-byte little-endian word per slot. Field layout
    # from the most significant bit: vpn[36] asid[12] pfn[36] flags[12]
    # valid[1] used[1] pad[30]. A never-used slot is all zeros; a tombstone
    # keeps its fields with valid=0, used=1.

    def dump_bytes(self) -> bytes:
        out = bytearray()
        for entry in self._slots:
            if entry is None:
                out += bytes(ENTRY_BYTES)
                continue
            word = ((entry.vpn << 92) | (entry.asid << 80) | (entry.pfn << 44)
                    | (entry.flags << 32) | (int(entry.valid) << 31) | (1 << 30))
            out += word.to_bytes(ENTRY_BYTES, "little")
        return bytes(out)

    @classmethod
    def load_bytes(cls, data: bytes, config: IptConfig) -> InvertedPageTable:
        if len(data) != config.slot_count * ENTRY_BYTES:
            raise ValueError("snapshot size does not match slot count")
        table = cls(config)
        for i in range(config.slot_count):
            word = int.from_bytes(data[i * ENTRY_BYTES:(i + 1) * ENTRY_BYTES],
                                  "little")
            if not (word >> 30) & 1:
                continue
            entry = IptEntry(
                vpn=(word >> 92) & ((1 << 36) - 1),
                asid=(word >> 80) & ((1 << 12) - 1),
                pfn=(word >> 44) & ((1 << 36) - 1),
                flags=(word >> 32) & ((1 << 12) - 1),
                valid=bool((word >> 31) & 1),
            )
            table._slots[i] = entry
            if entry.valid:
                table._valid_count += 1
        return table
