import random

import pytest
from hypothesis import given, settings, strategies as st

from spartasim.ipt import (HASH_MODULO, HASH_XOR_FOLD, InvertedPageTable,
                           IptConfig, IptEntry, ipt_hash, slots_for_capacity)


def make(slot_count=16, hash_kind=HASH_XOR_FOLD):
    return InvertedPageTable(IptConfig(slot_count, hash_kind=hash_kind))


def find_colliding_keys(cfg, count=2, start_vpn=0):
    """Brute-force search for `count` distinct keys with the same home slot."""
    buckets = {}
    vpn = start_vpn
    while True:
        h = ipt_hash(vpn, 0, cfg)
        buckets.setdefault(h, []).append(vpn)
        if len(buckets[h]) == count:
            return [(v, 0) for v in buckets[h]]
        vpn += 1


def test_hash_zero_key():
    for kind in (HASH_XOR_FOLD, HASH_MODULO):
        assert ipt_hash(0, 0, IptConfig(16, hash_kind=kind)) == 0


def test_hash_fold_self_cancellation():
    # k=4 chunks 0x3 and 0x3 fold to zero
    cfg = IptConfig(16, hash_kind=HASH_XOR_FOLD)
    assert ipt_hash(0x33, 0, cfg) == 0


def test_hash_modulo():
    cfg = IptConfig(8, hash_kind=HASH_MODULO)
    assert ipt_hash(13, 0, cfg) == 5


def test_fold_requires_power_of_two():
    with pytest.raises(ValueError):
        IptConfig(12, hash_kind=HASH_XOR_FOLD)
    IptConfig(12, hash_kind=HASH_MODULO)  # fine


def test_slots_for_capacity():
    assert slots_for_capacity(1024, 0.25) == 4096
    assert slots_for_capacity(1000, 0.25) == 4096  # rounded up to a power of two
    assert slots_for_capacity(1, 1.0) == 1


def test_walk_empty_table():
    res = make().walk(7, 1)
    assert res.pfn is None and res.probes == 1


def test_insert_walk_roundtrip_no_collision():
    t = make()
    t.insert(IptEntry(5, 1, 99))
    res = t.walk(5, 1)
    assert res.pfn == 99 and res.probes == 1


def test_collision_probes_two():
    cfg = IptConfig(16)
    (v1, a1), (v2, a2) = find_colliding_keys(cfg)
    t = InvertedPageTable(cfg)
    t.insert(IptEntry(v1, a1, 1))
    t.insert(IptEntry(v2, a2, 2))
    assert t.walk(v1, a1).probes == 1
    res = t.walk(v2, a2)
    assert res.pfn == 2 and res.probes == 2


def test_insert_duplicate_updates_in_place():
    t = make()
    s1 = t.insert(IptEntry(5, 1, 99))
    s2 = t.insert(IptEntry(5, 1, 42))
    assert s1 == s2
    assert t.valid_count == 1
    assert t.walk(5, 1).pfn == 42


def test_invalidate_absent():
    assert make().invalidate(3, 3) is False


def test_insert_invalidate_walk():
    t = make()
    t.insert(IptEntry(5, 1, 99))
    assert t.invalidate(5, 1) is True
    assert t.walk(5, 1).pfn is None


def test_tombstone_preserves_chain():
    cfg = IptConfig(16)
    (v1, a1), (v2, a2) = find_colliding_keys(cfg)
    t = InvertedPageTable(cfg)
    t.insert(IptEntry(v1, a1, 1))
    t.insert(IptEntry(v2, a2, 2))
    assert t.invalidate(v1, a1) is True
    res = t.walk(v2, a2)
    assert res.pfn == 2 and res.probes == 2  # probed through the tombstone


def test_tombstone_slot_reused_on_insert():
    cfg = IptConfig(16)
    (v1, a1), (v2, a2), (v3, a3) = find_colliding_keys(cfg, count=3)
    t = InvertedPageTable(cfg)
    t.insert(IptEntry(v1, a1, 1))
    t.insert(IptEntry(v2, a2, 2))
    t.invalidate(v1, a1)
    slot = t.insert(IptEntry(v3, a3, 3))
    assert slot == ipt_hash(v3, a3, cfg)  # took the tombstone's slot
    assert t.walk(v2, a2).pfn == 2
    assert t.walk(v3, a3).pfn == 3


def test_probe_histogram_trivial():
    t = make()
    assert t.probe_histogram() == {}
    t.insert(IptEntry(3, 0, 1))
    assert dict(t.probe_histogram()) == {1: 1}


def test_exhaustion():
    t = make(slot_count=4)
    keys = []
    vpn = 0
    while len(keys) < 4:
        keys.append(vpn)
        vpn += 1
    for i, v in enumerate(keys):
        t.insert(IptEntry(v, 0, i))
    res = t.walk(999, 7)
    assert res.pfn is None and res.probes == 4
    with pytest.raises(RuntimeError):
        t.insert(IptEntry(999, 7, 9))


def test_dump_load_roundtrip():
    cfg = IptConfig(16)
    t = InvertedPageTable(cfg)
    t.insert(IptEntry(5, 1, 99, flags=0b101))
    t.insert(IptEntry(0x33, 0, 7))
    t.invalidate(0x33, 0)
    blob = t.dump_bytes()
    assert len(blob) == 16 * 16
    t2 = InvertedPageTable.load_bytes(blob, cfg)
    assert t2.walk(5, 1).pfn == 99
    assert t2.walk(0x33, 0).pfn is None
    assert t2.valid_count == 1
    assert t2.dump_bytes() == blob


def test_dump_entry_layout_golden():
    # Independent re-derivation of the 16-byte packing for one entry.
    cfg = IptConfig(1, hash_kind=HASH_MODULO)
    t = InvertedPageTable(cfg)
    t.insert(IptEntry(vpn=0xABCDE, asid=0x123, pfn=0x5555, flags=0x0F))
    word = 0
    for value, width in [(0xABCDE, 36), (0x123, 12), (0x5555, 36), (0x0F, 12),
                         (1, 1), (1, 1), (0, 30)]:
        word = (word << width) | value
    assert t.dump_bytes() == word.to_bytes(16, "little")


@settings(max_examples=100, deadline=None)
@given(st.lists(st.tuples(st.integers(0, 100), st.integers(0, 3)),
                min_size=1, max_size=40, unique=True))
def test_walk_insert_roundtrip_property(keys):
    t = make(slot_count=64)
    for i, (vpn, asid) in enumerate(keys):
        t.insert(IptEntry(vpn, asid, i))
    for i, (vpn, asid) in enumerate(keys):
        assert t.walk(vpn, asid).pfn == i


@settings(max_examples=60, deadline=None)
@given(st.lists(st.tuples(st.integers(0, 60), st.integers(0, 1)),
                min_size=2, max_size=30, unique=True),
       st.data())
def test_tombstone_safety_property(keys, data):
    # Invalidating any subset never makes a remaining entry unreachable.
    t = make(slot_count=64)
    for i, (vpn, asid) in enumerate(keys):
        t.insert(IptEntry(vpn, asid, i))
    doomed = data.draw(st.sets(st.sampled_from(range(len(keys))),
                               max_size=len(keys) - 1))
    for idx in doomed:
        t.invalidate(*keys[idx])
    for i, (vpn, asid) in enumerate(keys):
        if i not in doomed:
            assert t.walk(vpn, asid).pfn == i


def test_space_accounting_quarter_load():
    # 16-byte slots at a 1/4 load target: 64 bytes of table per 4 KB frame.
    capacity = 1 << 18
    slots = slots_for_capacity(capacity, 0.25)
    t = InvertedPageTable(IptConfig(slots))
    assert t.table_bytes / (capacity * 4096) == pytest.approx(0.015625)


def _build(keys, slot_count, hash_kind):
    t = InvertedPageTable(IptConfig(slot_count, hash_kind=hash_kind))
    for vpn, asid in keys:
        t.insert(IptEntry(vpn, asid, 0))
    return t


def test_structured_keys_fold_collision_free_modulo_worse():
    # Multi-region layouts (contiguous VPN runs at large-aligned starts, as
    # real heaps produce): folding mixes the high base bits in and keeps the
    # regions disjoint in the table, while the low-bits modulo hash piles
    # every congruent region onto the same slot window.
    rng = random.Random(0)
    keys = []
    for region in range(4):
        base = rng.randrange(1 << 22) << 14
        keys.extend((base + i, region) for i in range(1 << 10))
    slot_count = 1 << 14  # 4096 keys in 16384 slots: load factor 1/4
    fold = _build(keys, slot_count, HASH_XOR_FOLD)
    hist = fold.probe_histogram()
    total = sum(hist.values())
    assert sum(p * c for p, c in hist.items()) / total == 1.0
    assert hist[1] == total
    mod = _build(keys, slot_count, HASH_MODULO)
    sample = random.Random(2).sample(keys, 200)
    mod_mean = sum(mod.walk(v, a).probes for v, a in sample) / len(sample)
    assert mod_mean > 100  # frozen: measured ~1455 at this layout
