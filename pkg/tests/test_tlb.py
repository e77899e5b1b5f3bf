import random

import pytest
from hypothesis import given, settings, strategies as st

from spartasim.tlb import (TlbConfig, TlbEntry, TlbHierarchy, TlbModel,
                           TlbStats, miss_ratio)


def make(entries=8, ways=4, divisor=1):
    return TlbModel(TlbConfig(entries, ways, index_divisor=divisor))


def test_cold_lookup_misses():
    tlb = make()
    assert tlb.lookup(5, 1) is None
    assert tlb.stats.misses == 1 and tlb.stats.lookups == 1


def test_insert_then_find():
    tlb = make()
    tlb.fill(TlbEntry(5, 1, 9))
    entry = tlb.lookup(5, 1)
    assert entry is not None and entry.pfn == 9


def test_asid_must_match():
    tlb = make()
    tlb.fill(TlbEntry(5, 1, 9))
    assert tlb.lookup(5, 2) is None


def test_fill_into_empty_set_no_eviction():
    tlb = make()
    assert tlb.fill(TlbEntry(1, 0, 1)) is None
    assert tlb.stats.evictions == 0


def test_lru_eviction_order_hand_traced():
    # One 4-way set; five fills with no intervening touches evict the first.
    tlb = make(entries=4, ways=4)
    for vpn in range(4):
        assert tlb.fill(TlbEntry(vpn, 0, 100 + vpn)) is None
    victim = tlb.fill(TlbEntry(4, 0, 104))
    assert victim is not None and victim.vpn == 0


def test_lookup_promotes_to_mru():
    tlb = make(entries=4, ways=4)
    for vpn in range(4):
        tlb.fill(TlbEntry(vpn, 0, vpn))
    tlb.lookup(0, 0)  # 0 becomes MRU; LRU is now 1
    victim = tlb.fill(TlbEntry(9, 0, 9))
    assert victim.vpn == 1


def test_duplicate_fill_replaces_in_place():
    tlb = make()
    tlb.fill(TlbEntry(5, 1, 9))
    tlb.fill(TlbEntry(5, 1, 77))
    assert len(tlb) == 1
    assert tlb.lookup(5, 1).pfn == 77


def test_invalidate():
    tlb = make()
    assert tlb.invalidate(5, 1) is False
    tlb.fill(TlbEntry(5, 1, 9))
    tlb.fill(TlbEntry(6, 1, 10))
    assert tlb.invalidate(5, 1) is True
    assert tlb.lookup(5, 1) is None
    assert tlb.lookup(6, 1) is not None


def test_miss_ratio_values():
    s = TlbStats(lookups=10, hits=0, misses=10)
    assert miss_ratio(s) == 1.0
    s = TlbStats(lookups=10, hits=10, misses=0)
    assert miss_ratio(s) == 0.0
    s = TlbStats(lookups=12, hits=9, misses=3)
    assert miss_ratio(s) == 0.25
    with pytest.raises(ValueError):
        miss_ratio(TlbStats())


def test_config_validation():
    with pytest.raises(ValueError):
        TlbConfig(6, 4)
    with pytest.raises(ValueError):
        TlbConfig(0, 1)


class ListLru:
    """Brute-force oracle: per-set python list ordered LRU -> MRU."""

    def __init__(self, sets, ways, divisor=1):
        self.sets = [[] for _ in range(sets)]
        self.ways = ways
        self.divisor = divisor
        self.nsets = sets

    def access(self, vpn, asid):
        lst = self.sets[(vpn // self.divisor) % self.nsets]
        key = (vpn, asid)
        if key in lst:
            lst.remove(key)
            lst.append(key)
            return True, None
        lst.append(key)
        victim = lst.pop(0) if len(lst) > self.ways else None
        return False, victim


@settings(max_examples=200, deadline=None)
@given(st.lists(st.tuples(st.integers(0, 30), st.integers(0, 2)),
                min_size=1, max_size=200),
       st.sampled_from([(4, 1), (4, 4), (8, 2), (16, 4)]))
def test_lru_matches_list_oracle(accesses, shape):
    entries, ways = shape
    tlb = make(entries=entries, ways=ways)
    oracle = ListLru(entries // ways, ways)
    for vpn, asid in accesses:
        expect_hit, expect_victim = oracle.access(vpn, asid)
        entry = tlb.lookup(vpn, asid)
        assert (entry is not None) == expect_hit
        if entry is None:
            victim = tlb.fill(TlbEntry(vpn, asid, vpn))
            got = (victim.vpn, victim.asid) if victim else None
            assert got == expect_victim


def test_reach_inclusion_only_cold_misses():
    # Entry count >= distinct pages: after each page's first touch, no misses.
    tlb = make(entries=64, ways=64)
    rng = random.Random(3)
    pages = list(range(40))
    trace = pages + [rng.choice(pages) for _ in range(2000)]
    for vpn in trace:
        if tlb.lookup(vpn, 0) is None:
            tlb.fill(TlbEntry(vpn, 0, vpn))
    assert tlb.stats.misses == len(pages)


def test_partition_strided_coverage_with_divisor():
    # 512 entries, 4-way, pages of one partition out of 128: local page
    # numbers spread across sets only when the index divisor strips the
    # partition-congruent low bits.
    pcount = 128
    tlb = TlbModel(TlbConfig(512, 4, page_size=2 << 20, index_divisor=pcount))
    partition = 5
    vpns = [partition + i * pcount for i in range(512)]
    rng = random.Random(4)
    trace = vpns + [rng.choice(vpns) for _ in range(5000)]
    for vpn in trace:
        if tlb.lookup(vpn, 0) is None:
            tlb.fill(TlbEntry(vpn, 0, vpn))
    assert tlb.stats.misses == len(vpns)
    assert tlb.stats.evictions == 0


def _misses(trace, entries, ways):
    tlb = make(entries=entries, ways=ways)
    for vpn in trace:
        if tlb.lookup(vpn, 0) is None:
            tlb.fill(TlbEntry(vpn, 0, vpn))
    return tlb.stats.misses


def test_associativity_monotonicity_on_reuse_traces():
    # On traces with reuse skew (the regime TLBs live in), full associativity
    # never loses to fewer ways at equal size.
    for seed in range(8):
        rng = random.Random(seed)
        hot = list(range(40))
        cold = list(range(1000, 1400))
        trace = [rng.choice(hot) if rng.random() < 0.8 else rng.choice(cold)
                 for _ in range(3000)]
        m = {w: _misses(trace, 64, w) for w in (1, 4, 64)}
        assert m[64] <= m[4] <= m[1]


def test_associativity_monotonicity_is_not_universal():
    # Boundary documentation: a cyclic sweep one page larger than the TLB
    # thrashes full-associative LRU while direct mapping keeps most entries,
    # so the monotonicity above is a locality property, not a theorem.
    trace = list(range(65)) * 40
    assert _misses(trace, 64, 64) > _misses(trace, 64, 1)


def test_hierarchy_l2_hit_fills_l1():
    h = TlbHierarchy(TlbConfig(4, 4), TlbConfig(16, 4))
    h.fill(TlbEntry(1, 0, 11))
    for vpn in range(2, 7):  # push vpn 1 out of the small L1
        h.fill(TlbEntry(vpn, 0, vpn))
    assert h.l1.lookup(1, 0) is None
    entry = h.lookup(1, 0)
    assert entry is not None and entry.pfn == 11
    assert h.l1.lookup(1, 0) is not None  # refilled
    assert h.stats.hits == 1


def test_hierarchy_inclusion_on_l2_eviction():
    h = TlbHierarchy(TlbConfig(4, 4), TlbConfig(4, 4))
    for vpn in range(4):
        h.fill(TlbEntry(vpn, 0, vpn))
    # Touch vpn 0 in L1 only: it becomes MRU there while staying L2's LRU.
    assert h.l1.lookup(0, 0) is not None
    h.fill(TlbEntry(9, 0, 9))  # L2 evicts vpn 0
    assert h.l2.lookup(0, 0) is None
    # Without inclusion maintenance vpn 0 would still sit in L1.
    assert h.l1.lookup(0, 0) is None
    assert h.lookup(9, 0) is not None


def test_hierarchy_invalidate_both_levels():
    h = TlbHierarchy(TlbConfig(4, 4), TlbConfig(16, 4))
    h.fill(TlbEntry(1, 0, 1))
    assert h.invalidate(1, 0) is True
    assert h.lookup(1, 0) is None
