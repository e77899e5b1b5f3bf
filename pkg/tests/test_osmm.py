import random

import pytest

from spartasim.addrspace import PAGE_4K, PageGeometry, frame_partition, partition_of_vpn
from spartasim.osmm import (KIND_PRIVATE, MappingError, MemoryManager,
                            NoCongruentRegion, OutOfMemory)


def make_mm(partitions=4, capacity=10, **kw):
    geom = PageGeometry(PAGE_4K, partitions, capacity)
    return MemoryManager(geom, **kw), geom


def seed_worked_example(mm):
    """Map V3..V7 of a donor space to frames P30, P0, P10, P20, P31."""
    donor = mm.create_space(1)
    mm.add_vma(donor, 0, 64, KIND_PRIVATE)
    for vpn, hint in [(3, 30), (4, 0), (5, 10), (6, 20), (7, 31)]:
        mm.alloc_private(donor, vpn << 12, frame_hint=hint)
    return donor


def test_alloc_routes_by_partition_hash():
    mm, geom = make_mm()
    space = mm.create_space(0)
    for vpn in range(3, 8):
        pfn = mm.alloc_private(space, vpn << 12)
        assert frame_partition(pfn, geom) == vpn % 4
    mm.check_invariants()


def test_single_partition_behaves_unpartitioned():
    mm, geom = make_mm(partitions=1, capacity=40)
    space = mm.create_space(0)
    seen = set()
    for vpn in range(0, 40, 3):
        seen.add(mm.alloc_private(space, vpn << 12))
    assert len(seen) == 14
    mm.check_invariants()


def test_repeated_fault_is_idempotent():
    mm, _ = make_mm()
    space = mm.create_space(0)
    first = mm.alloc_private(space, 0x5000)
    second = mm.alloc_private(space, 0x5000)
    assert first == second
    assert mm.stats.minor_faults == 1


def test_frame_hint_any_free_in_partition_frame_is_legal():
    mm, geom = make_mm()
    space = mm.create_space(0)
    mm.add_vma(space, 0, 1024, KIND_PRIVATE)
    # Every free frame of partition 2 is accepted for some partition-2 vpn.
    frames = list(range(20, 30))
    for i, frame in enumerate(frames):
        vpn = 2 + 4 * i
        assert mm.alloc_private(space, vpn << 12, frame_hint=frame) == frame
    mm.check_invariants()


def test_frame_hint_wrong_partition_rejected():
    mm, _ = make_mm()
    space = mm.create_space(0)
    with pytest.raises(MappingError):
        mm.alloc_private(space, 2 << 12, frame_hint=5)  # partition 0 frame


def test_map_shared_worked_example():
    mm, _ = make_mm()
    seed_worked_example(mm)
    proc2 = mm.create_space(2)
    region = mm.map_shared(proc2, [30, 0, 10, 20, 31], hint_vpn=5)
    assert list(region) == [7, 8, 9, 10, 11]
    assert [proc2.mappings[v] for v in region] == [30, 0, 10, 20, 31]
    mm.check_invariants()


def test_map_shared_single_frame():
    mm, _ = make_mm()
    donor = mm.create_space(1)
    pfn = mm.alloc_private(donor, 6 << 12)  # partition 2
    proc2 = mm.create_space(2)
    region = mm.map_shared(proc2, [pfn], hint_vpn=0)
    assert len(region) == 1
    assert region.start % 4 == 2


def test_map_shared_single_partition_returns_hint():
    mm, _ = make_mm(partitions=1, capacity=16)
    donor = mm.create_space(1)
    frames = [mm.alloc_private(donor, v << 12) for v in range(3)]
    proc2 = mm.create_space(2)
    region = mm.map_shared(proc2, frames, hint_vpn=5)
    assert region.start == 5


def test_map_shared_nonconsecutive_sequence_rejected():
    mm, _ = make_mm()
    donor = mm.create_space(1)
    a = mm.alloc_private(donor, 0 << 12)   # partition 0
    b = mm.alloc_private(donor, 2 << 12)   # partition 2: sequence (0, 2)
    proc2 = mm.create_space(2)
    with pytest.raises(NoCongruentRegion):
        mm.map_shared(proc2, [a, b], hint_vpn=0)


def test_mremap_same_frames_new_congruent_range():
    mm, _ = make_mm()
    seed_worked_example(mm)
    proc2 = mm.create_space(2)
    region = mm.map_shared(proc2, [30, 0, 10, 20, 31], hint_vpn=5)
    frames = [proc2.mappings[v] for v in region]
    moved = mm.mremap(proc2, region.start, 5, new_hint_vpn=40)
    assert moved.start % 4 == 3
    assert moved.start >= 40
    assert [proc2.mappings[v] for v in moved] == frames
    assert all(v not in proc2.mappings for v in region)
    mm.check_invariants()


def test_mremap_identical_congruence_keeps_frames():
    mm, _ = make_mm()
    space = mm.create_space(0)
    mm.add_vma(space, 3, 2, KIND_PRIVATE)
    f = [mm.alloc_private(space, v << 12) for v in (3, 4)]
    moved = mm.mremap(space, 3, 2, new_hint_vpn=3 + 4)
    assert moved.start % 4 == 3
    assert [space.mappings[v] for v in moved] == f


def test_cow_copy_stays_in_partition():
    mm, geom = make_mm()
    donor = mm.create_space(1)
    orig = mm.alloc_private(donor, 6 << 12)  # partition 2
    proc2 = mm.create_space(2)
    region = mm.map_shared(proc2, [orig], hint_vpn=0)
    copy = mm.cow_fault(proc2, region.start << 12)
    assert copy != orig
    assert frame_partition(copy, geom) == frame_partition(orig, geom) == 2
    assert mm.stats.cow_faults == 1
    mm.check_invariants()


def test_cow_sole_owner_upgrades_in_place():
    mm, _ = make_mm()
    space = mm.create_space(0)
    pfn = mm.alloc_private(space, 5 << 12)
    assert mm.cow_fault(space, 5 << 12) == pfn
    assert mm.stats.cow_faults == 0


def test_cow_burst_consumes_free_list_without_evictions():
    # Five shared pages of partition 0, mapped as single-page regions; five
    # CoW faults take five partition-0 frames and never evict.
    mm, geom = make_mm(partitions=2, capacity=16)
    donor = mm.create_space(1)
    shared = [mm.alloc_private(donor, (2 * i) << 12) for i in range(5)]  # part 0
    proc2 = mm.create_space(2)
    vpns = [mm.map_shared(proc2, [pfn], hint_vpn=100 + 10 * i).start
            for i, pfn in enumerate(shared)]
    free_before = len(mm.partitions[0].free)
    for vpn in vpns:
        copy = mm.cow_fault(proc2, vpn << 12)
        assert frame_partition(copy, geom) == 0
    assert len(mm.partitions[0].free) == free_before - 5
    assert mm.stats.evictions == 0
    assert mm.stats.cow_faults == 5
    mm.check_invariants()


def test_demand_paging_minor_then_major():
    mm, _ = make_mm(partitions=1, capacity=4)
    space = mm.create_space(0)
    for vpn in range(4):
        pfn, kind = mm.demand_page(space, vpn << 12)
        assert kind == "minor"
    pfn, kind = mm.demand_page(space, 0x0)
    assert kind == "resident"
    # Exceed capacity: evictions begin, and re-touching an evicted page majors.
    mm.demand_page(space, 4 << 12)
    assert mm.stats.evictions == 1
    victim_vpn = next(iter(space.evicted))
    _, kind = mm.demand_page(space, victim_vpn << 12)
    assert kind == "major"
    assert mm.stats.major_faults == 1
    mm.check_invariants()


def test_uniform_overcommit_fault_rate_near_half():
    # Analytic oracle: capacity C resident out of W = 2C uniformly touched
    # pages leaves a steady-state fault probability of 1 - C/W = 0.5.
    mm, _ = make_mm(partitions=1, capacity=128)
    space = mm.create_space(0)
    rng = random.Random(9)
    npages = 256
    for _ in range(4 * npages):  # warm up
        mm.demand_page(space, rng.randrange(npages) << 12)
    mm.stats.minor_faults = mm.stats.major_faults = 0
    n = 6000
    for _ in range(n):
        mm.demand_page(space, rng.randrange(npages) << 12)
    rate = (mm.stats.minor_faults + mm.stats.major_faults) / n
    assert rate == pytest.approx(0.5, abs=0.05)


def test_balanced_footprint_partitioned_matches_unpartitioned():
    # A footprint spread evenly over partitions drives the same fault count
    # partitioned or not.
    counts = {}
    for partitions in (1, 4):
        mm, _ = make_mm(partitions=partitions, capacity=128 // partitions)
        space = mm.create_space(0)
        rng = random.Random(10)
        for _ in range(20000):
            mm.demand_page(space, rng.randrange(256) << 12)
        counts[partitions] = mm.stats.minor_faults + mm.stats.major_faults
    ratio = counts[4] / counts[1]
    assert 0.9 < ratio < 1.1


def test_out_of_memory_when_all_pinned():
    mm, _ = make_mm(partitions=1, capacity=2)
    space = mm.create_space(0)
    a = mm.alloc_private(space, 0 << 12)
    b = mm.alloc_private(space, 1 << 12)
    mm.pinned.update({a, b})
    with pytest.raises(OutOfMemory):
        mm.alloc_private(space, 2 << 12)


def test_eviction_unmaps_all_sharers_and_invalidates_ipt():
    mm, geom = make_mm(partitions=1, capacity=2)
    donor = mm.create_space(1)
    pfn = mm.alloc_private(donor, 0)
    proc2 = mm.create_space(2)
    region = mm.map_shared(proc2, [pfn], hint_vpn=4)
    unmaps = []
    mm.on_unmap = lambda *args: unmaps.append(args)
    mm.alloc_private(donor, 1 << 12)
    mm.alloc_private(donor, 2 << 12)  # forces eviction
    mm.check_invariants()
    # whichever frame was chosen, every owner mapping was broken
    for asid, vpn, pfn_, part in unmaps:
        assert vpn not in mm.spaces[asid].mappings
        assert mm.partitions[part].ipt.walk(vpn, asid).pfn is None
    assert len(unmaps) >= 1


def test_event_log_golden():
    mm, _ = make_mm()
    log = []
    mm.event_log = log
    space = mm.create_space(0)
    mm.alloc_private(space, 3 << 12)
    donor_pfn = space.mappings[3]
    proc2 = mm.create_space(2)
    mm.map_shared(proc2, [donor_pfn], hint_vpn=0)
    mm.cow_fault(proc2, 3 << 12)
    assert log == [
        "alloc vpn=0x3 pfn=30 part=3",
        "shared vpn=0x3 pfn=30 part=3",
        "cow vpn=0x3 pfn=31 part=3",
    ]


def test_alloc_outside_private_vma_rejected():
    mm, _ = make_mm()
    space = mm.create_space(0)
    mm.add_vma(space, 0, 4, KIND_PRIVATE)
    with pytest.raises(MappingError):
        mm.alloc_private(space, 9 << 12)


def test_unconstrained_mode_spreads_frames():
    mm, geom = make_mm(partitions=4, capacity=8, constrained=False)
    space = mm.create_space(0)
    parts = [frame_partition(mm.alloc_private(space, v << 12), geom)
             for v in range(8)]
    assert parts == [0, 1, 2, 3, 0, 1, 2, 3]  # round-robin spread


def test_sparta_constraint_holds_under_random_ops():
    mm, geom = make_mm(partitions=8, capacity=64)
    rng = random.Random(0)
    spaces = [mm.create_space(a) for a in range(4)]
    for space in spaces:
        mm.add_vma(space, 0, 2048, KIND_PRIVATE)
    for _ in range(4000):
        space = rng.choice(spaces)
        op = rng.randrange(4)
        if op == 0:
            mm.alloc_private(space, rng.randrange(2048) << 12)
        elif op == 1:
            mm.demand_page(space, rng.randrange(2048) << 12)
        elif op == 2 and space.mappings:
            vpn = rng.choice(list(space.mappings))
            mm.cow_fault(space, vpn << 12)
        elif op == 3 and space.mappings:
            donor_vpn = rng.choice(list(space.mappings))
            target = rng.choice(spaces)
            if target is not space:
                try:
                    mm.map_shared(target, [space.mappings[donor_vpn]],
                                  hint_vpn=rng.randrange(3000, 4000))
                except (NoCongruentRegion, MappingError):
                    pass
    mm.check_invariants()
    for space in spaces:
        for vpn, pfn in space.mappings.items():
            assert partition_of_vpn(vpn, geom) == frame_partition(pfn, geom)
