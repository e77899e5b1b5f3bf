import pytest
from hypothesis import given, strategies as st

from spartasim.addrspace import (PAGE_2M, PAGE_4K, PageGeometry, frame_partition,
                                 join, partition_frames, partition_index, split)

GEOM4 = PageGeometry(PAGE_4K, 4, 10)


def test_partition_index_worked_example():
    # V3..V7 route to partitions 3, 0, 1, 2, 3 under mod-4
    got = [partition_index(v << 12, GEOM4) for v in range(3, 8)]
    assert got == [3, 0, 1, 2, 3]


def test_partition_index_single_partition():
    geom = PageGeometry(PAGE_4K, 1, 10)
    for v in (0, 1, 7, 123456):
        assert partition_index(v << 12, geom) == 0


def test_frame_partition_contiguous_ranges():
    assert frame_partition(30, GEOM4) == 3
    assert frame_partition(0, GEOM4) == 0
    assert frame_partition(19, GEOM4) == 1


def test_frame_partition_out_of_range():
    with pytest.raises(ValueError):
        frame_partition(40, GEOM4)
    with pytest.raises(ValueError):
        frame_partition(-1, GEOM4)


def test_split_examples():
    assert split(0x1003, GEOM4) == (1, 3)
    assert split(0, GEOM4) == (0, 0)
    geom2m = PageGeometry(PAGE_2M, 1, 4)
    assert split(2 * 1024 * 1024, geom2m) == (1, 0)


def test_partition_frames_ranges():
    assert list(partition_frames(3, GEOM4)) == list(range(30, 40))
    with pytest.raises(ValueError):
        partition_frames(4, GEOM4)


def test_geometry_validation():
    with pytest.raises(ValueError):
        PageGeometry(1024, 4, 10)
    with pytest.raises(ValueError):
        PageGeometry(PAGE_4K, 0, 10)


def test_custom_hash_slot():
    def high_bits(vpn, count):
        return (vpn >> 8) % count

    assert partition_index(0x1234 << 12, GEOM4, hash_fn=high_bits) == (0x12 % 4)


@given(st.integers(0, (1 << 48) - 1), st.integers(1, 64))
def test_routing_totality(vaddr, pcount):
    geom = PageGeometry(PAGE_4K, pcount, 16)
    assert 0 <= partition_index(vaddr, geom) < pcount


@given(st.integers(0, (1 << 36) - 1), st.integers(0, PAGE_4K - 1),
       st.integers(0, PAGE_4K - 1))
def test_page_coherence(vpn, off_a, off_b):
    a = (vpn << 12) | off_a
    b = (vpn << 12) | off_b
    assert partition_index(a, GEOM4) == partition_index(b, GEOM4)


@pytest.mark.parametrize("pcount", [1, 2, 3, 4, 7, 16])
def test_uniformity(pcount):
    geom = PageGeometry(PAGE_4K, pcount, 16)
    n = pcount * 50
    counts = [0] * pcount
    for vpn in range(n):
        counts[partition_index(vpn << 12, geom)] += 1
    assert counts == [n // pcount] * pcount


@given(st.integers(0, (1 << 48) - 1))
def test_split_round_trip(vaddr):
    vpn, off = split(vaddr, GEOM4)
    assert join(vpn, off, GEOM4) == vaddr
    assert off < PAGE_4K
