import random

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from oracles import stack_distance_hits
from mmusim.cachehier import AccessKind, CacheConfig, CacheHierarchy, HierarchyConfig, configure_l4
from mmusim.errors import InvalidGeometry
from mmusim.kernels import CacheStack, LruSets

D, I, P = AccessKind.DATA, AccessKind.INSTRUCTION, AccessKind.PTW


def test_cold_then_warm_data_read():
    h = CacheHierarchy()
    assert tuple(h.access(0x1000, D))[:2] == ("MEM", 4 + 6 + 9 + 20 + 195)
    assert tuple(h.access(0x1000, D))[:2] == ("L1", 4)
    assert h.access(0x1000 + 63, D).service == "L1"


def test_instruction_uses_l1i():
    h = CacheHierarchy()
    assert h.access(0x2000, I).cycles == 2 + 6 + 9 + 20 + 195
    assert tuple(h.access(0x2000, I))[:2] == ("L1", 2)
    # the block now sits in the shared levels, so a data read stops at L2
    assert tuple(h.access(0x2000, D))[:2] == ("L2", 4 + 6)


def test_ptw_from_l2():
    h = CacheHierarchy(walk_from_l2=True)
    h.access(0x3000, P)
    assert tuple(h.access(0x3000, P))[:2] == ("L2", 6)
    assert not h.contains("L1D", 0x3000)


def test_without_l4():
    h = CacheHierarchy(HierarchyConfig(l4=None))
    assert h.access(0, D).cycles == 4 + 6 + 9 + 195
    assert h.services == ("L1", "L2", "L3", "MEM")


def test_configure_l4_sets():
    assert configure_l4(256 << 20, 64).num_sets == 262_144
    assert configure_l4(256 << 20, 512).num_sets == 32_768
    with pytest.raises(InvalidGeometry):
        configure_l4(100 << 20, 64)


def test_cache_config_geometry():
    with pytest.raises(InvalidGeometry):
        CacheConfig("x", 1000, 4, 64, 1)
    with pytest.raises(InvalidGeometry):
        CacheConfig("x", 4096, 4, 48, 1)
    assert HierarchyConfig().l3.num_sets == 5461


def test_snapshot_counters():
    h = CacheHierarchy()
    snap = h.snapshot()
    assert all(v == 0 for lv in snap["levels"].values() for v in lv.values())
    h.access(0x40, D)
    lv = h.snapshot()["levels"]
    assert all(lv[n]["misses"] == 1 and lv[n]["hits"] == 0 for n in ("L1D", "L2", "L3", "L4"))
    for _ in range(9):
        h.access(0x40, D)
    lv = h.snapshot()["levels"]
    assert lv["L1D"]["hits"] == 9
    for stats in lv.values():
        assert stats["accesses"] == stats["hits"] + stats["misses"]
    h.reset_stats()
    assert h.snapshot()["levels"]["L1D"]["accesses"] == 0


def test_by_kind_breakdown():
    h = CacheHierarchy()
    h.access(0x40, P)
    h.access(0x80, D)
    k = h.snapshot()["by_kind"]
    assert k["L2.ptw"]["misses"] == 1 and k["L2.data"]["misses"] == 1
    assert k["L2.instruction"]["accesses"] == 0


def test_write_back_counted():
    cfg = HierarchyConfig(l1d=CacheConfig("L1D", 64, 1, 64, 4), l4=None)
    h = CacheHierarchy(cfg)
    h.access(0, D, write=True)
    assert h.access(64, D).writebacks == 1
    assert h.snapshot()["levels"]["L1D"]["writebacks"] == 1


def test_pollution_off_keeps_state():
    h = CacheHierarchy(pollution_off=True)
    rng = random.Random(1)
    for _ in range(200):
        h.access(rng.randrange(1 << 24), D, rng.random() < 0.5)
    before = h.state_hash()
    for _ in range(500):
        h.access(rng.randrange(1 << 24), P)
    assert h.state_hash() == before


@settings(max_examples=50, deadline=None)
@given(st.lists(st.integers(0, 40), max_size=300), st.integers(1, 16))
def test_single_level_matches_stack_distance(blocks, ways):
    stack = CacheStack([LruSets(1, ways)], [6], [1], 10)
    got = [stack.access(0, b << 6, False, True)[0] == 0 for b in blocks]
    assert got == stack_distance_hits(blocks, ways)


def test_l4_inclusion_fully_associative():
    """A fully associative L4 twice as large hits a superset of accesses."""
    rng = random.Random(5)
    addrs = [rng.randrange(1 << 18) & ~63 for _ in range(4000)]
    tiny = dict(l1i=CacheConfig("L1I", 1024, 2, 64, 2), l1d=CacheConfig("L1D", 1024, 2, 64, 4),
                l2=CacheConfig("L2", 2048, 2, 64, 6), l3=CacheConfig("L3", 4096, 4, 64, 9))

    def l4_hits(size):
        h = CacheHierarchy(HierarchyConfig(**tiny, l4=configure_l4(size, 64, size // 64)))
        return [h.access(a, D).service == "L4" for a in addrs]

    small, big = l4_hits(16 << 10), l4_hits(32 << 10)
    assert sum(small) > 0
    assert all(b or not s for s, b in zip(small, big))
