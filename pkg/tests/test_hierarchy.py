import itertools

import numpy as np
import pytest
from hypothesis import given, strategies as st

from gpumemlab.cache import AddressRangeError, ConfigError
from gpumemlab.hierarchy import (ClassificationError, HierarchySim, LatencyTable,
                                 PrefetchConfig, classify, preset)
from gpumemlab.presets import list_presets, load_device

PATTERN_LATENCY = {
    "gtx980-l1on": (82, None, None, 385, 2439, 2740),
    "gtx980-l1off": (214, 225, 289, 383, 2461, 2750),
    "gtx780": (198, 204, 257, 339, 702, 968),
    "gtx560ti-l1on": (96, 384, 468, 635, 1239, None),
    "gtx560ti-l1off": (351, 378, 462, 619, 1225, None),
}
MB = 1 << 20


@pytest.mark.parametrize("name", sorted(PATTERN_LATENCY))
def test_preset_latencies_match_table(name):
    cfg = load_device(name)
    got = tuple(cfg.latencies.pattern_latency[p] for p in ("P1", "P2", "P3", "P4", "P5", "P6"))
    assert got == PATTERN_LATENCY[name]


@pytest.mark.parametrize("name", sorted(PATTERN_LATENCY))
def test_pattern_monotonicity(name):
    lat = load_device(name).latencies.pattern_latency
    assert lat["P1"] < lat["P4"] < lat["P5"]


def test_preset_lookup_case_insensitive_and_unknown():
    assert preset("GTX780").name == "GTX780"
    with pytest.raises(KeyError):
        preset("GTX1080")


def test_gtx780_geometry():
    cfg = preset("GTX780")
    tex = cfg.texture_l1
    assert (tex.size, tex.line_size, tex.num_sets) == (12 * 1024, 32, 4)
    assert (cfg.l2_tlb.size, cfg.l2_tlb.line_size, cfg.l2_tlb.num_sets) == (130 * MB, 2 * MB, 7)


def test_gtx560ti_l1on_geometry():
    l1 = preset("GTX560Ti-L1on").l1_data
    assert (l1.size, l1.line_size, l1.num_sets) == (16 * 1024, 128, 32)
    assert type(l1.policy).__name__ == "ProbabilisticWay"


def test_overheads():
    cfg = preset("GTX980-L1on")
    assert (cfg.clock_overhead_cycles, cfg.dep_chain_overhead_cycles) == (6, 16)
    assert (preset("GTX780").clock_overhead_cycles, preset("GTX780").dep_chain_overhead_cycles) == (16, 32)
    assert preset("GTX560Ti-L1off").dep_chain_overhead_cycles == 20


# -- classify -----------------------------------------------------------------

def test_classify_truth_table():
    assert classify(True, True, None) == "P1"
    assert classify(True, False, True) == "P2"
    assert classify(True, False, False) == "P3"
    assert classify(False, True, None) == "P4"
    assert classify(False, False, False) == "P5"
    assert classify(False, False, False, page_switch=True) == "P6"


def test_classify_rejects_invalid_combinations():
    with pytest.raises(ClassificationError):
        classify(True, True, False)  # L1 TLB hit yet L2 TLB consulted
    with pytest.raises(ClassificationError):
        classify(False, False, None)
    with pytest.raises(ClassificationError):
        classify(False, False, True)  # no latency row
    with pytest.raises(ClassificationError):
        classify(True, True, None, page_switch=True)


def test_classify_total_on_valid_rows():
    valid = 0
    for d, t1, t2, ps in itertools.product([True, False], [True, False], [True, False, None],
                                           [True, False]):
        try:
            classify(d, t1, t2, ps)
            valid += 1
        except ClassificationError:
            pass
    assert valid == 6


def test_missing_pattern_latency_is_error():
    sim = HierarchySim(preset("GTX560Ti-L1off"))
    with pytest.raises(ClassificationError):
        sim.cfg.latencies.latency("P6")


def test_latency_table_validation():
    with pytest.raises(ConfigError):
        LatencyTable({"P1": 0})
    with pytest.raises(ConfigError):
        LatencyTable(dict(P1=5, P2=4, P3=6, P4=7, P5=8, P6=9))
    with pytest.raises(ConfigError):
        PrefetchConfig(span_fraction_of_l2=2)


# -- load path ----------------------------------------------------------------

def test_gtx780_resident_is_p1():
    sim = HierarchySim(preset("GTX780"))
    sim.load(0)
    s = sim.load(4)
    assert (s.pattern, s.latency_cycles) == ("P1", 198)


def test_gtx980_l1on_hit_bypasses_tlb():
    sim = HierarchySim(preset("GTX980-L1on"))
    sim.load(0)
    # thrash both TLBs with other pages; the L1 line stays (different L1 set)
    for p in range(1, 200):
        sim.load(p * 4 * MB + 128)
    s = sim.load(4)
    assert (s.pattern, s.latency_cycles) == ("P1", 82)
    assert s.l1_tlb_hit is None


def test_prefetch_makes_next_line_hit():
    sim = HierarchySim(preset("GTX780"))
    assert sim.load(0).pattern == "P5"
    s = sim.load(32)
    assert s.data_hit and s.pattern == "P1"


def test_walk_below_two_thirds_of_l2_has_one_long_access():
    cfg = preset("GTX780")
    sim = HierarchySim(cfg)
    n = int(cfg.l2_data.size * 2 / 3) // 32
    out = sim.load_many(np.arange(n) * 32)
    assert int((~out["data_hit"]).sum()) == 1


def test_prefetch_disabled_cold_misses():
    from dataclasses import replace
    cfg = replace(preset("GTX780"), prefetcher=PrefetchConfig(enabled=False))
    out = HierarchySim(cfg).load_many(np.arange(500) * 32)
    assert int((~out["data_hit"]).sum()) == 500


def test_activation_window_single_p6():
    sim = HierarchySim(preset("GTX780"))
    out = sim.load_many(np.arange(0, 1024 * MB, 2 * MB))
    assert list(out["pattern"]).count("P6") == 1
    assert out["pattern"][256] == "P6"


def test_fermi_has_no_p6():
    sim = HierarchySim(preset("GTX560Ti-L1off"))
    out = sim.load_many(np.arange(0, 1024 * MB, 4 * MB))
    assert "P6" not in set(out["pattern"])


def test_untabulated_combination_raises():
    """Data miss after an L1 TLB miss that hits the L2 TLB has no latency row."""
    sim = HierarchySim(preset("GTX780"))
    for p in range(18):  # 18 pages: more than the 16-entry L1 TLB holds
        sim.load(p * 2 * MB)
    with pytest.raises(ClassificationError):
        for p in range(18):
            sim.load(p * 2 * MB + 64 * 1024)


def test_address_beyond_dram():
    sim = HierarchySim(preset("GTX560Ti-L1on"))
    with pytest.raises(AddressRangeError):
        sim.load(1 << 30)


def test_deterministic_for_seed():
    addrs = np.arange(2000) * (1 * MB + 96)
    a = HierarchySim(preset("GTX980-L1off"), seed=4).load_many(addrs)
    b = HierarchySim(preset("GTX980-L1off"), seed=4).load_many(addrs)
    assert all(np.array_equal(a[k], b[k]) for k in a)


@given(st.lists(st.integers(0, 64 * 1024 // 4 - 1), min_size=1, max_size=60),
       st.lists(st.integers(1, 300), min_size=1, max_size=20))
def test_l1_hits_independent_of_tlb_state(elements, pages):
    """On the Maxwell L1on preset an L1 hit is P1 whatever the TLBs hold."""
    sim = HierarchySim(preset("GTX980-L1on"))
    for e in elements:
        sim.load(e * 4)
    for p in pages:
        sim.load(p * 2 * MB + 1024 * 1024)
    for e in elements:
        if sim.l1.contains(e * 4):
            assert sim.load(e * 4).pattern == "P1"


def test_simulated_latency_equals_pattern_latency():
    cfg = preset("GTX780")
    out = HierarchySim(cfg).load_many(np.arange(0, 300 * MB, 3 * MB + 4096))
    for p, t in zip(out["pattern"], out["latency"]):
        assert cfg.latencies.pattern_latency[p] == t
