import numpy as np
import pytest
from hypothesis import given, strategies as st

from gpumemlab.hierarchy import HierarchySim, preset
from gpumemlab.pchase import (CacheSim, PChaseConfig, Segment, Segmented, SparseChase,
                              TraceLengthError, UniformStride, WalkError, init_array,
                              init_spec, latency_spectrum, miss_threshold, parse_init_spec,
                              pass_length, run_classic, run_fine_grained)
from gpumemlab.presets import load_cache

from oracles import chase_walk, uniform_cycle_length


def test_uniform_init_example():
    cfg = PChaseConfig(32, UniformStride(2), 1)
    assert init_array(cfg).tolist() == [2, 3, 4, 5, 6, 7, 0, 1]


def test_segmented_walk_with_loop():
    pat = Segmented([(0, 8, 1), (8, 4, 1), (12, 2, 1), (14, 4, 1), (18, 2, 2)])
    cfg = PChaseConfig(32 * 4, pat, 10)
    arr = init_array(cfg)
    assert isinstance(arr, SparseChase)
    assert chase_walk(arr, 10) == [0, 8, 12, 14, 18, 20, 22, 18, 20, 22]


def test_segment_collision_rejected():
    with pytest.raises(WalkError):
        init_array(PChaseConfig(64, Segmented([(0, 2, 3), (6, -2, 2)], loop_to=0), 5))


def test_segment_escape_rejected():
    with pytest.raises(WalkError):
        init_array(PChaseConfig(16, Segmented([(0, 3, 2)]), 5))


def test_segment_must_start_at_zero():
    with pytest.raises(WalkError):
        init_array(PChaseConfig(64, Segmented([(2, 1, 2)]), 5))


@given(st.integers(1, 400), st.integers(0, 1000))
def test_uniform_cycle_length(n, s):
    cfg = PChaseConfig(n * 4, UniformStride(s), 1)
    arr = init_array(cfg)
    walk = chase_walk(arr, 2 * n + 1)
    expected = uniform_cycle_length(n, s % n)
    assert len(set(walk)) == expected == pass_length(cfg)


def test_init_spec_round_trip():
    for init in (UniformStride(7), Segmented([(0, 8, 1), (8, -4, 1)], loop_to=8)):
        assert parse_init_spec(init_spec(init)) == init


def test_toy_miss_flags_per_cycle():
    sim = CacheSim(load_cache("toy-fig3"))
    tr = run_fine_grained(sim, PChaseConfig(52, UniformStride(1), 39, preheat=False))
    flags = tr.misses()
    for cycle in (1, 2):
        seg = flags[13 * cycle: 13 * cycle + 13]
        assert [int(tr.index[13 * cycle + i]) + 1 for i in np.nonzero(seg)[0]] == [1, 7, 13]


def test_all_hit_within_capacity():
    cfg = load_cache("gtx780-texL1")
    tr = run_fine_grained(CacheSim(cfg), PChaseConfig(12 * 1024, UniformStride(8), 6000))
    assert tr.data_hit.all() and (tr.latency == cfg.hit_latency).all()
    assert run_classic(CacheSim(cfg), PChaseConfig(12 * 1024, UniformStride(8), 6000)) == cfg.hit_latency


def test_texture_12_5kb_all_miss():
    cfg = load_cache("gtx780-texL1")
    tr = run_fine_grained(CacheSim(cfg), PChaseConfig(12800, UniformStride(8), 2000))
    assert not tr.data_hit.any()


def test_classic_all_miss_at_large_n():
    from gpumemlab.cache import CacheConfig, Uniform
    cfg = CacheConfig(4096, 64, Uniform(16, 4))
    t = run_classic(CacheSim(cfg), PChaseConfig(4 * 4096, UniformStride(16), 4096))
    assert t == cfg.hit_latency + cfg.miss_penalty


def test_classic_matches_mean_and_miss_count():
    cfg = load_cache("fermi-L1")
    pc = PChaseConfig(16 * 1024 + 512, UniformStride(32), 5000)
    tr = run_fine_grained(CacheSim(cfg, seed=2), pc)
    t = run_classic(CacheSim(cfg, seed=2), pc)
    assert t == tr.latency.sum() / len(tr)
    r = (~tr.data_hit).sum() / len(tr)
    assert abs(t - (cfg.hit_latency + cfg.miss_penalty * r)) < 1e-9


@given(st.integers(1, 300), st.integers(0, 50), st.integers(1, 500))
def test_walk_closure(n, s, k):
    pc = PChaseConfig(n * 4, UniformStride(s), k, preheat=False)
    tr = run_fine_grained(CacheSim(load_cache("toy-fig3")), pc)
    arr = init_array(pc)
    assert tr.index[0] == 0
    assert all(arr[a] == b for a, b in zip(tr.index[:-1], tr.index[1:]))


def test_reproducible():
    pc = PChaseConfig(17 * 1024, UniformStride(32), 4000)
    a = run_fine_grained(CacheSim(load_cache("fermi-L1"), seed=9), pc)
    b = run_fine_grained(CacheSim(load_cache("fermi-L1"), seed=9), pc)
    assert np.array_equal(a.latency, b.latency) and np.array_equal(a.index, b.index)


def test_trace_length_cap():
    with pytest.raises(TraceLengthError):
        run_fine_grained(CacheSim(load_cache("toy-fig3")), PChaseConfig(48, UniformStride(1), 100),
                         max_records=10)


def test_large_uniform_walk_is_closed_form():
    pc = PChaseConfig(1 << 30, UniformStride(1 << 19), 4096, preheat=False)
    tr = run_fine_grained(HierarchySim(preset("GTX780")), pc)
    assert tr.index[1] == 1 << 19 and len(tr) == 4096


def test_config_validation():
    with pytest.raises(ValueError):
        PChaseConfig(10, UniformStride(1), 1)
    with pytest.raises(ValueError):
        PChaseConfig(16, UniformStride(1), 0)


def test_miss_threshold_two_clusters():
    lat = np.array([100] * 50 + [300] * 10 + [101, 99])
    t = miss_threshold(lat)
    assert 101 < t < 300
    assert miss_threshold(np.full(5, 7)) == 7


@pytest.mark.parametrize("device", ["gtx560ti-l1on", "gtx560ti-l1off", "gtx780",
                                    "gtx980-l1on", "gtx980-l1off"])
def test_latency_spectrum_phases(device):
    cfg = preset(device)
    tr = run_fine_grained(HierarchySim(cfg), latency_spectrum())
    runs = []
    for p in tr.pattern:
        if not runs or runs[-1] != p:
            runs.append(str(p))
    merged = []
    for p in runs:
        group = {"P5": "A", "P6": "A", "P4": "B", "P2": "C", "P3": "C", "P1": "D"}[p]
        if not merged or merged[-1] != group:
            merged.append(group)
    if device == "gtx980-l1on":
        assert merged == ["A", "B", "D"]
    else:
        assert merged == ["A", "B", "C", "D"]
