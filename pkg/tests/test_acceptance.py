"""Acceptance criteria 1-9, each reported as one PASS/FAIL line."""
import time
from fractions import Fraction
from math import gcd

import numpy as np
import pytest

from conftest import ACCEPTANCE_LINES
from gpumemlab import throughput as tp
from gpumemlab.cache import CacheConfig, LRU, StandardBits, Uniform, Unequal
from gpumemlab.hierarchy import HierarchySim
from gpumemlab.inference import (SimProbe, detect_replacement, find_period, flag_disagreement,
                                 infer_tlb_sets, params_match, run_pipeline, saavedra_analysis,
                                 t_avg_grid, tlb_miss_series, wong_analysis)
from gpumemlab.pchase import CacheSim, PChaseConfig, UniformStride, latency_spectrum, run_fine_grained
from gpumemlab.presets import list_presets, load_cache, load_device, load_gpu
from gpumemlab.smem import KEPLER_4B, KEPLER_8B, FERMI_BANKS, MAXWELL_BANKS, conflict_degree, conflict_latency

MB = 1 << 20
TLB_ELEM = 256 * 1024


def report(n, ok, detail):
    line = f"criterion {n}: {'PASS' if ok else 'FAIL'}  {detail}"
    ACCEPTANCE_LINES.append(line)
    print(line)
    assert ok, line


def test_criterion_1_round_trip_recovery():
    start = time.perf_counter()
    got = {}
    for name, elem in [("gtx780-texL1", 4), ("gtx980-L1", 4), ("fermi-L1", 4),
                       ("l1tlb", TLB_ELEM), ("l2tlb", TLB_ELEM)]:
        cfg = load_cache(name)
        p = run_pipeline(SimProbe(cfg, element_size=elem), floor=elem)
        got[name] = params_match(p, cfg)
    took = time.perf_counter() - start
    ok = all(got.values()) and took < 60
    report(1, ok, f"recovered {sum(got.values())}/5 presets in {took:.1f} s")


def test_criterion_2_toy_reproduction():
    cfg = load_cache("toy-fig3")
    tr = run_fine_grained(CacheSim(cfg), PChaseConfig(52, UniformStride(1), 39, preheat=False))
    flags = tr.misses()
    cycles = []
    for c in range(3):
        seg = slice(13 * c, 13 * c + 13)
        cycles.append([int(i) + 1 for i, f in zip(tr.index[seg], flags[seg]) if f])
    period = find_period(flags, 13, skip=13)
    ok = cycles[1:] == [[1, 7, 13], [1, 7, 13]] and period == 13
    report(2, ok, f"missed elements per cycle {cycles[1:]}, period {period}")


def test_criterion_3_fermi_frequencies():
    cfg = load_cache("fermi-L1")
    v = detect_replacement(SimProbe(cfg), cfg.size, cfg.line_size, seeds=3, min_evictions=10_000)
    want = (1 / 6, 1 / 2, 1 / 6, 1 / 6)
    freqs = v.way_frequencies or ()
    ok = (v.evictions >= 10_000 and len(freqs) == 4
          and all(abs(a - b) <= 0.02 for a, b in zip(freqs, want))
          and v.aperiodic_seeds == 3 and v.seeds_tested == 3)
    report(3, ok, f"frequencies {tuple(round(f, 4) for f in freqs)} from {v.evictions} evictions, "
                  f"aperiodic on {v.aperiodic_seeds}/{v.seeds_tested} seeds")


def test_criterion_4_l2_tlb_staircase():
    cfg = load_cache("l2tlb")
    probe = SimProbe(cfg, element_size=TLB_ELEM)
    series = tlb_miss_series(probe, cfg.size, 2 * MB, 7)
    Ns = [n // MB for n, _ in series]
    counts = [m for _, m in series]
    n = 144 * MB // (2 * MB)
    tr = probe(144 * MB, 2 * MB, 20 * n, True)
    all_miss = not tr.data_hit.any()
    layout = infer_tlb_sets(series, 65)
    ok = (Ns == list(range(132, 145, 2)) and counts == [17 + 8 * j for j in range(7)]
          and all_miss and layout == Unequal((17, 8, 8, 8, 8, 8, 8)))
    report(4, ok, f"counts {counts} at N = {Ns[0]}..{Ns[-1]} MB, 100% miss at 144 MB: {all_miss}, "
                  f"layout {layout}")


def _miss_rate(cfg, N, s, passes=4):
    """Exact miss fraction of a preheated walk; N and s in bytes, 4-byte elements."""
    n = N // s
    pc = PChaseConfig(N, UniformStride(s // 4), passes * n)
    tr = run_fine_grained(CacheSim(cfg), pc)
    return Fraction(int((~tr.data_hit).sum()), len(tr))


def test_criterion_5_classic_model_conformity():
    C, b, a = 4096, 64, 4
    T = C // (a * b)
    cfg = CacheConfig(C, b, Uniform(T, a), StandardBits(), LRU())
    bad_saav = []
    for N in (4 * C, 8 * C):
        s = 4
        while s <= N:
            r = _miss_rate(cfg, N, s)
            if r not in (0, Fraction(s, b), 1):
                bad_saav.append((N, s, r))
            s *= 2
    allowed = {Fraction(k, T) for k in range(T + 1)}
    bad_wong = []
    for j in range(T + 1):
        N = C + j * b
        r = _miss_rate(cfg, N, b)
        if r not in allowed:
            bad_wong.append((j, str(r)))
    ok = not bad_saav and not bad_wong
    report(5, ok, f"saavedra off-model points {len(bad_saav)}; wong off-model points {len(bad_wong)} "
                  f"(first: {bad_wong[:3]})")


def test_criterion_6_method_contradiction():
    cfg = load_cache("gtx780-texL1")
    probe = SimProbe(cfg)
    C = 12 * 1024
    strides = [4 << i for i in range(15) if (4 << i) <= 4 * C]
    sav = saavedra_analysis(t_avg_grid(probe, [C // 2, C, 4 * C], strides))
    series = [(N, probe(N, 8, 4 * (N // 8), True).mean_latency)
              for N in range(C - 128, C + C // 4 + 8, 8)]
    wong = wong_analysis(series)
    flags = flag_disagreement(sav, wong)
    ok = (sav.b, sav.T) == (32, 16) and (wong.b, wong.T) == (128, 4) and bool(flags)
    report(6, ok, f"saavedra (b, T) = ({sav.b}, {sav.T}), wong (b, T) = ({wong.b}, {wong.T}), "
                  f"disagreement flagged: {bool(flags)}")


CONFLICT_LATENCY = {
    "gtx560ti": {2: 87, 4: 162, 8: 311, 16: 611, 32: 1209},
    "gtx780": {2: 82, 4: 96, 8: 158, 16: 257, 32: 484},
    "gtx980": {2: 30, 4: 34, 8: 42, 16: 58, 32: 90},
}


def test_criterion_7_bank_conflicts():
    gcd_ok = all(conflict_degree(s, c).degree == gcd(s, 32)
                 for s in range(1, 65) for c in (FERMI_BANKS, MAXWELL_BANKS))
    k2 = (conflict_degree(2, KEPLER_4B).degree, conflict_degree(2, KEPLER_8B).degree)
    k6 = (conflict_degree(6, KEPLER_4B).degree, conflict_degree(6, KEPLER_8B).degree)
    cal_ok = all(conflict_latency(d, dev) == lat for dev, t in CONFLICT_LATENCY.items() for d, lat in t.items())
    mono = all(np.all(np.diff([conflict_latency(d, dev) for d in range(1, 33)]) >= 0) for dev in CONFLICT_LATENCY)
    ok = gcd_ok and k2 == (1, 1) and k6 == (2, 1) and cal_ok and mono
    report(7, ok, f"gcd law {gcd_ok}, kepler stride 2 {k2}, stride 6 {k6}, "
                  f"calibration {cal_ok}, monotone {mono}")


def test_criterion_8_calculators():
    t6 = {"gtx560ti": 134.40, "gtx780": 288.38, "gtx980": 224.38}
    t7 = {"gtx560ti": 60.80, "gtx780": 257.54, "gtx980": 163.84}
    got6 = {d: tp.theoretical_global_bw(load_gpu(d).rates) for d in t6}
    got7 = {d: tp.theoretical_smem_bw(load_gpu(d).rates) for d in t7}
    g = load_gpu("gtx780")
    ww = tp.warp_words_per_cycle(got7["gtx780"], g.rates.f_core)
    warps = tp.required_warps(47, ww, 1)
    ok = (all(abs(got6[d] - t6[d]) <= 0.01 for d in t6)
          and all(abs(got7[d] - t7[d]) <= 0.01 for d in t7) and 90 <= warps <= 98)
    report(8, ok, "global " + ", ".join(f"{got6[d]:.2f}" for d in t6) + "; shared "
                  + ", ".join(f"{got7[d]:.2f}" for d in t7) + f"; GTX780 warps {warps}")


GROUPS = {"P5": "P5/P6", "P6": "P5/P6", "P4": "P4", "P2": "P2/P3", "P3": "P2/P3", "P1": "P1"}


def _phases(patterns):
    out = []
    for p in patterns:
        g = GROUPS[str(p)]
        if not out or out[-1] != g:
            out.append(g)
    return out


def test_criterion_9_latency_spectrum():
    want = ["P5/P6", "P4", "P2/P3", "P1"]
    results = {}
    for dev in list_presets("devices"):
        cfg = load_device(dev)
        tr = run_fine_grained(HierarchySim(cfg), latency_spectrum())
        lat_ok = all(int(t) == cfg.latencies.latency(str(p)) for t, p in zip(tr.latency, tr.pattern))
        results[dev] = (_phases(tr.pattern), lat_ok)
    failed = [d for d, (ph, lat) in results.items() if ph != want or not lat]
    detail = "; ".join(f"{d}: {' -> '.join(ph)}{'' if lat else ' (latency mismatch)'}"
                       for d, (ph, lat) in sorted(results.items()))
    report(9, not failed, detail)
