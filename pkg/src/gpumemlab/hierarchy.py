"""Global-memory load path: data caches, two TLB levels, page-table windows
and an L2 stream prefetcher, with table-driven pattern latencies P1..P6."""
from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction
from typing import Dict, Optional

import numpy as np

from .cache import AddressRangeError, CacheConfig, CacheState, ConfigError

PATTERNS = ("P1", "P2", "P3", "P4", "P5", "P6")


class ClassificationError(ValueError):
    """Per-level hit bits match no row of the latency table."""


@dataclass(frozen=True)
class LatencyTable:
    pattern_latency: Dict[str, Optional[int]]
    # decomposed per-level constants, e.g. {"l2": {"t0": .., "tm": ..}}
    levels: Dict[str, Dict[str, int]] = field(default_factory=dict)

    def __post_init__(self):
        pl = {p: self.pattern_latency.get(p) for p in PATTERNS}
        extra = set(self.pattern_latency) - set(PATTERNS)
        if extra:
            raise ConfigError(f"unknown patterns {sorted(extra)}")
        for p, v in pl.items():
            if v is not None and v <= 0:
                raise ConfigError(f"latency for {p} must be > 0")
        defined = [v for v in pl.values() if v is not None]
        if len(defined) == 6 and defined != sorted(defined):
            raise ConfigError("pattern latencies must satisfy P1 <= ... <= P6")
        object.__setattr__(self, "pattern_latency", pl)

    def latency(self, pattern: str) -> int:
        v = self.pattern_latency[pattern]
        if v is None:
            raise ClassificationError(f"pattern {pattern} has no latency on this device")
        return v


@dataclass(frozen=True)
class PrefetchConfig:
    enabled: bool = True
    span_fraction_of_l2: Fraction = Fraction(2, 3)
    direction: str = "sequential-forward"

    def __post_init__(self):
        f = Fraction(self.span_fraction_of_l2)
        object.__setattr__(self, "span_fraction_of_l2", f)
        if not 0 < f <= 1:
            raise ConfigError("prefetch span fraction must be in (0, 1]")
        if self.direction != "sequential-forward":
            raise ConfigError("only sequential-forward prefetch is modelled")


@dataclass(frozen=True)
class HierarchyConfig:
    name: str
    l2_data: CacheConfig
    l1_tlb: CacheConfig
    l2_tlb: CacheConfig
    latencies: LatencyTable
    l1_data: Optional[CacheConfig] = None
    l1_enabled: bool = False
    l1_bypasses_tlb: bool = False
    texture_l1: Optional[CacheConfig] = None
    page_size: int = 2 << 20
    activation_window: int = 512 << 20
    dram_size: int = 1 << 30
    prefetcher: PrefetchConfig = field(default_factory=PrefetchConfig)
    clock_overhead_cycles: int = 0
    dep_chain_overhead_cycles: int = 0

    def __post_init__(self):
        if self.page_size <= 0:
            raise ConfigError("page_size must be > 0")
        if self.activation_window <= 0 or self.activation_window % self.page_size:
            raise ConfigError("activation_window must be a positive multiple of page_size")
        if self.dram_size <= 0:
            raise ConfigError("dram_size must be > 0")
        if self.l1_enabled and self.l1_data is None:
            raise ConfigError("l1_enabled requires an l1_data cache")


@dataclass(frozen=True)
class LatencySample:
    latency_cycles: int
    pattern: str
    data_hit: bool
    l1_tlb_hit: Optional[bool]
    l2_tlb_hit: Optional[bool]
    page_switch: bool


def classify(data_hit: bool, l1_tlb_hit: Optional[bool], l2_tlb_hit: Optional[bool],
             page_switch: bool = False) -> str:
    """Map per-level outcomes to P1..P6.

    ``l2_tlb_hit`` is None when the L1 TLB hit (L2 TLB not consulted);
    ``l1_tlb_hit`` is None only when the TLBs were bypassed entirely.
    """
    if l1_tlb_hit is None:
        if data_hit and l2_tlb_hit is None and not page_switch:
            return "P1"
        raise ClassificationError("TLBs can only be bypassed on a data-cache hit")
    if l1_tlb_hit and l2_tlb_hit is not None:
        raise ClassificationError("L2 TLB outcome given although the L1 TLB hit")
    if not l1_tlb_hit and l2_tlb_hit is None:
        raise ClassificationError("L1 TLB missed but no L2 TLB outcome given")
    if page_switch and (data_hit or l1_tlb_hit or l2_tlb_hit):
        raise ClassificationError("page-table switch requires misses at every level")
    if data_hit:
        if l1_tlb_hit:
            return "P1"
        return "P2" if l2_tlb_hit else "P3"
    if l1_tlb_hit:
        return "P4"
    if l2_tlb_hit:
        raise ClassificationError("data miss with L1 TLB miss and L2 TLB hit has no latency row")
    return "P6" if page_switch else "P5"


class HierarchySim:
    """Stateful load path built from a :class:`HierarchyConfig`.

    Single-threaded; results depend only on (config, seed, address sequence).
    """

    def __init__(self, cfg: HierarchyConfig, seed: int = 0):
        self.cfg = cfg
        self.seed = seed
        self.l1 = CacheState(cfg.l1_data, seed) if cfg.l1_enabled else None
        self.l2 = CacheState(cfg.l2_data, seed + 1)
        self.l1_tlb = CacheState(cfg.l1_tlb, seed + 2)
        self.l2_tlb = CacheState(cfg.l2_tlb, seed + 3)
        self.active_windows = {0}
        line = cfg.l2_data.line_size
        self._pf_lines = int(cfg.prefetcher.span_fraction_of_l2 * cfg.l2_data.size) // line
        self._pf_window = None  # (first, last) L2 line, inclusive

    def _l2_load(self, addr: int) -> bool:
        hit = self.l2.access(addr).hit
        if hit or not self.cfg.prefetcher.enabled:
            return hit
        line = addr // self.cfg.l2_data.line_size
        w = self._pf_window
        if w is not None and w[0] <= line <= w[1]:
            return True
        # demand miss: stream forward over the configured span, never past
        # the end of the current activation window
        per_window = self.cfg.activation_window // self.cfg.l2_data.line_size
        end = (line // per_window + 1) * per_window - 1
        self._pf_window = (line + 1, min(line + self._pf_lines, end))
        return False

    def load(self, addr: int) -> LatencySample:
        cfg = self.cfg
        addr = int(addr)
        if not 0 <= addr < cfg.dram_size:
            raise AddressRangeError(f"address {addr:#x} beyond DRAM size {cfg.dram_size:#x}")
        lat = cfg.latencies
        if self.l1 is not None and cfg.l1_bypasses_tlb:
            if self.l1.access(addr).hit:
                return LatencySample(lat.latency("P1"), "P1", True, None, None, False)
            l1_hit = False
        else:
            l1_hit = None

        window = addr // cfg.activation_window
        page_switch = window not in self.active_windows
        if page_switch:
            self.active_windows.add(window)
        t1 = self.l1_tlb.access(addr).hit
        t2 = None if t1 else self.l2_tlb.access(addr).hit

        if self.l1 is not None:
            if l1_hit is None:
                l1_hit = self.l1.access(addr).hit
            if not l1_hit:
                self._l2_load(addr)
            data_hit = l1_hit
        else:
            data_hit = self._l2_load(addr)
        pattern = classify(data_hit, t1, t2, page_switch)
        return LatencySample(lat.latency(pattern), pattern, data_hit, t1, t2, page_switch)

    def preheat(self, addrs):
        """Untimed traversal: warms every structure, records nothing."""
        for a in addrs:
            self.load(a)

    def load_many(self, addrs):
        """Load a sequence; return dict of per-access arrays."""
        n = len(addrs)
        out = {
            "latency": np.empty(n, dtype=np.int64),
            "pattern": np.empty(n, dtype="<U2"),
            "data_hit": np.empty(n, dtype=np.bool_),
            "l1_tlb_hit": np.empty(n, dtype=np.int8),
            "l2_tlb_hit": np.empty(n, dtype=np.int8),
            "page_switch": np.empty(n, dtype=np.bool_),
        }
        for i, a in enumerate(addrs):
            s = self.load(a)
            out["latency"][i] = s.latency_cycles
            out["pattern"][i] = s.pattern
            out["data_hit"][i] = s.data_hit
            out["l1_tlb_hit"][i] = -1 if s.l1_tlb_hit is None else int(s.l1_tlb_hit)
            out["l2_tlb_hit"][i] = -1 if s.l2_tlb_hit is None else int(s.l2_tlb_hit)
            out["page_switch"][i] = s.page_switch
        return out


def preset(device: str) -> HierarchyConfig:
    """Load a shipped device preset (GTX560Ti-L1on, GTX780, GTX980-L1off, ...)."""
    from .presets import load_device

    return load_device(device)
