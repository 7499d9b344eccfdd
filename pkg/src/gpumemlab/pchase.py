"""Pointer-chase arrays, traversal against a simulator, and traces.

A chase array ``A`` stores at element ``i`` the index of the next element to
visit.  Walks always start at element 0.  Latencies recorded in simulated
traces are net of timing overhead; ingested hardware traces are corrected on
read (see :mod:`gpumemlab.traceio`).
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Dict, Optional, Sequence, Tuple, Union

import numpy as np

from . import kernels
from .cache import CacheConfig, CacheState

DENSE_LIMIT = 1 << 24
MAX_TRACE_RECORDS = 50_000_000


class WalkError(ValueError):
    """A segmented walk collides with itself or leaves the array."""


class TraceLengthError(ValueError):
    """Requested iterations exceed the trace-length guard."""


@dataclass(frozen=True)
class UniformStride:
    stride: int  # elements


@dataclass(frozen=True)
class Segment:
    start: int
    stride: int
    hops: int


@dataclass(frozen=True)
class Segmented:
    segments: Tuple[Segment, ...]
    loop_to: Optional[int] = None  # default: start of the last segment
    name: str = ""

    def __post_init__(self):
        segs = tuple(s if isinstance(s, Segment) else Segment(*s) for s in self.segments)
        object.__setattr__(self, "segments", segs)


InitPattern = Union[UniformStride, Segmented]


@dataclass(frozen=True)
class PChaseConfig:
    array_size: int          # bytes
    init: InitPattern
    iterations: int
    element_size: int = 4
    preheat: bool = True

    def __post_init__(self):
        if self.element_size <= 0 or self.array_size <= 0:
            raise ValueError("array and element sizes must be positive")
        if self.array_size % self.element_size:
            raise ValueError("array_size must be a multiple of element_size")
        if self.iterations < 1:
            raise ValueError("iterations must be >= 1")
        if isinstance(self.init, UniformStride) and self.init.stride < 0:
            raise ValueError("stride must be >= 0")

    @property
    def num_elements(self) -> int:
        return self.array_size // self.element_size


class SparseChase:
    """Successor map for walks over arrays too large to materialise."""

    def __init__(self, num_elements: int, successors: Dict[int, int]):
        self.num_elements = num_elements
        self.successors = successors

    def __len__(self):
        return self.num_elements

    def __getitem__(self, i):
        return self.successors[int(i)]

    def to_dense(self, fill=-1):
        out = np.full(self.num_elements, fill, dtype=np.int64)
        for k, v in self.successors.items():
            out[k] = v
        return out


def _segmented_successors(n: int, pat: Segmented) -> Dict[int, int]:
    if not pat.segments:
        raise WalkError("no segments")
    succ: Dict[int, int] = {}

    def link(a, b):
        if not 0 <= b < n:
            raise WalkError(f"walk escapes the array: {a} -> {b} (n={n})")
        if succ.get(a, b) != b:
            raise WalkError(f"element {a} already points to {succ[a]}, cannot also point to {b}")
        succ[a] = b

    cur = 0
    if pat.segments[0].start != 0:
        raise WalkError("walk must start at element 0")
    for seg in pat.segments:
        if seg.start != cur:
            raise WalkError(f"segment starts at {seg.start} but walk is at {cur}")
        if seg.hops < 0:
            raise WalkError("negative hop count")
        for _ in range(seg.hops):
            link(cur, cur + seg.stride)
            cur += seg.stride
    loop = pat.segments[-1].start if pat.loop_to is None else pat.loop_to
    if loop not in succ and loop != 0:
        raise WalkError(f"loop target {loop} is not on the walk")
    link(cur, loop)
    return succ


def init_array(cfg: PChaseConfig):
    """Build the chase array: ``A[i] = (i + s) mod n`` for uniform strides,
    or a :class:`SparseChase` for segmented walks."""
    n = cfg.num_elements
    if isinstance(cfg.init, UniformStride):
        return (np.arange(n, dtype=np.int64) + cfg.init.stride) % n
    return SparseChase(n, _segmented_successors(n, cfg.init))


def _walk(cfg: PChaseConfig, k: int, chase=None) -> np.ndarray:
    n = cfg.num_elements
    if isinstance(cfg.init, UniformStride):
        if n <= DENSE_LIMIT:
            arr = init_array(cfg) if chase is None else chase
            return kernels.walk_chase(arr, 0, k)
        s = cfg.init.stride % n
        return (np.arange(k, dtype=np.int64) * s) % n
    chase = init_array(cfg) if chase is None else chase
    # path into the loop, then the loop itself, repeated
    order, seen = [], {}
    j = 0
    while j not in seen:
        seen[j] = len(order)
        order.append(j)
        j = chase[j]
    head = np.asarray(order[: seen[j]], dtype=np.int64)
    loop = np.asarray(order[seen[j]:], dtype=np.int64)
    if k <= len(head):
        return head[:k]
    reps = -(-(k - len(head)) // len(loop))
    return np.concatenate([head, np.tile(loop, reps)])[:k]


def pass_length(cfg: PChaseConfig) -> int:
    """Accesses in one full traversal (path plus one trip round the loop)."""
    if isinstance(cfg.init, UniformStride):
        n = cfg.num_elements
        return n // math.gcd(n, cfg.init.stride % n or n)
    succ = init_array(cfg)
    seen, j = set(), 0
    while j not in seen:
        seen.add(j)
        j = succ[j]
    return len(seen)


@dataclass
class TraceMeta:
    source: str = "simulated"          # simulated | ingested
    device: str = ""
    target: str = ""
    array_size: int = 0
    element_size: int = 4
    init: str = ""                      # "uniform:<s>" or "segments:<spec>"
    iterations: int = 0
    preheat: bool = True
    seed: Optional[int] = None
    overhead_applied: bool = True
    clock_overhead: int = 0
    dep_chain_overhead: int = 0


@dataclass
class Trace:
    """Per-access records: visited element index and latency in cycles."""

    index: np.ndarray
    latency: np.ndarray
    meta: TraceMeta = field(default_factory=TraceMeta)
    data_hit: Optional[np.ndarray] = None
    l1_tlb_hit: Optional[np.ndarray] = None   # int8: 1, 0, or -1 (not consulted)
    l2_tlb_hit: Optional[np.ndarray] = None
    pattern: Optional[np.ndarray] = None

    def __len__(self):
        return len(self.index)

    @property
    def iteration(self) -> np.ndarray:
        return np.arange(len(self.index), dtype=np.int64)

    def misses(self, threshold: Optional[float] = None) -> np.ndarray:
        """Boolean miss flags: exact when simulated, else latency threshold."""
        if self.data_hit is not None and threshold is None:
            return ~self.data_hit
        if threshold is None:
            threshold = miss_threshold(self.latency)
        return self.latency > threshold

    @property
    def mean_latency(self) -> float:
        return float(self.latency.mean())


def miss_threshold(latency) -> float:
    """Midpoint between the two lowest latency clusters (1-D 2-means).

    With a single cluster the threshold sits above every sample.
    """
    x = np.sort(np.asarray(latency, dtype=np.float64))
    lo, hi = x[0], x[-1]
    if hi == lo:
        return float(hi)
    c0, c1 = lo, hi
    for _ in range(100):
        mid = (c0 + c1) / 2
        a, b = x[x <= mid], x[x > mid]
        n0, n1 = a.mean(), b.mean()
        if n0 == c0 and n1 == c1:
            break
        c0, c1 = n0, n1
    # refine toward the two lowest clusters
    low = x[x <= (c0 + c1) / 2]
    rest = x[x > (c0 + c1) / 2]
    return float((low.max() + rest.min()) / 2)


class CacheSim:
    """One cache plus fixed hit latency and miss penalty (``t0``, ``tm``)."""

    def __init__(self, cfg: CacheConfig, seed: Optional[int] = None):
        self.cfg = cfg
        self.seed = seed
        self.state = CacheState(cfg, seed)

    def preheat(self, addrs):
        self.state.preheat(addrs)

    def load_many(self, addrs):
        r = self.state.access_many(addrs)
        lat = self.cfg.hit_latency + self.cfg.miss_penalty * (~r.hit).astype(np.int64)
        return {"latency": lat, "data_hit": r.hit}

    def describe(self):
        return {"target": self.cfg.name, "device": ""}


def init_spec(init: InitPattern) -> str:
    if isinstance(init, UniformStride):
        return f"uniform:{init.stride}"
    body = ";".join(f"{s.start}/{s.stride}/{s.hops}" for s in init.segments)
    loop = "" if init.loop_to is None else f"@{init.loop_to}"
    return f"segments:{body}{loop}"


def parse_init_spec(text: str) -> InitPattern:
    kind, _, body = text.partition(":")
    if kind == "uniform":
        return UniformStride(int(body))
    if kind == "segments":
        body, _, loop = body.partition("@")
        segs = tuple(Segment(*(int(v) for v in part.split("/"))) for part in body.split(";") if part)
        return Segmented(segs, int(loop) if loop else None)
    raise ValueError(f"bad init spec {text!r}")


def run_fine_grained(sim, cfg: PChaseConfig, max_records: int = MAX_TRACE_RECORDS) -> Trace:
    """Traverse the chase array ``cfg.iterations`` times, recording every access."""
    k = cfg.iterations
    if k > max_records:
        raise TraceLengthError(f"k={k} exceeds the trace-length cap {max_records}")
    chase = init_array(cfg) if cfg.num_elements <= DENSE_LIMIT or isinstance(cfg.init, Segmented) else None
    if cfg.preheat:
        pre = _walk(cfg, pass_length(cfg), chase)
        sim.preheat(pre * cfg.element_size)
    idx = _walk(cfg, k, chase)
    res = sim.load_many(idx * cfg.element_size)
    hcfg = getattr(sim, "cfg", None)
    meta = TraceMeta(
        source="simulated",
        array_size=cfg.array_size,
        element_size=cfg.element_size,
        init=init_spec(cfg.init),
        iterations=k,
        preheat=cfg.preheat,
        seed=getattr(sim, "seed", None),
        overhead_applied=True,
        clock_overhead=getattr(hcfg, "clock_overhead_cycles", 0),
        dep_chain_overhead=getattr(hcfg, "dep_chain_overhead_cycles", 0),
    )
    if isinstance(sim, CacheSim):
        meta.target = sim.cfg.name
    else:
        meta.device = getattr(hcfg, "name", "")
    return Trace(
        index=idx, latency=np.asarray(res["latency"], dtype=np.int64), meta=meta,
        data_hit=res.get("data_hit"), l1_tlb_hit=res.get("l1_tlb_hit"),
        l2_tlb_hit=res.get("l2_tlb_hit"), pattern=res.get("pattern"))


def run_classic(sim, cfg: PChaseConfig) -> float:
    """Average latency over ``k`` accesses: total cycles / iterations."""
    return run_fine_grained(sim, cfg).mean_latency


# -- the segmented latency-spectrum walk -------------------------------------

PAGE = 2 << 20
MB = 1 << 20
# L1 line offsets for the target lines; avoids set 0 of both the 32-set
# Fermi L1 (bits 7-11) and the 4-set Maxwell L1 (bits 7-8)
_TARGET_LINE_SLOTS = (1, 2, 3, 5, 6, 7, 9, 10)


def latency_spectrum(targets: int = 8, flush: int = 200, p1_repeats: int = 2) -> PChaseConfig:
    """Walk visiting every global-memory access pattern in phase order.

    0. element 0 on a page of its own (P5);
    1. ``targets`` cold lines, one per page, 4 MB apart (P5/P6);
    2. ``flush`` cold lines one per page, 4 MB apart, all in cache set 0,
       pushing the target pages out of both TLBs (P5/P6);
    3. eight lines descending by 64 KB inside the last flush page: L1 TLB hit,
       data miss (P4);
    4. a second element of every target line: data hit, TLB miss (P2/P3);
    5. the remaining elements of the last target line, looped (P1).
    """
    if not 1 <= targets <= len(_TARGET_LINE_SLOTS):
        raise ValueError(f"targets must be in 1..{len(_TARGET_LINE_SLOTS)}")
    stride = 2 * PAGE
    # the walk starts at element 0, which gets a page of its own
    addrs = [(i + 1) * stride + 128 * _TARGET_LINE_SLOTS[i] for i in range(targets)]
    base = (targets + 1) * stride
    flush_off = 3 * MB // 2
    addrs += [base + j * stride + flush_off for j in range(flush)]
    last = addrs[-1]
    addrs += [last - 64 * 1024 * j for j in range(1, 9)]
    addrs += [a + 4 for a in addrs[:targets]]
    tail = addrs[targets - 1]
    addrs.insert(0, 0)
    loop = [tail + 4 * e for e in range(2, 8)]
    addrs += loop
    idx = [a // 4 for a in addrs]
    segs = tuple(Segment(a, b - a, 1) for a, b in zip(idx, idx[1:]))
    size = (max(addrs) // PAGE + 1) * PAGE
    k = len(addrs) + (p1_repeats - 1) * len(loop)
    return PChaseConfig(size, Segmented(segs, loop_to=loop[0] // 4, name="latency-spectrum"),
                        iterations=k, preheat=False)


NAMED_PATTERNS = {"latency-spectrum": latency_spectrum}
