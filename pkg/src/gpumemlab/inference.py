"""Cache-parameter recovery from P-chase traces.

All searches talk to a *probe*: a callable ``probe(N, s, k, preheat=True,
seed=0) -> Trace`` with ``N`` and ``s`` in bytes.  :class:`SimProbe` runs a
simulated cache; :class:`TraceDirProbe` replays a directory of trace files.
"""
from __future__ import annotations

import math
import warnings
from collections import Counter
from dataclasses import dataclass, field
from fractions import Fraction
from pathlib import Path
from typing import Dict, List, Optional, Sequence, Tuple, Union

import numpy as np

from . import kernels
from .cache import CacheConfig, Unequal, Uniform
from .pchase import (CacheSim, PChaseConfig, Trace, UniformStride, parse_init_spec,
                     run_fine_grained)

KB, MB = 1 << 10, 1 << 20
DEFAULT_FLOOR = 1 * KB
DEFAULT_CEILING = 256 * MB


class InferenceError(RuntimeError):
    """The traces do not support a conclusion."""


class CoverageError(InferenceError):
    """A trace directory lacks a run the search needs."""

    def __init__(self, missing):
        self.missing = list(missing)
        rows = ", ".join(f"(N={n}, s={s}, preheat={p})" for n, s, p in self.missing)
        super().__init__(f"insufficient trace coverage; missing runs: {rows}")


class IrregularMappingError(InferenceError):
    pass


# -- probes ------------------------------------------------------------------

class SimProbe:
    """Fresh simulated cache per query; queries are memoised."""

    def __init__(self, cfg: CacheConfig, element_size: int = 4, seed: int = 0):
        self.cfg = cfg
        self.element_size = element_size
        self.seed = seed
        self.queries = 0
        self._memo: Dict[tuple, Trace] = {}

    def __call__(self, N: int, s: int, k: int, preheat: bool = True, seed: int = 0) -> Trace:
        key = (N, s, k, preheat, seed)
        if key not in self._memo:
            e = self.element_size
            if N % e or s % e:
                raise ValueError(f"N={N} and s={s} must be multiples of the element size {e}")
            cfg = PChaseConfig(N, UniformStride(s // e), k, e, preheat)
            self.queries += 1
            self._memo[key] = run_fine_grained(CacheSim(self.cfg, self.seed + seed), cfg)
        return self._memo[key]


class RecordingProbe:
    """Wraps a probe and keeps every trace it returns (for export)."""

    def __init__(self, inner):
        self.inner = inner
        self.element_size = inner.element_size
        self.traces: Dict[tuple, Trace] = {}

    def __call__(self, N, s, k, preheat=True, seed=0):
        tr = self.inner(N, s, k, preheat, seed)
        self.traces[(N, s, k, preheat, seed)] = tr
        return tr

    def export(self, directory) -> List[Path]:
        from .traceio import write_trace

        d = Path(directory)
        d.mkdir(parents=True, exist_ok=True)
        out = []
        for (N, s, k, pre, seed), tr in sorted(self.traces.items()):
            p = d / f"N{N}_s{s}_k{k}_{'pre' if pre else 'cold'}_seed{seed}.csv"
            tr.meta.seed = seed
            write_trace(tr, p)
            out.append(p)
        return out


class TraceDirProbe:
    """Answers queries from trace files, matched on (N, s, preheat, seed).

    When the file holds more iterations than asked for, the trace is cut to
    ``k``; when it holds fewer, the shorter trace is returned as is.
    """

    def __init__(self, directory, element_size: Optional[int] = None):
        from .traceio import read_trace

        self.directory = Path(directory)
        self.runs: Dict[tuple, List[Trace]] = {}
        sizes = set()
        for p in sorted(self.directory.glob("*.csv")):
            tr = read_trace(p)
            init = parse_init_spec(tr.meta.init)
            if not isinstance(init, UniformStride):
                continue
            e = tr.meta.element_size
            sizes.add(e)
            key = (tr.meta.array_size, init.stride * e, tr.meta.preheat)
            self.runs.setdefault(key, []).append(tr)
        for v in self.runs.values():
            v.sort(key=lambda t: (t.meta.seed is None, t.meta.seed or 0, -len(t)))
        if element_size is None:
            if len(sizes) > 1:
                raise InferenceError(f"mixed element sizes {sorted(sizes)} in {self.directory}")
            element_size = sizes.pop() if sizes else 4
        self.element_size = element_size
        self.missing: List[tuple] = []

    def __call__(self, N, s, k, preheat=True, seed=0):
        runs = self.runs.get((N, s, preheat))
        if not runs:
            self.missing.append((N, s, preheat))
            raise CoverageError([(N, s, preheat)])
        tr = runs[seed % len(runs)]
        if len(tr) <= k:
            return tr
        return Trace(tr.index[:k], tr.latency[:k], tr.meta,
                     None if tr.data_hit is None else tr.data_hit[:k])


# -- helpers -----------------------------------------------------------------

def miss_flags(trace: Trace) -> np.ndarray:
    return np.asarray(trace.misses(), dtype=np.bool_)


def find_period(flags, max_period: int, skip: int = 0, periods: int = 4) -> Optional[int]:
    """Smallest p <= max_period with exact shift invariance by p over the
    last ``periods`` * max_period records, never reaching back into the
    first ``skip`` records.  Shorter traces use what is left after ``skip``
    as long as that spans at least two periods."""
    seq = np.asarray(flags, dtype=np.int8)
    lo = max(skip, len(seq) - periods * max_period)
    if len(seq) - lo < 2 * max_period:
        raise InferenceError("trace too short for the period test")
    for p in range(1, max_period + 1):
        if kernels.shift_invariant(seq, lo, p):
            return p
    return None


def estimate_miss_rate(t_avg: float, t0: float, tm: float) -> float:
    """Invert t_avg = t0 + tm * r."""
    if tm == 0:
        raise ValueError("miss penalty tm must be non-zero")
    r = (t_avg - t0) / tm
    if r < 0 or r > 1:
        warnings.warn(f"miss rate {r:.4g} outside [0, 1]; clamped", RuntimeWarning, stacklevel=2)
        r = min(max(r, 0.0), 1.0)
    return r


@dataclass
class MissRatePoint:
    N: int
    s: int
    miss_rate: float
    miss_count: int
    t_avg: float


@dataclass
class InferredParams:
    cache_size: int
    line_size: int
    num_sets: int
    ways: Tuple[int, ...]
    policy_class: str
    periodic: bool
    way_replacement_freq: Optional[Tuple[float, ...]] = None
    evidence: Dict[str, list] = field(default_factory=dict)
    notes: List[str] = field(default_factory=list)

    @property
    def layout(self):
        if len(set(self.ways)) == 1:
            return Uniform(self.num_sets, self.ways[0])
        return Unequal(self.ways)

    @property
    def associativity(self):
        return self.ways[0] if len(set(self.ways)) == 1 else self.ways

    def to_dict(self):
        lay = self.layout
        return {
            "cache_size": self.cache_size,
            "line_size": self.line_size,
            "num_sets": self.num_sets,
            "ways_per_set": list(self.ways),
            "layout": "uniform" if isinstance(lay, Uniform) else "unequal",
            "policy_class": self.policy_class,
            "periodic": self.periodic,
            "way_replacement_freq": None if self.way_replacement_freq is None
            else [round(f, 6) for f in self.way_replacement_freq],
            "evidence": self.evidence,
            "notes": self.notes,
        }


# -- step 1: cache size -------------------------------------------------------

def _one_pass_misses(probe, N, passes=1):
    e = probe.element_size
    tr = probe(N, e, passes * (N // e), True)
    return int(miss_flags(tr).sum())


def find_cache_size(probe, floor: int = DEFAULT_FLOOR, ceiling: int = DEFAULT_CEILING,
                    evidence: Optional[list] = None) -> int:
    """Largest N (element granularity) whose post-preheat pass never misses."""
    e = probe.element_size
    ev = evidence if evidence is not None else []
    floor = max(e, floor - floor % e)

    def fits(N):
        m = _one_pass_misses(probe, N)
        ev.append({"N": N, "s": e, "misses": m})
        return m == 0

    if not fits(floor):
        raise InferenceError(f"misses already at the search floor N={floor}")
    lo, hi = floor, None
    while hi is None:
        nxt = min(lo * 2, ceiling - ceiling % e)
        if nxt <= lo:
            raise InferenceError(f"no miss observed up to {ceiling} bytes: cache larger than search bound")
        if fits(nxt):
            lo = nxt
        else:
            hi = nxt
    while hi - lo > e:
        mid = lo + ((hi - lo) // e // 2) * e
        if fits(mid):
            lo = mid
        else:
            hi = mid
    return lo


# -- step 2: line size --------------------------------------------------------

def find_line_size(probe, C: int, passes: int = 16, max_line: Optional[int] = None,
                   evidence: Optional[list] = None) -> Tuple[int, bool]:
    """Grow N past C one element at a time; the line size is the distance
    between the first appended element and the next appended element that
    ever misses.  Also returns whether the N = C + e trace was periodic."""
    e = probe.element_size
    ev = evidence if evidence is not None else []
    max_line = max_line or C
    periodic = None
    for x in range(1, max_line // e + 2):
        N = C + x * e
        n = N // e
        tr = probe(N, e, passes * n, True)
        flags = miss_flags(tr)
        newest = C // e + x - 1
        missed = bool(flags[tr.index == newest].any())
        ev.append({"N": N, "s": e, "misses": int(flags.sum()), "new_element_missed": missed})
        if x == 1:
            periodic = _is_periodic(flags, n)
            continue
        if missed:
            return (x - 1) * e, periodic
    raise InferenceError(f"no line boundary found within {max_line} bytes beyond C")


def _is_periodic(flags, n):
    try:
        p = find_period(flags, n, skip=0)
    except InferenceError:
        return False
    return p is not None and n % p == 0


# -- step 3: number of sets ---------------------------------------------------

def _distinct_missed(probe, N, s, passes, preheat=True):
    tr = probe(N, s, passes * (N // s), preheat)
    flags = miss_flags(tr)
    return len(np.unique(tr.index[flags]))


def find_num_sets(probe, C: int, b: int, passes: int = 512,
                  evidence: Optional[list] = None) -> Tuple[int, Tuple[int, ...]]:
    """Add one line at a time.  A line that lands in a fresh set makes every
    line of that set miss, so the count of distinct missed lines jumps by
    ways + 1; a line joining an already-overflowing set adds one."""
    ev = evidence if evidence is not None else []
    ways: List[int] = []
    prev = 0
    for j in range(1, C // b + 1):
        N = C + j * b
        m = _distinct_missed(probe, N, b, passes)
        ev.append({"N": N, "s": b, "distinct_missed_lines": m})
        inc = m - prev
        if inc < 0:
            raise IrregularMappingError(f"missed-line count fell from {prev} to {m} at N={N}")
        if inc >= 2:
            ways.append(inc - 1)
        elif j == 1:
            raise IrregularMappingError(f"first overflow line produced {m} missed lines")
        prev = m
        if m == N // b:
            return len(ways), tuple(ways)
    raise InferenceError("access stream never reached all-miss")


def tlb_miss_series(probe, C: int, b: int, steps: int, passes: int = 64) -> List[Tuple[int, int]]:
    """(N, missed entries) for N = C + j*b, j = 1..steps, at s = b.

    Missed entries count the distinct missed pages minus the pages beyond
    the TLB reach, i.e. the resident entries that were displaced.
    """
    out = []
    for j in range(1, steps + 1):
        N = C + j * b
        out.append((N, _distinct_missed(probe, N, b, passes) - j))
    return out


def infer_tlb_sets(series: Sequence[Tuple[int, int]], total_entries: int):
    """Set layout from a TLB miss series: the first count is the first
    set's ways, later constant increments the ways of each further set."""
    counts = [m for _, m in series]
    if not counts or counts[0] <= 0:
        raise InferenceError("series shows no missed entries")
    incs = [b - a for a, b in zip(counts, counts[1:])]
    ways = [counts[0]]
    for i, inc in enumerate(incs):
        if counts[i] >= total_entries:
            break
        ways.append(inc)
    tail = ways[1:]
    if tail and len(set(tail)) > 1:
        raise InferenceError(f"layout not two-tier; raw increments {incs}")
    if sum(ways) != total_entries:
        raise InferenceError(f"series covers {sum(ways)} of {total_entries} entries; extend it")
    if len(set(ways)) == 1:
        return Uniform(len(ways), ways[0])
    return Unequal(tuple(ways))


# -- step 4: replacement policy ----------------------------------------------

@dataclass
class ReplacementVerdict:
    policy_class: str
    period: Optional[int]
    aperiodic_seeds: int
    seeds_tested: int
    way_frequencies: Optional[Tuple[float, ...]]
    evictions: int


def reconstruct_evictions(index: np.ndarray, flags: np.ndarray, pass_len: int):
    """Tally evictions per way for a cold-start run with exactly one
    overflowing set.

    The set's lines are those that miss after the first pass.  Cold fills
    take ways 0, 1, ... in first-touch order; from then on exactly one set
    line is absent, so the line displaced by each miss is the next line to
    miss, and the incoming line inherits the displaced line's way.
    """
    after = set(np.unique(index[pass_len:][flags[pass_len:]]).tolist())
    if len(after) < 2:
        raise InferenceError("no steady-state misses to reconstruct evictions from")
    set_misses = [int(i) for i, f in zip(index, flags) if f and int(i) in after]
    ways = len(after) - 1
    way_of: Dict[int, int] = {}
    order = [i for i in dict.fromkeys(set_misses)]
    for w, line in enumerate(order[:ways]):
        way_of[line] = w
    tally: Counter = Counter()
    start = len(order[:ways])
    for cur, nxt in zip(set_misses[start:], set_misses[start + 1:]):
        w = way_of.get(nxt)
        if w is None:
            raise IrregularMappingError("eviction chain broken; more than one set overflows")
        tally[w] += 1
        way_of[cur] = w
        del way_of[nxt]
    return tally, ways


def detect_replacement(probe, C: int, b: int, seeds: int = 3, min_evictions: int = 10_000,
                       passes: int = 200, evidence: Optional[list] = None) -> ReplacementVerdict:
    """LRU iff the cold-start run at N = C + b is periodic with the pass
    length and every overflowing-set line misses on every pass."""
    ev = evidence if evidence is not None else []
    N = C + b
    n = N // b
    tr = probe(N, b, passes * n, False, 0)
    flags = miss_flags(tr)
    period = find_period(flags, n, skip=n)
    ev.append({"N": N, "s": b, "k": len(tr), "seed": 0, "period": period})
    if period is not None and n % period == 0:
        steady = flags[n:]
        lines = np.unique(tr.index[n:][steady])
        per_pass = steady.reshape(-1, n)[:, :].sum(axis=1) if len(steady) % n == 0 else None
        if per_pass is not None and len(lines) and (per_pass == len(lines)).all():
            return ReplacementVerdict("LRU", period, 0, 1, None, 0)
    aperiodic = int(period is None)
    for sd in range(1, seeds):
        t = probe(N, b, passes * n, False, sd)
        p = find_period(miss_flags(t), n, skip=n)
        ev.append({"N": N, "s": b, "k": len(t), "seed": sd, "period": p})
        aperiodic += int(p is None)
    k = passes * n
    while True:
        tr = probe(N, b, k, False, 0)
        tally, ways = reconstruct_evictions(tr.index, miss_flags(tr), n)
        total = sum(tally.values())
        if total >= min_evictions or len(tr) < k:
            break
        k = int(k * max(2.0, 1.2 * min_evictions / max(total, 1)))
    ev.append({"N": N, "s": b, "k": len(tr), "seed": 0, "evictions": total})
    freqs = tuple(tally[w] / total for w in range(ways)) if total else None
    return ReplacementVerdict("non-LRU", period, aperiodic, seeds, freqs, total)


# -- the full pipeline --------------------------------------------------------

def run_pipeline(probe, floor: int = DEFAULT_FLOOR, ceiling: int = DEFAULT_CEILING,
                 seeds: int = 3, min_evictions: int = 10_000) -> InferredParams:
    ev: Dict[str, list] = {"cache_size": [], "line_size": [], "num_sets": [], "replacement": []}
    C = find_cache_size(probe, floor, ceiling, ev["cache_size"])
    b, periodic = find_line_size(probe, C, evidence=ev["line_size"])
    T, ways = find_num_sets(probe, C, b, evidence=ev["num_sets"])
    notes = []
    if sum(ways) * b != C:
        notes.append(f"sum of ways * b = {sum(ways) * b} differs from C = {C}")
    verdict = detect_replacement(probe, C, b, seeds=seeds, min_evictions=min_evictions,
                                 evidence=ev["replacement"])
    if verdict.policy_class == "non-LRU":
        notes.append(f"aperiodic on {verdict.aperiodic_seeds}/{verdict.seeds_tested} seeds; "
                     f"{verdict.evictions} reconstructed evictions")
    return InferredParams(C, b, T, ways, verdict.policy_class, periodic,
                          verdict.way_frequencies, ev, notes)


def params_match(p: InferredParams, cfg: CacheConfig) -> bool:
    """Compare (C, b, T, ways, policy class) against a ground-truth config."""
    from .cache import LRU as _LRU

    truth_class = "LRU" if isinstance(cfg.policy, _LRU) else "non-LRU"
    return (p.cache_size == cfg.size and p.line_size == cfg.line_size
            and p.num_sets == cfg.num_sets and p.ways == tuple(cfg.ways_per_set)
            and p.policy_class == truth_class)


# -- the classic average-latency readings ------------------------------------

def t_avg_grid(probe, Ns: Sequence[int], strides: Sequence[int], passes: int = 4):
    """{N: {s: mean latency}} with one preheat pass before timing."""
    out: Dict[int, Dict[int, float]] = {}
    for N in Ns:
        row = {}
        for s in strides:
            if s > N:
                continue
            n = N // s
            row[s] = probe(N, s, passes * n, True).mean_latency
        out[N] = row
    return out


@dataclass
class ClassicReading:
    C: Optional[int]
    b: Optional[int]
    a: Optional[Fraction]
    T: Optional[Fraction]
    flags: List[str] = field(default_factory=list)
    evidence: Dict[str, object] = field(default_factory=dict)

    def to_dict(self):
        def num(x):
            if x is None:
                return None
            if isinstance(x, Fraction):
                return x.numerator if x.denominator == 1 else f"{x.numerator}/{x.denominator}"
            return x
        return {"C": self.C, "b": self.b, "a": num(self.a), "T": num(self.T),
                "flags": list(self.flags), "evidence": self.evidence}


def saavedra_analysis(grid: Dict[int, Dict[int, float]], disagree_with: Optional[ClassicReading] = None,
                      tol: float = 1e-9) -> ClassicReading:
    """Classic stride-sweep reading.

    C is the largest array whose curve stays flat; on the largest array the
    line size is the first stride reaching the peak latency and the
    associativity is N / s at the first stride past it where latency falls.
    """
    Ns = sorted(grid)
    base = min(min(r.values()) for r in grid.values() if r)
    flat = [N for N in Ns if grid[N] and max(grid[N].values()) - base <= tol]
    big = Ns[-1]
    curve = sorted(grid[big].items())
    reading = ClassicReading(None, None, None, None)
    reading.evidence = {"flat_N": flat, "large_N": big, "curve": [[s, t] for s, t in curve]}
    if not flat or flat[-1] == big:
        reading.flags.append("inconclusive: no array larger than the cache")
        return reading
    C = flat[-1]
    peak = max(t for _, t in curve)
    if peak - base <= tol:
        reading.flags.append("inconclusive: flat curve")
        return reading
    b = next(s for s, t in curve if t >= peak - tol)
    fall = next((s for s, t in curve if s > b and t < peak - tol), None)
    reading.C, reading.b = C, b
    if fall is None:
        reading.flags.append("inconclusive: no fall point")
        return reading
    a = Fraction(big, fall)
    T = Fraction(C) / (a * b)
    reading.a, reading.T = a, T
    reading.evidence["fall_stride"] = fall
    if a.denominator != 1 or T.denominator != 1:
        reading.flags.append("non-integral associativity or set count")
    if disagree_with is not None:
        _flag_disagreement(reading, disagree_with)
    return reading


def wong_analysis(series: Sequence[Tuple[int, float]], split: float = 0.5,
                  tol: float = 1e-9) -> ClassicReading:
    """Classic array-size sweep at a fixed stride: the staircase after the
    last all-hit size gives one step per set, each step as wide as a line."""
    pts = sorted(series)
    Ns = [n for n, _ in pts]
    ts = np.array([t for _, t in pts], dtype=np.float64)
    t0, tmax = ts.min(), ts.max()
    reading = ClassicReading(None, None, None, None)
    reading.evidence = {"series": [[n, t] for n, t in pts]}
    if tmax - t0 <= tol:
        reading.flags.append("inconclusive: staircase absent")
        return reading
    hit_idx = [i for i, t in enumerate(ts) if t - t0 <= tol]
    last_hit = hit_idx[-1]
    if last_hit != len(hit_idx) - 1:
        reading.flags.append("non-monotone staircase")
    C = Ns[last_hit]
    d = np.diff(ts)
    # a step is any rise of at least ``split`` times the typical rise; the
    # median keeps one oversized step from hiding the others
    rises = d[last_hit:][d[last_hit:] > tol]
    rises = rises[rises >= 0.1 * rises.max()] if len(rises) else rises
    typical = float(np.median(rises)) if len(rises) else 0.0
    # plateau starts: the first point after each step
    starts = [i + 1 for i in range(last_hit, len(d)) if d[i] > tol and d[i] >= split * typical]
    if not starts:
        reading.flags.append("inconclusive: no steps")
        return reading
    T = None
    for j, st in enumerate(starts):
        if tmax - ts[st] <= max(tol, 1e-6 * tmax):
            T = j + 1
            break
    if T is None:
        T = len(starts)
        reading.flags.append("staircase never reaches its top")
    widths = [Ns[b] - Ns[a] for a, b in zip(starts, starts[1:])]
    b = Counter(widths).most_common(1)[0][0] if widths else Ns[starts[0]] - C
    a = Fraction(C, b * T)
    reading.C, reading.b, reading.T, reading.a = C, b, Fraction(T), a
    reading.evidence["plateau_starts"] = [Ns[i] for i in starts]
    if a.denominator != 1:
        reading.flags.append("non-integral associativity")
    # equal miss volume per step on a conventional cache
    s_levels = []
    for st in starts[:T]:
        s_levels.append((ts[st] - t0) / (tmax - t0) * Ns[st])
    steps = np.diff([0.0] + s_levels)
    if len(steps) > 1 and (steps.max() - steps.min()) > 0.05 * steps.max():
        reading.flags.append("non-linear staircase")
    reading.evidence["step_volumes"] = [float(x) for x in steps]
    return reading


def _flag_disagreement(a: ClassicReading, b: ClassicReading):
    if (a.b, a.T) != (b.b, b.T):
        msg = f"disagreement: (b, T) = ({a.b}, {a.T}) vs ({b.b}, {b.T})"
        a.flags.append(msg)
        if msg not in b.flags:
            b.flags.append(msg)


def flag_disagreement(saavedra: ClassicReading, wong: ClassicReading,
                      fine: Optional[InferredParams] = None) -> List[str]:
    """Disagreement flags across the two classic readings and, when given,
    the fine-grained result."""
    out = []
    if (saavedra.b, saavedra.T) != (wong.b, wong.T):
        out.append(f"saavedra vs wong: (b, T) = ({saavedra.b}, {saavedra.T}) vs ({wong.b}, {wong.T})")
    if fine is not None:
        for name, r in (("saavedra", saavedra), ("wong", wong)):
            if (r.b, r.T) != (fine.line_size, fine.num_sets):
                out.append(f"{name} vs fine-grained: (b, T) = ({r.b}, {r.T}) vs "
                           f"({fine.line_size}, {fine.num_sets})")
    return out
