"""Single-cache model: address decomposition, lookup and replacement.

A cache is described by an immutable :class:`CacheConfig` and stepped through
a mutable :class:`CacheState`.  Sets may be uniform or unequal, addresses may
map through the conventional bit layout, explicit bit fields or a line-index
modulo, and replacement is LRU, way-weighted random, a deterministic
alternating rule, or LRU pinned to an address-selected way group.

Sectored caches (``sector_lines > 1``) fill one line at a time but allocate
and replace whole blocks of ``sector_lines`` consecutive lines.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional, Sequence, Tuple, Union

import numpy as np

from . import kernels

ADDRESS_BITS = 40
ADDRESS_LIMIT = 1 << ADDRESS_BITS


class ConfigError(ValueError):
    """A configuration violates one of its invariants."""


class AddressRangeError(ValueError):
    """An address lies outside the simulated address space."""


# -- set layouts -------------------------------------------------------------

@dataclass(frozen=True)
class Uniform:
    num_sets: int
    ways: int


@dataclass(frozen=True)
class Unequal:
    ways_per_set: Tuple[int, ...]

    def __post_init__(self):
        object.__setattr__(self, "ways_per_set", tuple(int(w) for w in self.ways_per_set))


SetLayout = Union[Uniform, Unequal]


# -- address mappings --------------------------------------------------------

@dataclass(frozen=True)
class StandardBits:
    """Set bits sit immediately above the offset bits."""


@dataclass(frozen=True)
class BitFields:
    """Explicit inclusive bit ranges, e.g. ``set_bits=(7, 8)``."""

    offset_bits: Tuple[int, int]
    set_bits: Tuple[int, int]
    way_bits: Optional[Tuple[int, int]] = None

    def __post_init__(self):
        object.__setattr__(self, "offset_bits", tuple(self.offset_bits))
        object.__setattr__(self, "set_bits", tuple(self.set_bits))
        if self.way_bits is not None:
            object.__setattr__(self, "way_bits", tuple(self.way_bits))


@dataclass(frozen=True)
class ModuloLine:
    """Set = block index modulo the set count (weighted for unequal sets)."""


AddressMapping = Union[StandardBits, BitFields, ModuloLine]


# -- replacement policies ----------------------------------------------------

@dataclass(frozen=True)
class LRU:
    pass


@dataclass(frozen=True)
class ProbabilisticWay:
    weights: Tuple[float, ...]
    rng_seed: int = 0

    def __post_init__(self):
        object.__setattr__(self, "weights", tuple(float(w) for w in self.weights))


@dataclass(frozen=True)
class AlternatingWay:
    """Deterministic non-LRU rule: every second eviction hits ``hot_way``;
    the others rotate over the remaining ways."""

    hot_way: int = 1


@dataclass(frozen=True)
class PinnedWayLRU:
    """The mapping's ``way_bits`` pick a way group; LRU inside the group."""


ReplacementPolicy = Union[LRU, ProbabilisticWay, AlternatingWay, PinnedWayLRU]


def _bit_width(bits):
    lo, hi = bits
    return hi - lo + 1


def _ranges_overlap(a, b):
    return not (a[1] < b[0] or b[1] < a[0])


def _weighted_round_robin(frames):
    """Block-slot table for unequal sets: deal slots round-robin over sets,
    skipping sets that are full.  For equal sets this is plain ``i mod T``."""
    remaining = list(frames)
    table = []
    while any(remaining):
        for s, left in enumerate(remaining):
            if left:
                table.append(s)
                remaining[s] -= 1
    return np.asarray(table, dtype=np.int64)


@dataclass(frozen=True)
class CacheConfig:
    size: int
    line_size: int
    layout: SetLayout
    mapping: AddressMapping = field(default_factory=StandardBits)
    policy: ReplacementPolicy = field(default_factory=LRU)
    sector_lines: int = 1
    hit_latency: int = 100
    miss_penalty: int = 200
    name: str = ""

    def __post_init__(self):
        self.validate()

    # derived geometry
    @property
    def num_sets(self) -> int:
        if isinstance(self.layout, Uniform):
            return self.layout.num_sets
        return len(self.layout.ways_per_set)

    @property
    def ways_per_set(self) -> Tuple[int, ...]:
        if isinstance(self.layout, Uniform):
            return (self.layout.ways,) * self.layout.num_sets
        return self.layout.ways_per_set

    @property
    def block_size(self) -> int:
        return self.line_size * self.sector_lines

    @property
    def frames_per_set(self) -> Tuple[int, ...]:
        return tuple(w // self.sector_lines for w in self.ways_per_set)

    def validate(self):
        C, b = self.size, self.line_size
        if C <= 0 or b <= 0:
            raise ConfigError("size and line_size must be positive")
        if C % b:
            raise ConfigError(f"line_size {b} does not divide size {C}")
        if self.sector_lines < 1 or self.sector_lines > 62:
            raise ConfigError("sector_lines must be in 1..62")
        lay = self.layout
        if isinstance(lay, Uniform):
            if lay.num_sets < 1 or lay.ways < 1:
                raise ConfigError("num_sets and ways must be >= 1")
            if lay.num_sets * lay.ways * b != C:
                raise ConfigError(
                    f"T*a*b = {lay.num_sets}*{lay.ways}*{b} != C = {C}")
        elif isinstance(lay, Unequal):
            w = lay.ways_per_set
            if not w or min(w) < 1:
                raise ConfigError("every set needs at least one way")
            if len(set(w)) < 2:
                raise ConfigError("Unequal layout needs at least two different way counts")
            if sum(w) * b != C:
                raise ConfigError(f"sum(ways)*b = {sum(w) * b} != C = {C}")
        else:
            raise ConfigError(f"unknown set layout {lay!r}")
        for w in self.ways_per_set:
            if w % self.sector_lines:
                raise ConfigError("way count must be a multiple of sector_lines")

        m = self.mapping
        if isinstance(m, StandardBits):
            if isinstance(lay, Unequal):
                raise ConfigError("StandardBits needs a Uniform layout")
            if b & (b - 1) or self.num_sets & (self.num_sets - 1) or self.sector_lines & (self.sector_lines - 1):
                raise ConfigError("StandardBits needs power-of-two line size, set count and sector count")
        elif isinstance(m, BitFields):
            if isinstance(lay, Unequal):
                raise ConfigError("BitFields needs a Uniform layout")
            ranges = [m.offset_bits, m.set_bits] + ([m.way_bits] if m.way_bits else [])
            for r in ranges:
                if r[0] < 0 or r[1] < r[0] or r[1] >= ADDRESS_BITS:
                    raise ConfigError(f"bad bit range {r}")
            for i in range(len(ranges)):
                for j in range(i + 1, len(ranges)):
                    if _ranges_overlap(ranges[i], ranges[j]):
                        raise ConfigError("bit ranges overlap")
            if m.offset_bits[0] != 0 or (1 << _bit_width(m.offset_bits)) != b:
                raise ConfigError("offset bits must be 0..log2(line_size)-1")
            if (1 << _bit_width(m.set_bits)) != self.num_sets:
                raise ConfigError("set bit width does not match the set count")
            if m.set_bits[0] < _bit_width(m.offset_bits) + int(math.log2(self.sector_lines)):
                raise ConfigError("set bits overlap the block offset")
        elif not isinstance(m, ModuloLine):
            raise ConfigError(f"unknown mapping {m!r}")

        p = self.policy
        frames = self.frames_per_set
        if isinstance(p, ProbabilisticWay):
            if isinstance(lay, Unequal):
                raise ConfigError("ProbabilisticWay needs a Uniform layout")
            if len(p.weights) != frames[0]:
                raise ConfigError(f"need {frames[0]} way weights, got {len(p.weights)}")
            if min(p.weights) < 0 or abs(sum(p.weights) - 1.0) > 1e-9:
                raise ConfigError("way weights must be non-negative and sum to 1")
        elif isinstance(p, AlternatingWay):
            if not 0 <= p.hot_way < min(frames):
                raise ConfigError("hot_way out of range")
        elif isinstance(p, PinnedWayLRU):
            if not (isinstance(m, BitFields) and m.way_bits):
                raise ConfigError("PinnedWayLRU needs BitFields with way_bits")
            groups = 1 << _bit_width(m.way_bits)
            if any(f % groups for f in frames):
                raise ConfigError("frames per set must divide evenly into way groups")
        elif not isinstance(p, LRU):
            raise ConfigError(f"unknown policy {p!r}")

    # -- address decomposition ------------------------------------------------

    def decompose(self, addrs):
        """Vectorised mapping: arrays (set, block, sector, group, offset)."""
        a = np.asarray(addrs, dtype=np.int64)
        if a.size and (a.min() < 0 or a.max() >= ADDRESS_LIMIT):
            bad = a[(a < 0) | (a >= ADDRESS_LIMIT)][0]
            raise AddressRangeError(f"address {int(bad):#x} outside the {ADDRESS_BITS}-bit space")
        b = self.line_size
        offset = a % b
        line = a // b
        sector = line % self.sector_lines
        block = line // self.sector_lines
        m = self.mapping
        group = np.zeros_like(a)
        if isinstance(m, BitFields):
            lo, _ = m.set_bits
            set_idx = (a >> lo) & (self.num_sets - 1)
            if m.way_bits:
                group = (a >> m.way_bits[0]) & ((1 << _bit_width(m.way_bits)) - 1)
        elif isinstance(m, StandardBits):
            set_idx = block & (self.num_sets - 1)
        elif isinstance(self.layout, Unequal):
            table = _weighted_round_robin(self.frames_per_set)
            set_idx = table[block % len(table)]
        else:
            set_idx = block % self.num_sets
        return set_idx, block, sector, group, offset


def map_address(addr: int, cfg: CacheConfig):
    """Return ``(set_index, tag, offset)`` for one byte address.

    The tag is the full block index (no aliasing).
    """
    s, blk, _, _, off = cfg.decompose([addr])
    return int(s[0]), int(blk[0]), int(off[0])


@dataclass(frozen=True)
class AccessOutcome:
    hit: bool
    set_index: int
    evicted_way: Optional[int] = None
    evicted_tag: Optional[int] = None


@dataclass
class AccessBatch:
    hit: np.ndarray
    set_index: np.ndarray
    evicted_way: np.ndarray
    evicted_tag: np.ndarray

    def __len__(self):
        return len(self.hit)


_POLICY_CODES = {
    LRU: kernels.POLICY_LRU,
    ProbabilisticWay: kernels.POLICY_PROBABILISTIC,
    AlternatingWay: kernels.POLICY_ALTERNATING,
    PinnedWayLRU: kernels.POLICY_PINNED_LRU,
}


class CacheState:
    """Mutable contents of one cache.  Not thread-safe; use one per worker."""

    def __init__(self, cfg: CacheConfig, seed: Optional[int] = None):
        self.cfg = cfg
        frames = np.asarray(cfg.frames_per_set, dtype=np.int64)
        nsets, maxf = len(frames), int(frames.max())
        self.frames = frames
        self.tags = np.full((nsets, maxf), -1, dtype=np.int64)
        self.stamps = np.zeros((nsets, maxf), dtype=np.int64)
        self.valid = np.zeros((nsets, maxf), dtype=np.int64)
        self.alt_parity = np.zeros(nsets, dtype=np.int64)
        self.alt_rr = np.zeros(nsets, dtype=np.int64)
        p = cfg.policy
        self._code = _POLICY_CODES[type(p)]
        if isinstance(p, ProbabilisticWay):
            self._cdf = np.cumsum(np.asarray(p.weights, dtype=np.float64))
            self._cdf[-1] = 1.0
            self._rng = np.random.default_rng(p.rng_seed if seed is None else seed)
        else:
            self._cdf = np.ones(1)
            self._rng = None
        self._hot_way = p.hot_way if isinstance(p, AlternatingWay) else 0
        if isinstance(p, PinnedWayLRU):
            self._group_size = int(frames[0]) >> _bit_width(cfg.mapping.way_bits)
        else:
            self._group_size = 0
        self.counter = 0
        self.preheat_accesses = 0
        self.misses = 0

    def access_many(self, addrs) -> AccessBatch:
        set_idx, block, sector, group, _ = self.cfg.decompose(addrs)
        n = len(set_idx)
        draws = self._rng.random(n) if self._rng is not None else np.zeros(n)
        hit = np.zeros(n, dtype=np.bool_)
        ev_way = np.empty(n, dtype=np.int64)
        ev_tag = np.empty(n, dtype=np.int64)
        self.counter = kernels.cache_run(
            set_idx, block, sector, group, draws,
            self.tags, self.stamps, self.valid, self.frames, self._code, self._cdf,
            self._group_size, self._hot_way, self.alt_parity, self.alt_rr,
            self.counter, hit, ev_way, ev_tag)
        self.misses += int(n - hit.sum())
        return AccessBatch(hit, set_idx, ev_way, ev_tag)

    def access(self, addr: int) -> AccessOutcome:
        r = self.access_many([addr])
        ew = int(r.evicted_way[0])
        return AccessOutcome(
            hit=bool(r.hit[0]), set_index=int(r.set_index[0]),
            evicted_way=None if ew < 0 else ew,
            evicted_tag=None if ew < 0 else int(r.evicted_tag[0]))

    def preheat(self, addrs: Sequence[int]) -> "CacheState":
        """Untimed accesses; counted separately from demand accesses."""
        addrs = np.asarray(addrs, dtype=np.int64)
        if addrs.size:
            before = self.misses
            self.access_many(addrs)
            self.misses = before
            self.preheat_accesses += int(addrs.size)
        return self

    def resident_blocks(self, set_index: int):
        row = self.tags[set_index, : self.frames[set_index]]
        return [int(t) for t in row if t >= 0]

    def contains(self, addr: int) -> bool:
        s, blk, sec, _, _ = self.cfg.decompose([addr])
        row = self.tags[s[0], : self.frames[s[0]]]
        hits = np.nonzero(row == blk[0])[0]
        return bool(hits.size) and bool(self.valid[s[0], hits[0]] & (1 << int(sec[0])))


def access(state: CacheState, addr: int) -> AccessOutcome:
    return state.access(addr)


def preheat(state: CacheState, addresses: Sequence[int]) -> CacheState:
    return state.preheat(addresses)
