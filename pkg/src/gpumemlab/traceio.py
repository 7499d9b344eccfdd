"""Config files (YAML), trace files (CSV) and reports (JSON).

Every format carries ``format_version``.  Writers are deterministic so
shipped files can be compared byte for byte.
"""
from __future__ import annotations

import csv
import io
import json
import re
from fractions import Fraction
from pathlib import Path
from typing import Any, Dict, List, Optional, Union

import numpy as np
import yaml

from .cache import (AlternatingWay, BitFields, CacheConfig, ConfigError, LRU, ModuloLine,
                    PinnedWayLRU, ProbabilisticWay, StandardBits, Unequal, Uniform)
from .devices import GpuSpec
from .hierarchy import PATTERNS, HierarchyConfig, LatencyTable, PrefetchConfig
from .pchase import Trace, TraceMeta
from .smem import BankConfig, SmemCalibration
from .throughput import DeviceRates, KernelShape

FORMAT_VERSION = 1
KB, MB, GB = 1 << 10, 1 << 20, 1 << 30


class TraceFormatError(ValueError):
    """Malformed trace header or rows."""


# -- YAML with line numbers --------------------------------------------------

class _Map(dict):
    """dict remembering the source line of itself and of each key."""

    line = 0
    key_lines: Dict[str, int]


class _LineLoader(yaml.SafeLoader):
    pass


def _construct_map(loader, node):
    loader.flatten_mapping(node)
    out = _Map()
    out.line = node.start_mark.line + 1
    out.key_lines = {}
    for knode, vnode in node.value:
        key = loader.construct_object(knode, deep=True)
        if key in out:
            raise ConfigError(f"line {knode.start_mark.line + 1}: duplicate key {key!r}")
        out[key] = loader.construct_object(vnode, deep=True)
        out.key_lines[key] = knode.start_mark.line + 1
    return out


_LineLoader.add_constructor(yaml.resolver.BaseResolver.DEFAULT_MAPPING_TAG, _construct_map)


class _Fields:
    """Schema-checked view of one mapping."""

    def __init__(self, data, where: str, line: int = 0):
        if not isinstance(data, dict):
            raise ConfigError(f"line {line}: {where} must be a mapping")
        self.data = data
        self.where = where
        self.line = getattr(data, "line", line)
        self.used = set()

    def line_of(self, key):
        return getattr(self.data, "key_lines", {}).get(key, self.line)

    def fail(self, key, msg):
        raise ConfigError(f"line {self.line_of(key)}: {self.where}.{key}: {msg}")

    def get(self, key, kind=None, default=..., conv=None):
        self.used.add(key)
        if key not in self.data:
            if default is ...:
                raise ConfigError(
                    f"line {self.line}: {self.where}: missing mandatory field {key!r}")
            return default
        v = self.data[key]
        if v is None and default is None:
            return None
        if conv is not None:
            try:
                return conv(v)
            except (TypeError, ValueError, ConfigError) as e:
                self.fail(key, str(e))
        if kind is not None and not (isinstance(v, kind) and not (kind is int and isinstance(v, bool))):
            self.fail(key, f"expected {getattr(kind, '__name__', kind)}, got {v!r}")
        return v

    def sub(self, key, default=...):
        v = self.get(key, default=default)
        if v is None:
            return None
        return _Fields(v, f"{self.where}.{key}", self.line_of(key))

    def done(self):
        extra = [k for k in self.data if k not in self.used]
        if extra:
            k = extra[0]
            raise ConfigError(f"line {self.line_of(k)}: {self.where}: unknown key {k!r}")


_SIZE_RE = re.compile(r"^\s*(\d+)\s*(B|KB|MB|GB)?\s*$", re.I)
_UNITS = {None: 1, "B": 1, "KB": KB, "MB": MB, "GB": GB}


def parse_size(v) -> int:
    """Bytes from an int or a string such as ``"12 KB"`` or ``"130MB"``."""
    if isinstance(v, bool):
        raise ValueError(f"not a size: {v!r}")
    if isinstance(v, int):
        return v
    m = _SIZE_RE.match(str(v))
    if not m:
        raise ValueError(f"not a size: {v!r}")
    unit = m.group(2).upper() if m.group(2) else None
    return int(m.group(1)) * _UNITS[unit]


def format_size(n: int):
    for unit, f in (("GB", GB), ("MB", MB), ("KB", KB)):
        if n >= f and n % f == 0:
            return f"{n // f} {unit}"
    return n


def _int(v):
    if isinstance(v, bool) or not isinstance(v, int):
        raise ValueError(f"expected an integer, got {v!r}")
    return v


def _int_list(v):
    if not isinstance(v, list):
        raise ValueError(f"expected a list, got {v!r}")
    return tuple(_int(x) for x in v)


def _bits(v):
    t = _int_list(v)
    if len(t) != 2:
        raise ValueError("bit range needs [low, high]")
    return t


# -- cache -------------------------------------------------------------------

def cache_to_dict(cfg: CacheConfig) -> Dict[str, Any]:
    d: Dict[str, Any] = {"name": cfg.name, "size": format_size(cfg.size),
                         "line_size": format_size(cfg.line_size)}
    if cfg.sector_lines != 1:
        d["sector_lines"] = cfg.sector_lines
    lay = cfg.layout
    if isinstance(lay, Uniform):
        d["layout"] = {"type": "uniform", "num_sets": lay.num_sets, "ways": lay.ways}
    else:
        d["layout"] = {"type": "unequal", "ways_per_set": list(lay.ways_per_set)}
    m = cfg.mapping
    if isinstance(m, StandardBits):
        d["mapping"] = {"type": "standard"}
    elif isinstance(m, ModuloLine):
        d["mapping"] = {"type": "modulo"}
    else:
        d["mapping"] = {"type": "bitfields", "offset_bits": list(m.offset_bits),
                        "set_bits": list(m.set_bits)}
        if m.way_bits:
            d["mapping"]["way_bits"] = list(m.way_bits)
    p = cfg.policy
    if isinstance(p, LRU):
        d["policy"] = {"type": "lru"}
    elif isinstance(p, ProbabilisticWay):
        d["policy"] = {"type": "probabilistic", "weights": [_frac_str(w) for w in p.weights],
                       "rng_seed": p.rng_seed}
    elif isinstance(p, AlternatingWay):
        d["policy"] = {"type": "alternating", "hot_way": p.hot_way}
    else:
        d["policy"] = {"type": "pinned_lru"}
    d["hit_latency"] = cfg.hit_latency
    d["miss_penalty"] = cfg.miss_penalty
    return d


def _frac_str(w: float):
    f = Fraction(w).limit_denominator(1000)
    if abs(float(f) - w) < 1e-12 and f.denominator != 1:
        return f"{f.numerator}/{f.denominator}"
    return w


def _weight(v):
    if isinstance(v, str):
        return float(Fraction(v.strip()))
    if isinstance(v, (int, float)) and not isinstance(v, bool):
        return float(v)
    raise ValueError(f"bad weight {v!r}")


def cache_from_fields(f: _Fields) -> CacheConfig:
    name = f.get("name", str, default="")
    size = f.get("size", conv=parse_size)
    line = f.get("line_size", conv=parse_size)
    sector = f.get("sector_lines", conv=_int, default=1)
    lf = f.sub("layout")
    lt = lf.get("type", str)
    if lt == "uniform":
        layout = Uniform(lf.get("num_sets", conv=_int), lf.get("ways", conv=_int))
    elif lt == "unequal":
        layout = Unequal(lf.get("ways_per_set", conv=_int_list))
    else:
        lf.fail("type", f"unknown layout {lt!r} (uniform | unequal)")
    lf.done()
    mf = f.sub("mapping", default={"type": "standard"})
    mt = mf.get("type", str)
    if mt == "standard":
        mapping = StandardBits()
    elif mt == "modulo":
        mapping = ModuloLine()
    elif mt == "bitfields":
        mapping = BitFields(mf.get("offset_bits", conv=_bits), mf.get("set_bits", conv=_bits),
                            mf.get("way_bits", conv=_bits, default=None))
    else:
        mf.fail("type", f"unknown mapping {mt!r} (standard | modulo | bitfields)")
    mf.done()
    pf = f.sub("policy", default={"type": "lru"})
    pt = pf.get("type", str)
    if pt == "lru":
        policy = LRU()
    elif pt == "probabilistic":
        policy = ProbabilisticWay(pf.get("weights", conv=lambda v: tuple(_weight(x) for x in v)),
                                  pf.get("rng_seed", conv=_int, default=0))
    elif pt == "alternating":
        policy = AlternatingWay(pf.get("hot_way", conv=_int, default=1))
    elif pt == "pinned_lru":
        policy = PinnedWayLRU()
    else:
        pf.fail("type", f"unknown policy {pt!r} (lru | probabilistic | alternating | pinned_lru)")
    pf.done()
    hit = f.get("hit_latency", conv=_int, default=100)
    miss = f.get("miss_penalty", conv=_int, default=200)
    f.done()
    try:
        return CacheConfig(size, line, layout, mapping, policy, sector, hit, miss, name)
    except ConfigError as e:
        raise ConfigError(f"line {f.line}: {f.where}: {e}") from None


# -- hierarchy ---------------------------------------------------------------

def hierarchy_to_dict(cfg: HierarchyConfig) -> Dict[str, Any]:
    d: Dict[str, Any] = {
        "name": cfg.name,
        "dram_size": format_size(cfg.dram_size),
        "page_size": format_size(cfg.page_size),
        "activation_window": format_size(cfg.activation_window),
        "l1_enabled": cfg.l1_enabled,
        "l1_bypasses_tlb": cfg.l1_bypasses_tlb,
        "clock_overhead_cycles": cfg.clock_overhead_cycles,
        "dep_chain_overhead_cycles": cfg.dep_chain_overhead_cycles,
        "latencies": {p: cfg.latencies.pattern_latency[p] for p in PATTERNS},
    }
    if cfg.latencies.levels:
        d["latency_levels"] = {k: dict(v) for k, v in cfg.latencies.levels.items()}
    pf = cfg.prefetcher
    d["prefetcher"] = {"enabled": pf.enabled,
                       "span_fraction_of_l2": f"{pf.span_fraction_of_l2.numerator}/{pf.span_fraction_of_l2.denominator}",
                       "direction": pf.direction}
    for key in ("l1_data", "texture_l1", "l2_data", "l1_tlb", "l2_tlb"):
        c = getattr(cfg, key)
        if c is not None:
            d[key] = cache_to_dict(c)
    return d


def hierarchy_from_fields(f: _Fields) -> HierarchyConfig:
    def cache(key, default=...):
        sub = f.sub(key, default=default)
        return None if sub is None else cache_from_fields(sub)

    lat_f = f.sub("latencies")
    lat = {}
    for p in PATTERNS:
        lat[p] = lat_f.get(p, conv=lambda v: None if v is None else _int(v), default=None)
    lat_f.done()
    levels = f.get("latency_levels", dict, default={})
    pff = f.sub("prefetcher", default={})
    pf = PrefetchConfig(pff.get("enabled", bool, default=True),
                        pff.get("span_fraction_of_l2", conv=lambda v: Fraction(str(v)), default=Fraction(2, 3)),
                        pff.get("direction", str, default="sequential-forward"))
    pff.done()
    kw = dict(
        name=f.get("name", str),
        dram_size=f.get("dram_size", conv=parse_size),
        page_size=f.get("page_size", conv=parse_size, default=2 * MB),
        activation_window=f.get("activation_window", conv=parse_size, default=512 * MB),
        l1_enabled=f.get("l1_enabled", bool, default=False),
        l1_bypasses_tlb=f.get("l1_bypasses_tlb", bool, default=False),
        clock_overhead_cycles=f.get("clock_overhead_cycles", conv=_int, default=0),
        dep_chain_overhead_cycles=f.get("dep_chain_overhead_cycles", conv=_int, default=0),
        latencies=LatencyTable(lat, {k: dict(v) for k, v in levels.items()}),
        prefetcher=pf,
        l1_data=cache("l1_data", None),
        texture_l1=cache("texture_l1", None),
        l2_data=cache("l2_data"),
        l1_tlb=cache("l1_tlb"),
        l2_tlb=cache("l2_tlb"),
    )
    f.done()
    try:
        return HierarchyConfig(**kw)
    except ConfigError as e:
        raise ConfigError(f"line {f.line}: {f.where}: {e}") from None


# -- banks and GPU specs -----------------------------------------------------

def bank_to_dict(b: BankConfig) -> Dict[str, Any]:
    return {"num_banks": b.num_banks, "bank_width_bytes": b.bank_width_bytes, "mode": b.mode}


def bank_from_fields(f: _Fields) -> BankConfig:
    kw = dict(num_banks=f.get("num_banks", conv=_int, default=32),
              bank_width_bytes=f.get("bank_width_bytes", conv=_int),
              mode=f.get("mode", str, default="four_byte"))
    f.done()
    try:
        return BankConfig(**kw)
    except ValueError as e:
        raise ConfigError(f"line {f.line}: {f.where}: {e}") from None


def gpu_to_dict(g: GpuSpec) -> Dict[str, Any]:
    r = g.rates
    d: Dict[str, Any] = {
        "name": g.name,
        "generation": g.generation,
        "rates": {"f_mem_mhz": r.f_mem, "f_core_ghz": r.f_core, "bus_width_bits": r.bus_width_bits,
                  "bank_width_bytes": r.bank_width_bytes, "ddr_factor": r.ddr_factor},
        "max_warps_per_sm": g.max_warps_per_sm,
        "clock_overhead_cycles": g.clock_overhead_cycles,
        "dep_chain_overhead_cycles": g.dep_chain_overhead_cycles,
        "banks": [bank_to_dict(b) for b in g.banks],
        "smem_latency": {d_: v for d_, v in g.smem.latency.items()},
    }
    if g.peak_smem_shape is not None:
        s = g.peak_smem_shape
        d["peak_smem_shape"] = {"cta_size": s.cta_size, "ctas_per_sm": s.ctas_per_sm, "ilp": s.ilp}
    if g.peak_smem_gbps is not None:
        d["peak_smem_gbps"] = g.peak_smem_gbps
    if g.measured_global_gbps is not None:
        d["measured_global_gbps"] = g.measured_global_gbps
    return d


def _num(v):
    if isinstance(v, bool) or not isinstance(v, (int, float)):
        raise ValueError(f"expected a number, got {v!r}")
    return v


def gpu_from_fields(f: _Fields) -> GpuSpec:
    name = f.get("name", str)
    rf = f.sub("rates")
    try:
        rates = DeviceRates(rf.get("f_mem_mhz", conv=_num), rf.get("f_core_ghz", conv=_num),
                            rf.get("bus_width_bits", conv=_int), rf.get("bank_width_bytes", conv=_int),
                            rf.get("ddr_factor", conv=_int, default=4))
    except ValueError as e:
        if isinstance(e, ConfigError):
            raise
        raise ConfigError(f"line {rf.line}: {rf.where}: {e}") from None
    rf.done()
    banks_raw = f.get("banks", list)
    banks = tuple(bank_from_fields(_Fields(b, f"{f.where}.banks[{i}]", f.line_of("banks")))
                  for i, b in enumerate(banks_raw))
    lat = f.get("smem_latency", dict)
    try:
        smem = SmemCalibration(name, {_int(k): _int(v) for k, v in lat.items()})
    except ValueError as e:
        f.fail("smem_latency", str(e))
    shape = None
    sf = f.sub("peak_smem_shape", default=None)
    if sf is not None:
        shape = KernelShape(sf.get("cta_size", conv=_int), sf.get("ctas_per_sm", conv=_int),
                            sf.get("ilp", conv=_int, default=1))
        sf.done()
    g = GpuSpec(
        name=name,
        generation=f.get("generation", str),
        rates=rates,
        banks=banks,
        smem=smem,
        max_warps_per_sm=f.get("max_warps_per_sm", conv=_int),
        clock_overhead_cycles=f.get("clock_overhead_cycles", conv=_int),
        dep_chain_overhead_cycles=f.get("dep_chain_overhead_cycles", conv=_int),
        peak_smem_shape=shape,
        peak_smem_gbps=f.get("peak_smem_gbps", conv=_num, default=None),
        measured_global_gbps=f.get("measured_global_gbps", conv=_num, default=None),
    )
    f.done()
    return g


# -- config files ------------------------------------------------------------

Config = Union[CacheConfig, HierarchyConfig, BankConfig, GpuSpec]
_KINDS = {
    "cache": (CacheConfig, cache_to_dict, cache_from_fields),
    "hierarchy": (HierarchyConfig, hierarchy_to_dict, hierarchy_from_fields),
    "banks": (BankConfig, bank_to_dict, bank_from_fields),
    "gpu": (GpuSpec, gpu_to_dict, gpu_from_fields),
}


def config_to_text(cfg: Config) -> str:
    for kind, (cls, to_dict, _) in _KINDS.items():
        if isinstance(cfg, cls):
            doc = {"kind": kind, "format_version": FORMAT_VERSION}
            doc.update(to_dict(cfg))
            return yaml.safe_dump(doc, sort_keys=False, default_flow_style=None, width=100)
    raise TypeError(f"cannot serialise {type(cfg).__name__}")


def config_from_text(text: str, source: str = "<string>") -> Config:
    try:
        data = yaml.load(text, Loader=_LineLoader)
    except yaml.MarkedYAMLError as e:
        mark = e.problem_mark
        line = mark.line + 1 if mark else 0
        raise ConfigError(f"{source}: line {line}: YAML syntax error: {e.problem}") from None
    except ConfigError as e:
        raise ConfigError(f"{source}: {e}") from None
    try:
        f = _Fields(data, "config", 1)
        kind = f.get("kind", str)
        if kind not in _KINDS:
            f.fail("kind", f"unknown kind {kind!r} ({' | '.join(_KINDS)})")
        ver = f.get("format_version", conv=_int)
        if ver != FORMAT_VERSION:
            f.fail("format_version", f"unsupported version {ver}")
        f.where = kind
        return _KINDS[kind][2](f)
    except ConfigError as e:
        raise ConfigError(f"{source}: {e}") from None


def write_config(cfg: Config, path) -> None:
    Path(path).write_text(config_to_text(cfg))


def read_config(path) -> Config:
    return config_from_text(Path(path).read_text(), str(path))


# -- traces ------------------------------------------------------------------

_META_FIELDS = ("source", "device", "target", "array_size", "element_size", "init",
                "iterations", "preheat", "seed", "overhead_applied", "clock_overhead",
                "dep_chain_overhead")
_INT_META = {"array_size", "element_size", "iterations", "clock_overhead", "dep_chain_overhead"}
_BOOL_META = {"preheat", "overhead_applied"}
_OPTIONAL_COLS = ("data_hit", "l1_tlb_hit", "l2_tlb_hit", "pattern")


def _fmt_meta(v):
    if isinstance(v, bool):
        return "true" if v else "false"
    if v is None:
        return ""
    return str(v)


def trace_to_text(trace: Trace) -> str:
    out = io.StringIO()
    out.write(f"# format_version={FORMAT_VERSION}\n")
    for k in _META_FIELDS:
        out.write(f"# {k}={_fmt_meta(getattr(trace.meta, k))}\n")
    cols = ["iteration", "s_index", "s_tvalue"] + [c for c in _OPTIONAL_COLS
                                                   if getattr(trace, c) is not None]
    w = csv.writer(out, lineterminator="\n")
    w.writerow(cols)
    extra = []
    for c in cols[3:]:
        a = getattr(trace, c)
        if c == "pattern":
            extra.append([str(x) for x in a])
        elif c == "data_hit":
            extra.append(["1" if x else "0" for x in a])
        else:
            extra.append(["" if x < 0 else str(int(x)) for x in a])
    idx = trace.index.tolist()
    lat = trace.latency.tolist()
    for i in range(len(idx)):
        w.writerow([i, idx[i], lat[i]] + [e[i] for e in extra])
    return out.getvalue()


def write_trace(trace: Trace, path) -> None:
    Path(path).write_text(trace_to_text(trace))


def _parse_meta(key, value, lineno):
    if key in _INT_META:
        try:
            return int(value)
        except ValueError:
            raise TraceFormatError(f"header line {lineno}: {key} must be an integer") from None
    if key in _BOOL_META:
        if value not in ("true", "false"):
            raise TraceFormatError(f"header line {lineno}: {key} must be true or false")
        return value == "true"
    if key == "seed":
        return int(value) if value else None
    return value


def trace_from_text(text: str, source: str = "<string>", dep_chain_lookup=None) -> Trace:
    """Parse a trace; latencies not yet overhead-corrected get corrected here.

    ``dep_chain_lookup(device) -> cycles`` is used when the header lacks the
    dependent-chain overhead.
    """
    lines = text.splitlines()
    meta = TraceMeta()
    seen = set()
    version = None
    i = 0
    while i < len(lines) and lines[i].startswith("#"):
        body = lines[i][1:].strip()
        if body:
            if "=" not in body:
                raise TraceFormatError(f"{source}: header line {i + 1}: expected key=value")
            k, v = (s.strip() for s in body.split("=", 1))
            if k == "format_version":
                version = v
            elif k in _META_FIELDS:
                setattr(meta, k, _parse_meta(k, v, i + 1))
                seen.add(k)
            else:
                raise TraceFormatError(f"{source}: header line {i + 1}: unknown key {k!r}")
        i += 1
    if version is None:
        raise TraceFormatError(f"{source}: header lacks format_version")
    if version != str(FORMAT_VERSION):
        raise TraceFormatError(f"{source}: unsupported format_version {version}")
    if "iterations" not in seen:
        raise TraceFormatError(f"{source}: header lacks iterations (k)")
    if i >= len(lines):
        raise TraceFormatError(f"{source}: missing column header")
    reader = csv.reader(lines[i:])
    cols = next(reader)
    if cols[:3] != ["iteration", "s_index", "s_tvalue"]:
        raise TraceFormatError(f"{source}: line {i + 1}: columns must start with iteration,s_index,s_tvalue")
    for c in cols[3:]:
        if c not in _OPTIONAL_COLS:
            raise TraceFormatError(f"{source}: line {i + 1}: unknown column {c!r}")
    rows = [r for r in reader]
    first = i + 2
    if rows and rows[-1] == []:
        rows.pop()
    if len(rows) != meta.iterations:
        bad = min(len(rows), meta.iterations) + first
        raise TraceFormatError(
            f"{source}: line {bad}: header declares k={meta.iterations} but file has {len(rows)} rows")
    n = len(rows)
    index = np.empty(n, dtype=np.int64)
    lat = np.empty(n, dtype=np.int64)
    extra = {c: [] for c in cols[3:]}
    for r, row in enumerate(rows):
        ln = first + r
        if len(row) != len(cols):
            raise TraceFormatError(f"{source}: line {ln}: expected {len(cols)} fields, got {len(row)}")
        try:
            it, idx, t = int(row[0]), int(row[1]), int(row[2])
        except ValueError:
            raise TraceFormatError(f"{source}: line {ln}: non-integer field") from None
        if it != r:
            raise TraceFormatError(f"{source}: line {ln}: iteration {it}, expected {r}")
        if t < 0:
            raise TraceFormatError(f"{source}: line {ln}: negative latency {t}")
        if idx < 0:
            raise TraceFormatError(f"{source}: line {ln}: negative index {idx}")
        index[r], lat[r] = idx, t
        for c, v in zip(cols[3:], row[3:]):
            extra[c].append(v)
    if not meta.overhead_applied:
        oh = meta.dep_chain_overhead
        if "dep_chain_overhead" not in seen or oh == 0:
            if dep_chain_lookup is None:
                raise TraceFormatError(f"{source}: overhead not applied and no overhead constant available")
            oh = dep_chain_lookup(meta.device)
            meta.dep_chain_overhead = oh
        lat = lat - oh
        if n and lat.min() <= 0:
            r = int(np.argmin(lat))
            raise TraceFormatError(f"{source}: line {first + r}: latency not above the {oh}-cycle overhead")
        meta.overhead_applied = True
    tr = Trace(index=index, latency=lat, meta=meta)
    for c, vals in extra.items():
        try:
            if c == "pattern":
                tr.pattern = np.array(vals, dtype="<U2")
            elif c == "data_hit":
                tr.data_hit = np.array([v == "1" for v in vals], dtype=np.bool_)
            else:
                tr.__setattr__(c, np.array([-1 if v == "" else int(v) for v in vals], dtype=np.int8))
        except ValueError:
            raise TraceFormatError(f"{source}: bad value in column {c}") from None
    return tr


def _default_overhead_lookup(device: str) -> int:
    from .presets import dep_chain_overhead
    return dep_chain_overhead(device)


def read_trace(path, dep_chain_lookup=_default_overhead_lookup) -> Trace:
    return trace_from_text(Path(path).read_text(), str(path), dep_chain_lookup)


# -- reports -----------------------------------------------------------------

def _jsonable(o):
    if isinstance(o, dict):
        return {str(k): _jsonable(v) for k, v in o.items()}
    if isinstance(o, (list, tuple)):
        return [_jsonable(v) for v in o]
    if isinstance(o, np.ndarray):
        return _jsonable(o.tolist())
    if isinstance(o, (np.integer,)):
        return int(o)
    if isinstance(o, (np.floating,)):
        return float(o)
    if isinstance(o, np.bool_):
        return bool(o)
    if isinstance(o, Fraction):
        return f"{o.numerator}/{o.denominator}"
    return o


def report_to_text(report: Dict[str, Any]) -> str:
    doc = {"format_version": FORMAT_VERSION}
    doc.update(report)
    return json.dumps(_jsonable(doc), indent=2, sort_keys=True) + "\n"


def write_report(report: Dict[str, Any], path) -> None:
    Path(path).write_text(report_to_text(report))


def read_report(path) -> Dict[str, Any]:
    return json.loads(Path(path).read_text())
