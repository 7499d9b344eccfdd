"""Command-line front end: ``gpumemlab <command> [flags]``.

Exit codes: 0 success, 1 usage error, 2 invalid input, 3 round-trip mismatch.
Sizes (``--N``, ``--s``, ...) are bytes and accept suffixes such as ``12KB``.
"""
from __future__ import annotations

import argparse
import csv
import json
import sys
from collections import Counter
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path
from typing import List, Optional

import numpy as np

from . import __version__
from .cache import CacheConfig, ConfigError, AddressRangeError
from .hierarchy import ClassificationError, HierarchyConfig, HierarchySim
from .inference import (CoverageError, InferenceError, SimProbe, TraceDirProbe, find_period,
                        flag_disagreement, run_pipeline, saavedra_analysis, t_avg_grid,
                        wong_analysis)
from .pchase import (NAMED_PATTERNS, CacheSim, PChaseConfig, UniformStride, WalkError,
                     TraceLengthError, miss_threshold, parse_init_spec, run_fine_grained)
from .presets import UnknownPresetError, load_cache, load_device, load_gpu, list_presets
from .traceio import (TraceFormatError, parse_size, read_config, read_report, read_trace,
                      write_report, write_trace)
from . import throughput as tp

EXIT_OK, EXIT_USAGE, EXIT_INVALID, EXIT_MISMATCH = 0, 1, 2, 3


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _size(text):
    try:
        return parse_size(text)
    except ValueError as e:
        raise argparse.ArgumentTypeError(str(e))


def _load_target(args):
    """A CacheConfig or HierarchyConfig from --preset / --config."""
    if args.config:
        return read_config(args.config)
    name = args.preset
    try:
        return load_cache(name)
    except UnknownPresetError:
        pass
    try:
        return load_device(name)
    except UnknownPresetError:
        raise UnknownPresetError(
            f"unknown preset {name!r}; caches: {', '.join(list_presets('caches'))}; "
            f"devices: {', '.join(list_presets('devices'))}")


def _invocation(argv):
    return {"argv": list(argv), "version": __version__}


# -- simulate ------------------------------------------------------------------

def cmd_simulate(args, argv):
    target = _load_target(args)
    if isinstance(target, HierarchyConfig):
        sim = HierarchySim(target, seed=args.seed)
    elif isinstance(target, CacheConfig):
        sim = CacheSim(target, seed=args.seed)
    else:
        raise ConfigError("simulate needs a cache or hierarchy config")
    e = args.element_size
    if args.pattern:
        cfg = NAMED_PATTERNS[args.pattern]()
        if args.k:
            cfg = PChaseConfig(cfg.array_size, cfg.init, args.k, cfg.element_size, cfg.preheat)
    else:
        if args.N is None:
            raise UsageError("--N is required unless --pattern is given")
        if args.segments:
            init = parse_init_spec("segments:" + args.segments)
        else:
            if args.s is None:
                raise UsageError("give --s or --segments")
            if args.s % e:
                raise ConfigError(f"--s {args.s} is not a multiple of the element size {e}")
            init = UniformStride(args.s // e)
        k = args.k or (args.N // e)
        cfg = PChaseConfig(args.N, init, k, e, not args.no_preheat)
    trace = run_fine_grained(sim, cfg)
    trace.meta.seed = args.seed
    if args.out:
        write_trace(trace, args.out)
    misses = int(trace.misses().sum())
    print(f"{len(trace)} accesses, {misses} misses, mean latency {trace.mean_latency:.2f} cycles"
          + (f" -> {args.out}" if args.out else ""))
    return EXIT_OK


# -- infer ---------------------------------------------------------------------

def _make_probe(spec, args):
    kind, _, rest = spec.partition(":")
    if kind == "sim":
        cfg = load_cache(rest) if rest else None
        if cfg is None:
            raise UsageError("sim probe needs a cache preset, e.g. sim:gtx780-texL1")
        return SimProbe(cfg, args.element_size, args.seed), cfg
    if kind == "dir":
        return TraceDirProbe(rest, args.element_size if args.element_size_given else None), None
    raise UsageError(f"probe must be sim:<preset> or dir:<path>, got {spec!r}")


def cmd_infer(args, argv):
    spec = args.probe or (f"sim:{args.preset}" if args.preset else None)
    if spec is None:
        raise UsageError("give --probe sim:<preset> | dir:<path>")
    probe, truth = _make_probe(spec, args)
    params = run_pipeline(probe, args.floor, args.ceiling, seeds=args.seeds)
    report = {"command": "infer", "invocation": _invocation(argv), "probe": spec,
              "inferred": params.to_dict()}
    if args.classic:
        C, b = params.cache_size, params.line_size
        e = probe.element_size
        strides = [e << i for i in range(0, 20) if (e << i) <= 4 * C]
        grid = t_avg_grid(probe, [C // 2, C, 4 * C], strides)
        sw = 2 * e
        series = [(N, probe(N, sw, 4 * (N // sw), True).mean_latency)
                  for N in range(C - 16 * sw, C + C // 4 + sw, sw)]
        wong = wong_analysis(series)
        sav = saavedra_analysis(grid)
        report["classic"] = {"saavedra": sav.to_dict(), "wong": wong.to_dict(),
                             "disagreements": flag_disagreement(sav, wong, params)}
    lay = params.layout
    ways = params.ways[0] if len(set(params.ways)) == 1 else "+".join(map(str, params.ways))
    print(f"C = {params.cache_size} B, b = {params.line_size} B, T = {params.num_sets}, "
          f"ways = {ways}, policy = {params.policy_class}")
    if params.way_replacement_freq:
        print("way replacement frequencies: " + ", ".join(f"{f:.3f}" for f in params.way_replacement_freq))
    if args.out:
        write_report(report, args.out)
    return EXIT_OK


# -- roundtrip -----------------------------------------------------------------

def _rt_worker(item):
    from .roundtrip import roundtrip_one
    cfg, seed = item
    r = roundtrip_one(cfg, seed)
    return r.recovered, r.inferred, r.error


def cmd_roundtrip(args, argv):
    from .roundtrip import random_configs
    from .traceio import cache_to_dict

    cfgs = random_configs(args.random_configs, args.seed)
    items = [(c, args.seed) for c in cfgs]
    if args.workers > 1:
        with ProcessPoolExecutor(args.workers) as ex:
            results = list(ex.map(_rt_worker, items))
    else:
        results = [_rt_worker(i) for i in items]
    rows = []
    ok = 0
    for cfg, (rec, inferred, err) in zip(cfgs, results):
        ok += rec
        rows.append({"config": cache_to_dict(cfg), "recovered": rec, "inferred": inferred, "error": err})
        if not rec:
            print(f"MISMATCH {cfg.name}: {err or inferred}", file=sys.stderr)
    print(f"{ok}/{len(cfgs)} recovered")
    if args.out:
        write_report({"command": "roundtrip", "invocation": _invocation(argv),
                      "recovered": ok, "total": len(cfgs), "results": rows}, args.out)
    return EXIT_OK if ok == len(cfgs) else EXIT_MISMATCH


# -- analyze -------------------------------------------------------------------

def analyze_trace(trace, max_period: Optional[int] = None):
    meta = trace.meta
    flags = trace.misses()
    source = "exact" if trace.data_hit is not None else "threshold"
    out = {"records": len(trace), "misses": int(flags.sum()), "miss_flags_from": source,
           "mean_latency": trace.mean_latency}
    if trace.data_hit is None:
        out["miss_threshold"] = miss_threshold(trace.latency)
    if max_period is None:
        try:
            init = parse_init_spec(meta.init)
            if isinstance(init, UniformStride) and meta.element_size:
                n = meta.array_size // meta.element_size
                from math import gcd
                max_period = n // gcd(n, init.stride % n or n)
        except ValueError:
            pass
    period = None
    if max_period:
        try:
            period = find_period(flags, max_period, skip=max_period)
        except InferenceError:
            out["period_note"] = "trace too short for the period test"
    out["period"] = period
    out["miss_positions_last_period"] = (
        [int(i) for i in np.nonzero(flags[-period:])[0]] if period else None)
    out["missed_elements_last_period"] = (
        sorted(int(x) for x in trace.index[-period:][flags[-period:]]) if period else None)
    hist = Counter(int(x) for x in trace.latency)
    out["latency_histogram"] = [[lat, hist[lat]] for lat in sorted(hist)]
    if trace.pattern is not None:
        pc = Counter(str(p) for p in trace.pattern)
        out["pattern_counts"] = {p: pc[p] for p in sorted(pc)}
    return out


def cmd_analyze(args, argv):
    trace = read_trace(args.trace)
    res = analyze_trace(trace, args.max_period)
    print(f"{res['records']} records, {res['misses']} misses ({res['miss_flags_from']}), "
          f"period = {res['period']}")
    if res.get("missed_elements_last_period"):
        print("missed elements in the last period (1-based): "
              + ", ".join(str(i + 1) for i in res["missed_elements_last_period"]))
    if args.out:
        write_report({"command": "analyze", "invocation": _invocation(argv),
                      "trace": str(args.trace), "analysis": res}, args.out)
    return EXIT_OK


# -- calc ----------------------------------------------------------------------

def calc_device(name: str, latency: Optional[float] = None, ilp: int = 1):
    g = load_gpu(name)
    r = g.rates
    glob = tp.theoretical_global_bw(r)
    wsm = tp.theoretical_smem_bw(r)
    out = {"device": g.name, "theoretical_global_gbps": round(glob, 2),
           "theoretical_smem_gbps": round(wsm, 2)}
    if g.measured_global_gbps:
        out["measured_global_gbps"] = g.measured_global_gbps
        out["global_efficiency"] = round(tp.efficiency(g.measured_global_gbps, glob), 4)
    if g.peak_smem_gbps:
        out["peak_smem_gbps"] = g.peak_smem_gbps
        out["smem_efficiency"] = round(tp.efficiency(g.peak_smem_gbps, wsm), 4)
    if g.peak_smem_shape and g.peak_smem_gbps:
        s = g.peak_smem_shape
        out["peak_shape"] = {"cta_size": s.cta_size, "ctas_per_sm": s.ctas_per_sm, "ilp": s.ilp,
                             "active_warps": s.active_warps_per_sm,
                             "implied_total_latency_cycles": round(
                                 tp.latency_for_throughput(s, r, g.peak_smem_gbps), 1)}
    lat = g.smem.latency[1] if latency is None else latency
    warp_words = tp.warp_words_per_cycle(wsm, r.f_core)
    need = tp.required_warps(lat, warp_words, ilp)
    out["littles_law"] = {"latency_cycles": lat, "warp_words_per_cycle": round(warp_words, 4),
                          "ilp": ilp, "required_warps": need,
                          "max_warps_per_sm": g.max_warps_per_sm,
                          "exceeds_hardware_limit": need > g.max_warps_per_sm}
    return out


def cmd_calc(args, argv):
    res = calc_device(args.device, args.latency, args.ilp)
    print(f"{res['device']}: global {res['theoretical_global_gbps']:.2f} GB/s, "
          f"shared {res['theoretical_smem_gbps']:.2f} GB/s per SM, "
          f"{res['littles_law']['required_warps']} warps needed at ILP {args.ilp}")
    if args.out:
        write_report({"command": "calc", "invocation": _invocation(argv), "calc": res}, args.out)
    return EXIT_OK


# -- report --------------------------------------------------------------------

def cmd_report(args, argv):
    merged = {"command": "report", "invocation": _invocation(argv), "inputs": {}}
    for p in args.inputs:
        merged["inputs"][Path(p).name] = read_report(p)
    if args.out:
        write_report(merged, args.out)
    if args.plot_data:
        d = Path(args.plot_data)
        d.mkdir(parents=True, exist_ok=True)
        for name, rep in merged["inputs"].items():
            hist = rep.get("analysis", {}).get("latency_histogram")
            if hist:
                with open(d / f"{Path(name).stem}_latency_histogram.csv", "w", newline="") as fh:
                    w = csv.writer(fh, lineterminator="\n")
                    w.writerow(["latency_cycles", "count"])
                    w.writerows(hist)
            classic = rep.get("classic")
            if classic:
                with open(d / f"{Path(name).stem}_wong.csv", "w", newline="") as fh:
                    w = csv.writer(fh, lineterminator="\n")
                    w.writerow(["N", "t_avg"])
                    w.writerows(classic["wong"]["evidence"]["series"])
                with open(d / f"{Path(name).stem}_saavedra.csv", "w", newline="") as fh:
                    w = csv.writer(fh, lineterminator="\n")
                    w.writerow(["s", "t_avg"])
                    w.writerows(classic["saavedra"]["evidence"]["curve"])
    print(f"merged {len(args.inputs)} report(s)" + (f" -> {args.out}" if args.out else ""))
    if not args.out:
        json.dump(merged, sys.stdout, indent=2, sort_keys=True)
        print()
    return EXIT_OK


# -- parser --------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="gpumemlab", description=__doc__.splitlines()[0])
    p.add_argument("--version", action="version", version=f"gpumemlab {__version__}")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    s = sub.add_parser("simulate", help="run a fine-grained P-chase against a preset")
    g = s.add_mutually_exclusive_group(required=True)
    g.add_argument("--preset", help="cache or device preset name")
    g.add_argument("--config", help="cache or hierarchy config file")
    s.add_argument("--N", type=_size, help="array size in bytes")
    s.add_argument("--s", type=_size, help="stride in bytes")
    s.add_argument("--segments", help="segmented walk: start/stride/hops;...[@loop] in elements")
    s.add_argument("--pattern", choices=sorted(NAMED_PATTERNS), help="named walk")
    s.add_argument("--k", type=int, help="iterations (default: one pass)")
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--element-size", type=_size, default=4)
    s.add_argument("--no-preheat", action="store_true")
    s.add_argument("--out", help="trace CSV to write")
    s.set_defaults(func=cmd_simulate)

    s = sub.add_parser("infer", help="recover cache parameters")
    s.add_argument("--probe", help="sim:<cache preset> or dir:<trace directory>")
    s.add_argument("--preset", help="shorthand for --probe sim:<preset>")
    s.add_argument("--element-size", type=_size, default=None,
                   help="bytes per element (default 4; use e.g. 256KB for TLBs)")
    s.add_argument("--floor", type=_size, default=None, help="search floor (default 1KB)")
    s.add_argument("--ceiling", type=_size, default=256 << 20, help="search ceiling (default 256MB)")
    s.add_argument("--seeds", type=int, default=3, help="seeds for the aperiodicity test")
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--classic", action="store_true", help="also run the stride and size sweeps")
    s.add_argument("--out", help="JSON report")
    s.set_defaults(func=cmd_infer)

    s = sub.add_parser("roundtrip", help="random configs: simulate, infer, compare")
    s.add_argument("--random-configs", type=int, default=20)
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--workers", type=int, default=1)
    s.add_argument("--out", help="JSON report")
    s.set_defaults(func=cmd_roundtrip)

    s = sub.add_parser("analyze", help="periodicity, misses and latency histogram of a trace")
    s.add_argument("--trace", required=True)
    s.add_argument("--max-period", type=int, default=None)
    s.add_argument("--out", help="JSON report")
    s.set_defaults(func=cmd_analyze)

    s = sub.add_parser("calc", help="bandwidth calculators and Little's law")
    s.add_argument("--device", required=True, help="gtx560ti | gtx780 | gtx980")
    s.add_argument("--latency", type=float, default=None,
                   help="shared-memory latency in cycles (default: conflict-free latency)")
    s.add_argument("--ilp", type=int, default=1)
    s.add_argument("--out", help="JSON report")
    s.set_defaults(func=cmd_calc)

    s = sub.add_parser("report", help="merge JSON reports and emit plot data")
    s.add_argument("--inputs", nargs="+", required=True)
    s.add_argument("--out")
    s.add_argument("--plot-data", help="directory for CSV plot series")
    s.set_defaults(func=cmd_report)
    return p


def main(argv: Optional[List[str]] = None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.command == "infer":
        args.element_size_given = args.element_size is not None
        if args.element_size is None:
            args.element_size = 4
        if args.floor is None:
            args.floor = max(1024, args.element_size)
    try:
        return args.func(args, argv)
    except UsageError as e:
        print(f"gpumemlab: error: {e}", file=sys.stderr)
        return EXIT_USAGE
    except CoverageError as e:
        print(f"gpumemlab: {e}", file=sys.stderr)
        return EXIT_INVALID
    except (ConfigError, AddressRangeError, ClassificationError, TraceFormatError, WalkError,
            TraceLengthError, UnknownPresetError, InferenceError, ValueError, OSError) as e:
        print(f"gpumemlab: error: {e}", file=sys.stderr)
        return EXIT_INVALID


if __name__ == "__main__":
    sys.exit(main())
