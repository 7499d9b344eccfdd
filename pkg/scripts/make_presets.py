"""Regenerate the shipped preset files from the values below.

Run from the repository root:  python3 scripts/make_presets.py
"""
from fractions import Fraction
from pathlib import Path

from gpumemlab.cache import (BitFields, CacheConfig, LRU, ModuloLine, ProbabilisticWay,
                             StandardBits, Unequal, Uniform)
from gpumemlab.devices import GpuSpec
from gpumemlab.hierarchy import HierarchyConfig, LatencyTable, PrefetchConfig
from gpumemlab.smem import BankConfig
from gpumemlab.smem import SmemCalibration
from gpumemlab.throughput import DeviceRates, KernelShape
from gpumemlab.traceio import write_config

KB, MB, GB = 1 << 10, 1 << 20, 1 << 30
OUT = Path(__file__).resolve().parents[1] / "src" / "gpumemlab" / "presets"

CACHES = {
    "toy-fig3": CacheConfig(48, 8, Uniform(3, 2), ModuloLine(), name="toy-fig3"),
    # sectored: 32 B lines grouped in 128 B blocks, 4 sets from address bits 7-8
    "gtx780-texL1": CacheConfig(12 * KB, 32, Uniform(4, 96), BitFields((0, 4), (7, 8)),
                                sector_lines=4, name="gtx780-texL1"),
    "gtx980-L1": CacheConfig(24 * KB, 32, Uniform(4, 192), BitFields((0, 4), (7, 8)),
                             sector_lines=4, name="gtx980-L1"),
    "fermi-L1": CacheConfig(16 * KB, 128, Uniform(32, 4), StandardBits(),
                            ProbabilisticWay((1 / 6, 1 / 2, 1 / 6, 1 / 6)), name="fermi-L1"),
    "l1tlb": CacheConfig(32 * MB, 2 * MB, Uniform(1, 16), ModuloLine(),
                         ProbabilisticWay((1 / 16,) * 16), name="l1tlb"),
    "l2tlb": CacheConfig(130 * MB, 2 * MB, Unequal((17, 8, 8, 8, 8, 8, 8)), ModuloLine(),
                         LRU(), name="l2tlb"),
}


def l2_data(size, name):
    return CacheConfig(size, 32, Uniform(size // 32 // 16, 16), ModuloLine(),
                       ProbabilisticWay((1 / 16,) * 16), name=name)


def tlbs(c):
    return dict(l1_tlb=c["l1tlb"], l2_tlb=c["l2tlb"])


LAT = {
    "GTX980-L1on": (82, None, None, 385, 2439, 2740),
    "GTX980-L1off": (214, 225, 289, 383, 2461, 2750),
    "GTX780": (198, 204, 257, 339, 702, 968),
    "GTX560Ti-L1on": (96, 384, 468, 635, 1239, None),
    "GTX560Ti-L1off": (351, 378, 462, 619, 1225, None),
}


def table(name):
    return LatencyTable(dict(zip(("P1", "P2", "P3", "P4", "P5", "P6"), LAT[name])))


def devices():
    c = CACHES
    fermi = dict(l2_data=l2_data(512 * KB, "gtx560ti-L2"), dram_size=1 * GB,
                 activation_window=1 * GB, clock_overhead_cycles=14,
                 dep_chain_overhead_cycles=20, texture_l1=c["gtx780-texL1"], **tlbs(c))
    kepler = dict(l2_data=l2_data(1536 * KB, "gtx780-L2"), dram_size=3 * GB,
                  clock_overhead_cycles=16, dep_chain_overhead_cycles=32,
                  texture_l1=c["gtx780-texL1"], **tlbs(c))
    maxwell = dict(l2_data=l2_data(2 * MB, "gtx980-L2"), dram_size=4 * GB,
                   clock_overhead_cycles=6, dep_chain_overhead_cycles=16, **tlbs(c))
    return {
        "gtx560ti-l1on": HierarchyConfig("GTX560Ti-L1on", latencies=table("GTX560Ti-L1on"),
                                         l1_data=c["fermi-L1"], l1_enabled=True, **fermi),
        "gtx560ti-l1off": HierarchyConfig("GTX560Ti-L1off", latencies=table("GTX560Ti-L1off"),
                                          **fermi),
        "gtx780": HierarchyConfig("GTX780", latencies=table("GTX780"), **kepler),
        "gtx980-l1on": HierarchyConfig("GTX980-L1on", latencies=table("GTX980-L1on"),
                                       l1_data=c["gtx980-L1"], l1_enabled=True,
                                       l1_bypasses_tlb=True, **maxwell),
        "gtx980-l1off": HierarchyConfig("GTX980-L1off", latencies=table("GTX980-L1off"),
                                        texture_l1=c["gtx980-L1"], **maxwell),
    }


GPUS = {
    "gtx560ti": GpuSpec(
        "GTX560Ti", "fermi", DeviceRates(1050, 0.950, 256, 2), (BankConfig(32, 4),),
        SmemCalibration("GTX560Ti", {1: 50, 2: 87, 4: 162, 8: 311, 16: 611, 32: 1209}),
        max_warps_per_sm=48, clock_overhead_cycles=14, dep_chain_overhead_cycles=20,
        peak_smem_shape=KernelShape(512, 1, 4), peak_smem_gbps=34.90, measured_global_gbps=109.38),
    "gtx780": GpuSpec(
        "GTX780", "kepler", DeviceRates(1502, 1.006, 384, 8),
        (BankConfig(32, 8, "four_byte"), BankConfig(32, 8, "eight_byte")),
        SmemCalibration("GTX780", {1: 47, 2: 82, 4: 96, 8: 158, 16: 257, 32: 484}),
        max_warps_per_sm=64, clock_overhead_cycles=16, dep_chain_overhead_cycles=32,
        peak_smem_shape=KernelShape(1024, 1, 6), peak_smem_gbps=83.81, measured_global_gbps=215.92),
    # f_core 1.28 rather than the listed 1.279: only 1.28 reproduces W_SM = 163.84
    "gtx980": GpuSpec(
        "GTX980", "maxwell", DeviceRates(1753, 1.28, 256, 4), (BankConfig(32, 4),),
        SmemCalibration("GTX980", {1: 28, 2: 30, 4: 34, 8: 42, 16: 58, 32: 90}),
        max_warps_per_sm=64, clock_overhead_cycles=6, dep_chain_overhead_cycles=16,
        peak_smem_shape=KernelShape(256, 2, 8), peak_smem_gbps=137.41, measured_global_gbps=156.25),
}


def main():
    for sub, items in (("caches", CACHES), ("devices", devices()), ("gpus", GPUS)):
        d = OUT / sub
        d.mkdir(parents=True, exist_ok=True)
        for name, cfg in items.items():
            write_config(cfg, d / f"{name}.yaml")
            print(d / f"{name}.yaml")


if __name__ == "__main__":
    main()
