"""Closed-form bandwidth calculators and Little's-law sizing.

Bandwidths are in GB/s with GB = 1e9 bytes.  Throughput fed to
:func:`required_warps` is counted in warp-wide words per cycle per SM: one
4-byte word for each of the 32 lanes, i.e. 128 bytes.  With that unit one
in-flight warp instruction carries one word, so warps * ILP = latency *
throughput holds without further scaling.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

WORD = 4
WARP = 32


@dataclass(frozen=True)
class DeviceRates:
    f_mem: float            # MHz
    f_core: float           # GHz
    bus_width_bits: int
    bank_width_bytes: int
    ddr_factor: int = 4

    def __post_init__(self):
        for name in ("f_mem", "f_core", "bus_width_bits", "bank_width_bytes", "ddr_factor"):
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be positive")


@dataclass(frozen=True)
class KernelShape:
    cta_size: int
    ctas_per_sm: int
    ilp: int = 1

    def __post_init__(self):
        if self.cta_size <= 0 or self.ctas_per_sm <= 0:
            raise ValueError("CTA size and count must be positive")
        if self.ilp < 1:
            raise ValueError("ilp must be >= 1")

    @property
    def active_threads(self) -> int:
        return self.cta_size * self.ctas_per_sm

    @property
    def active_warps_per_sm(self) -> int:
        return self.active_threads // WARP


def theoretical_global_bw(rates: DeviceRates) -> float:
    return rates.f_mem * 1e6 * (rates.bus_width_bits / 8) * rates.ddr_factor / 1e9


def theoretical_smem_bw(rates: DeviceRates) -> float:
    return rates.f_core * rates.bank_width_bytes * WARP


def shared_throughput(shape: KernelShape, rates: DeviceRates, total_latency_cycles: float) -> float:
    """Achieved per-SM shared throughput for a copy kernel (read + write)."""
    if total_latency_cycles <= 0:
        raise ValueError("total latency must be > 0")
    return 2 * rates.f_core * WORD * shape.active_threads * shape.ilp / total_latency_cycles


def latency_for_throughput(shape: KernelShape, rates: DeviceRates, gbps: float) -> float:
    """Inverse of :func:`shared_throughput`."""
    return 2 * rates.f_core * WORD * shape.active_threads * shape.ilp / gbps


def words_per_cycle(gbps: float, f_core: float) -> float:
    """GB/s at ``f_core`` GHz expressed as 4-byte words per cycle."""
    return gbps / f_core / WORD


def warp_words_per_cycle(gbps: float, f_core: float) -> float:
    """GB/s at ``f_core`` GHz expressed as warp-wide (128 B) words per cycle."""
    return words_per_cycle(gbps, f_core) / WARP


def required_warps(latency_cycles: float, warp_words: float, ilp: int = 1) -> int:
    """Warps needed so that warps * ILP covers latency * throughput."""
    if ilp < 1:
        raise ValueError("ilp must be >= 1")
    need = latency_cycles * warp_words / ilp
    return math.ceil(round(need, 9))


def efficiency(achieved_gbps: float, peak_gbps: float) -> float:
    return achieved_gbps / peak_gbps
