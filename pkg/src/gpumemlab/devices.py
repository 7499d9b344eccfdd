"""Per-GPU data that is not part of the load path: shared-memory banks and
calibration, clock rates, warp limits and measured peaks."""
from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Tuple

from .smem import BankConfig, SmemCalibration
from .throughput import DeviceRates, KernelShape


@dataclass(frozen=True)
class GpuSpec:
    name: str
    generation: str
    rates: DeviceRates
    banks: Tuple[BankConfig, ...]
    smem: SmemCalibration
    max_warps_per_sm: int
    clock_overhead_cycles: int
    dep_chain_overhead_cycles: int
    peak_smem_shape: Optional[KernelShape] = None
    peak_smem_gbps: Optional[float] = None
    measured_global_gbps: Optional[float] = None

    def __post_init__(self):
        object.__setattr__(self, "banks", tuple(self.banks))
        if not self.banks:
            raise ValueError("at least one bank configuration is required")
        if self.max_warps_per_sm <= 0:
            raise ValueError("max_warps_per_sm must be positive")

    @property
    def bank(self) -> BankConfig:
        """Default bank configuration (first listed)."""
        return self.banks[0]
