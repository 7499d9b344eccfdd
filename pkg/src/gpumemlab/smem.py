"""Shared-memory bank mapping, warp conflict degrees and calibrated latencies."""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

WARP = 32
FOUR_BYTE = "four_byte"
EIGHT_BYTE = "eight_byte"
CALIBRATION_DEGREES = (1, 2, 4, 8, 16, 32)


@dataclass(frozen=True)
class BankConfig:
    num_banks: int = 32
    bank_width_bytes: int = 4
    mode: str = FOUR_BYTE

    def __post_init__(self):
        if self.num_banks <= 0:
            raise ValueError("num_banks must be positive")
        if self.bank_width_bytes not in (4, 8):
            raise ValueError("bank_width_bytes must be 4 or 8")
        if self.mode not in (FOUR_BYTE, EIGHT_BYTE):
            raise ValueError(f"mode must be {FOUR_BYTE} or {EIGHT_BYTE}")
        if self.mode == EIGHT_BYTE and self.bank_width_bytes != 8:
            raise ValueError("eight_byte mode needs 8-byte banks")


FERMI_BANKS = BankConfig(32, 4)
MAXWELL_BANKS = BankConfig(32, 4)
KEPLER_4B = BankConfig(32, 8, FOUR_BYTE)
KEPLER_8B = BankConfig(32, 8, EIGHT_BYTE)


def bank_of(word: int, cfg: BankConfig) -> Tuple[int, int]:
    """(bank, row) of a 4-byte word index.

    8-byte banks hold two words per row.  In four-byte mode consecutive words
    still go to consecutive banks, so words ``w`` and ``w + 32`` share a row;
    in eight-byte mode words ``2j`` and ``2j + 1`` share bank ``j mod 32``.
    """
    per_row = cfg.bank_width_bytes // 4
    row = word // (cfg.num_banks * per_row)
    if cfg.mode == EIGHT_BYTE:
        return (word // 2) % cfg.num_banks, row
    return word % cfg.num_banks, row


@dataclass(frozen=True)
class WarpAccess:
    words: Tuple[int, ...]

    def __post_init__(self):
        object.__setattr__(self, "words", tuple(int(w) for w in self.words))
        if len(self.words) != WARP:
            raise ValueError(f"a warp access needs exactly {WARP} lanes")
        if any(w < 0 for w in self.words):
            raise ValueError("word indices must be >= 0")

    @classmethod
    def strided(cls, stride: int) -> "WarpAccess":
        if stride < 0:
            raise ValueError("stride must be >= 0")
        return cls(tuple(lane * stride for lane in range(WARP)))


@dataclass
class ConflictReport:
    degree: int
    lanes_by_bank: Dict[int, List[int]] = field(default_factory=dict)


def analyze_access(access: WarpAccess, cfg: BankConfig) -> ConflictReport:
    """Degree = most distinct rows requested from any one bank.

    Lanes hitting the same row of a bank are served together (broadcast).
    """
    rows: Dict[int, set] = {}
    lanes: Dict[int, List[int]] = {}
    for lane, w in enumerate(access.words):
        b, r = bank_of(w, cfg)
        rows.setdefault(b, set()).add(r)
        lanes.setdefault(b, []).append(lane)
    return ConflictReport(max(len(v) for v in rows.values()), lanes)


def conflict_degree(stride: int, cfg: BankConfig) -> ConflictReport:
    return analyze_access(WarpAccess.strided(stride), cfg)


@dataclass(frozen=True)
class SmemCalibration:
    """Latency in cycles for each calibrated conflict degree."""

    device: str
    latency: Dict[int, int]

    def __post_init__(self):
        lat = {int(k): int(v) for k, v in self.latency.items()}
        if 1 not in lat or 32 not in lat:
            raise ValueError("calibration needs degrees 1 and 32")
        degs = sorted(lat)
        if any(lat[a] > lat[b] for a, b in zip(degs, degs[1:])):
            raise ValueError("calibrated latency must not decrease with degree")
        object.__setattr__(self, "latency", dict(sorted(lat.items())))

    def __call__(self, degree: float) -> float:
        if not 1 <= degree <= 32:
            raise ValueError("degree must be within 1..32")
        degs = list(self.latency)
        v = float(np.interp(degree, degs, [self.latency[d] for d in degs]))
        return int(v) if v == int(v) else v


def conflict_latency(degree: float, device) -> float:
    """Calibrated latency of a ``degree``-way conflict on ``device``
    (a :class:`SmemCalibration` or a GPU preset name)."""
    if isinstance(device, SmemCalibration):
        return device(degree)
    from .presets import load_gpu
    return load_gpu(device).smem(degree)


def simulate_warp(access: WarpAccess, cfg: BankConfig, device) -> float:
    return conflict_latency(analyze_access(access, cfg).degree, device)
