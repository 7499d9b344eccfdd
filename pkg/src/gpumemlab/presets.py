"""Shipped configuration files: caches, load-path devices and GPU specs.

Files live in ``presets/{caches,devices,gpus}/<name>.yaml``.  Setting
``GPUMEMLAB_PRESET_DIR`` points lookups at a different tree with the same
layout; names are matched case-insensitively.
"""
from __future__ import annotations

import os
from pathlib import Path
from typing import List

PRESET_ENV = "GPUMEMLAB_PRESET_DIR"
BUILTIN_DIR = Path(__file__).with_name("presets")
CACHE_ALIASES = {"gtx560ti-l1": "fermi-l1"}


class UnknownPresetError(KeyError):
    def __str__(self):
        return self.args[0]


def preset_dir() -> Path:
    env = os.environ.get(PRESET_ENV)
    return Path(env) if env else BUILTIN_DIR


def _find(kind: str, name: str) -> Path:
    key = name.strip().lower()
    key = CACHE_ALIASES.get(key, key) if kind == "caches" else key
    folder = preset_dir() / kind
    for p in sorted(folder.glob("*.yaml")):
        if p.stem.lower() == key:
            return p
    known = ", ".join(list_presets(kind)) or "none"
    raise UnknownPresetError(f"unknown {kind[:-1]} preset {name!r} (known: {known})")


def list_presets(kind: str) -> List[str]:
    return sorted(p.stem for p in (preset_dir() / kind).glob("*.yaml"))


def preset_path(kind: str, name: str) -> Path:
    return _find(kind, name)


def _load(kind: str, name: str, cls):
    from .traceio import read_config

    cfg = read_config(_find(kind, name))
    if not isinstance(cfg, cls):
        raise UnknownPresetError(f"{name!r} is not a {cls.__name__} file")
    return cfg


def load_cache(name: str):
    from .cache import CacheConfig
    return _load("caches", name, CacheConfig)


def load_device(name: str):
    from .hierarchy import HierarchyConfig
    return _load("devices", name, HierarchyConfig)


def load_gpu(name: str):
    """GPU spec by name; device names such as ``GTX980-L1on`` resolve to
    their GPU (``gtx980``)."""
    from .devices import GpuSpec
    key = name.strip().lower().split("-l1")[0]
    return _load("gpus", key, GpuSpec)


def dep_chain_overhead(device: str) -> int:
    return load_gpu(device).dep_chain_overhead_cycles
