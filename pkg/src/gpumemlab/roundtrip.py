"""Random cache configurations and simulate-infer-compare round trips."""
from __future__ import annotations

import random
from dataclasses import dataclass
from typing import List, Optional

from .cache import CacheConfig, LRU, ModuloLine, ProbabilisticWay, StandardBits, Uniform
from .inference import InferenceError, SimProbe, params_match, run_pipeline


def random_config(rng: random.Random, index: int = 0) -> CacheConfig:
    """Uniform layout, StandardBits or ModuloLine, LRU or ProbabilisticWay."""
    b = rng.choice([8, 16, 32, 64, 128])
    T = rng.choice([1, 2, 4, 8, 16])
    a = rng.randint(1, 8)
    mapping = rng.choice([StandardBits(), ModuloLine()])
    if a >= 2 and rng.random() < 0.5:
        raw = [rng.randint(1, 4) for _ in range(a)]
        policy = ProbabilisticWay(tuple(w / sum(raw) for w in raw), rng_seed=rng.randrange(1 << 16))
    else:
        policy = LRU()
    return CacheConfig(T * a * b, b, Uniform(T, a), mapping, policy, name=f"random-{index}")


@dataclass
class RoundTripResult:
    config: CacheConfig
    recovered: bool
    inferred: Optional[dict]
    error: Optional[str] = None


def roundtrip_one(cfg: CacheConfig, seed: int = 0) -> RoundTripResult:
    try:
        p = run_pipeline(SimProbe(cfg, 4, seed), floor=4,
                         min_evictions=2_000)
    except InferenceError as e:
        return RoundTripResult(cfg, False, None, str(e))
    return RoundTripResult(cfg, params_match(p, cfg), p.to_dict())


def random_configs(n: int, seed: int) -> List[CacheConfig]:
    rng = random.Random(seed)
    return [random_config(rng, i) for i in range(n)]
