"""Fine-grained pointer-chase microbenchmark toolkit for GPU memory
hierarchies: cache and TLB simulators, trace tooling, parameter inference,
shared-memory bank model and throughput calculators."""

__version__ = "0.1.0"

from .cache import CacheConfig, CacheState  # noqa: E402,F401
from .hierarchy import HierarchyConfig, HierarchySim  # noqa: E402,F401
from .pchase import PChaseConfig, Trace, run_classic, run_fine_grained  # noqa: E402,F401
