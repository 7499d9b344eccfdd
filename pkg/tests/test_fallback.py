"""The pure-Python kernels must agree with the compiled ones."""
import json
import os
import subprocess
import sys

import numpy as np
import pytest

from gpumemlab import _accel, kernels

SCRIPT = r"""
import json
from gpumemlab import _accel
from gpumemlab.hierarchy import HierarchySim, preset
from gpumemlab.inference import SimProbe, run_pipeline
from gpumemlab.pchase import CacheSim, PChaseConfig, UniformStride, latency_spectrum, run_fine_grained
from gpumemlab.presets import load_cache
out = {"numba": _accel.HAVE_NUMBA}
tr = run_fine_grained(CacheSim(load_cache("fermi-L1"), seed=3),
                      PChaseConfig(16 * 1024 + 256, UniformStride(128), 3000))
out["fermi"] = tr.latency.tolist()
sp = run_fine_grained(HierarchySim(preset("gtx780")), latency_spectrum())
out["spectrum"] = sp.pattern.tolist()
out["pipeline"] = run_pipeline(SimProbe(load_cache("toy-fig3")), floor=4).to_dict()
print(json.dumps(out, sort_keys=True, default=str))
"""


def _run(disable):
    env = dict(os.environ)
    env.pop("GPUMEMLAB_DISABLE_NUMBA", None)
    if disable:
        env["GPUMEMLAB_DISABLE_NUMBA"] = "1"
    r = subprocess.run([sys.executable, "-c", SCRIPT], env=env, capture_output=True, text=True,
                       check=True)
    return json.loads(r.stdout)


def test_fallback_matches_compiled():
    fast, slow = _run(False), _run(True)
    assert slow.pop("numba") is False
    fast.pop("numba")
    assert fast == slow


@pytest.mark.skipif(not _accel.HAVE_NUMBA, reason="numba disabled")
def test_shift_invariant_py_func_agrees():
    rng = np.random.default_rng(1)
    seq = np.tile(rng.integers(0, 2, 7).astype(np.int8), 30)
    for p in range(1, 15):
        assert kernels.shift_invariant(seq, 5, p) == kernels.shift_invariant.py_func(seq, 5, p)
