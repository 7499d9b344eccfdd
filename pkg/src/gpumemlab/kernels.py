"""Hot inner loops: cache state stepping and pointer-chase walking.

Each kernel is written once as plain Python over NumPy arrays and compiled by
numba unless ``GPUMEMLAB_DISABLE_NUMBA`` is set (see ``_accel``).  The
uncompiled function stays reachable as ``kernel.py_func`` for benchmarking.
"""
import numpy as np

from ._accel import jit

POLICY_LRU = 0
POLICY_PROBABILISTIC = 1
POLICY_ALTERNATING = 2
POLICY_PINNED_LRU = 3


@jit
def cache_run(set_idx, block, sector, group, draws,
              tags, stamps, valid, frames, policy, cdf, group_size, hot_way,
              alt_parity, alt_rr, counter, hit, evicted_way, evicted_tag):
    """Step a cache through ``len(set_idx)`` accesses, in place.

    ``tags``/``stamps``/``valid`` are (sets, max_frames) arrays; an empty
    frame holds tag -1.  ``valid`` is a bitmask of filled sectors per frame.
    Writes ``hit``, ``evicted_way`` and ``evicted_tag`` per access and returns
    the updated access counter.
    """
    n = set_idx.shape[0]
    for i in range(n):
        s = set_idx[i]
        tag = block[i]
        bit = np.int64(1) << sector[i]
        nf = frames[s]
        lo = 0
        hi = nf
        if policy == POLICY_PINNED_LRU:
            lo = group[i] * group_size
            hi = lo + group_size
        counter += 1
        evicted_way[i] = -1
        evicted_tag[i] = -1

        found = -1
        for w in range(lo, hi):
            if tags[s, w] == tag:
                found = w
                break
        if found >= 0:
            if valid[s, found] & bit:
                hit[i] = True
            else:
                hit[i] = False
                valid[s, found] |= bit
            if policy != POLICY_PROBABILISTIC:
                stamps[s, found] = counter
            continue

        hit[i] = False
        free = -1
        for w in range(lo, hi):
            if tags[s, w] < 0:
                free = w
                break
        if free < 0:
            if policy == POLICY_PROBABILISTIC:
                u = draws[i]
                free = nf - 1
                for w in range(nf):
                    if u < cdf[w]:
                        free = w
                        break
            elif policy == POLICY_ALTERNATING:
                if alt_parity[s] == 0 or nf == 1:
                    free = hot_way
                else:
                    k = alt_rr[s] % (nf - 1)
                    free = k if k < hot_way else k + 1
                    alt_rr[s] += 1
                alt_parity[s] ^= 1
            else:
                oldest = stamps[s, lo]
                free = lo
                for w in range(lo + 1, hi):
                    if stamps[s, w] < oldest:
                        oldest = stamps[s, w]
                        free = w
            evicted_way[i] = free
            evicted_tag[i] = tags[s, free]
        tags[s, free] = tag
        valid[s, free] = bit
        stamps[s, free] = counter
    return counter


@jit
def walk_chase(next_index, start, k):
    """Follow a dense chase array ``k`` steps from ``start``; return visited indices."""
    out = np.empty(k, dtype=np.int64)
    j = start
    for it in range(k):
        out[it] = j
        j = next_index[j]
    return out


@jit
def shift_invariant(seq, lo, period):
    """True when ``seq[i] == seq[i + period]`` for every i >= lo still in range."""
    n = seq.shape[0]
    for i in range(lo, n - period):
        if seq[i] != seq[i + period]:
            return False
    return True
