"""Counter-based random streams keyed by (seed, level, cube address, draw).

Every parent cube gets its own stream derived by hashing, so selections are
independent across parents and do not depend on the order in which parents
are processed. The mixer is splitmix64, applied to whole numpy arrays.
"""
from __future__ import annotations

import numpy as np

_GOLDEN = np.uint64(0x9E3779B97F4A7C15)
_C1 = np.uint64(0xBF58476D1CE4E5B9)
_C2 = np.uint64(0x94D049BB133111EB)
_MASK64 = (1 << 64) - 1


def _mix(z: np.ndarray) -> np.ndarray:
    with np.errstate(over="ignore"):
        z = z + _GOLDEN
        z = (z ^ (z >> np.uint64(30))) * _C1
        z = (z ^ (z >> np.uint64(27))) * _C2
    return z ^ (z >> np.uint64(31))


def as_u64(values) -> np.ndarray:
    """Reinterpret integers (possibly negative or > 2**63) as uint64 words."""
    if isinstance(values, np.ndarray):
        if values.dtype == np.uint64:
            return values
        return values.astype(np.int64).view(np.uint64)
    if isinstance(values, (int, np.integer)):
        return np.array([int(values) & _MASK64], dtype=np.uint64)
    return np.array([int(v) & _MASK64 for v in values], dtype=np.uint64)


def hash_keys(seeds, *parts) -> np.ndarray:
    """Fold `seeds` (shape (K,) or scalar) with further key parts.

    Each part is a scalar or an array broadcastable to (K,); 2-D integer
    arrays (K, d) are folded column by column.
    """
    h = _mix(as_u64(seeds))
    for part in parts:
        arr = np.asarray(part)
        if arr.ndim == 2:
            for j in range(arr.shape[1]):
                h = _mix(h ^ as_u64(np.ascontiguousarray(arr[:, j])))
        else:
            h = _mix(h ^ as_u64(arr if arr.ndim else int(arr)))
    return h


def uniforms(keys: np.ndarray, draws: int) -> np.ndarray:
    """(K, draws) array of U[0, 1) variates, one independent stream per key."""
    idx = np.arange(draws, dtype=np.uint64)
    with np.errstate(over="ignore"):
        z = _mix(_mix(keys[:, None] ^ (idx[None, :] * _C2 + np.uint64(1))))
    return (z >> np.uint64(11)).astype(np.float64) * (2.0**-53)


def derive_seed(base_seed: int, *parts: int) -> int:
    """Scalar child seed, e.g. the seed of trial `t` of an experiment."""
    return int(hash_keys(base_seed, *[np.array([p], dtype=np.int64) for p in parts])[0])


def derive_seeds(base_seed: int, count: int, *parts: int) -> np.ndarray:
    """Child seeds for trials 0..count-1 as a uint64 array."""
    trial = np.arange(count, dtype=np.int64)
    keys = hash_keys(base_seed, *[np.full(count, p, dtype=np.int64) for p in parts], trial)
    return keys
