"""Counter-based SplitMix64 streams.

Generator name: ``splitmix64-counter``, version 1.  A stream is a 64-bit
seed ``s``; its ``k``-th output (``k = 0, 1, ...``) is
``mix(s + (k + 1) * 0x9E3779B97F4A7C15 mod 2**64)`` with the standard
SplitMix64 finalizer, and its ``k``-th uniform is ``(out >> 11) * 2**-53``.
The ``i``-th child seed of ``s`` is its ``i``-th output.  Being a pure
function of ``(seed, counter)`` the stream is reproducible across platforms
and vectorizes directly in ``uint64``.
"""

from __future__ import annotations

import numpy as np

NAME = "splitmix64-counter"
VERSION = 1

MASK = (1 << 64) - 1
GAMMA = 0x9E3779B97F4A7C15
_M1 = 0xBF58476D1CE4E5B9
_M2 = 0x94D049BB133111EB
_SCALE = 2.0 ** -53


def _mix(z: int) -> int:
    z = ((z ^ (z >> 30)) * _M1) & MASK
    z = ((z ^ (z >> 27)) * _M2) & MASK
    return z ^ (z >> 31)


def output(seed: int, k: int) -> int:
    return _mix((seed + (k + 1) * GAMMA) & MASK)


def uniform(seed: int, k: int) -> float:
    return (output(seed, k) >> 11) * _SCALE


def child_seed(seed: int, i: int) -> int:
    return output(seed, i)


def _mix_np(z: np.ndarray) -> np.ndarray:
    z = (z ^ (z >> np.uint64(30))) * np.uint64(_M1)
    z = (z ^ (z >> np.uint64(27))) * np.uint64(_M2)
    return z ^ (z >> np.uint64(31))


def outputs_np(seeds: np.ndarray, k: int) -> np.ndarray:
    """``output(seed, k)`` for an array of seeds."""
    offset = np.uint64(((k + 1) * GAMMA) & MASK)
    with np.errstate(over="ignore"):
        return _mix_np(seeds.astype(np.uint64) + offset)


def uniforms_np(seeds: np.ndarray, k: int) -> np.ndarray:
    return (outputs_np(seeds, k) >> np.uint64(11)).astype(np.float64) * _SCALE


def child_seeds_np(seed: int, start: int, stop: int) -> np.ndarray:
    """Child seeds ``start..stop-1`` of ``seed``."""
    ks = np.arange(start, stop, dtype=np.uint64)
    with np.errstate(over="ignore"):
        z = np.uint64(seed & MASK) + (ks + np.uint64(1)) * np.uint64(GAMMA)
        return _mix_np(z)
