"""Counter-based SplitMix64 streams.

Every random draw is a pure function of ``(seed, stream, index)``:

    key(seed, stream)   = mix64(seed + (stream + 1) * GAMMA)
    draw(key, index)    = mix64(key + (index + 1) * GAMMA)

i.e. ``key`` is output ``stream`` of a SplitMix64 generator seeded with
``seed`` and ``draw`` is output ``index`` of a SplitMix64 generator seeded with
``key``. Trials can therefore be evaluated in any order, in chunks, or in
parallel and still produce identical numbers. Uniforms use the top 53 bits.
"""

from __future__ import annotations

import numpy as np

GAMMA = np.uint64(0x9E3779B97F4A7C15)
_M1 = np.uint64(0xBF58476D1CE4E5B9)
_M2 = np.uint64(0x94D049BB133111EB)
_MASK64 = (1 << 64) - 1


def mix64(z):
    """SplitMix64 finalizer on a uint64 array (wrapping arithmetic)."""
    z = np.asarray(z, dtype=np.uint64)
    with np.errstate(over="ignore"):
        z = (z ^ (z >> np.uint64(30))) * _M1
        z = (z ^ (z >> np.uint64(27))) * _M2
    return z ^ (z >> np.uint64(31))


def _offset(index):
    index = np.asarray(index, dtype=np.uint64)
    with np.errstate(over="ignore"):
        return (index + np.uint64(1)) * GAMMA


def stream_keys(seed: int, streams) -> np.ndarray:
    """Per-stream keys for stream indices ``streams`` (array-like)."""
    base = np.uint64(seed & _MASK64)
    with np.errstate(over="ignore"):
        return mix64(base + _offset(streams))


def draw_bits(keys, index: int) -> np.ndarray:
    """Raw 64-bit output number ``index`` of every stream in ``keys``."""
    keys = np.asarray(keys, dtype=np.uint64)
    with np.errstate(over="ignore"):
        return mix64(keys + _offset(index))


def uniforms(keys, index: int) -> np.ndarray:
    """Uniform doubles in [0, 1), one per stream, for draw number ``index``."""
    bits = draw_bits(keys, index) >> np.uint64(11)
    return bits.astype(np.float64) * (1.0 / 9007199254740992.0)


def derive_seed(seed: int, index: int) -> int:
    """Child seed number ``index`` of ``seed`` (used for sweep cells)."""
    return int(stream_keys(seed, [index])[0])
