"""Bit-exact Q8.8 saturating fixed-point arithmetic.

Values are signed 16-bit raws interpreted as raw / 256 (8 integer bits, 8
fractional bits), covering exactly [-128.0, +127.99609375]. Every 16-bit
write-back saturates; wrap-around never occurs. Conversion from reals
rounds half to even; multiplication truncates (arithmetic shift right by
8, toward negative infinity). Multiply-accumulate runs in a wide
accumulator holding raw products at Q16.16 scale and saturates once at
readout, so a full 784-term dot product never saturates per-term.

The scalar functions are the reference datapath. The `*_array` helpers
vectorize the same bit-exact rules with numpy for whole feature vectors;
tests cross-check the two routes.
"""

from __future__ import annotations

import math

import numpy as np

FRAC_BITS = 8
ONE = 1 << FRAC_BITS
RAW_MIN = -(1 << 15)
RAW_MAX = (1 << 15) - 1
REAL_MIN = RAW_MIN / ONE
REAL_MAX = RAW_MAX / ONE


def saturate(raw: int) -> int:
    if raw > RAW_MAX:
        return RAW_MAX
    if raw < RAW_MIN:
        return RAW_MIN
    return raw


def from_real(x: float) -> int:
    """Quantize a real to a Q8.8 raw: round half to even, then saturate."""
    if not math.isfinite(x):
        raise ValueError(f"cannot quantize non-finite value {x!r}")
    return saturate(round(x * ONE))


def to_real(raw: int) -> float:
    return raw / ONE


def add(a: int, b: int) -> int:
    return saturate(a + b)


def sub(a: int, b: int) -> int:
    return saturate(a - b)


def mul(a: int, b: int) -> int:
    # Python's >> on negative ints is an arithmetic shift (floors), which
    # is the hardware truncation behaviour this format specifies.
    return saturate((a * b) >> FRAC_BITS)


def mac(acc: int, a: int, b: int) -> int:
    """Accumulate one raw product into a wide (Q16.16-scale) accumulator."""
    return acc + a * b


def mac_readout(acc: int) -> int:
    """Rescale a wide accumulator back to Q8.8 with a single saturation."""
    return saturate(acc >> FRAC_BITS)


def quantize_array(x: np.ndarray) -> np.ndarray:
    """Vectorized from_real: float array to int16 raw array."""
    x = np.asarray(x, dtype=np.float64)
    if not np.isfinite(x).all():
        raise ValueError("cannot quantize non-finite values")
    # np.rint rounds half to even, matching from_real.
    return np.clip(np.rint(x * ONE), RAW_MIN, RAW_MAX).astype(np.int16)


def to_real_array(raw: np.ndarray) -> np.ndarray:
    return np.asarray(raw, dtype=np.float64) / ONE


def dot_raw(a_raw: np.ndarray, b_raw: np.ndarray) -> int:
    """Exact wide-accumulator dot product of two raw vectors.

    Equivalent to folding `mac` over the pairs; int64 is exact here since
    each product fits in 31 bits and realistic term counts stay far below
    the 2^63 ceiling.
    """
    acc = np.dot(a_raw.astype(np.int64), b_raw.astype(np.int64))
    return int(acc)
