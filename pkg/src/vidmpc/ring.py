"""Arithmetic in Z_{2^64} and fixed-point encoding of reals.

Scalars are plain Python ints in ``[0, 2**64)``; tensors are ``numpy.uint64``
arrays, whose arithmetic already wraps modulo 2**64.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import EncodingRangeError

RING_BITS = 64
RING_MOD = 1 << RING_BITS
RING_MASK = RING_MOD - 1
DEFAULT_FRAC_BITS = 16


def to_ring(x: int) -> int:
    return x & RING_MASK


def to_signed(v: int) -> int:
    """Two's-complement reading of a ring element."""
    v &= RING_MASK
    return v - RING_MOD if v >> (RING_BITS - 1) else v


def ring_add(x: int, y: int) -> int:
    return (x + y) & RING_MASK


def ring_sub(x: int, y: int) -> int:
    return (x - y) & RING_MASK


def ring_mul(x: int, y: int) -> int:
    return (x * y) & RING_MASK


def ring_neg(x: int) -> int:
    return (-x) & RING_MASK


def as_ring_array(x) -> np.ndarray:
    """Coerce ints / int arrays (possibly negative) into a uint64 array."""
    if isinstance(x, np.ndarray):
        if x.dtype == np.uint64:
            return x
        if x.dtype.kind == "i":
            return x.astype(np.int64).view(np.uint64)
        if x.dtype.kind == "u":
            return x.astype(np.uint64)
        if x.dtype == object:
            return np.array([int(v) & RING_MASK for v in x.ravel()], dtype=np.uint64).reshape(x.shape)
        raise TypeError(f"cannot interpret dtype {x.dtype} as ring elements")
    if isinstance(x, (int, np.integer)):
        return np.array(int(x) & RING_MASK, dtype=np.uint64)
    return as_ring_array(np.asarray(x, dtype=object) if _has_big_ints(x) else np.asarray(x))


def _has_big_ints(x) -> bool:
    try:
        return any(isinstance(v, int) and not (-(1 << 63) <= v < (1 << 63)) for v in np.ravel(x).tolist())
    except TypeError:
        return False


def signed_view(x: np.ndarray) -> np.ndarray:
    return np.asarray(x, dtype=np.uint64).view(np.int64)


@dataclass(frozen=True)
class FixedPointCodec:
    """Encodes reals as ``round(x * 2**frac_bits) mod 2**64``.

    Rounding is half-away-from-zero; decoding reads the word as a signed
    two's-complement integer.
    """

    frac_bits: int = DEFAULT_FRAC_BITS
    total_bits: int = RING_BITS

    def __post_init__(self) -> None:
        if self.total_bits != RING_BITS:
            raise ValueError("only 64-bit rings are supported")
        if not 0 <= self.frac_bits < RING_BITS - 1:
            raise ValueError("frac_bits out of range")

    @property
    def scale(self) -> int:
        return 1 << self.frac_bits

    @property
    def one(self) -> int:
        return self.scale

    @property
    def limit(self) -> float:
        """Exclusive bound on |x| accepted by :meth:`encode`."""
        return float(1 << (RING_BITS - 1 - self.frac_bits))

    def encode(self, x: float) -> int:
        xf = float(x)
        if not math.isfinite(xf) or abs(xf) >= self.limit:
            raise EncodingRangeError(f"{x!r} outside fixed-point range (+/-2^{RING_BITS - 1 - self.frac_bits})")
        v = abs(xf) * self.scale  # exact: power-of-two scaling
        n = math.floor(v)
        if v - n >= 0.5:
            n += 1
        return to_ring(-n if xf < 0 else n)

    def decode(self, v: int) -> float:
        return to_signed(int(v)) / self.scale

    def encode_array(self, x) -> np.ndarray:
        xf = np.asarray(x, dtype=np.float64)
        if not np.all(np.isfinite(xf)) or (xf.size and np.max(np.abs(xf)) >= self.limit):
            raise EncodingRangeError("array has values outside the fixed-point range")
        v = np.abs(xf) * self.scale
        n = np.floor(v)
        n = n + (v - n >= 0.5)
        signed = np.where(xf < 0, -n, n).astype(np.int64)
        return signed.view(np.uint64)

    def decode_array(self, v) -> np.ndarray:
        return signed_view(as_ring_array(np.asarray(v))).astype(np.float64) / self.scale

    def mul_then_shift(self, x: int, y: int) -> int:
        """Plaintext reference for a fixed-point product followed by truncation."""
        prod = to_signed(x) * to_signed(y)
        if abs(prod) >= (1 << (RING_BITS - 1 + self.frac_bits)):
            raise EncodingRangeError("fixed-point product out of range")
        return to_ring(prod >> self.frac_bits)


_DEFAULT = FixedPointCodec()


def encode(x: float, frac_bits: int = DEFAULT_FRAC_BITS) -> int:
    return (_DEFAULT if frac_bits == DEFAULT_FRAC_BITS else FixedPointCodec(frac_bits)).encode(x)


def decode(v: int, frac_bits: int = DEFAULT_FRAC_BITS) -> float:
    return (_DEFAULT if frac_bits == DEFAULT_FRAC_BITS else FixedPointCodec(frac_bits)).decode(v)


def ring_mul_then_shift(x: int, y: int, frac_bits: int = DEFAULT_FRAC_BITS) -> int:
    return FixedPointCodec(frac_bits).mul_then_shift(x, y)
