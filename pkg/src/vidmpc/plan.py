"""Numeric plan shared by the secure path and the plaintext oracle.

Anything that changes where truncations happen or how division iterates
lives here, so the two paths cannot drift apart.
"""

from __future__ import annotations

from dataclasses import dataclass

from .ring import DEFAULT_FRAC_BITS, RING_BITS, FixedPointCodec


@dataclass(frozen=True)
class NumericPlan:
    frac_bits: int = DEFAULT_FRAC_BITS
    # |x|, |y| < 2^61 for comparisons, so x - y never reaches the sign bit.
    compare_bound_bits: int = RING_BITS - 3
    # Truncation adds 2^62 before masking; inputs must satisfy |z| < 2^62.
    trunc_offset_bits: int = RING_BITS - 2
    div_iterations: int = 5
    div_initial_offset: float = 2.9142
    # Denominators are at most 2^div_max_log2 (real value).
    div_max_log2: int = 30

    @property
    def codec(self) -> FixedPointCodec:
        return FixedPointCodec(self.frac_bits)

    @property
    def bits_per_comparison(self) -> int:
        return RING_BITS

    @property
    def div_thresholds(self) -> int:
        """Number of public powers of two a denominator is compared against."""
        return self.div_max_log2 + self.frac_bits

    @property
    def div_norm_bits(self) -> int:
        """Exponent K with den * 2^(K-p-1) landing in [2^(K-1), 2^K)."""
        return self.div_thresholds + 1

    @property
    def div_norm_shift(self) -> int:
        return self.div_norm_bits - self.frac_bits


DEFAULT_PLAN = NumericPlan()
