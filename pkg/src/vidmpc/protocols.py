"""MPC primitives over 3-party replicated shares (passive security).

Every function takes the caller's :class:`SessionContext` and its own
:class:`ShareTensor` views; all three parties must call the same functions
with the same public arguments in the same order. Communication is always
the ring pattern of the multiplication protocol: each party sends one
message to its predecessor and receives one from its successor.

Values are either fixed-point (``frac_bits`` fractional bits) or raw ring
integers (bits, indices, one-hot selectors). Multiplying by a raw bit needs
no truncation.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import ShapeError
from .plan import DEFAULT_PLAN, NumericPlan
from .preproc import PreprocSource
from .ring import RING_BITS, as_ring_array
from .sharing import ShareTensor, ZeroShareSource, concat, next_party, prev_party, public_share, zeros_share
from .transport import Transport

# Elements per comparison batch; bounds memory (64 bit-shares per element).
LT_CHUNK = 8192

_U1 = np.uint64(1)
_POW2 = np.left_shift(np.uint64(1), np.arange(RING_BITS, dtype=np.uint64))


@dataclass
class SessionContext:
    party: int
    transport: Transport
    zeros: ZeroShareSource
    preproc: PreprocSource
    plan: NumericPlan = DEFAULT_PLAN
    _round: int = field(default=0, repr=False)

    @property
    def codec(self):
        return self.plan.codec

    @property
    def frac_bits(self) -> int:
        return self.plan.frac_bits

    def next_round(self) -> int:
        self._round += 1
        return self._round

    def public(self, value, shape=None) -> ShareTensor:
        return public_share(value, self.party, shape)

    def public_fixed(self, x: float, shape=None) -> ShareTensor:
        return self.public(self.codec.encode(x), shape)


def exchange(ctx: SessionContext, words: np.ndarray) -> np.ndarray:
    """Send ``words`` to the predecessor, receive the successor's words."""
    rnd = ctx.next_round()
    flat = np.ascontiguousarray(words, dtype=np.uint64).reshape(-1)
    ctx.transport.send(prev_party(ctx.party), rnd, flat)
    got = ctx.transport.recv(next_party(ctx.party), rnd)
    if got.size != flat.size:
        raise ShapeError(f"peer sent {got.size} words, expected {flat.size}")
    return got.reshape(np.shape(words))


def reshare(ctx: SessionContext, z: np.ndarray) -> ShareTensor:
    """Turn a local additive share z_i into a replicated sharing."""
    z = np.asarray(z, dtype=np.uint64)
    v = z + ctx.zeros.next(z.size).reshape(z.shape)
    return ShareTensor(v, exchange(ctx, v), ctx.party)


def open_value(ctx: SessionContext, x: ShareTensor) -> np.ndarray:
    """Reveal ``x`` to all three parties (one word sent per element)."""
    missing = exchange(ctx, x.second)
    return x.first + x.second + missing


def _check_same_shape(x: ShareTensor, y: ShareTensor) -> None:
    if x.shape != y.shape:
        raise ShapeError(f"operand shapes differ: {x.shape} vs {y.shape}")


def pi_dm(ctx: SessionContext, x: ShareTensor, y: ShareTensor) -> ShareTensor:
    """Element-wise ring product, no truncation.

    Party i computes x_i*y_i + x_i*y_{i+1} + x_{i+1}*y_i, masks it with a
    zero share and passes it to party i-1.
    """
    _check_same_shape(x, y)
    z = x.first * (y.first + y.second) + x.second * y.first
    return reshare(ctx, z)


def pi_dmm(ctx: SessionContext, a: ShareTensor, b: ShareTensor) -> ShareTensor:
    """Ring matrix product of a (p x m) and b (m x r); one batched round."""
    if a.first.ndim != 2 or b.first.ndim != 2 or a.shape[1] != b.shape[0]:
        raise ShapeError(f"cannot multiply {a.shape} by {b.shape}")
    z = a.first @ (b.first + b.second) + a.second @ b.first
    return reshare(ctx, z)


def pi_trunc(ctx: SessionContext, z: ShareTensor, shift: int | None = None) -> ShareTensor:
    """Signed division by 2^shift, result within +1 of the floor.

    Opens c = z + 2^62 + r for a dealer pair (r, r >> shift, msb(r)). Since
    z + 2^62 lies in [0, 2^63), the wrap-around of the masked sum is
    msb(r) * (1 - msb(c)), which is linear in the shared msb.
    Requires |z| < 2^62.
    """
    shift = ctx.frac_bits if shift is None else shift
    if shift == 0:
        return z
    offset_bits = ctx.plan.trunc_offset_bits
    flat = z.reshape(-1)
    r, r_hi, r_msb = ctx.preproc.take_pairs(flat.size, shift)
    c = open_value(ctx, flat.add_public(np.uint64(1) << np.uint64(offset_bits)) + r)
    c_hi = c >> np.uint64(shift)
    c_msb = c >> np.uint64(RING_BITS - 1)
    wrap = r_msb.mul_public((_U1 - c_msb) << np.uint64(RING_BITS - shift))
    out = (wrap - r_hi).add_public(c_hi - (np.uint64(1) << np.uint64(offset_bits - shift)))
    return out.reshape(z.shape)


def pi_fpmul(ctx: SessionContext, x: ShareTensor, y: ShareTensor) -> ShareTensor:
    return pi_trunc(ctx, pi_dm(ctx, x, y))


def pi_fpmatmul(ctx: SessionContext, a: ShareTensor, b: ShareTensor) -> ShareTensor:
    return pi_trunc(ctx, pi_dmm(ctx, a, b))


def mul_bit(ctx: SessionContext, bit: ShareTensor, x: ShareTensor) -> ShareTensor:
    """bit * x for a raw 0/1 sharing; broadcasts ``bit`` over x's shape."""
    if bit.shape != x.shape:
        bit = bit.broadcast_to(x.shape)
    return pi_dm(ctx, bit, x)


def select(ctx: SessionContext, p: ShareTensor, if_true: ShareTensor, if_false: ShareTensor) -> ShareTensor:
    """Branch-free ``p*if_true + (1-p)*if_false`` for a raw bit ``p``."""
    return if_false + mul_bit(ctx, p, if_true - if_false)


def one_minus(ctx: SessionContext, bit: ShareTensor) -> ShareTensor:
    return (-bit).add_public(1)


def _bits_less_than(ctx: SessionContext, c_bits: np.ndarray, r_bits: ShareTensor) -> ShareTensor:
    """[c < r] for public bit columns c and shared bit columns r (LSB first).

    Leaves (lt_i, eq_i) are local; a balanced tree merges (high, low) groups
    with lt = lt_hi + eq_hi * lt_lo and eq = eq_hi * eq_lo, one round per level.
    """
    n, width = c_bits.shape
    lt = r_bits.mul_public(_U1 - c_bits)
    # eq_i = 1 - (c_i xor r_i) = r_i if c_i else 1 - r_i
    eq = r_bits.mul_public(np.uint64(2) * c_bits - _U1).add_public(_U1 - c_bits)
    full = 1 << (width - 1).bit_length()
    if full != width:
        pad = full - width
        lt = concat([lt, zeros_share((n, pad), ctx.party)], axis=1)
        eq = concat([eq, ctx.public(1, (n, pad))], axis=1)
    while lt.shape[1] > 1:
        lt_lo, lt_hi = lt[:, 0::2], lt[:, 1::2]
        eq_lo, eq_hi = eq[:, 0::2], eq[:, 1::2]
        if lt.shape[1] == 2:
            return (lt_hi + pi_dm(ctx, eq_hi, lt_lo)).reshape(n)
        half = lt_lo.shape[1]
        prods = pi_dm(ctx, concat([eq_hi, eq_hi], axis=1), concat([lt_lo, eq_lo], axis=1))
        lt = lt_hi + prods[:, :half]
        eq = prods[:, half:]
    return lt.reshape(n)


def _msb(ctx: SessionContext, d: ShareTensor) -> ShareTensor:
    """Shared sign bit of d (flat vector), using 64 dealer bits per element."""
    n = d.size
    bits = ctx.preproc.take_bits(n * RING_BITS).reshape(n, RING_BITS)
    r = bits.mul_public(_POW2).sum(axis=1)
    c = open_value(ctx, d + r)
    c_bits = (c[:, None] >> np.arange(RING_BITS, dtype=np.uint64)) & _U1
    borrow = _bits_less_than(ctx, c_bits[:, :-1], bits[:, :-1])
    r_top = bits[:, RING_BITS - 1]
    t = r_top + borrow - pi_dm(ctx, r_top, borrow).mul_public(2)
    c_top = c_bits[:, RING_BITS - 1]
    return t.mul_public(_U1 - np.uint64(2) * c_top).add_public(c_top)


def pi_lt(ctx: SessionContext, x: ShareTensor, y: ShareTensor) -> ShareTensor:
    """Raw sharing of [x < y] (signed, strict). Needs |x|, |y| < 2^61."""
    _check_same_shape(x, y)
    d = (x - y).reshape(-1)
    parts = [_msb(ctx, d[i:i + LT_CHUNK]) for i in range(0, d.size, LT_CHUNK)]
    if not parts:
        return zeros_share(x.shape, ctx.party)
    return concat(parts).reshape(x.shape)


def pi_lt_public(ctx: SessionContext, x: ShareTensor, c, *, flip: bool = False) -> ShareTensor:
    """[x < c] (or [c < x] with ``flip``) for a public ring constant/array c."""
    cs = ctx.public(as_ring_array(c), x.shape)
    return pi_lt(ctx, cs, x) if flip else pi_lt(ctx, x, cs)


def pi_relu(ctx: SessionContext, z: ShareTensor) -> ShareTensor:
    positive = pi_lt(ctx, ctx.public(0, z.shape), z)
    return pi_dm(ctx, positive, z)


def pi_argmax(ctx: SessionContext, v: ShareTensor) -> ShareTensor:
    """Raw sharing of the index of the maximum; ties go to the lowest index.

    Linear scan keeping (max, index) with oblivious conditional updates.
    """
    v = v.reshape(-1)
    if v.size == 0:
        raise ShapeError("argmax of an empty vector")
    best = v[0:1]
    idx = ctx.public(0, (1,))
    for i in range(1, v.size):
        cand = v[i:i + 1]
        p = pi_lt(ctx, best, cand)
        upd = pi_dm(ctx, concat([p, p]), concat([cand - best, (-idx).add_public(i)]))
        best = best + upd[0:1]
        idx = idx + upd[1:2]
    return idx


def pi_div(ctx: SessionContext, num: ShareTensor, den: ShareTensor) -> ShareTensor:
    """Fixed-point num / den, element-wise.

    den is secretly normalised into [0.5, 1) with a factor 2^(K-p-1) built
    from comparisons against public powers of two. The reciprocal of the
    normalised value is refined by a fixed number of Newton steps and applied
    to num scaled by the same factor.
    Preconditions (unchecked): den in [2^-(a-2), 2^30] and |num/den| < 2^15.
    """
    plan = ctx.plan
    a = plan.frac_bits
    k = plan.div_norm_bits
    j = plan.div_thresholds
    _check_same_shape(num, den)
    shape = num.shape
    num, den = num.reshape(-1), den.reshape(-1)
    n = den.size

    thresholds = _POW2[1:j + 1]
    below = pi_lt(ctx, den.reshape(n, 1).broadcast_to((n, j)), ctx.public(thresholds, (n, j)))
    # F = 2^(K-1) - sum_j [den >= 2^j] * 2^(K-j-1)
    weights = _POW2[k - 2 - np.arange(j)]
    at_least = one_minus(ctx, below)
    factor = (-(at_least.mul_public(weights).sum(axis=1))).add_public(_POW2[k - 1])

    d_norm = pi_trunc(ctx, pi_dm(ctx, den, factor), plan.div_norm_shift)
    w = (-(d_norm + d_norm)).add_public(ctx.codec.encode(plan.div_initial_offset))
    two = ctx.codec.encode(2.0)
    for _ in range(plan.div_iterations):
        e = pi_fpmul(ctx, d_norm, w)
        w = pi_fpmul(ctx, w, (-e).add_public(two))
    # num * factor / 2^(K-a) = (num/den) * d_norm, so precision tracks the quotient
    scaled = pi_trunc(ctx, pi_dm(ctx, num, factor), plan.div_norm_shift)
    return pi_fpmul(ctx, scaled, w).reshape(shape)


def reveal(ctx: SessionContext, x: ShareTensor) -> np.ndarray:
    """Open to all parties; test and debugging helper only."""
    return open_value(ctx, x)
