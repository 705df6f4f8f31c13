"""Replicated secret sharing among three parties.

A value ``x = x1 + x2 + x3 (mod 2^64)`` is held as ``(x1, x2)`` by party 1,
``(x2, x3)`` by party 2 and ``(x3, x1)`` by party 3: party ``i`` keeps the
pair ``(x_i, x_{i+1})``.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import IntegrityError, ShapeError
from .prf import Keystream
from .ring import RING_MASK, as_ring_array

PARTIES = (1, 2, 3)


def next_party(i: int) -> int:
    return i % 3 + 1


def prev_party(i: int) -> int:
    return (i - 2) % 3 + 1


def check_party(i: int) -> int:
    if i not in PARTIES:
        raise ValueError(f"party id must be 1, 2 or 3, got {i!r}")
    return i


@dataclass(frozen=True)
class ReplicatedShare:
    first: int
    second: int
    holder: int

    def __post_init__(self) -> None:
        check_party(self.holder)


def deal(x: int, rng: Keystream | None = None, *, x1: int | None = None, x2: int | None = None) -> tuple[ReplicatedShare, ...]:
    """Split ``x`` into three replicated shares.

    ``x1``/``x2`` may be forced (test vectors); otherwise they are drawn
    from ``rng`` (a fresh OS-seeded keystream by default).
    """
    if x1 is None or x2 is None:
        words = (rng or Keystream.fresh()).words("deal-scalar", 2)
        x1 = int(words[0]) if x1 is None else x1
        x2 = int(words[1]) if x2 is None else x2
    comps = [x1 & RING_MASK, x2 & RING_MASK, (x - x1 - x2) & RING_MASK]
    return tuple(ReplicatedShare(comps[i - 1], comps[i % 3], i) for i in PARTIES)


def _ordered_pair(a, b):
    if a.holder == b.holder:
        raise IntegrityError("reconstruction needs shares from two distinct parties")
    return (a, b) if next_party(a.holder) == b.holder else (b, a)


def reconstruct(s1: ReplicatedShare, s2: ReplicatedShare) -> int:
    a, b = _ordered_pair(s1, s2)
    if a.second != b.first:
        raise IntegrityError(f"overlap mismatch between parties {a.holder} and {b.holder}")
    return (a.first + a.second + b.second) & RING_MASK


@dataclass(frozen=True)
class ShareTensor:
    """One party's view of a secret-shared tensor.

    ``first``/``second`` are uint64 arrays of identical shape. Reshape and
    indexing never touch the payload values.
    """

    first: np.ndarray
    second: np.ndarray
    holder: int

    def __post_init__(self) -> None:
        check_party(self.holder)
        if self.first.shape != self.second.shape:
            raise ShapeError("share components differ in shape")

    @property
    def shape(self) -> tuple[int, ...]:
        return self.first.shape

    @property
    def dims(self) -> tuple[int, ...]:
        return self.first.shape

    @property
    def size(self) -> int:
        return self.first.size

    def __len__(self) -> int:
        return len(self.first)

    def _like(self, first, second) -> "ShareTensor":
        return ShareTensor(first, second, self.holder)

    def reshape(self, *shape) -> "ShareTensor":
        return self._like(self.first.reshape(*shape), self.second.reshape(*shape))

    def transpose(self, *axes) -> "ShareTensor":
        return self._like(self.first.transpose(*axes), self.second.transpose(*axes))

    def __getitem__(self, idx) -> "ShareTensor":
        return self._like(self.first[idx], self.second[idx])

    def _check(self, other: "ShareTensor") -> None:
        if not isinstance(other, ShareTensor):
            raise TypeError("expected a ShareTensor; use add_public / mul_public for constants")
        if other.holder != self.holder:
            raise IntegrityError("cannot combine shares held by different parties")

    def __add__(self, other: "ShareTensor") -> "ShareTensor":
        self._check(other)
        return self._like(self.first + other.first, self.second + other.second)

    def __sub__(self, other: "ShareTensor") -> "ShareTensor":
        self._check(other)
        return self._like(self.first - other.first, self.second - other.second)

    def __neg__(self) -> "ShareTensor":
        zero = np.uint64(0)
        return self._like(zero - self.first, zero - self.second)

    def mul_public(self, c) -> "ShareTensor":
        c = as_ring_array(c)
        return self._like(self.first * c, self.second * c)

    def add_public(self, c) -> "ShareTensor":
        """Add a public constant to the shared value (it lands in component x1)."""
        c = as_ring_array(c)
        first, second = self.first, self.second
        if self.holder == 1:
            first = first + c
        elif self.holder == 3:
            second = second + c
        if first.shape != self.shape or second.shape != self.shape:
            first, second = np.broadcast_arrays(first, second)
            first, second = first.copy(), second.copy()
        return self._like(first, second)

    def sum(self, axis=None) -> "ShareTensor":
        return self._like(
            np.atleast_1d(self.first.sum(axis=axis, dtype=np.uint64)),
            np.atleast_1d(self.second.sum(axis=axis, dtype=np.uint64)),
        )

    def broadcast_to(self, shape) -> "ShareTensor":
        return self._like(np.broadcast_to(self.first, shape).copy(), np.broadcast_to(self.second, shape).copy())

    def pad(self, pad_width) -> "ShareTensor":
        return self._like(np.pad(self.first, pad_width), np.pad(self.second, pad_width))

    def component(self, k: int) -> np.ndarray:
        """Component ``x_k`` if this party holds it."""
        if k == self.holder:
            return self.first
        if k == next_party(self.holder):
            return self.second
        raise KeyError(f"party {self.holder} does not hold component x{k}")


def concat(parts: Sequence[ShareTensor], axis: int = 0) -> ShareTensor:
    holder = parts[0].holder
    return ShareTensor(
        np.concatenate([p.first for p in parts], axis=axis),
        np.concatenate([p.second for p in parts], axis=axis),
        holder,
    )


def stack(parts: Sequence[ShareTensor], axis: int = 0) -> ShareTensor:
    holder = parts[0].holder
    return ShareTensor(
        np.stack([p.first for p in parts], axis=axis),
        np.stack([p.second for p in parts], axis=axis),
        holder,
    )


def public_share(value, holder: int, shape=None) -> ShareTensor:
    """Trivial sharing of a public constant: x1 = value, x2 = x3 = 0."""
    v = as_ring_array(value)
    if shape is not None:
        v = np.broadcast_to(v, shape)
    v = np.array(v, dtype=np.uint64, ndmin=1)
    zero = np.zeros_like(v)
    if holder == 1:
        return ShareTensor(v, zero, 1)
    if holder == 2:
        return ShareTensor(zero, zero.copy(), 2)
    return ShareTensor(zero, v, 3)


def zeros_share(shape, holder: int) -> ShareTensor:
    return ShareTensor(np.zeros(shape, np.uint64), np.zeros(shape, np.uint64), holder)


def components_to_shares(comps: Sequence[np.ndarray]) -> list[ShareTensor]:
    """Distribute full components (x1, x2, x3) into the three party views."""
    return [ShareTensor(comps[i - 1], comps[i % 3], i) for i in PARTIES]


def split_components(values: np.ndarray, rng: Keystream, label: str = "deal", start: int = 0) -> list[np.ndarray]:
    values = as_ring_array(np.asarray(values))
    flat = values.reshape(-1)
    x1 = rng.words(f"{label}/x1", flat.size, start)
    x2 = rng.words(f"{label}/x2", flat.size, start)
    x3 = flat - x1 - x2
    return [c.reshape(values.shape) for c in (x1, x2, x3)]


def deal_tensor(values, rng: Keystream | None = None, label: str = "deal") -> list[ShareTensor]:
    """Deal a ring tensor into three party views (index 0 is party 1)."""
    return components_to_shares(split_components(values, rng or Keystream.fresh(), label))


def reconstruct_tensor(s1: ShareTensor, s2: ShareTensor) -> np.ndarray:
    a, b = _ordered_pair(s1, s2)
    if a.shape != b.shape:
        raise ShapeError("share shapes differ")
    if not np.array_equal(a.second, b.first):
        raise IntegrityError(f"overlap mismatch between parties {a.holder} and {b.holder}")
    return a.first + a.second + b.second


def reconstruct_all(shares: Sequence[ShareTensor]) -> np.ndarray:
    """Reconstruct from all three views, checking every replicated overlap."""
    by_holder = {s.holder: s for s in shares}
    if sorted(by_holder) != [1, 2, 3]:
        raise IntegrityError("need one share from each of the three parties")
    for i in PARTIES:
        j = next_party(i)
        if not np.array_equal(by_holder[i].second, by_holder[j].first):
            raise IntegrityError(f"overlap mismatch between parties {i} and {j}")
    return reconstruct_tensor(by_holder[1], by_holder[2])


class _ZeroPRF:
    def words(self, label, count: int, start: int = 0) -> np.ndarray:
        return np.zeros(count, dtype=np.uint64)


class ZeroShareSource:
    """PRF-derived additive sharing of zero for re-randomising products.

    Party ``i`` holds ``key_i`` (shared with party i+1) and ``key_{i-1}``
    (shared with party i-1) and outputs ``PRF(key_i, t) - PRF(key_{i-1}, t)``.
    Stateful: confine to the session thread.
    """

    def __init__(self, party: int, key_next: bytes | None, key_prev: bytes | None, counter: int = 0):
        self.party = check_party(party)
        self._own = Keystream(key_next) if key_next is not None else _ZeroPRF()
        self._prev = Keystream(key_prev) if key_prev is not None else _ZeroPRF()
        self.counter = counter

    @classmethod
    def stub(cls, party: int) -> "ZeroShareSource":
        """All-zero PRF for deterministic test vectors."""
        return cls(party, None, None)

    def next(self, count: int = 1) -> np.ndarray:
        t = self.counter
        self.counter += 1
        return self._own.words(t, count) - self._prev.words(t, count)


def zero_share(src: ZeroShareSource, party: int | None = None) -> int:
    if party is not None and party != src.party:
        raise ValueError("zero-share source belongs to a different party")
    return int(src.next(1)[0])


def zero_sources(keys: Sequence[bytes | None]) -> list[ZeroShareSource]:
    """Build all three parties' sources from the pairwise keys (k1, k2, k3)."""
    return [ZeroShareSource(i, keys[i - 1], keys[(i - 2) % 3]) for i in PARTIES]
