import itertools

import numpy as np
import pytest
from hypothesis import given, strategies as st

from vidmpc.errors import IntegrityError
from vidmpc.prf import Keystream, derive_key
from vidmpc.ring import RING_MOD
from vidmpc.session import pairwise_keys
from vidmpc.sharing import (
    ReplicatedShare,
    ShareTensor,
    ZeroShareSource,
    deal,
    deal_tensor,
    next_party,
    prev_party,
    public_share,
    reconstruct,
    reconstruct_all,
    reconstruct_tensor,
    zero_share,
    zero_sources,
)

from conftest import shared

ring_values = st.integers(0, RING_MOD - 1)


def test_forced_deal_vectors():
    s1, s2, s3 = deal(10, x1=3, x2=5)
    assert (s1.first, s1.second) == (3, 5)
    assert (s2.first, s2.second) == (5, 2)
    assert (s3.first, s3.second) == (2, 3)
    assert deal(0, x1=0, x2=0)[2].first == 0
    assert deal(RING_MOD - 1, x1=1, x2=1)[2].first == RING_MOD - 3


def test_reconstruct_vectors():
    assert reconstruct(ReplicatedShare(3, 5, 1), ReplicatedShare(5, 2, 2)) == 10
    assert reconstruct(ReplicatedShare(5, 2, 2), ReplicatedShare(2, 3, 3)) == 10
    assert reconstruct(ReplicatedShare(2, 3, 3), ReplicatedShare(3, 5, 1)) == 10
    with pytest.raises(IntegrityError):
        reconstruct(ReplicatedShare(3, 5, 1), ReplicatedShare(6, 2, 2))
    with pytest.raises(IntegrityError):
        reconstruct(ReplicatedShare(3, 5, 1), ReplicatedShare(3, 5, 1))


@given(ring_values, st.integers(0, 2**32))
def test_deal_reconstruct_every_pair(x, seed):
    shares = deal(x, Keystream.from_seed(seed))
    for a, b in itertools.combinations(shares, 2):
        assert reconstruct(a, b) == x


def test_tensor_roundtrip_every_pair(rng):
    x = rng.integers(0, 2**63, 10_000, dtype=np.uint64) * np.uint64(2) + rng.integers(0, 2, 10_000, dtype=np.uint64)
    views = deal_tensor(x)
    for a, b in itertools.combinations(views, 2):
        np.testing.assert_array_equal(reconstruct_tensor(a, b), x)
    np.testing.assert_array_equal(reconstruct_all(views), x)


def test_adjacent_overlap_invariant():
    views = shared(np.arange(6).reshape(2, 3))
    for v in views:
        np.testing.assert_array_equal(v.second, views[next_party(v.holder) - 1].first)


def test_tampered_component_detected():
    views = shared(np.arange(5))
    bad = ShareTensor(views[1].first.copy(), views[1].second, 2)
    bad.first[0] += np.uint64(1)
    with pytest.raises(IntegrityError):
        reconstruct_all([views[0], bad, views[2]])


def test_party_cycle():
    assert [next_party(i) for i in (1, 2, 3)] == [2, 3, 1]
    assert [prev_party(i) for i in (1, 2, 3)] == [3, 1, 2]


def test_local_linear_ops(rng):
    x = rng.integers(0, 2**64 - 1, 20, dtype=np.uint64)
    y = rng.integers(0, 2**64 - 1, 20, dtype=np.uint64)
    xs, ys = shared(x, 1), shared(y, 2)
    np.testing.assert_array_equal(reconstruct_all([a + b for a, b in zip(xs, ys)]), x + y)
    np.testing.assert_array_equal(reconstruct_all([a - b for a, b in zip(xs, ys)]), x - y)
    np.testing.assert_array_equal(reconstruct_all([-a for a in xs]), -x)
    np.testing.assert_array_equal(reconstruct_all([a.mul_public(7) for a in xs]), x * np.uint64(7))
    np.testing.assert_array_equal(reconstruct_all([a.add_public(9) for a in xs]), x + np.uint64(9))
    np.testing.assert_array_equal(reconstruct_all([public_share(5, i, (3,)) for i in (1, 2, 3)]), [5, 5, 5])


def test_zero_share_telescopes():
    srcs = zero_sources(pairwise_keys(7))
    for _ in range(3):
        u = [zero_share(s, s.party) for s in srcs]
        assert sum(u) % RING_MOD == 0
    batch = [s.next(1000) for s in srcs]
    np.testing.assert_array_equal(batch[0] + batch[1] + batch[2], np.zeros(1000, np.uint64))


def test_zero_share_counters_differ():
    srcs = zero_sources(pairwise_keys(7))
    first = [zero_share(s) for s in srcs]
    second = [zero_share(s) for s in srcs]
    assert first != second and len(set(first + second)) == 6


def test_stub_prf_gives_zero():
    srcs = zero_sources([None, None, None])
    assert [zero_share(s) for s in srcs] == [0, 0, 0]
    assert int(ZeroShareSource.stub(2).next(4).sum()) == 0


def test_zero_share_wrong_party():
    with pytest.raises(ValueError):
        zero_share(ZeroShareSource.stub(1), 2)


def test_single_view_low_byte_looks_uniform():
    """Advisory privacy smoke check: chi-square on the low byte of one view."""
    ks = Keystream(derive_key("privacy-smoke"))
    views = deal_tensor(np.full(51_200, 42, dtype=np.uint64), ks)
    for v in views:
        counts = np.bincount((v.first & np.uint64(0xFF)).astype(np.int64), minlength=256)
        expected = v.first.size / 256
        chi2 = float(((counts - expected) ** 2 / expected).sum())
        assert chi2 < 400  # df = 255; this bound is roughly 6 sigma
