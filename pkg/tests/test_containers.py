import io
import struct

import numpy as np
import pytest
from hypothesis import given, strategies as st
from hypothesis.extra import numpy as hnp

from vidmpc.containers import (
    Role,
    ShareFile,
    load_share,
    load_tensor,
    read_share,
    save_share,
    save_tensor,
    share_path,
    tensor_from_bytes,
    tensor_to_bytes,
    write_share,
)
from vidmpc.errors import ContainerFormatError

from conftest import shared

SID = bytes(range(16))


def test_scalar_container_has_8_byte_payload():
    data = tensor_to_bytes(np.array(7, dtype=np.uint64))
    assert data[:4] == b"MPCT"
    assert data[4:8] == bytes([1, 0, 0, 0])
    assert len(data) == 8 + 8
    assert int(tensor_from_bytes(data)) == 7


def test_video_shape_layout():
    video = np.arange(16, dtype=np.uint64).reshape(4, 2, 2, 1)
    data = tensor_to_bytes(video)
    assert data[6] == 4  # ndim
    assert struct.unpack_from("<4Q", data, 8) == (4, 2, 2, 1)
    payload = data[8 + 32:]
    assert len(payload) == 128
    assert payload[:8] == (0).to_bytes(8, "little") and payload[8:16] == (1).to_bytes(8, "little")
    np.testing.assert_array_equal(tensor_from_bytes(data), video)


def test_real_dtype_roundtrip():
    x = np.array([[0.5, -1.25], [3.0, 1e-9]])
    data = tensor_to_bytes(x)
    assert data[5] == 1
    out = tensor_from_bytes(data)
    assert out.dtype == np.float64
    np.testing.assert_array_equal(out, x)


@given(hnp.arrays(np.uint64, hnp.array_shapes(min_dims=0, max_dims=5, max_side=4)))
def test_ring_roundtrip_property(arr):
    out = tensor_from_bytes(tensor_to_bytes(arr))
    assert out.dtype == np.uint64 and out.shape == arr.shape
    np.testing.assert_array_equal(out, arr)


@pytest.mark.parametrize(
    "mutate",
    [
        lambda d: b"XPCT" + d[4:],  # magic
        lambda d: d[:4] + b"\x02" + d[5:],  # version
        lambda d: d[:5] + b"\x07" + d[6:],  # dtype
        lambda d: d[:-1],  # truncated payload
        lambda d: d + b"\x00",  # trailing byte
        lambda d: d[:6],  # truncated header
    ],
)
def test_corruption_rejected(mutate):
    data = tensor_to_bytes(np.arange(6, dtype=np.uint64).reshape(2, 3))
    with pytest.raises(ContainerFormatError):
        tensor_from_bytes(mutate(data))


def test_share_file_roundtrip(tmp_path):
    views = shared(np.arange(16).reshape(4, 2, 2, 1))
    for v in views:
        path = share_path(tmp_path, "video", v.holder)
        save_share(path, ShareFile(v, SID, Role.VIDEO))
        sf = load_share(path, role=Role.VIDEO, session_id=SID, holder=v.holder)
        assert sf.holder == v.holder and sf.share.shape == (4, 2, 2, 1)
        np.testing.assert_array_equal(sf.share.first, v.first)
        np.testing.assert_array_equal(sf.share.second, v.second)
    assert share_path(tmp_path, "video", 2).name == "video.p2.mpct"


def test_share_header_layout():
    buf = io.BytesIO()
    write_share(buf, ShareFile(shared([1, 2])[2], SID, Role.PREPROC_PAIRS, param=31))
    data = buf.getvalue()
    assert data[:4] == b"MPSH"
    assert tuple(data[4:8]) == (1, 3, int(Role.PREPROC_PAIRS), 31)
    assert data[8:24] == SID
    assert data[24:28] == b"MPCT"
    assert read_share(io.BytesIO(data)).param == 31


def test_share_validation(tmp_path):
    v = shared([5])[0]
    path = tmp_path / "x.mpct"
    save_share(path, ShareFile(v, SID, Role.WEIGHTS))
    with pytest.raises(ContainerFormatError, match="role"):
        load_share(path, role=Role.VIDEO)
    with pytest.raises(ContainerFormatError, match="session"):
        load_share(path, session_id=b"\x01" * 16)
    with pytest.raises(ContainerFormatError, match="party"):
        load_share(path, holder=2)
    data = bytearray(path.read_bytes())
    data[5] = 9  # holder
    path.write_bytes(bytes(data))
    with pytest.raises(ContainerFormatError):
        load_share(path)


def test_plain_tensor_file_is_not_a_share(tmp_path):
    path = tmp_path / "t.mpct"
    save_tensor(path, np.zeros(3, np.uint64))
    np.testing.assert_array_equal(load_tensor(path), np.zeros(3))
    with pytest.raises(ContainerFormatError):
        load_share(path)


def test_flatten_is_a_view():
    video = tensor_from_bytes(tensor_to_bytes(np.arange(16, dtype=np.uint64).reshape(4, 2, 2, 1)))
    flat = video.reshape(4, 4)
    assert np.shares_memory(flat, video)
