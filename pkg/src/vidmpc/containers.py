"""Bit-exact on-disk formats for tensors, shares and preprocessing material.

Tensor container::

    magic     4 bytes  b"MPCT"
    version   u8       1
    dtype     u8       0 = ring u64, 1 = real f64
    ndim      u8
    reserved  u8       0
    dims      ndim x u64 LE
    payload   prod(dims) x 8 bytes, row-major LE

Share file = share header followed by a ring tensor container whose
leading axis of length 2 holds the party's two components::

    magic      4 bytes  b"MPSH"
    version    u8       1
    holder     u8       1..3
    role       u8       see Role
    param      u8       role-specific (truncation shift for pair files)
    session_id 16 bytes
"""

from __future__ import annotations

import enum
import io
import struct
from dataclasses import dataclass
from pathlib import Path
from typing import BinaryIO

import numpy as np

from .errors import ContainerFormatError
from .sharing import ShareTensor, check_party

MAGIC = b"MPCT"
SHARE_MAGIC = b"MPSH"
VERSION = 1
DTYPE_RING = 0
DTYPE_REAL = 1

_HEAD = struct.Struct("<4sBBBB")
_SHARE_HEAD = struct.Struct("<4sBBBB16s")


class Role(enum.IntEnum):
    VIDEO = 0
    SELECTION = 1
    WEIGHTS = 2
    PREPROC_BITS = 3
    PREPROC_PAIRS = 4
    LABEL = 5
    GENERIC = 6


def _read_exact(f: BinaryIO, n: int, what: str) -> bytes:
    data = f.read(n)
    if len(data) != n:
        raise ContainerFormatError(f"truncated {what}: expected {n} bytes, got {len(data)}")
    return data


def write_tensor(f: BinaryIO, array: np.ndarray) -> None:
    arr = np.asarray(array)
    if arr.dtype == np.uint64 or arr.dtype.kind in "iu":
        dtype, wire = DTYPE_RING, "<u8"
        if arr.dtype.kind == "i":
            arr = arr.astype(np.int64).view(np.uint64)
    elif arr.dtype.kind == "f":
        dtype, wire = DTYPE_REAL, "<f8"
    else:
        raise ContainerFormatError(f"unsupported dtype {arr.dtype}")
    if arr.ndim > 255:
        raise ContainerFormatError("too many dimensions")
    f.write(_HEAD.pack(MAGIC, VERSION, dtype, arr.ndim, 0))
    f.write(struct.pack(f"<{arr.ndim}Q", *arr.shape))
    f.write(np.ascontiguousarray(arr, dtype=wire).tobytes())


def read_tensor(f: BinaryIO) -> np.ndarray:
    magic, version, dtype, ndim, _ = _HEAD.unpack(_read_exact(f, _HEAD.size, "container header"))
    if magic != MAGIC:
        raise ContainerFormatError(f"bad magic {magic!r}")
    if version != VERSION:
        raise ContainerFormatError(f"unsupported container version {version}")
    if dtype not in (DTYPE_RING, DTYPE_REAL):
        raise ContainerFormatError(f"unknown dtype tag {dtype}")
    dims = struct.unpack(f"<{ndim}Q", _read_exact(f, 8 * ndim, "dims"))
    count = int(np.prod(dims, dtype=object)) if dims else 1
    payload = _read_exact(f, 8 * count, "payload")
    wire = "<u8" if dtype == DTYPE_RING else "<f8"
    native = np.uint64 if dtype == DTYPE_RING else np.float64
    return np.frombuffer(payload, dtype=wire).astype(native).reshape(dims)


def tensor_to_bytes(array: np.ndarray) -> bytes:
    buf = io.BytesIO()
    write_tensor(buf, array)
    return buf.getvalue()


def tensor_from_bytes(data: bytes, *, exact: bool = True) -> np.ndarray:
    buf = io.BytesIO(data)
    arr = read_tensor(buf)
    if exact and buf.read(1):
        raise ContainerFormatError("trailing bytes after container payload")
    return arr


def save_tensor(path, array: np.ndarray) -> None:
    with open(path, "wb") as f:
        write_tensor(f, array)


def load_tensor(path) -> np.ndarray:
    with open(path, "rb") as f:
        arr = read_tensor(f)
        if f.read(1):
            raise ContainerFormatError(f"{path}: trailing bytes after container payload")
    return arr


@dataclass(frozen=True)
class ShareFile:
    share: ShareTensor
    session_id: bytes
    role: Role
    param: int = 0

    @property
    def holder(self) -> int:
        return self.share.holder


def write_share(f: BinaryIO, sf: ShareFile) -> None:
    if len(sf.session_id) != 16:
        raise ContainerFormatError("session id must be 16 bytes")
    f.write(_SHARE_HEAD.pack(SHARE_MAGIC, VERSION, sf.holder, int(sf.role), sf.param, sf.session_id))
    write_tensor(f, np.stack([sf.share.first, sf.share.second]))


def read_share(f: BinaryIO) -> ShareFile:
    magic, version, holder, role, param, sid = _SHARE_HEAD.unpack(_read_exact(f, _SHARE_HEAD.size, "share header"))
    if magic != SHARE_MAGIC:
        raise ContainerFormatError(f"bad share magic {magic!r}")
    if version != VERSION:
        raise ContainerFormatError(f"unsupported share version {version}")
    try:
        check_party(holder)
        role = Role(role)
    except ValueError as exc:
        raise ContainerFormatError(str(exc)) from exc
    arr = read_tensor(f)
    if arr.dtype != np.uint64 or arr.ndim < 1 or arr.shape[0] != 2:
        raise ContainerFormatError("share payload must be a ring tensor with a leading axis of 2")
    return ShareFile(ShareTensor(arr[0].copy(), arr[1].copy(), holder), sid, role, param)


def save_share(path, sf: ShareFile) -> None:
    with open(path, "wb") as f:
        write_share(f, sf)


def load_share(path, *, role: Role | None = None, session_id: bytes | None = None, holder: int | None = None) -> ShareFile:
    with open(path, "rb") as f:
        sf = read_share(f)
        if f.read(1):
            raise ContainerFormatError(f"{path}: trailing bytes after share payload")
    if role is not None and sf.role != role:
        raise ContainerFormatError(f"{path}: expected role {role.name}, found {sf.role.name}")
    if session_id is not None and sf.session_id != session_id:
        raise ContainerFormatError(f"{path}: share belongs to a different session")
    if holder is not None and sf.holder != holder:
        raise ContainerFormatError(f"{path}: share is for party {sf.holder}, not {holder}")
    return sf


def share_path(directory, stem: str, holder: int) -> Path:
    return Path(directory) / f"{stem}.p{holder}.mpct"
