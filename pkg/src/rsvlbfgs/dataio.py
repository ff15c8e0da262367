"""Binary dataset container so experiment runs replay bit-exactly.

Layout (all little-endian)::

    magic    4s   b"RSLB"
    version  u32  1
    kind     u8   1 = karcher, 2 = eig
    dims     2 x u32  (n, count) for karcher, (d, N) for eig
    payload  f64 array, C order: (count, n, n) matrices or the (d, N) data matrix
    seed     u64
    param    f64  condition number (karcher) or eigengap (eig)
"""
from __future__ import annotations

import hashlib
import struct
from pathlib import Path

import numpy as np

from .problems import EIG_KIND, KARCHER_KIND, EigData, KarcherData, eig_spectrum

MAGIC = b"RSLB"
VERSION = 1
_KIND_CODE = {KARCHER_KIND: 1, EIG_KIND: 2}
_CODE_KIND = {v: k for k, v in _KIND_CODE.items()}
_HEAD = struct.Struct("<4sIBII")
_TAIL = struct.Struct("<Qd")


class DatasetFormatError(ValueError):
    pass


def to_bytes(data: KarcherData | EigData) -> bytes:
    if data.kind == KARCHER_KIND:
        dims, payload, param = (data.n, data.count), data.matrices, data.cond
    else:
        dims, payload, param = (data.d, data.N), data.D, data.gap
    head = _HEAD.pack(MAGIC, VERSION, _KIND_CODE[data.kind], *dims)
    body = np.ascontiguousarray(payload, dtype="<f8").tobytes()
    return head + body + _TAIL.pack(data.seed, param)


def from_bytes(buf: bytes) -> KarcherData | EigData:
    if len(buf) < _HEAD.size + _TAIL.size:
        raise DatasetFormatError("truncated dataset")
    magic, version, code, a, b = _HEAD.unpack_from(buf, 0)
    if magic != MAGIC:
        raise DatasetFormatError(f"bad magic {magic!r}")
    if version != VERSION:
        raise DatasetFormatError(f"unsupported version {version}")
    if code not in _CODE_KIND:
        raise DatasetFormatError(f"unknown dataset kind {code}")
    kind = _CODE_KIND[code]
    shape = (b, a, a) if kind == KARCHER_KIND else (a, b)
    nbytes = 8 * int(np.prod(shape))
    if len(buf) != _HEAD.size + nbytes + _TAIL.size:
        raise DatasetFormatError("payload size does not match header dims")
    arr = np.frombuffer(buf, dtype="<f8", count=int(np.prod(shape)), offset=_HEAD.size)
    arr = arr.reshape(shape).astype(np.float64)
    seed, param = _TAIL.unpack_from(buf, _HEAD.size + nbytes)
    if kind == KARCHER_KIND:
        return KarcherData(arr, param, seed)
    return EigData(arr, param, seed, eig_spectrum(a, param))


def fingerprint(buf: bytes) -> str:
    return hashlib.sha256(buf).hexdigest()


def save_dataset(data, path) -> str:
    """Write ``data`` to ``path``; returns the content fingerprint."""
    buf = to_bytes(data)
    Path(path).write_bytes(buf)
    return fingerprint(buf)


def load_dataset(path):
    """Returns ``(data, fingerprint)``."""
    buf = Path(path).read_bytes()
    return from_bytes(buf), fingerprint(buf)


def header_text(data, fp: str | None = None) -> str:
    """Plain-text dump of the header fields, one ``key=value`` per line."""
    lines = [f"magic={MAGIC.decode()}", f"version={VERSION}"]
    lines += [f"{k}={v!r}" if isinstance(v, float) else f"{k}={v}" for k, v in data.params().items()]
    if fp is not None:
        lines.append(f"sha256={fp}")
    return "\n".join(lines) + "\n"
