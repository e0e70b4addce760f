"""CRC-framed binary records shared by the dataset and checkpoint formats.

A file is  magic(4) | u32 version | u64 record count | records,  and each
record is  u32 payload length | payload | u32 crc32(payload).  All integers
are little-endian; float payloads are little-endian float64.
"""

from __future__ import annotations

import struct
import zlib

from .errors import ChecksumMismatchError, VersionMismatchError

__all__ = ["write_header", "read_header", "write_record", "read_record", "f64_bytes", "f64_array"]

FORMAT_VERSION = 1


def write_header(fh, magic: bytes, count: int) -> None:
    fh.write(magic + struct.pack("<IQ", FORMAT_VERSION, count))


def read_header(fh, magic: bytes) -> int:
    head = fh.read(len(magic) + 12)
    if head[: len(magic)] != magic:
        raise VersionMismatchError(f"bad magic, expected {magic!r}")
    version, count = struct.unpack("<IQ", head[len(magic) :])
    if version != FORMAT_VERSION:
        raise VersionMismatchError(f"unsupported format version {version}")
    return count


def write_record(fh, payload: bytes) -> None:
    fh.write(struct.pack("<I", len(payload)))
    fh.write(payload)
    fh.write(struct.pack("<I", zlib.crc32(payload)))


def read_record(fh) -> bytes:
    raw = fh.read(4)
    if len(raw) != 4:
        raise ChecksumMismatchError("truncated record header")
    (length,) = struct.unpack("<I", raw)
    payload = fh.read(length)
    tail = fh.read(4)
    if len(payload) != length or len(tail) != 4:
        raise ChecksumMismatchError("truncated record")
    (crc,) = struct.unpack("<I", tail)
    if zlib.crc32(payload) != crc:
        raise ChecksumMismatchError("record CRC mismatch")
    return payload


def f64_bytes(arr) -> bytes:
    import numpy as np

    return np.ascontiguousarray(arr, dtype="<f8").tobytes()


def f64_array(buf: bytes, shape):
    import numpy as np

    return np.frombuffer(buf, dtype="<f8").reshape(shape).astype(np.float64)
