"""File formats: AIQT tensors, binary PGM images, IDX ingestion.

One tensor container serves datasets and samples alike: magic "AIQT",
u32 version, u64 generating seed, u32 rank, u64 dims, then little-endian
64-bit floats in row-major order.
"""

from __future__ import annotations

import struct

import numpy as np

from .errors import FormatError

TENSOR_MAGIC = b"AIQT"
TENSOR_VERSION = 1


def write_tensor_bytes(arr: np.ndarray, seed: int = 0) -> bytes:
    raw = np.ascontiguousarray(arr, dtype="<f8")
    parts = [TENSOR_MAGIC, struct.pack("<I", TENSOR_VERSION),
             struct.pack("<Q", seed & (2 ** 64 - 1)),
             struct.pack("<I", raw.ndim)]
    parts.extend(struct.pack("<Q", d) for d in raw.shape)
    parts.append(raw.tobytes())
    return b"".join(parts)


def write_tensor(path, arr: np.ndarray, seed: int = 0):
    with open(path, "wb") as fh:
        fh.write(write_tensor_bytes(arr, seed))


def read_tensor_bytes(data: bytes) -> tuple[np.ndarray, int]:
    pos = 0

    def take(n):
        nonlocal pos
        if pos + n > len(data):
            raise FormatError(f"truncated tensor file: wanted {n} bytes", offset=pos)
        out = data[pos:pos + n]
        pos += n
        return out

    if take(4) != TENSOR_MAGIC:
        raise FormatError(f"bad magic; expected {TENSOR_MAGIC!r}", offset=0)
    version = struct.unpack("<I", take(4))[0]
    if version != TENSOR_VERSION:
        raise FormatError(f"unsupported tensor version {version}", offset=4)
    seed = struct.unpack("<Q", take(8))[0]
    rank = struct.unpack("<I", take(4))[0]
    shape = tuple(struct.unpack("<Q", take(8))[0] for _ in range(rank))
    count = int(np.prod(shape)) if shape else 1
    arr = np.frombuffer(take(8 * count), dtype="<f8").reshape(shape).astype(np.float64)
    if pos != len(data):
        raise FormatError("trailing bytes after tensor payload", offset=pos)
    return arr, seed


def read_tensor(path) -> tuple[np.ndarray, int]:
    with open(path, "rb") as fh:
        return read_tensor_bytes(fh.read())


def write_pgm(path, image: np.ndarray):
    """8-bit binary PGM (P5); values are clamped to [0, 1] and scaled."""
    image = np.asarray(image, dtype=np.float64)
    if image.ndim != 2:
        raise FormatError(f"PGM writer needs a 2-D image, got shape {image.shape}")
    h, w = image.shape
    pixels = np.round(np.clip(image, 0.0, 1.0) * 255.0).astype(np.uint8)
    with open(path, "wb") as fh:
        fh.write(f"P5\n{w} {h}\n255\n".encode("ascii"))
        fh.write(pixels.tobytes())


def read_idx(path) -> np.ndarray:
    """Parse an IDX file of unsigned bytes into floats in [0, 1].

    Header: two zero bytes, the type byte 0x08 (unsigned byte), a rank byte,
    then rank big-endian u32 dimension sizes and the raw data.  Entries with
    rank >= 2 flatten to [count, features] in raster order; rank-1 data
    becomes a column.
    """
    with open(path, "rb") as fh:
        data = fh.read()

    def take(pos, n):
        if pos + n > len(data):
            raise FormatError(f"truncated IDX file: wanted {n} bytes", offset=pos)
        return data[pos:pos + n]

    if take(0, 2) != b"\x00\x00":
        raise FormatError("bad IDX magic: first two bytes must be zero", offset=0)
    type_byte = take(2, 1)[0]
    if type_byte != 0x08:
        raise FormatError(f"unsupported IDX type byte 0x{type_byte:02x}; "
                          "only 0x08 (unsigned byte) is supported", offset=2)
    rank = take(3, 1)[0]
    if rank < 1:
        raise FormatError("IDX rank must be >= 1", offset=3)
    shape = []
    pos = 4
    for _ in range(rank):
        shape.append(struct.unpack(">I", take(pos, 4))[0])
        pos += 4
    count = int(np.prod(shape))
    raw = np.frombuffer(take(pos, count), dtype=np.uint8)
    if pos + count != len(data):
        raise FormatError("trailing bytes after IDX payload", offset=pos + count)
    values = raw.astype(np.float64) / 255.0
    if rank == 1:
        return values.reshape(-1, 1)
    return values.reshape(shape[0], -1)
