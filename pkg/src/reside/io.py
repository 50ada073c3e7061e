"""Self-describing binary array files and plain-text manifests.

Array file layout (little-endian throughout)::

    offset  size        field
    0       8           magic  b"RSDARRAY"
    8       2           format version (uint16)
    10      1           element type tag (uint8, see DTYPE_TAGS)
    11      1           number of dimensions d (uint8)
    12      8*d         shape (uint64 each)
    12+8d   ...         row-major payload

The payload length is fully determined by the header; readers reject files
that are shorter or longer.
"""

from __future__ import annotations

import json
import struct
from pathlib import Path

import numpy as np

__all__ = [
    "FormatError",
    "ARRAY_MAGIC",
    "FORMAT_VERSION",
    "encode_array",
    "decode_array",
    "write_array",
    "read_array",
    "write_json",
    "read_json",
    "array_to_text",
]

ARRAY_MAGIC = b"RSDARRAY"
FORMAT_VERSION = 1

DTYPE_TAGS = {
    1: np.dtype("<c8"),
    2: np.dtype("<c16"),
    3: np.dtype("bool"),
    4: np.dtype("<f8"),
    5: np.dtype("<f4"),
    6: np.dtype("<i8"),
}
_TAG_OF = {dt: tag for tag, dt in DTYPE_TAGS.items()}


class FormatError(ValueError):
    """A file is truncated, corrupt, or written by an unknown format version."""


def encode_array(arr: np.ndarray) -> bytes:
    arr = np.asarray(arr)
    tag = _TAG_OF.get(arr.dtype.newbyteorder("<") if arr.dtype.itemsize > 1 else arr.dtype)
    if tag is None:
        raise TypeError(f"unsupported dtype {arr.dtype}")
    if arr.ndim > 255:
        raise ValueError("too many dimensions")
    payload = np.ascontiguousarray(arr, dtype=DTYPE_TAGS[tag]).tobytes()
    header = ARRAY_MAGIC + struct.pack("<HBB", FORMAT_VERSION, tag, arr.ndim)
    header += struct.pack(f"<{arr.ndim}Q", *arr.shape)
    return header + payload


def decode_array(buf: bytes, offset: int = 0, exact: bool = True):
    """Parse one array starting at ``offset``.

    Returns the array, or ``(array, end_offset)`` when ``exact`` is False.
    """
    view = memoryview(buf)
    if len(view) - offset < 12 or bytes(view[offset:offset + 8]) != ARRAY_MAGIC:
        raise FormatError("not an array file (bad magic)")
    version, tag, ndim = struct.unpack_from("<HBB", view, offset + 8)
    if version != FORMAT_VERSION:
        raise FormatError(f"unsupported array format version {version}")
    if tag not in DTYPE_TAGS:
        raise FormatError(f"unknown element type tag {tag}")
    pos = offset + 12
    if len(view) - pos < 8 * ndim:
        raise FormatError("truncated array header")
    shape = struct.unpack_from(f"<{ndim}Q", view, pos)
    pos += 8 * ndim
    dtype = DTYPE_TAGS[tag]
    nbytes = int(np.prod(shape, dtype=np.int64)) * dtype.itemsize
    end = pos + nbytes
    if len(view) < end:
        raise FormatError(f"truncated payload: expected {nbytes} bytes, found {len(view) - pos}")
    if exact and len(view) != end:
        raise FormatError(f"trailing bytes after payload ({len(view) - end})")
    arr = np.frombuffer(view[pos:end], dtype=dtype).reshape(shape).copy()
    return arr if exact else (arr, end)


def write_array(path, arr: np.ndarray) -> None:
    Path(path).write_bytes(encode_array(arr))


def read_array(path) -> np.ndarray:
    return decode_array(Path(path).read_bytes())


def write_json(path, obj) -> None:
    """Order-stable JSON (sorted keys, 2-space indent, trailing newline)."""
    text = json.dumps(obj, indent=2, sort_keys=True) + "\n"
    Path(path).write_text(text)


def read_json(path):
    try:
        return json.loads(Path(path).read_text())
    except json.JSONDecodeError as exc:
        raise FormatError(f"{path}: {exc}") from exc


def array_to_text(arr: np.ndarray) -> str:
    """CSV-like dump: a shape comment, then one row per flattened leading index.

    Values use the shortest round-trip representation; complex entries are
    written as ``real+imagj``.
    """
    arr = np.asarray(arr)
    lines = [f"# shape={'x'.join(str(s) for s in arr.shape)} dtype={arr.dtype.name}"]
    rows = arr.reshape(-1, arr.shape[-1]) if arr.ndim > 1 else arr.reshape(1, -1)
    for row in rows:
        if np.iscomplexobj(row):
            lines.append(",".join(f"{float(v.real)!r}{float(v.imag):+}j" for v in row))
        else:
            lines.append(",".join(repr(v.item()) for v in row))
    return "\n".join(lines) + "\n"
