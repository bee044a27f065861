"""On-disk array container: JSON header (`.hdr`) plus raw binary payload (`.bin`).

Header fields: shape, dtype in {c64, c128, f32, f64}, byte_order
("little"), crc32 of the payload bytes. Payloads are little-endian;
complex data is interleaved (real, imag), which is the native numpy
layout. The format round-trips bit-exactly and is trivially parseable
from any language.
"""

from __future__ import annotations

import json
import zlib
from pathlib import Path

import numpy as np

_DTYPES = {
    "c64": np.dtype("<c8"),
    "c128": np.dtype("<c16"),
    "f32": np.dtype("<f4"),
    "f64": np.dtype("<f8"),
}
_NAMES = {v: k for k, v in _DTYPES.items()}


class ContainerError(ValueError):
    """Malformed header, truncated payload, or checksum mismatch."""


def _stem(path) -> Path:
    path = Path(path)
    if path.suffix in (".hdr", ".bin"):
        path = path.with_suffix("")
    return path


def save_array(path, array: np.ndarray) -> Path:
    """Write `array` to `<path>.hdr` + `<path>.bin`; returns the stem path."""
    stem = _stem(path)
    arr = np.ascontiguousarray(array)
    key = _NAMES.get(arr.dtype.newbyteorder("<"))
    if key is None:
        raise ContainerError(f"unsupported dtype {arr.dtype}; use one of {list(_DTYPES)}")
    payload = arr.astype(_DTYPES[key], copy=False).tobytes()
    header = {
        "shape": list(arr.shape),
        "dtype": key,
        "byte_order": "little",
        "crc32": zlib.crc32(payload) & 0xFFFFFFFF,
    }
    stem.parent.mkdir(parents=True, exist_ok=True)
    stem.with_suffix(".hdr").write_text(json.dumps(header, sort_keys=True) + "\n")
    stem.with_suffix(".bin").write_bytes(payload)
    return stem


def load_array(path) -> np.ndarray:
    """Read an array written by :func:`save_array`; validates size and checksum."""
    stem = _stem(path)
    hdr_path = stem.with_suffix(".hdr")
    bin_path = stem.with_suffix(".bin")
    if not hdr_path.exists():
        raise ContainerError(f"missing header file {hdr_path}")
    try:
        header = json.loads(hdr_path.read_text())
    except json.JSONDecodeError as e:
        raise ContainerError(f"malformed header {hdr_path}: {e}") from e
    for key in ("shape", "dtype", "byte_order", "crc32"):
        if key not in header:
            raise ContainerError(f"header {hdr_path} missing field '{key}'")
    if header["byte_order"] != "little":
        raise ContainerError(f"unsupported byte order {header['byte_order']!r}")
    dtype = _DTYPES.get(header["dtype"])
    if dtype is None:
        raise ContainerError(f"unknown dtype {header['dtype']!r}")
    shape = tuple(int(s) for s in header["shape"])
    if not bin_path.exists():
        raise ContainerError(f"truncated payload: missing {bin_path}")
    payload = bin_path.read_bytes()
    expected = int(np.prod(shape)) * dtype.itemsize if shape else dtype.itemsize
    if len(payload) != expected:
        raise ContainerError(
            f"truncated payload {bin_path}: {len(payload)} bytes, expected {expected}"
        )
    crc = zlib.crc32(payload) & 0xFFFFFFFF
    if crc != int(header["crc32"]):
        raise ContainerError(f"checksum mismatch for {bin_path}: {crc} != {header['crc32']}")
    return np.frombuffer(payload, dtype=dtype).reshape(shape).copy()
