"""Binary codecs for sample arrays.

Two on-disk representations:

* raw: a single ``data.npy`` file in the NPY v1.0 layout (readable by any
  NPY reader), restricted to 1-D little-endian arrays of the four supported
  value types.
* chunked_zstd: a ``data.zarr/`` directory in the Zarr v2 layout: a
  ``.zarray`` JSON document plus chunk files named "0", "1", ... where each
  chunk is one Zstandard frame of ``chunk_len`` little-endian samples (the
  final chunk is zero-padded to full length before compression).

Both encoders are written here rather than delegated to numpy/zarr so the
byte layout stays a tested contract; the test suite verifies the output
against independent readers and writers.
"""

from __future__ import annotations

import ast
import json
import math
from typing import Iterator, Mapping, Optional

import numpy as np
from pydantic import BaseModel, ConfigDict, model_validator

from . import zstd
from .errors import CodecError
from .models import VALUE_TYPES

_NPY_MAGIC = b"\x93NUMPY"
_DESCR_TO_VALUE_TYPE = {v: k for k, v in VALUE_TYPES.items()}

#: Target chunk payload size for the default chunk length (1 MiB).
DEFAULT_CHUNK_BYTES = 2**20


class ArrayCodecSpec(BaseModel):
    """How sample arrays are encoded: raw NPY or chunked Zstandard.

    ``zstd_level`` and ``chunk_len`` apply to the chunked codec only;
    ``chunk_len=None`` selects a per-array default of ~1 MiB chunks.
    """

    model_config = ConfigDict(frozen=True)

    kind: str
    zstd_level: Optional[int] = None
    chunk_len: Optional[int] = None

    @model_validator(mode="after")
    def _check(self):
        if self.kind == "raw":
            if self.zstd_level is not None or self.chunk_len is not None:
                raise ValueError("zstd_level and chunk_len apply to chunked_zstd only")
        elif self.kind == "chunked_zstd":
            if self.zstd_level is None:
                object.__setattr__(self, "zstd_level", 9)
            if not zstd.MIN_LEVEL <= self.zstd_level <= zstd.MAX_LEVEL:
                raise ValueError(
                    f"zstd_level must be in [{zstd.MIN_LEVEL}, {zstd.MAX_LEVEL}], "
                    f"got {self.zstd_level}"
                )
            if self.chunk_len is not None and self.chunk_len < 1:
                raise ValueError(f"chunk_len must be >= 1, got {self.chunk_len}")
        else:
            raise ValueError(f"unknown codec kind {self.kind!r}")
        return self


RAW = ArrayCodecSpec(kind="raw")


def default_chunk_len(value_type: str) -> int:
    itemsize = np.dtype(VALUE_TYPES[value_type]).itemsize
    return max(1, DEFAULT_CHUNK_BYTES // itemsize)


def _as_typed_array(values, value_type: str) -> np.ndarray:
    """Convert ``values`` to a 1-D array of ``value_type``, or fail loudly."""
    if value_type not in VALUE_TYPES:
        raise CodecError(f"unsupported value_type {value_type!r}", code="unsupported_dtype")
    arr = np.asarray(values)
    if arr.ndim != 1:
        raise CodecError(f"arrays must be 1-D, got shape {arr.shape}", code="unsupported_shape")
    target = np.dtype(VALUE_TYPES[value_type])
    if arr.dtype == target:
        return np.ascontiguousarray(arr)
    if target.kind == "i":
        if arr.dtype.kind == "f":
            if arr.size and not np.all(np.isfinite(arr)):
                raise CodecError(
                    f"non-finite values cannot be stored as {value_type}",
                    code="unrepresentable_value",
                )
            if arr.size and not np.array_equal(arr, np.trunc(arr)):
                raise CodecError(
                    f"non-integral values cannot be stored as {value_type} "
                    f"(cast explicitly first)",
                    code="unrepresentable_value",
                )
        info = np.iinfo(target)
        if arr.size and (arr.min() < info.min or arr.max() > info.max):
            raise CodecError(
                f"values outside [{info.min}, {info.max}] cannot be stored as {value_type}",
                code="unrepresentable_value",
            )
    elif target == np.dtype("<f4") and arr.dtype.kind == "f":
        out = arr.astype(target)
        if arr.size and np.any(np.isinf(out) & np.isfinite(arr.astype(np.float64))):
            raise CodecError(
                "values overflow float32", code="unrepresentable_value",
            )
        return np.ascontiguousarray(out)
    return np.ascontiguousarray(arr.astype(target))


# --- raw (NPY v1.0) ----------------------------------------------------------


def npy_header_bytes(descr: str, n: int) -> bytes:
    """The full NPY v1.0 preamble for a 1-D little-endian array of length n."""
    text = "{'descr': '%s', 'fortran_order': False, 'shape': (%d,), }" % (descr, n)
    # magic(6) + version(2) + header-length(2) + text + padding + newline,
    # padded so the total is a multiple of 64
    unpadded = len(_NPY_MAGIC) + 2 + 2 + len(text) + 1
    pad = (-unpadded) % 64
    header = text + " " * pad + "\n"
    return _NPY_MAGIC + b"\x01\x00" + len(header).to_bytes(2, "little") + header.encode("ascii")


def encode_raw_array(values, value_type: str) -> bytes:
    """Encode ``values`` as a complete NPY v1.0 byte string."""
    arr = _as_typed_array(values, value_type)
    return npy_header_bytes(VALUE_TYPES[value_type], arr.shape[0]) + arr.tobytes()


def parse_npy_preamble(preamble: bytes) -> tuple[str, int, int]:
    """Parse an NPY v1.0 preamble.

    Returns (value_type, n_samples, payload_offset). ``preamble`` must hold
    at least the first 10 bytes; the full header must be included for the
    dict text to parse.
    """
    if len(preamble) < 10 or preamble[:6] != _NPY_MAGIC:
        raise CodecError("not an NPY array (bad magic)", code="bad_magic")
    if preamble[6:8] != b"\x01\x00":
        raise CodecError(
            f"unsupported NPY version {preamble[6]}.{preamble[7]}", code="bad_header"
        )
    hlen = int.from_bytes(preamble[8:10], "little")
    offset = 10 + hlen
    if len(preamble) < offset:
        raise CodecError("NPY header extends past available bytes", code="bad_header")
    try:
        header = ast.literal_eval(preamble[10:offset].decode("ascii"))
        descr = header["descr"]
        fortran = header["fortran_order"]
        shape = header["shape"]
    except (ValueError, SyntaxError, KeyError, UnicodeDecodeError) as exc:
        raise CodecError(f"malformed NPY header: {exc}", code="bad_header") from None
    if fortran is not False:
        raise CodecError("fortran_order arrays are not supported", code="bad_header")
    if descr not in _DESCR_TO_VALUE_TYPE:
        raise CodecError(f"unsupported NPY dtype {descr!r}", code="unsupported_dtype")
    if not (isinstance(shape, tuple) and len(shape) == 1
            and isinstance(shape[0], int) and shape[0] >= 0):
        raise CodecError(
            f"only 1-D arrays are supported, got shape {shape!r}", code="unsupported_shape"
        )
    return _DESCR_TO_VALUE_TYPE[descr], shape[0], offset


def decode_raw_array(data: bytes) -> tuple[np.ndarray, str]:
    """Decode a complete NPY v1.0 byte string; exact inverse of encode."""
    if len(data) < 10:
        raise CodecError("not an NPY array (too short)", code="bad_magic")
    hlen = int.from_bytes(data[8:10], "little") if data[:6] == _NPY_MAGIC else 0
    value_type, n, offset = parse_npy_preamble(data[:10 + hlen])
    dtype = np.dtype(VALUE_TYPES[value_type])
    expected = n * dtype.itemsize
    payload = data[offset:]
    if len(payload) != expected:
        raise CodecError(
            f"declared shape ({n},) needs {expected} payload bytes, found {len(payload)}",
            code="truncated_payload",
        )
    return np.frombuffer(payload, dtype=dtype), value_type


# --- chunked (Zarr v2 + Zstandard frames) ------------------------------------


def zarray_bytes(n: int, chunk_len: int, value_type: str, level: int) -> bytes:
    """The ``.zarray`` metadata document, byte-stable."""
    doc = {
        "zarr_format": 2,
        "shape": [n],
        "chunks": [chunk_len],
        "dtype": VALUE_TYPES[value_type],
        "compressor": {"id": "zstd", "level": level},
        "fill_value": 0,
        "order": "C",
        "filters": None,
    }
    return (json.dumps(doc, indent=2) + "\n").encode("ascii")


def parse_zarray(data: bytes) -> tuple[int, int, str, int]:
    """Parse and validate a ``.zarray`` document.

    Returns (n_samples, chunk_len, value_type, zstd_level).
    """
    try:
        doc = json.loads(data.decode("utf-8"))
    except (ValueError, UnicodeDecodeError) as exc:
        raise CodecError(f"malformed .zarray: {exc}", code="bad_zarray") from None
    if not isinstance(doc, dict) or doc.get("zarr_format") != 2:
        raise CodecError("not a Zarr v2 array", code="bad_zarray")
    shape = doc.get("shape")
    chunks = doc.get("chunks")
    if not (isinstance(shape, list) and len(shape) == 1 and isinstance(shape[0], int)
            and shape[0] >= 0):
        raise CodecError(f"only 1-D arrays are supported, got shape {shape!r}",
                         code="unsupported_shape")
    if not (isinstance(chunks, list) and len(chunks) == 1 and isinstance(chunks[0], int)
            and chunks[0] >= 1):
        raise CodecError(f"bad chunks {chunks!r}", code="bad_chunk_len")
    descr = doc.get("dtype")
    if descr not in _DESCR_TO_VALUE_TYPE:
        raise CodecError(f"unsupported dtype {descr!r}", code="unsupported_dtype")
    comp = doc.get("compressor")
    if not (isinstance(comp, dict) and comp.get("id") == "zstd"):
        raise CodecError(f"unsupported compressor {comp!r}", code="bad_zarray")
    level = comp.get("level")
    if not isinstance(level, int):
        raise CodecError(f"bad zstd level {level!r}", code="bad_zarray")
    zstd.check_level(level)
    if doc.get("order") != "C" or doc.get("filters") is not None:
        raise CodecError("only order='C', filters=null arrays are supported",
                         code="bad_zarray")
    return shape[0], chunks[0], _DESCR_TO_VALUE_TYPE[descr], level


def chunk_count(n: int, chunk_len: int) -> int:
    return math.ceil(n / chunk_len) if n else 0


def chunk_range(start: int, stop: int, chunk_len: int) -> Iterator[int]:
    """Indices of chunks overlapping the half-open sample range [start, stop)."""
    if stop <= start:
        return iter(())
    return iter(range(start // chunk_len, (stop - 1) // chunk_len + 1))


def encode_chunk(samples: np.ndarray, chunk_len: int, level: int) -> bytes:
    """Compress one chunk, zero-padding a short final chunk to full length."""
    if samples.shape[0] < chunk_len:
        padded = np.zeros(chunk_len, dtype=samples.dtype)
        padded[: samples.shape[0]] = samples
        samples = padded
    return zstd.compress(samples.tobytes(), level)


def decode_chunk(frame: bytes, chunk_len: int, dtype: np.dtype) -> np.ndarray:
    raw = zstd.decompress(frame, chunk_len * dtype.itemsize)
    return np.frombuffer(raw, dtype=dtype)


def encode_chunked_array(values, value_type: str, chunk_len: int,
                         zstd_level: int) -> dict[str, bytes]:
    """Encode ``values`` as a mapping of file name -> bytes.

    The mapping holds ".zarray" plus one entry per chunk, named "0", "1", ...
    """
    if chunk_len < 1:
        raise CodecError(f"chunk_len must be >= 1, got {chunk_len}", code="bad_chunk_len")
    zstd.check_level(zstd_level)
    arr = _as_typed_array(values, value_type)
    n = arr.shape[0]
    files = {".zarray": zarray_bytes(n, chunk_len, value_type, zstd_level)}
    for i in range(chunk_count(n, chunk_len)):
        files[str(i)] = encode_chunk(arr[i * chunk_len:(i + 1) * chunk_len],
                                     chunk_len, zstd_level)
    return files


def decode_chunked_array(files: Mapping[str, bytes]) -> tuple[np.ndarray, str]:
    """Decode a chunked-array mapping; inverse of :func:`encode_chunked_array`."""
    if ".zarray" not in files:
        raise CodecError("missing .zarray metadata", code="bad_zarray")
    n, chunk_len, value_type, _level = parse_zarray(files[".zarray"])
    dtype = np.dtype(VALUE_TYPES[value_type])
    parts = []
    for i in range(chunk_count(n, chunk_len)):
        key = str(i)
        if key not in files:
            raise CodecError(f"missing chunk {key}", code="missing_chunk")
        parts.append(decode_chunk(files[key], chunk_len, dtype))
    if parts:
        return np.concatenate(parts)[:n], value_type
    return np.empty(0, dtype=dtype), value_type
