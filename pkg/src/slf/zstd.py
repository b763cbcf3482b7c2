"""Minimal ctypes binding to the system Zstandard library.

Python zstd bindings are an optional install in many environments, while
``libzstd`` itself ships with essentially every Linux distribution, so the
one-shot frame API is bound directly. Each compressed chunk is a single
Zstandard frame with the content size recorded in the frame header.

All calls are stateless one-shot operations and safe to use concurrently.
"""

from __future__ import annotations

import ctypes
import ctypes.util

from .errors import CodecError, ZstdUnavailableError

MIN_LEVEL = -7
MAX_LEVEL = 22

_CONTENTSIZE_UNKNOWN = 2**64 - 1
_CONTENTSIZE_ERROR = 2**64 - 2

_lib = None
_load_error: str | None = None


def _load():
    global _lib, _load_error
    if _lib is not None or _load_error is not None:
        return _lib
    name = ctypes.util.find_library("zstd") or "libzstd.so.1"
    try:
        lib = ctypes.CDLL(name)
    except OSError as exc:
        _load_error = f"cannot load Zstandard library ({name}): {exc}"
        return None
    lib.ZSTD_compressBound.restype = ctypes.c_size_t
    lib.ZSTD_compressBound.argtypes = [ctypes.c_size_t]
    lib.ZSTD_compress.restype = ctypes.c_size_t
    lib.ZSTD_compress.argtypes = [
        ctypes.c_void_p, ctypes.c_size_t, ctypes.c_char_p, ctypes.c_size_t, ctypes.c_int,
    ]
    lib.ZSTD_decompress.restype = ctypes.c_size_t
    lib.ZSTD_decompress.argtypes = [
        ctypes.c_void_p, ctypes.c_size_t, ctypes.c_char_p, ctypes.c_size_t,
    ]
    lib.ZSTD_isError.restype = ctypes.c_uint
    lib.ZSTD_isError.argtypes = [ctypes.c_size_t]
    lib.ZSTD_getErrorName.restype = ctypes.c_char_p
    lib.ZSTD_getErrorName.argtypes = [ctypes.c_size_t]
    lib.ZSTD_getFrameContentSize.restype = ctypes.c_ulonglong
    lib.ZSTD_getFrameContentSize.argtypes = [ctypes.c_char_p, ctypes.c_size_t]
    _lib = lib
    return _lib


def _require():
    lib = _load()
    if lib is None:
        raise ZstdUnavailableError(_load_error or "Zstandard library unavailable")
    return lib


def is_available() -> bool:
    return _load() is not None


def check_level(level: int) -> int:
    if not MIN_LEVEL <= level <= MAX_LEVEL:
        raise CodecError(
            f"zstd level must be in [{MIN_LEVEL}, {MAX_LEVEL}], got {level}",
            code="zstd_level_out_of_range",
        )
    return level


def compress(data: bytes, level: int) -> bytes:
    """Compress ``data`` into one Zstandard frame at ``level``."""
    lib = _require()
    check_level(level)
    bound = lib.ZSTD_compressBound(len(data))
    dst = ctypes.create_string_buffer(bound)
    n = lib.ZSTD_compress(dst, bound, data, len(data), level)
    if lib.ZSTD_isError(n):
        raise CodecError(
            f"zstd compression failed: {lib.ZSTD_getErrorName(n).decode()}",
            code="corrupt_chunk",
        )
    return dst.raw[:n]


def frame_content_size(frame: bytes) -> int | None:
    """Decompressed size recorded in the frame header, or None if absent."""
    lib = _require()
    size = lib.ZSTD_getFrameContentSize(frame, len(frame))
    if size in (_CONTENTSIZE_UNKNOWN, _CONTENTSIZE_ERROR):
        return None
    return size


def decompress(frame: bytes, expected_size: int) -> bytes:
    """Decompress one frame; the result must be exactly ``expected_size`` bytes."""
    lib = _require()
    buf_size = max(expected_size, 1)
    dst = ctypes.create_string_buffer(buf_size)
    n = lib.ZSTD_decompress(dst, buf_size, frame, len(frame))
    if lib.ZSTD_isError(n):
        raise CodecError(
            f"zstd frame failed to decode: {lib.ZSTD_getErrorName(n).decode()}",
            code="corrupt_chunk",
        )
    if n != expected_size:
        raise CodecError(
            f"zstd frame decoded to {n} bytes, expected {expected_size}",
            code="corrupt_chunk",
        )
    return dst.raw[:n]
