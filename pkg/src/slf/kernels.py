"""Hot numeric kernels with numba-compiled and pure-numpy implementations.

Two loops dominate runtime on long recordings: polyphase FIR decimation
(which only needs one output per ``factor`` inputs, so a fused loop beats
full convolution) and the digital-to-physical calibration of EDF samples.
Both are provided as ``@njit`` kernels with numpy fallbacks.

Selection: the numba path is used when numba imports successfully and the
environment variable ``SLF_PURE_NUMPY`` is unset/empty; setting
``SLF_PURE_NUMPY=1`` forces the numpy path. ``benchmarks/kernel_bench.py``
compares the two.

Both paths compute identical formulas: calibration is bit-identical, and
decimation agrees to float64 rounding (summation order differs).
"""

from __future__ import annotations

import os

import numpy as np

try:
    from numba import njit

    _HAVE_NUMBA = True
except ImportError:  # pragma: no cover - exercised via SLF_PURE_NUMPY instead
    _HAVE_NUMBA = False

USE_NUMBA = _HAVE_NUMBA and not os.environ.get("SLF_PURE_NUMPY")


def fir_decimate_numpy(padded: np.ndarray, taps: np.ndarray, factor: int) -> np.ndarray:
    """Filter ``padded`` with ``taps`` and keep every ``factor``-th output.

    ``padded`` must already carry (len(taps)-1)//2 edge samples on each side;
    the valid convolution then yields one output per original sample. The
    taps are symmetric, so convolution and correlation coincide.
    """
    return np.convolve(padded, taps, mode="valid")[::factor]


def calibrate_numpy(digital: np.ndarray, dmin: float, dmax: float,
                    pmin: float, pmax: float) -> np.ndarray:
    """Affine digital-to-physical map, evaluated in float64, cast to float32.

    physical = (d - dmin) * (pmax - pmin) / (dmax - dmin) + pmin
    """
    d = digital.astype(np.float64)
    return (((d - dmin) * (pmax - pmin)) / (dmax - dmin) + pmin).astype(np.float32)


if _HAVE_NUMBA:

    @njit(cache=True)
    def _fir_decimate_jit(padded, taps, factor, n_out):  # pragma: no cover - compiled
        out = np.empty(n_out, dtype=np.float64)
        ntaps = taps.shape[0]
        for k in range(n_out):
            acc = 0.0
            base = k * factor
            for j in range(ntaps):
                acc += taps[j] * padded[base + j]
            out[k] = acc
        return out

    @njit(cache=True)
    def _calibrate_jit(digital, dmin, dmax, pmin, pmax):  # pragma: no cover - compiled
        n = digital.shape[0]
        out = np.empty(n, dtype=np.float32)
        for i in range(n):
            d = np.float64(digital[i])
            out[i] = np.float32(((d - dmin) * (pmax - pmin)) / (dmax - dmin) + pmin)
        return out

    def fir_decimate_numba(padded: np.ndarray, taps: np.ndarray, factor: int) -> np.ndarray:
        n_out = (padded.shape[0] - taps.shape[0]) // factor + 1
        return _fir_decimate_jit(
            np.ascontiguousarray(padded, dtype=np.float64),
            np.ascontiguousarray(taps, dtype=np.float64),
            factor, n_out,
        )

    def calibrate_numba(digital: np.ndarray, dmin: float, dmax: float,
                        pmin: float, pmax: float) -> np.ndarray:
        return _calibrate_jit(np.ascontiguousarray(digital),
                              float(dmin), float(dmax), float(pmin), float(pmax))

else:
    fir_decimate_numba = None
    calibrate_numba = None


fir_decimate = fir_decimate_numba if USE_NUMBA else fir_decimate_numpy
calibrate = calibrate_numba if USE_NUMBA else calibrate_numpy


def active_backend() -> str:
    """Name of the kernel backend in use: "numba" or "numpy"."""
    return "numba" if USE_NUMBA else "numpy"
