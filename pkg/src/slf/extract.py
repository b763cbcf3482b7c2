"""Extract a subset of a dataset, optionally downsampled and recast.

A typical workflow keeps the full dataset compressed and pulls out
study-specific selections of signals as smaller, uncompressed copies. The
supported per-array operations are: select by name, rename, decimate by an
integer factor (with a fixed anti-aliasing FIR), and cast the value type.
Annotations are in seconds, so they are copied through untouched.

The anti-aliasing filter is deterministic by construction: a Hamming-windowed
sinc of length ``10 * factor + 1`` with normalized cutoff ``0.45 / factor``
of the input rate, normalized to unit DC gain. Decimation reflect-pads both
edges so the output is the zero-phase filtered signal sampled at every
``factor``-th input position, ``ceil(n / factor)`` samples in total.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field as dataclass_field
from pathlib import Path
from typing import Optional

import numpy as np
from pydantic import BaseModel, ConfigDict, field_validator

from . import kernels
from .codecs import ArrayCodecSpec
from .errors import CodecError, NonIntegerFactorError
from .models import (
    VALUE_TYPES,
    ArrayAttributes,
    Dataset,
    SampleArray,
    Series,
    Subject,
)
from .store import ReadOptions, WriteReport, read_dataset, write_dataset


class ArraySelection(BaseModel):
    """One source array to carry over, with optional rename/resample/recast."""

    model_config = ConfigDict(frozen=True)

    source_name: str
    new_name: Optional[str] = None
    target_sampling_rate: Optional[float] = None
    target_value_type: Optional[str] = None


class ExtractConfig(BaseModel):
    model_config = ConfigDict(frozen=True)

    series_filter: Optional[set[str]] = None
    subject_filter: Optional[set[str]] = None
    selections: list[ArraySelection]
    annotation_sets: Optional[set[str]] = None
    output_codec: ArrayCodecSpec = ArrayCodecSpec(kind="raw")

    @field_validator("selections")
    @classmethod
    def _non_empty(cls, v):
        if not v:
            raise ValueError("selections must not be empty")
        return v


def load_extract_config(path) -> ExtractConfig:
    with open(path, "r", encoding="utf-8") as f:
        return ExtractConfig(**json.load(f))


def design_lowpass_fir(factor: int) -> np.ndarray:
    """Anti-aliasing taps for decimation by ``factor`` (>= 2).

    Length ``10 * factor + 1``, Hamming window, cutoff ``0.45 / factor``
    cycles per input sample, normalized to sum exactly to 1. The taps are
    exactly symmetric.
    """
    if factor < 2:
        raise ValueError(f"factor must be >= 2, got {factor}")
    length = 10 * factor + 1
    mid = (length - 1) // 2
    cutoff = 0.45 / factor
    i = np.arange(length)
    taps = 2.0 * cutoff * np.sinc(2.0 * cutoff * (i - mid))
    taps *= np.hamming(length)
    taps /= taps.sum()
    return taps


def decimate(values: np.ndarray, factor: int) -> np.ndarray:
    """Low-pass filter and keep every ``factor``-th sample.

    Factor 1 is a bit-identical passthrough. The output has
    ``ceil(len(values) / factor)`` samples and the input's dtype; filtering
    runs in float64 and integer outputs are rounded half away from zero.
    """
    if factor < 1:
        raise ValueError(f"factor must be >= 1, got {factor}")
    values = np.asarray(values)
    if factor == 1 or values.size == 0:
        return values[::factor] if factor > 1 else values
    taps = design_lowpass_fir(factor)
    mid = (len(taps) - 1) // 2
    x = values.astype(np.float64)
    if x.size == 1:
        padded = np.full(1 + 2 * mid, x[0], dtype=np.float64)
    else:
        padded = np.pad(x, mid, mode="reflect")
    filtered = kernels.fir_decimate(padded, taps, factor)
    return cast_values(filtered, _dtype_name(values.dtype))


def _dtype_name(dtype: np.dtype) -> str:
    for name, descr in VALUE_TYPES.items():
        if np.dtype(descr) == dtype:
            return name
    return dtype.name


def cast_values(values: np.ndarray, target_value_type: str) -> np.ndarray:
    """Cast to ``target_value_type``.

    Float-to-float rounds to nearest; float-to-int rounds half away from
    zero and saturates at the target range; NaN cannot become an integer.
    """
    if target_value_type not in VALUE_TYPES:
        raise CodecError(f"unsupported value_type {target_value_type!r}",
                         code="unsupported_dtype")
    values = np.asarray(values)
    target = np.dtype(VALUE_TYPES[target_value_type])
    if values.dtype == target:
        return values
    if target.kind == "i":
        if values.dtype.kind == "f":
            if values.size and np.any(np.isnan(values)):
                raise CodecError(
                    f"NaN cannot be cast to {target_value_type}",
                    code="unrepresentable_value",
                )
            x = values.astype(np.float64)
            rounded = np.floor(np.abs(x) + 0.5) * np.sign(x)
        else:
            rounded = values
        info = np.iinfo(target)
        return np.clip(rounded, info.min, info.max).astype(target)
    return values.astype(target)


@dataclass
class ExtractReport:
    """Outcome of one :func:`extract` run."""

    dataset_dir: Path
    subjects_processed: int = 0
    arrays_written: int = 0
    resample_factors: dict[str, int] = dataclass_field(default_factory=dict)
    warnings: list[str] = dataclass_field(default_factory=list)
    write_report: Optional[WriteReport] = None


def _resample_factor(source_rate: float, target_rate: float, name: str) -> int:
    factor = source_rate / target_rate
    if factor < 1 - 1e-9 or abs(factor - round(factor)) > 1e-9:
        raise NonIntegerFactorError(
            f"array {name!r}: source rate {source_rate} Hz is not an integer "
            f"multiple of target rate {target_rate} Hz"
        )
    return int(round(factor))


def _build_array(sa: SampleArray, sel: ArraySelection, factor: int) -> SampleArray:
    attrs = sa.attributes
    new_name = sel.new_name or attrs.name
    value_type = sel.target_value_type or attrs.value_type
    if factor > 1:
        n_samples = math.ceil(attrs.n_samples / factor)
        rate = attrs.sampling_rate / factor
    else:
        n_samples = attrs.n_samples
        rate = attrs.sampling_rate
    new_attrs = ArrayAttributes(
        name=new_name,
        sampling_rate=rate,
        unit=attrs.unit,
        value_type=value_type,
        n_samples=n_samples,
        start_offset=attrs.start_offset,
    )

    def _load(source=sa, f=factor, vt=value_type):
        return cast_values(decimate(source.values, f), vt)

    return SampleArray(attributes=new_attrs, values_func=_load)


def extract(src_root, config: ExtractConfig, dest_root, *,
            overwrite: bool = False, workers: int = 1) -> ExtractReport:
    """Copy the configured subset of ``src_root`` into ``dest_root``.

    The source tree is never modified. Subjects missing a selected array are
    still written with the selections that resolve, each recorded as a
    warning. A non-integer rate ratio aborts the run.
    """
    src_root = Path(src_root)
    dataset = read_dataset(src_root, ReadOptions(
        series_filter=config.series_filter,
        subject_filter=config.subject_filter,
        lazy_arrays=True,
    ))
    report = ExtractReport(dataset_dir=Path(dest_root) / dataset.name)

    new_series: dict[str, Series] = {}
    for sname, series in dataset.series.items():
        new_subjects: dict[str, Subject] = {}
        for sid, subject in series.subjects.items():
            new_arrays: dict[str, SampleArray] = {}
            for sel in config.selections:
                sa = subject.sample_arrays.get(sel.source_name)
                if sa is None:
                    report.warnings.append(
                        f"{sname}/{sid}: no array named {sel.source_name!r}"
                    )
                    continue
                factor = 1
                if sel.target_sampling_rate is not None:
                    factor = _resample_factor(sa.attributes.sampling_rate,
                                              sel.target_sampling_rate,
                                              sel.source_name)
                new_sa = _build_array(sa, sel, factor)
                new_arrays[new_sa.attributes.name] = new_sa
                report.resample_factors[f"{sname}/{sid}/{new_sa.attributes.name}"] = factor
                report.arrays_written += 1
            annotations = subject.annotations
            if config.annotation_sets is not None:
                annotations = {name: aset for name, aset in annotations.items()
                               if name in config.annotation_sets}
            new_subjects[sid] = Subject(metadata=subject.metadata,
                                        sample_arrays=new_arrays,
                                        annotations=annotations)
            report.subjects_processed += 1
        new_series[sname] = Series(name=series.name, subjects=new_subjects)

    new_dataset = Dataset(name=dataset.name, format_version=dataset.format_version,
                          series=new_series)
    report.write_report = write_dataset(new_dataset, dest_root, config.output_codec,
                                        overwrite=overwrite, workers=workers)
    return report
