"""Deterministic synthetic datasets for tests and benchmarks.

Three channel profiles with different compressibility:

* ``gaussian_noise``: i.i.d. standard normal float32 — essentially
  incompressible, like raw physiological noise.
* ``sine_plus_noise``: a unit 1 Hz sine plus 0.1-sigma noise.
* ``int16_quantized``: standard normal quantized to a 1/1024 grid (stored
  values times 1024 are exact integers in the int16 range) and kept as
  float32 — emulating data that originated as 16-bit integers and was
  widened, which compresses well.

Every subject also gets a 30-second-epoch sleep-stage annotation set cycling
W -> N1 -> N2 -> N3 -> R. Output is bit-reproducible for a given seed.
"""

from __future__ import annotations

from datetime import datetime
from typing import Literal

import numpy as np
from pydantic import BaseModel, ConfigDict, field_validator

from .models import (
    Annotation,
    AnnotationSet,
    ArrayAttributes,
    Dataset,
    SampleArray,
    Series,
    Subject,
    SubjectMetadata,
)

#: Quantization grid step for the int16_quantized profile is 1/QUANT_SCALE.
QUANT_SCALE = 1024.0

EPOCH_SEC = 30.0
_STAGE_CYCLE = ["W", "N1", "N2", "N3", "R"]

_RECORDING_START = datetime(2021, 3, 1, 22, 0, 0)

ChannelKind = Literal["gaussian_noise", "sine_plus_noise", "int16_quantized"]


class ChannelSpec(BaseModel):
    model_config = ConfigDict(frozen=True)

    name: str
    sampling_rate: float
    kind: ChannelKind

    @field_validator("sampling_rate")
    @classmethod
    def _positive(cls, v):
        if v <= 0:
            raise ValueError(f"sampling_rate must be > 0, got {v}")
        return v


class SynthSpec(BaseModel):
    model_config = ConfigDict(frozen=True)

    n_subjects: int
    duration_sec: float
    channels: list[ChannelSpec]
    seed: int
    dataset_name: str = "synthetic"
    series_name: str = "main"

    @field_validator("n_subjects")
    @classmethod
    def _subjects_positive(cls, v):
        if v < 1:
            raise ValueError(f"n_subjects must be >= 1, got {v}")
        return v

    @field_validator("duration_sec")
    @classmethod
    def _duration_positive(cls, v):
        if v <= 0:
            raise ValueError(f"duration_sec must be > 0, got {v}")
        return v

    @field_validator("channels")
    @classmethod
    def _channels_non_empty(cls, v):
        if not v:
            raise ValueError("channels must not be empty")
        return v


def _channel_values(kind: str, n: int, rate: float, rng: np.random.Generator
                    ) -> np.ndarray:
    if kind == "gaussian_noise":
        return rng.standard_normal(n, dtype=np.float32)
    if kind == "sine_plus_noise":
        t = np.arange(n, dtype=np.float64) / rate
        noise = rng.standard_normal(n, dtype=np.float32)
        return (np.sin(2.0 * np.pi * t) + 0.1 * noise).astype(np.float32)
    if kind == "int16_quantized":
        x = rng.standard_normal(n)
        grid = np.clip(np.rint(x * QUANT_SCALE), -32768, 32767)
        return (grid / QUANT_SCALE).astype(np.float32)
    raise ValueError(f"unknown channel kind {kind!r}")


def _stage_annotations(duration_sec: float) -> list[Annotation]:
    out = []
    start = 0.0
    i = 0
    while start < duration_sec:
        dur = min(EPOCH_SEC, duration_sec - start)
        out.append(Annotation(name=_STAGE_CYCLE[i % len(_STAGE_CYCLE)],
                              start_sec=start, duration_sec=dur))
        start += EPOCH_SEC
        i += 1
    return out


def generate_synthetic_dataset(spec: SynthSpec) -> Dataset:
    """Build the dataset described by ``spec``; same seed, same bits."""
    subjects: dict[str, Subject] = {}
    for si in range(spec.n_subjects):
        sample_arrays: dict[str, SampleArray] = {}
        for ci, ch in enumerate(spec.channels):
            n = int(round(spec.duration_sec * ch.sampling_rate))
            rng = np.random.default_rng([spec.seed, si, ci])
            values = _channel_values(ch.kind, n, ch.sampling_rate, rng)
            attrs = ArrayAttributes(name=ch.name, sampling_rate=ch.sampling_rate,
                                    unit=None, value_type="float32", n_samples=n)
            sample_arrays[ch.name] = SampleArray.from_values(attrs, values)
        subject_id = f"subj{si + 1:04d}"
        stages = AnnotationSet(name="hypnogram", scorer="synthetic",
                               name_type="aasm_sleep_stage",
                               annotations=_stage_annotations(spec.duration_sec))
        subjects[subject_id] = Subject(
            metadata=SubjectMetadata(subject_id=subject_id,
                                     recording_start=_RECORDING_START),
            sample_arrays=sample_arrays,
            annotations={"hypnogram": stages},
        )
    series = Series(name=spec.series_name, subjects=subjects)
    return Dataset(name=spec.dataset_name, series={spec.series_name: series})
