"""In-memory data model for SLF datasets.

The hierarchy is ``Dataset -> Series -> Subject``, where a subject carries
metadata, named sample arrays (the recorded signals), and named annotation
sets (scored segments such as sleep stages).

Construction validates *types* (a string where a string belongs, a number
where a number belongs); value-level invariants such as ``sampling_rate > 0``
are checked by :func:`validate_dataset`, which reports every violation as a
:class:`ValidationIssue` instead of raising. This split lets readers and
tools surface all problems in one pass. The closed set of issue codes:

===========================  ========  =================================================
code                         severity  meaning
===========================  ========  =================================================
empty_name                   error     a name or id that must be non-empty is empty
path_separator_in_name       error     name contains ``/`` or ``\\`` (names become paths)
reserved_name                error     name collides with the on-disk layout
                                       (``.``, ``..``, a leading dot, or an
                                       array named ``annotations``)
key_mismatch                 error     map key differs from the contained object's name
nonpositive_sampling_rate    error     sampling_rate <= 0
negative_n_samples           error     n_samples < 0
invalid_value_type           error     value_type outside {float32,float64,int16,int32}
values_length_mismatch       error     materialized values length != n_samples
values_dtype_mismatch        error     materialized values dtype != value_type
unknown_name_type            error     annotation name_type not in the registry
invalid_annotation_name      error     name rejected by the set's name_type
negative_start_sec           error     annotation start_sec < 0
negative_duration            error     annotation duration_sec < 0
age_out_of_range             error     age outside [0, 150]
suspicious_age               warning   age in (120, 150] (legal but unlikely)
annotation_past_end          warning   annotation extends past the recording span
===========================  ========  =================================================

All model values are immutable after construction and safe to share across
threads; validation is read-only and reentrant.
"""

from __future__ import annotations

from datetime import datetime
from enum import Enum
from typing import Callable, Literal, Optional, Union

import numpy as np
from pydantic import BaseModel, ConfigDict, PrivateAttr

from .errors import EmptySubjectError, UnknownSleepStageError

Scalar = Union[str, int, float, bool, None]

#: Supported sample-array element types and their little-endian struct codes.
VALUE_TYPES: dict[str, str] = {
    "float32": "<f4",
    "float64": "<f8",
    "int16": "<i2",
    "int32": "<i4",
}

_PATH_SEPARATORS = ("/", "\\")
_RESERVED_NAMES = {".", ".."}
# A sample array named like the annotations directory would collide on disk.
_RESERVED_ARRAY_NAMES = frozenset({"annotations"})


class _Frozen(BaseModel):
    model_config = ConfigDict(frozen=True)


class SleepStageLabel(str, Enum):
    """The five AASM sleep stages."""

    W = "W"
    N1 = "N1"
    N2 = "N2"
    N3 = "N3"
    R = "R"


#: Case-insensitive alias table accepted by :func:`parse_sleep_stage`.
SLEEP_STAGE_ALIASES: dict[str, SleepStageLabel] = {}
for _stage, _names in [
    (SleepStageLabel.W, ["w", "wake", "wakefulness", "stage w", "sleep stage w"]),
    (SleepStageLabel.N1, ["n1", "stage n1", "sleep stage n1"]),
    (SleepStageLabel.N2, ["n2", "stage n2", "sleep stage n2"]),
    (SleepStageLabel.N3, ["n3", "stage n3", "sleep stage n3"]),
    (SleepStageLabel.R, ["r", "rem", "stage r", "stage rem", "sleep stage r", "sleep stage rem"]),
]:
    for _n in _names:
        SLEEP_STAGE_ALIASES[_n] = _stage
del _stage, _names, _n


def parse_sleep_stage(text: str) -> SleepStageLabel:
    """Map ``text`` to a :class:`SleepStageLabel`.

    Canonical forms (``W``, ``N1``, ``N2``, ``N3``, ``R``) and the aliases in
    :data:`SLEEP_STAGE_ALIASES` are accepted case-insensitively.

    Raises:
        UnknownSleepStageError: for anything outside the alias table.
    """
    key = text.strip().lower()
    try:
        return SLEEP_STAGE_ALIASES[key]
    except KeyError:
        raise UnknownSleepStageError(text) from None


def _is_valid_stage_name(name: str) -> bool:
    return name in SleepStageLabel._value2member_map_


#: Registry of annotation name types. Each entry maps the type name to a
#: predicate accepting an annotation name, or None for unrestricted names.
#: New types may be added with :func:`register_name_type`.
ANNOTATION_NAME_TYPES: dict[str, Optional[Callable[[str], bool]]] = {
    "free_text": None,
    "aasm_sleep_stage": _is_valid_stage_name,
}


def register_name_type(name: str, predicate: Optional[Callable[[str], bool]]) -> None:
    """Register an annotation name type with an optional validation predicate."""
    ANNOTATION_NAME_TYPES[name] = predicate


class ValidationIssue(_Frozen):
    """One invariant violation found by :func:`validate_dataset`.

    ``path`` is a slash-joined locator like ``series_a/subj_01/eeg_c3/sampling_rate``.
    """

    path: str
    severity: Literal["error", "warning"]
    code: str
    message: str

    def __str__(self) -> str:
        return f"{self.severity.upper()} {self.path} {self.code} {self.message}"


class Annotation(_Frozen):
    """A scored segment: name, start (seconds from recording start), duration."""

    name: str
    start_sec: float
    duration_sec: float
    extra: Optional[dict[str, Scalar]] = None


class AnnotationSet(_Frozen):
    """A named list of annotations sharing one name type and (optionally) scorer."""

    name: str
    scorer: Optional[str] = None
    name_type: str = "free_text"
    annotations: list[Annotation] = []


class ArrayAttributes(_Frozen):
    """Metadata of one sample array: name, rate, unit, element type, length."""

    name: str
    sampling_rate: float
    unit: Optional[str] = None
    value_type: str
    n_samples: int
    start_offset: float = 0.0


class SampleArray(_Frozen):
    """One recorded signal: attributes plus lazily loadable values.

    ``values_func`` is a zero-argument callable returning the full 1-D array;
    the result is cached on first access. Use :meth:`from_values` to wrap an
    eager array.
    """

    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True)

    attributes: ArrayAttributes
    values_func: Callable[[], np.ndarray]
    _cache: Optional[np.ndarray] = PrivateAttr(default=None)

    @classmethod
    def from_values(cls, attributes: ArrayAttributes, values) -> "SampleArray":
        arr = np.asarray(values)
        sa = cls(attributes=attributes, values_func=lambda: arr)
        sa._cache = arr
        return sa

    @property
    def values(self) -> np.ndarray:
        """The full sample array, loading it on first access."""
        if self._cache is None:
            self._cache = np.asarray(self.values_func())
        return self._cache

    @property
    def materialized_values(self) -> Optional[np.ndarray]:
        """The values if already loaded, without triggering a load."""
        return self._cache


class SubjectMetadata(_Frozen):
    subject_id: str
    recording_start: Optional[datetime] = None
    age: Optional[float] = None
    sex: Optional[str] = None
    extra: dict[str, Scalar] = {}


class Subject(_Frozen):
    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True)

    metadata: SubjectMetadata
    sample_arrays: dict[str, SampleArray] = {}
    annotations: dict[str, AnnotationSet] = {}


class Series(_Frozen):
    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True)

    name: str
    subjects: dict[str, Subject] = {}


class Dataset(_Frozen):
    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True)

    name: str
    format_version: str = "1"
    series: dict[str, Series] = {}


def recording_span(subject: Subject) -> float:
    """Total recorded seconds: max over arrays of offset + n_samples / rate.

    Raises:
        EmptySubjectError: if the subject has no sample arrays.
    """
    if not subject.sample_arrays:
        raise EmptySubjectError(
            f"subject {subject.metadata.subject_id!r} has no sample arrays"
        )
    return max(
        sa.attributes.start_offset + sa.attributes.n_samples / sa.attributes.sampling_rate
        for sa in subject.sample_arrays.values()
    )


# --- validation --------------------------------------------------------------


def _issue(issues, path, code, message, severity="error"):
    issues.append(ValidationIssue(path=path, severity=severity, code=code, message=message))


def _check_name(issues, path: str, name: str, *, what: str,
                reserved: frozenset[str] = frozenset()) -> None:
    if not name:
        _issue(issues, path, "empty_name", f"{what} name is empty")
        return
    if any(sep in name for sep in _PATH_SEPARATORS):
        _issue(issues, path, "path_separator_in_name",
               f"{what} name {name!r} contains a path separator")
    if name in _RESERVED_NAMES or name in reserved or name.startswith("."):
        _issue(issues, path, "reserved_name",
               f"{what} name {name!r} is reserved by the on-disk layout")


def validate_annotation_set(aset: AnnotationSet, path: str, issues: list) -> None:
    _check_name(issues, path, aset.name, what="annotation set")
    predicate = None
    if aset.name_type not in ANNOTATION_NAME_TYPES:
        _issue(issues, f"{path}/name_type", "unknown_name_type",
               f"unknown annotation name type {aset.name_type!r}")
    else:
        predicate = ANNOTATION_NAME_TYPES[aset.name_type]
    for i, ann in enumerate(aset.annotations):
        apath = f"{path}/{i}"
        if predicate is not None and not predicate(ann.name):
            _issue(issues, f"{apath}/name", "invalid_annotation_name",
                   f"name {ann.name!r} is not valid for name_type {aset.name_type!r}")
        if ann.start_sec < 0:
            _issue(issues, f"{apath}/start_sec", "negative_start_sec",
                   f"start_sec {ann.start_sec} is negative")
        if ann.duration_sec < 0:
            _issue(issues, f"{apath}/duration_sec", "negative_duration",
                   f"duration_sec {ann.duration_sec} is negative")


def validate_sample_array(sa: SampleArray, path: str, issues: list) -> None:
    attrs = sa.attributes
    _check_name(issues, path, attrs.name, what="sample array",
                reserved=_RESERVED_ARRAY_NAMES)
    if not attrs.sampling_rate > 0:
        _issue(issues, f"{path}/sampling_rate", "nonpositive_sampling_rate",
               f"sampling_rate must be > 0, got {attrs.sampling_rate}")
    if attrs.n_samples < 0:
        _issue(issues, f"{path}/n_samples", "negative_n_samples",
               f"n_samples must be >= 0, got {attrs.n_samples}")
    if attrs.value_type not in VALUE_TYPES:
        _issue(issues, f"{path}/value_type", "invalid_value_type",
               f"value_type must be one of {sorted(VALUE_TYPES)}, got {attrs.value_type!r}")
    # Only inspect values that are already in memory; validating must not
    # defeat lazy loading.
    values = sa.materialized_values
    if values is not None:
        if values.shape != (attrs.n_samples,):
            _issue(issues, f"{path}/values", "values_length_mismatch",
                   f"values shape {values.shape} does not match n_samples {attrs.n_samples}")
        expected = VALUE_TYPES.get(attrs.value_type)
        if expected is not None and values.dtype != np.dtype(expected):
            _issue(issues, f"{path}/values", "values_dtype_mismatch",
                   f"values dtype {values.dtype} does not match value_type {attrs.value_type}")


def validate_subject(subject: Subject, path: str, issues: list) -> None:
    meta = subject.metadata
    _check_name(issues, path, meta.subject_id, what="subject")
    if meta.age is not None:
        if meta.age < 0 or meta.age > 150:
            _issue(issues, f"{path}/age", "age_out_of_range",
                   f"age {meta.age} outside [0, 150]")
        elif meta.age > 120:
            _issue(issues, f"{path}/age", "suspicious_age",
                   f"age {meta.age} is unusually high", severity="warning")
    for name, sa in subject.sample_arrays.items():
        apath = f"{path}/{name}"
        if name != sa.attributes.name:
            _issue(issues, apath, "key_mismatch",
                   f"map key {name!r} != array name {sa.attributes.name!r}")
        validate_sample_array(sa, apath, issues)
    try:
        span = recording_span(subject)
    except (EmptySubjectError, ZeroDivisionError):
        span = None
    for name, aset in subject.annotations.items():
        apath = f"{path}/{name}"
        if name != aset.name:
            _issue(issues, apath, "key_mismatch",
                   f"map key {name!r} != annotation set name {aset.name!r}")
        validate_annotation_set(aset, apath, issues)
        if span is not None:
            for i, ann in enumerate(aset.annotations):
                if ann.start_sec >= 0 and ann.duration_sec >= 0 \
                        and ann.start_sec + ann.duration_sec > span + 1e-9:
                    _issue(issues, f"{apath}/{i}", "annotation_past_end",
                           f"annotation ends at {ann.start_sec + ann.duration_sec:g}s, "
                           f"past the recording span {span:g}s", severity="warning")


def validate_series(series: Series, path: str, issues: list) -> None:
    _check_name(issues, path, series.name, what="series")
    for sid, subject in series.subjects.items():
        spath = f"{path}/{sid}"
        if sid != subject.metadata.subject_id:
            _issue(issues, spath, "key_mismatch",
                   f"map key {sid!r} != subject_id {subject.metadata.subject_id!r}")
        validate_subject(subject, spath, issues)


def validate_dataset(dataset: Dataset) -> list[ValidationIssue]:
    """Collect every invariant violation in ``dataset``.

    Returns all issues in deterministic depth-first, insertion order; an
    empty list means the dataset is valid. Never raises.
    """
    issues: list[ValidationIssue] = []
    _check_name(issues, "name", dataset.name, what="dataset")
    for name, series in dataset.series.items():
        if name != series.name:
            _issue(issues, name, "key_mismatch",
                   f"map key {name!r} != series name {series.name!r}")
        validate_series(series, name, issues)
    return issues


def validation_errors(issues: list[ValidationIssue]) -> list[ValidationIssue]:
    """The error-severity subset of ``issues``."""
    return [i for i in issues if i.severity == "error"]


def datasets_equal(a: Dataset, b: Dataset, *, compare_values: bool = True) -> bool:
    """Field-by-field dataset equality, with bit-identical array values.

    Model ``==`` cannot be used because sample arrays are compared through
    their loader callables; this compares attributes and (optionally) the
    materialized values instead. Like dict equality, map iteration order is
    not significant (a reread dataset lists entries lexicographically).
    """
    if (a.name, a.format_version) != (b.name, b.format_version):
        return False
    if set(a.series) != set(b.series):
        return False
    for sname, sa_ in a.series.items():
        sb = b.series[sname]
        if set(sa_.subjects) != set(sb.subjects):
            return False
        for sid, subj_a in sa_.subjects.items():
            subj_b = sb.subjects[sid]
            if subj_a.metadata != subj_b.metadata:
                return False
            if set(subj_a.sample_arrays) != set(subj_b.sample_arrays):
                return False
            if subj_a.annotations != subj_b.annotations:
                return False
            for aname, arr_a in subj_a.sample_arrays.items():
                arr_b = subj_b.sample_arrays[aname]
                if arr_a.attributes != arr_b.attributes:
                    return False
                if compare_values:
                    va, vb = arr_a.values, arr_b.values
                    if va.dtype != vb.dtype or va.shape != vb.shape:
                        return False
                    if va.tobytes() != vb.tobytes():
                        return False
    return True
