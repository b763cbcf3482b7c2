"""On-disk representation of SLF datasets.

The hierarchy maps directly onto directories::

    <root>/<dataset_name>/metadata.json
    <root>/<dataset_name>/<series_name>/metadata.json
    .../<subject_id>/metadata.json
    .../<subject_id>/annotations/<set_name>.json
    .../<subject_id>/<array_name>/attributes.json
    .../<subject_id>/<array_name>/data.npy          (raw codec)
    .../<subject_id>/<array_name>/data.zarr/        (chunked codec)

All metadata is plain-text JSON (UTF-8, 2-space indent, trailing newline) so
a dataset can be explored with a file manager and text editor. Sample-array
payloads are binary, encoded per :mod:`slf.codecs`.

Reading is lazy by default: only JSON metadata is touched until an array's
values are accessed, and :func:`read_window` materializes just the requested
sample range (bounded bytes for raw arrays, only overlapping chunks for
chunked arrays). :class:`IoStats` counts every file open and byte read so
tests and the benchmark can assert those bounds.

Writes are atomic per subject: a subject directory appears under its final
name only after its contents are complete.
"""

from __future__ import annotations

import json
import os
import shutil
import threading
import uuid
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path
from typing import Optional

import numpy as np
from pydantic import BaseModel, ConfigDict, ValidationError

from . import codecs
from .codecs import ArrayCodecSpec
from .errors import (
    CodecError,
    DestinationExistsError,
    NotSlfDatasetError,
    StoreError,
    StoreReadError,
    ValidationFailedError,
    WindowOutOfRangeError,
)
from .models import (
    VALUE_TYPES,
    AnnotationSet,
    ArrayAttributes,
    Dataset,
    SampleArray,
    Series,
    Subject,
    SubjectMetadata,
    validate_dataset,
    validation_errors,
)

METADATA_FILE = "metadata.json"
ATTRIBUTES_FILE = "attributes.json"
ANNOTATIONS_DIR = "annotations"
RAW_DATA_FILE = "data.npy"
CHUNKED_DATA_DIR = "data.zarr"
ZARRAY_FILE = ".zarray"


class IoStats:
    """Thread-safe counters of file opens and bytes read."""

    def __init__(self):
        self._lock = threading.Lock()
        self.bytes_read = 0
        self.files_opened = 0

    def add(self, *, nbytes: int = 0, files: int = 0) -> None:
        with self._lock:
            self.bytes_read += nbytes
            self.files_opened += files

    def __repr__(self) -> str:
        return f"IoStats(bytes_read={self.bytes_read}, files_opened={self.files_opened})"


class ReadOptions(BaseModel):
    """Filters and laziness for :func:`read_dataset`."""

    model_config = ConfigDict(frozen=True)

    series_filter: Optional[set[str]] = None
    subject_filter: Optional[set[str]] = None
    lazy_arrays: bool = True


@dataclass(frozen=True)
class StoredArrayRef:
    """A resolved on-disk sample array: directory, codec kind, and attributes.

    For chunked arrays the ``.zarray`` metadata is parsed at resolve time;
    payload (chunk / ``data.npy``) bytes are only read by :func:`read_window`.
    """

    directory: Path
    kind: str
    attributes: ArrayAttributes
    chunk_len: Optional[int] = None
    zstd_level: Optional[int] = None


@dataclass
class WriteReport:
    """Counts and size of one :func:`write_dataset` run."""

    dataset_dir: Path
    n_series: int = 0
    n_subjects: int = 0
    n_arrays: int = 0
    n_annotation_sets: int = 0
    total_bytes: int = 0


# --- low-level file helpers ---------------------------------------------------


def _read_bytes(path: Path, stats: Optional[IoStats]) -> bytes:
    try:
        with open(path, "rb") as f:
            data = f.read()
    except OSError as exc:
        raise StoreError(f"cannot read {path}: {exc}", code="io_error") from exc
    if stats is not None:
        stats.add(nbytes=len(data), files=1)
    return data


def _load_json(path: Path, stats: Optional[IoStats]) -> dict:
    data = _read_bytes(path, stats)
    try:
        doc = json.loads(data.decode("utf-8"))
    except (ValueError, UnicodeDecodeError) as exc:
        raise StoreError(f"not valid JSON: {exc}", code="bad_json", path=str(path)) from None
    if not isinstance(doc, dict):
        raise StoreError("expected a JSON object", code="bad_json", path=str(path))
    return doc


def _json_bytes(obj) -> bytes:
    return (json.dumps(obj, indent=2, ensure_ascii=False) + "\n").encode("utf-8")


def _write_file(path: Path, data: bytes) -> int:
    with open(path, "wb") as f:
        f.write(data)
    return len(data)


def _listdir(path: Path) -> list[str]:
    return sorted(e for e in os.listdir(path) if not e.startswith("."))


def _subdirs(path: Path) -> list[str]:
    return [e for e in _listdir(path) if (path / e).is_dir()]


# --- writing ------------------------------------------------------------------


def _dump_model(model: BaseModel) -> bytes:
    return _json_bytes(model.model_dump(mode="json"))


def _write_array(array_dir: Path, sa: SampleArray, codec: ArrayCodecSpec) -> int:
    attrs = sa.attributes
    values = np.asarray(sa.values)
    if values.shape != (attrs.n_samples,):
        raise StoreError(
            f"array {attrs.name!r}: values shape {values.shape} does not match "
            f"n_samples {attrs.n_samples}",
            code="values_length_mismatch",
        )
    expected_dtype = np.dtype(VALUE_TYPES[attrs.value_type])
    if values.dtype != expected_dtype:
        raise StoreError(
            f"array {attrs.name!r}: values dtype {values.dtype} does not match "
            f"value_type {attrs.value_type}",
            code="values_dtype_mismatch",
        )
    array_dir.mkdir()
    nbytes = _write_file(array_dir / ATTRIBUTES_FILE, _dump_model(attrs))
    if codec.kind == "raw":
        nbytes += _write_file(array_dir / RAW_DATA_FILE,
                              codecs.encode_raw_array(values, attrs.value_type))
    else:
        chunk_len = codec.chunk_len or codecs.default_chunk_len(attrs.value_type)
        files = codecs.encode_chunked_array(values, attrs.value_type,
                                            chunk_len, codec.zstd_level)
        zarr_dir = array_dir / CHUNKED_DATA_DIR
        zarr_dir.mkdir()
        for name, data in files.items():
            nbytes += _write_file(zarr_dir / name, data)
    return nbytes


def write_subject(subject: Subject, series_dir: Path, codec: ArrayCodecSpec) -> int:
    """Write one subject directory atomically; returns bytes written.

    The subject is staged in a temporary dot-directory inside ``series_dir``
    and renamed into place once complete, so readers never observe a partial
    subject.
    """
    subject_id = subject.metadata.subject_id
    final_dir = series_dir / subject_id
    if final_dir.exists():
        raise DestinationExistsError(f"subject directory already exists: {final_dir}")
    tmp_dir = series_dir / f".tmp-{subject_id}-{uuid.uuid4().hex[:8]}"
    tmp_dir.mkdir()
    try:
        nbytes = _write_file(tmp_dir / METADATA_FILE, _dump_model(subject.metadata))
        if subject.annotations:
            ann_dir = tmp_dir / ANNOTATIONS_DIR
            ann_dir.mkdir()
            for name, aset in subject.annotations.items():
                nbytes += _write_file(ann_dir / f"{name}.json", _dump_model(aset))
        for name, sa in subject.sample_arrays.items():
            nbytes += _write_array(tmp_dir / name, sa, codec)
        os.replace(tmp_dir, final_dir)
    except BaseException:
        shutil.rmtree(tmp_dir, ignore_errors=True)
        raise
    return nbytes


def write_dataset(dataset: Dataset, root: Path, codec: ArrayCodecSpec = codecs.RAW,
                  *, overwrite: bool = False, workers: int = 1) -> WriteReport:
    """Write ``dataset`` under ``root``; the tree lands in ``root/<name>``.

    The dataset must validate with zero errors. An existing destination is
    an error unless ``overwrite`` is set, in which case it is replaced.
    ``workers`` > 1 writes subject directories concurrently.
    """
    issues = validate_dataset(dataset)
    errors = validation_errors(issues)
    if errors:
        raise ValidationFailedError(
            f"dataset {dataset.name!r} has {len(errors)} validation error(s); not writing",
            issues=errors,
        )
    root = Path(root)
    ds_dir = root / dataset.name
    if ds_dir.exists():
        if not overwrite:
            raise DestinationExistsError(
                f"destination already exists: {ds_dir} (pass overwrite to replace)"
            )
        shutil.rmtree(ds_dir)
    ds_dir.mkdir(parents=True)

    report = WriteReport(dataset_dir=ds_dir)
    report.total_bytes += _write_file(
        ds_dir / METADATA_FILE,
        _json_bytes({"name": dataset.name, "format_version": dataset.format_version}),
    )
    jobs = []
    for sname, series in dataset.series.items():
        series_dir = ds_dir / sname
        series_dir.mkdir()
        report.n_series += 1
        report.total_bytes += _write_file(series_dir / METADATA_FILE,
                                          _json_bytes({"name": series.name}))
        for subject in series.subjects.values():
            jobs.append((subject, series_dir))

    def _run(job):
        subject, series_dir = job
        nbytes = write_subject(subject, series_dir, codec)
        return subject, nbytes

    if workers > 1 and len(jobs) > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(_run, jobs))
    else:
        results = [_run(j) for j in jobs]
    for subject, nbytes in results:
        report.n_subjects += 1
        report.n_arrays += len(subject.sample_arrays)
        report.n_annotation_sets += len(subject.annotations)
        report.total_bytes += nbytes
    return report


# --- windowed and full reads ---------------------------------------------------


def resolve_array(array_dir: Path, attributes: ArrayAttributes,
                  stats: Optional[IoStats] = None) -> StoredArrayRef:
    """Determine how the array in ``array_dir`` is stored.

    For chunked arrays this reads and cross-checks ``.zarray`` (JSON
    metadata); payload bytes are never touched here.
    """
    array_dir = Path(array_dir)
    has_raw = (array_dir / RAW_DATA_FILE).is_file()
    has_chunked = (array_dir / CHUNKED_DATA_DIR).is_dir()
    if has_raw and has_chunked:
        raise StoreError(
            f"{array_dir} contains both {RAW_DATA_FILE} and {CHUNKED_DATA_DIR}",
            code="ambiguous_array_storage",
        )
    if not has_raw and not has_chunked:
        raise StoreError(
            f"{array_dir} contains neither {RAW_DATA_FILE} nor {CHUNKED_DATA_DIR}",
            code="missing_array_data",
        )
    if has_raw:
        return StoredArrayRef(directory=array_dir, kind="raw", attributes=attributes)
    zarray_path = array_dir / CHUNKED_DATA_DIR / ZARRAY_FILE
    if not zarray_path.is_file():
        raise CodecError(f"missing {zarray_path}", code="bad_zarray")
    n, chunk_len, value_type, level = codecs.parse_zarray(_read_bytes(zarray_path, stats))
    if n != attributes.n_samples:
        raise StoreError(
            f"{zarray_path}: shape [{n}] does not match n_samples {attributes.n_samples}",
            code="values_length_mismatch",
        )
    if value_type != attributes.value_type:
        raise StoreError(
            f"{zarray_path}: dtype {value_type} does not match value_type "
            f"{attributes.value_type}",
            code="values_dtype_mismatch",
        )
    return StoredArrayRef(directory=array_dir, kind="chunked_zstd", attributes=attributes,
                          chunk_len=chunk_len, zstd_level=level)


def open_array(array_dir: Path, stats: Optional[IoStats] = None) -> StoredArrayRef:
    """Resolve a stored array from its directory alone (reads attributes.json)."""
    array_dir = Path(array_dir)
    attrs_path = array_dir / ATTRIBUTES_FILE
    if not attrs_path.is_file():
        raise StoreError(f"missing {attrs_path}", code="missing_array_data")
    doc = _load_json(attrs_path, stats)
    try:
        attributes = ArrayAttributes(**doc)
    except (ValidationError, TypeError) as exc:
        raise StoreError(f"{attrs_path}: {exc}", code="schema_error") from None
    return resolve_array(array_dir, attributes, stats)


def _read_raw_window(ref: StoredArrayRef, start: int, n: int,
                     stats: Optional[IoStats]) -> np.ndarray:
    path = ref.directory / RAW_DATA_FILE
    attrs = ref.attributes
    nread = 0
    try:
        with open(path, "rb") as f:
            head = f.read(10)
            nread += len(head)
            if len(head) < 10 or head[:6] != b"\x93NUMPY":
                raise CodecError(f"{path}: not an NPY array (bad magic)", code="bad_magic")
            hlen = int.from_bytes(head[8:10], "little")
            rest = f.read(hlen)
            nread += len(rest)
            value_type, n_total, offset = codecs.parse_npy_preamble(head + rest)
            if value_type != attrs.value_type:
                raise StoreError(
                    f"{path}: stored dtype {value_type} does not match value_type "
                    f"{attrs.value_type}",
                    code="values_dtype_mismatch",
                )
            if n_total != attrs.n_samples:
                raise StoreError(
                    f"{path}: stored shape ({n_total},) does not match n_samples "
                    f"{attrs.n_samples}",
                    code="values_length_mismatch",
                )
            itemsize = np.dtype(VALUE_TYPES[value_type]).itemsize
            f.seek(offset + start * itemsize)
            payload = f.read(n * itemsize)
            nread += len(payload)
            if len(payload) != n * itemsize:
                raise CodecError(
                    f"{path}: needed {n * itemsize} payload bytes at sample {start}, "
                    f"found {len(payload)}",
                    code="truncated_payload",
                )
    except OSError as exc:
        raise StoreError(f"cannot read {path}: {exc}", code="io_error") from exc
    finally:
        if stats is not None:
            stats.add(nbytes=nread, files=1)
    return np.frombuffer(payload, dtype=np.dtype(VALUE_TYPES[value_type]))


def _read_chunked_window(ref: StoredArrayRef, start: int, n: int,
                         stats: Optional[IoStats]) -> np.ndarray:
    attrs = ref.attributes
    dtype = np.dtype(VALUE_TYPES[attrs.value_type])
    if n == 0:
        return np.empty(0, dtype=dtype)
    zarr_dir = ref.directory / CHUNKED_DATA_DIR
    chunk_len = ref.chunk_len
    parts = []
    for i in codecs.chunk_range(start, start + n, chunk_len):
        chunk_path = zarr_dir / str(i)
        if not chunk_path.is_file():
            raise CodecError(f"missing chunk file {chunk_path}", code="missing_chunk")
        frame = _read_bytes(chunk_path, stats)
        try:
            parts.append(codecs.decode_chunk(frame, chunk_len, dtype))
        except CodecError as exc:
            raise CodecError(f"{chunk_path}: {exc}", code=exc.code) from None
    window = np.concatenate(parts)
    first_chunk = start // chunk_len
    lo = start - first_chunk * chunk_len
    return window[lo:lo + n]


def read_window(ref: StoredArrayRef, start_sample: int, n_samples: int,
                stats: Optional[IoStats] = None) -> np.ndarray:
    """Read exactly ``n_samples`` values starting at ``start_sample``.

    Raw arrays read the NPY preamble plus only the windowed payload bytes;
    chunked arrays open only the chunk files overlapping the window.
    """
    total = ref.attributes.n_samples
    if start_sample < 0 or n_samples < 0 or start_sample + n_samples > total:
        raise WindowOutOfRangeError(
            f"window [{start_sample}, {start_sample + n_samples}) outside "
            f"[0, {total}) of array {ref.attributes.name!r}"
        )
    if ref.kind == "raw":
        return _read_raw_window(ref, start_sample, n_samples, stats)
    return _read_chunked_window(ref, start_sample, n_samples, stats)


def read_array_values(ref: StoredArrayRef, stats: Optional[IoStats] = None) -> np.ndarray:
    """Eagerly read the whole array."""
    return read_window(ref, 0, ref.attributes.n_samples, stats)


class ArrayDataLoader:
    """Lazy loader bound to one stored array, usable as a SampleArray
    ``values_func``. Resolution (directory scan plus ``.zarray`` parse) is
    deferred to first access; windowed reads are exposed for callers that
    hold the loader."""

    def __init__(self, array_dir: Path, attributes: ArrayAttributes,
                 stats: Optional[IoStats] = None):
        self.array_dir = Path(array_dir)
        self.attributes = attributes
        self.stats = stats
        self._ref: Optional[StoredArrayRef] = None
        self._lock = threading.Lock()

    def ref(self) -> StoredArrayRef:
        with self._lock:
            if self._ref is None:
                self._ref = resolve_array(self.array_dir, self.attributes, self.stats)
            return self._ref

    def read_window(self, start_sample: int, n_samples: int) -> np.ndarray:
        return read_window(self.ref(), start_sample, n_samples, self.stats)

    def __call__(self) -> np.ndarray:
        return read_array_values(self.ref(), self.stats)


# --- reading the hierarchy ------------------------------------------------------


class _ReadContext:
    def __init__(self, stats: Optional[IoStats]):
        self.stats = stats
        self.failures: list[tuple[str, str, str]] = []

    def fail(self, path: Path, code: str, message: str) -> None:
        self.failures.append((str(path), code, message))

    def load_model(self, path: Path, model_cls):
        try:
            doc = _load_json(path, self.stats)
        except (StoreError, CodecError) as exc:
            self.fail(path, exc.code, str(exc))
            return None
        try:
            return model_cls(**doc)
        except (ValidationError, TypeError) as exc:
            self.fail(path, "schema_error", str(exc).replace("\n", " "))
            return None


def _read_subject(subject_dir: Path, ctx: _ReadContext, lazy: bool) -> Optional[Subject]:
    meta = ctx.load_model(subject_dir / METADATA_FILE, SubjectMetadata)
    if meta is None:
        return None
    annotations: dict[str, AnnotationSet] = {}
    ann_dir = subject_dir / ANNOTATIONS_DIR
    if ann_dir.is_dir():
        for fname in _listdir(ann_dir):
            if not fname.endswith(".json"):
                continue
            aset = ctx.load_model(ann_dir / fname, AnnotationSet)
            if aset is not None:
                annotations[fname[:-5]] = aset
    sample_arrays: dict[str, SampleArray] = {}
    for name in _subdirs(subject_dir):
        if name == ANNOTATIONS_DIR:
            continue
        array_dir = subject_dir / name
        attrs = ctx.load_model(array_dir / ATTRIBUTES_FILE, ArrayAttributes)
        if attrs is None:
            continue
        loader = ArrayDataLoader(array_dir, attrs, ctx.stats)
        if lazy:
            sample_arrays[name] = SampleArray(attributes=attrs, values_func=loader)
        else:
            try:
                sample_arrays[name] = SampleArray.from_values(attrs, loader())
            except (StoreError, CodecError) as exc:
                ctx.fail(array_dir, exc.code, str(exc))
    return Subject(metadata=meta, sample_arrays=sample_arrays, annotations=annotations)


def _issue_file_hint(ds_dir: Path, issue_path: str) -> str:
    """Best-effort mapping from a validation-issue path to the file it lives in."""
    parts = issue_path.split("/")
    candidate = ds_dir
    depth = 0
    for part in parts:
        nxt = candidate / part
        if nxt.is_dir():
            candidate = nxt
            depth += 1
        else:
            break
    if depth >= 3:
        return str(candidate / ATTRIBUTES_FILE)
    if depth == 2 and len(parts) > 2:
        ann = candidate / ANNOTATIONS_DIR / f"{parts[2]}.json"
        if ann.is_file():
            return str(ann)
    return str(candidate / METADATA_FILE)


def read_dataset(root: Path, opts: ReadOptions = ReadOptions(),
                 *, stats: Optional[IoStats] = None, validate: bool = True) -> Dataset:
    """Read the dataset rooted at ``root`` (the directory holding metadata.json).

    With ``opts.lazy_arrays`` (the default) no sample-array payload bytes are
    read until values are accessed. Per-file parse failures are aggregated
    into one :class:`StoreReadError`; with ``validate`` the result must pass
    validation with zero errors.
    """
    root = Path(root)
    meta_path = root / METADATA_FILE
    if not root.is_dir() or not meta_path.is_file():
        raise NotSlfDatasetError(f"{root} is not an SLF dataset (no {METADATA_FILE})")
    ctx = _ReadContext(stats)
    header = ctx.load_model(meta_path, _DatasetHeader)
    series: dict[str, Series] = {}
    if header is not None:
        for sname in _subdirs(root):
            if opts.series_filter is not None and sname not in opts.series_filter:
                continue
            series_dir = root / sname
            sheader = ctx.load_model(series_dir / METADATA_FILE, _SeriesHeader)
            if sheader is None:
                continue
            subjects: dict[str, Subject] = {}
            for sid in _subdirs(series_dir):
                if opts.subject_filter is not None and sid not in opts.subject_filter:
                    continue
                subject = _read_subject(series_dir / sid, ctx, opts.lazy_arrays)
                if subject is not None:
                    subjects[sid] = subject
            series[sname] = Series(name=sheader.name, subjects=subjects)
    if ctx.failures:
        raise StoreReadError(
            f"{len(ctx.failures)} file(s) failed to parse under {root}",
            failures=ctx.failures,
        )
    dataset = Dataset(name=header.name, format_version=header.format_version,
                      series=series)
    if validate:
        issues = validate_dataset(dataset)
        errors = validation_errors(issues)
        if errors:
            lines = [f"{_issue_file_hint(root, i.path)}: {i.code} ({i.message})"
                     for i in errors]
            raise ValidationFailedError(
                "dataset failed validation on read:\n  " + "\n  ".join(lines),
                issues=errors,
            )
    return dataset


class _DatasetHeader(BaseModel):
    model_config = ConfigDict(frozen=True)
    name: str
    format_version: str = "1"


class _SeriesHeader(BaseModel):
    model_config = ConfigDict(frozen=True)
    name: str


# --- summaries -------------------------------------------------------------------


def _parse_model_file(path: Path, model_cls, stats: Optional[IoStats]):
    doc = _load_json(path, stats)
    try:
        return model_cls(**doc)
    except (ValidationError, TypeError) as exc:
        raise StoreError(f"{path}: {exc}".replace("\n", " "),
                         code="schema_error") from None


def list_dataset(root: Path, stats: Optional[IoStats] = None) -> dict:
    """Summarize a dataset from its JSON metadata alone (no payload reads).

    The summary mirrors :func:`summarize_dataset` of the in-memory model.
    """
    root = Path(root)
    meta_path = root / METADATA_FILE
    if not root.is_dir() or not meta_path.is_file():
        raise NotSlfDatasetError(f"{root} is not an SLF dataset (no {METADATA_FILE})")
    header = _parse_model_file(meta_path, _DatasetHeader, stats)
    summary = {
        "name": header.name,
        "format_version": header.format_version,
        "series": [],
    }
    for sname in _subdirs(root):
        series_dir = root / sname
        entry = {"name": sname, "subjects": []}
        for sid in _subdirs(series_dir):
            subject_dir = series_dir / sid
            sentry = {"subject_id": sid, "arrays": [], "annotation_sets": []}
            for aname in _subdirs(subject_dir):
                if aname == ANNOTATIONS_DIR:
                    continue
                attrs = _parse_model_file(subject_dir / aname / ATTRIBUTES_FILE,
                                          ArrayAttributes, stats)
                sentry["arrays"].append({
                    "name": aname,
                    "sampling_rate": attrs.sampling_rate,
                    "n_samples": attrs.n_samples,
                    "value_type": attrs.value_type,
                })
            ann_dir = subject_dir / ANNOTATIONS_DIR
            if ann_dir.is_dir():
                sentry["annotation_sets"] = [f[:-5] for f in _listdir(ann_dir)
                                             if f.endswith(".json")]
            entry["subjects"].append(sentry)
        summary["series"].append(entry)
    return summary


def summarize_dataset(dataset: Dataset) -> dict:
    """The :func:`list_dataset` summary shape, derived from an in-memory dataset.

    Entries are listed lexicographically, matching the on-disk listing order.
    """
    return {
        "name": dataset.name,
        "format_version": dataset.format_version,
        "series": [
            {
                "name": sname,
                "subjects": [
                    {
                        "subject_id": sid,
                        "arrays": [
                            {
                                "name": aname,
                                "sampling_rate": subject.sample_arrays[aname]
                                .attributes.sampling_rate,
                                "n_samples": subject.sample_arrays[aname]
                                .attributes.n_samples,
                                "value_type": subject.sample_arrays[aname]
                                .attributes.value_type,
                            }
                            for aname in sorted(subject.sample_arrays)
                        ],
                        "annotation_sets": sorted(subject.annotations),
                    }
                    for sid, subject in sorted(series.subjects.items())
                ],
            }
            for sname, series in sorted(dataset.series.items())
        ],
    }


def directory_size(path: Path) -> int:
    """Total size in bytes of all files under ``path``."""
    total = 0
    for dirpath, _dirnames, filenames in os.walk(path):
        for fname in filenames:
            total += os.path.getsize(os.path.join(dirpath, fname))
    return total


def deep_validate(root: Path, stats: Optional[IoStats] = None):
    """Read ``root`` and verify everything, including array payloads.

    Returns (issues, dataset or None). Unlike :func:`read_dataset` this never
    raises for content problems: store-level failures are converted into
    error issues so a caller can report all of them in one pass.
    """
    from .models import ValidationIssue  # local import to keep module load light

    issues: list = []
    try:
        dataset = read_dataset(root, stats=stats, validate=False)
    except StoreReadError as exc:
        for fpath, code, message in exc.failures:
            issues.append(ValidationIssue(path=fpath, severity="error",
                                          code=code, message=message))
        return issues, None
    issues.extend(validate_dataset(dataset))
    # Materialize every array so payload-level corruption is surfaced too.
    for sname, series in dataset.series.items():
        for sid, subject in series.subjects.items():
            for aname, sa in subject.sample_arrays.items():
                path = f"{sname}/{sid}/{aname}"
                try:
                    sa.values
                except (StoreError, CodecError) as exc:
                    issues.append(ValidationIssue(path=path, severity="error",
                                                  code=exc.code, message=str(exc)))
    # Re-run model validation now that values are materialized (length/dtype).
    seen = {(i.path, i.code) for i in issues}
    for issue in validate_dataset(dataset):
        if (issue.path, issue.code) not in seen:
            issues.append(issue)
    return issues, dataset
