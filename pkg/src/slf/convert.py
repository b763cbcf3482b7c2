"""Conversion of EDF/EDF+ files into SLF subjects and datasets.

Signal labels become array directory names, so they are sanitized: trimmed,
lowercased, runs of non-alphanumerics collapsed to single underscores. Label
collisions after sanitization raise in strict mode and get numeric suffixes
("_2", "_3", ...) with a warning in lenient mode.

Annotation texts are routed by a mapping config (JSON)::

    {
      "stage_aliases": {"Sleep stage 1": "N1", ...},
      "event_sets": [{"pattern": "(?i)apnea", "set_name": "resp_events"}],
      "stage_set_name": "hypnogram"
    }

``stage_aliases`` keys match case-insensitively and map to canonical AASM
labels; anything the alias table or the built-in stage parser recognizes
lands in an ``aasm_sleep_stage`` set. ``event_sets`` patterns are regexes
tried in order; everything else falls through to a free-text set named
``edf_annotations``. The default alias table covers the Sleep-EDF R&K
convention, collapsing stages 3 and 4 to N3 with a warning.
"""

from __future__ import annotations

import json
import re
import shutil
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field as dataclass_field
from datetime import datetime
from pathlib import Path
from typing import Optional

from pydantic import BaseModel, ConfigDict

from .codecs import RAW, ArrayCodecSpec
from .edf import EdfFile, ParseMode, TalAnnotation, parse_tal_records
from .errors import (
    DestinationExistsError,
    EdfParseError,
    EmptySourceDirectoryError,
    SlfError,
    UnknownSleepStageError,
    UnsupportedEdfError,
    ValidationFailedError,
)
from .models import (
    Annotation,
    AnnotationSet,
    ArrayAttributes,
    SampleArray,
    Subject,
    SubjectMetadata,
    parse_sleep_stage,
    validation_errors,
)
from .models import validate_subject as _validate_subject
from .store import _json_bytes, _write_file, write_subject

DEFAULT_STAGE_ALIASES = {
    "sleep stage w": "W",
    "sleep stage 1": "N1",
    "sleep stage 2": "N2",
    "sleep stage 3": "N3",
    "sleep stage 4": "N3",
    "sleep stage r": "R",
}

#: Alias keys that collapse R&K stages 3/4 onto AASM N3; matching one of
#: these emits a warning so the collapse is visible in reports.
_COLLAPSED_RK_ALIASES = {"sleep stage 4", "stage 4", "s4"}

FREE_TEXT_SET_NAME = "edf_annotations"


class EventSetRule(BaseModel):
    model_config = ConfigDict(frozen=True)

    pattern: str
    set_name: str


class MappingConfig(BaseModel):
    model_config = ConfigDict(frozen=True)

    stage_aliases: dict[str, str] = DEFAULT_STAGE_ALIASES
    event_sets: list[EventSetRule] = []
    stage_set_name: str = "hypnogram"


DEFAULT_MAPPING = MappingConfig()


def load_mapping(path) -> MappingConfig:
    with open(path, "r", encoding="utf-8") as f:
        return MappingConfig(**json.load(f))


def sanitize_label(label: str) -> str:
    """Turn a signal label into a safe directory name."""
    name = re.sub(r"[^0-9a-z]+", "_", label.strip().lower()).strip("_")
    return name or "signal"


def map_annotations(tals: list[TalAnnotation], mapping: MappingConfig = DEFAULT_MAPPING,
                    warnings: Optional[list] = None) -> list[AnnotationSet]:
    """Route TAL texts into annotation sets.

    Returns the sleep-stage set first (if any matched), then event sets in
    rule order, then the catch-all free-text set. TALs with negative onsets
    are dropped with a warning; a missing duration becomes 0.
    """
    stage_annotations: list[Annotation] = []
    event_annotations: dict[str, list[Annotation]] = {}
    free_annotations: list[Annotation] = []
    alias_table = {k.strip().lower(): v for k, v in mapping.stage_aliases.items()}

    for tal in tals:
        if tal.onset_sec < 0:
            if warnings is not None:
                warnings.append(
                    f"dropping annotation with negative onset {tal.onset_sec}: "
                    f"{tal.texts}"
                )
            continue
        duration = tal.duration_sec if tal.duration_sec is not None else 0.0
        for text in tal.texts:
            stripped = text.strip()
            key = stripped.lower()
            stage = None
            if key in alias_table:
                if key in _COLLAPSED_RK_ALIASES and warnings is not None:
                    warnings.append(
                        f"R&K stage label {stripped!r} collapsed to "
                        f"{alias_table[key]!r}"
                    )
                try:
                    stage = parse_sleep_stage(alias_table[key])
                except UnknownSleepStageError:
                    if warnings is not None:
                        warnings.append(
                            f"stage alias {stripped!r} maps to unknown stage "
                            f"{alias_table[key]!r}; treating as free text"
                        )
            else:
                try:
                    stage = parse_sleep_stage(stripped)
                except UnknownSleepStageError:
                    stage = None
            if stage is not None:
                stage_annotations.append(Annotation(
                    name=stage.value, start_sec=tal.onset_sec, duration_sec=duration))
                continue
            routed = False
            for rule in mapping.event_sets:
                if re.search(rule.pattern, stripped, flags=re.IGNORECASE):
                    event_annotations.setdefault(rule.set_name, []).append(Annotation(
                        name=stripped, start_sec=tal.onset_sec, duration_sec=duration))
                    routed = True
                    break
            if not routed:
                free_annotations.append(Annotation(
                    name=stripped, start_sec=tal.onset_sec, duration_sec=duration))

    sets: list[AnnotationSet] = []
    if stage_annotations:
        sets.append(AnnotationSet(name=mapping.stage_set_name,
                                  name_type="aasm_sleep_stage",
                                  annotations=stage_annotations))
    for rule in mapping.event_sets:
        if rule.set_name in event_annotations:
            sets.append(AnnotationSet(name=rule.set_name, name_type="free_text",
                                      annotations=event_annotations[rule.set_name]))
    if free_annotations:
        sets.append(AnnotationSet(name=FREE_TEXT_SET_NAME, name_type="free_text",
                                  annotations=free_annotations))
    return sets


_SEX_VALUES = {"M", "F"}
_BIRTHDATE_RE = re.compile(r"^(\d{1,2})-([A-Z]{3})-(\d{4})$")
_MONTHS = {m: i + 1 for i, m in enumerate(
    ["JAN", "FEB", "MAR", "APR", "MAY", "JUN",
     "JUL", "AUG", "SEP", "OCT", "NOV", "DEC"])}


def _patient_fields(patient_id: str, recording_start: Optional[datetime]
                    ) -> tuple[Optional[float], Optional[str]]:
    """Best-effort age and sex from an EDF+ local patient identification."""
    parts = patient_id.split()
    if len(parts) < 3:
        return None, None
    sex = parts[1] if parts[1] in _SEX_VALUES else None
    age = None
    m = _BIRTHDATE_RE.match(parts[2].upper())
    if m and recording_start is not None and m.group(2) in _MONTHS:
        try:
            birth = datetime(int(m.group(3)), _MONTHS[m.group(2)], int(m.group(1)))
            age = float((recording_start - birth).days // 365.25)
            if age < 0:
                age = None
        except ValueError:
            age = None
    return age, sex


def convert_edf_to_subject(edf_path, subject_id: Optional[str] = None,
                           mode: ParseMode = ParseMode.LENIENT,
                           mapping: MappingConfig = DEFAULT_MAPPING,
                           warnings: Optional[list] = None) -> Subject:
    """Parse one EDF/EDF+ file into a Subject with lazy float32 arrays.

    Array values are read and calibrated on first access, so building the
    subject touches only the file header and annotation channels.
    """
    edf_path = Path(edf_path)
    if subject_id is None:
        subject_id = edf_path.stem
    edf = EdfFile(edf_path, mode)
    if warnings is not None:
        warnings.extend(edf.warnings)
    if "EDF+D" in edf.header.reserved:
        raise UnsupportedEdfError(
            f"{edf_path.name}: discontinuous (EDF+D) files are not supported"
        )

    sample_arrays: dict[str, SampleArray] = {}
    for i, sig in enumerate(edf.header.signals):
        if sig.is_annotation_channel:
            continue
        if sig.samples_per_record < 1:
            if warnings is not None:
                warnings.append(
                    f"{edf_path.name}: skipping signal {sig.label!r} with "
                    f"samples_per_record {sig.samples_per_record}"
                )
            continue
        name = sanitize_label(sig.label)
        if name in sample_arrays:
            if mode is ParseMode.STRICT:
                raise EdfParseError(
                    f"{edf_path.name}: duplicate array name {name!r} after "
                    f"sanitizing label {sig.label!r}",
                    code="duplicate_label",
                )
            suffix = 2
            while f"{name}_{suffix}" in sample_arrays:
                suffix += 1
            if warnings is not None:
                warnings.append(
                    f"{edf_path.name}: label {sig.label!r} collides with an "
                    f"earlier signal, renamed to {name}_{suffix}"
                )
            name = f"{name}_{suffix}"
        attrs = ArrayAttributes(
            name=name,
            sampling_rate=edf.sampling_rate(i),
            unit=sig.physical_dimension or None,
            value_type="float32",
            n_samples=edf.n_records * sig.samples_per_record,
        )
        sample_arrays[name] = SampleArray(
            attributes=attrs,
            values_func=(lambda idx=i: edf.read_physical(idx)[0]),
        )

    annotations: dict[str, AnnotationSet] = {}
    has_annotation_channel = any(s.is_annotation_channel for s in edf.header.signals)
    if has_annotation_channel:
        tal_warnings: list[str] = []
        tals = parse_tal_records(edf.annotation_bytes(), mode, tal_warnings)
        sets = map_annotations(tals, mapping, tal_warnings)
        if warnings is not None:
            warnings.extend(f"{edf_path.name}: {w}" for w in tal_warnings)
        for aset in sets:
            annotations[aset.name] = aset

    age, sex = _patient_fields(edf.header.patient_id, edf.header.start_datetime)
    metadata = SubjectMetadata(
        subject_id=subject_id,
        recording_start=edf.header.start_datetime,
        age=age,
        sex=sex,
        extra={
            "edf_patient_id": edf.header.patient_id,
            "edf_recording_id": edf.header.recording_id,
        },
    )
    return Subject(metadata=metadata, sample_arrays=sample_arrays,
                   annotations=annotations)


@dataclass
class ConversionReport:
    """Outcome of one :func:`convert_directory` run."""

    dataset_dir: Path
    converted: int = 0
    skipped: list[tuple[str, str]] = dataclass_field(default_factory=list)
    warnings: list[str] = dataclass_field(default_factory=list)
    elapsed_sec: float = 0.0
    total_bytes: int = 0
    workers: int = 1


def convert_directory(src_dir, dataset_name: str, series_name: str, dest_root,
                      codec: ArrayCodecSpec = RAW,
                      mode: ParseMode = ParseMode.LENIENT,
                      *, mapping: MappingConfig = DEFAULT_MAPPING,
                      workers: int = 1, overwrite: bool = False) -> ConversionReport:
    """Convert every ``*.edf`` file under ``src_dir`` into one SLF subject.

    In lenient mode a file that fails to parse or validate is skipped and
    reported; in strict mode the first failure aborts the run (already
    written subjects remain on disk).
    """
    src_dir = Path(src_dir)
    dest_root = Path(dest_root)
    edf_paths = [p for p in sorted(src_dir.iterdir())
                 if p.is_file() and p.suffix.lower() == ".edf"]
    if not edf_paths:
        raise EmptySourceDirectoryError(f"no .edf files found in {src_dir}")

    ds_dir = dest_root / dataset_name
    if ds_dir.exists():
        if not overwrite:
            raise DestinationExistsError(
                f"destination already exists: {ds_dir} (pass overwrite to replace)"
            )
        shutil.rmtree(ds_dir)
    series_dir = ds_dir / series_name
    series_dir.mkdir(parents=True)
    report = ConversionReport(dataset_dir=ds_dir, workers=workers)
    t0 = time.perf_counter()
    report.total_bytes += _write_file(
        ds_dir / "metadata.json",
        _json_bytes({"name": dataset_name, "format_version": "1"}),
    )
    report.total_bytes += _write_file(series_dir / "metadata.json",
                                      _json_bytes({"name": series_name}))

    def _convert_one(path: Path):
        file_warnings: list[str] = []
        subject = convert_edf_to_subject(path, mode=mode, mapping=mapping,
                                         warnings=file_warnings)
        issues = []
        _validate_subject(subject, subject.metadata.subject_id, issues)
        errors = validation_errors(issues)
        if errors:
            raise ValidationFailedError(
                f"{path.name}: converted subject failed validation", issues=errors
            )
        nbytes = write_subject(subject, series_dir, codec)
        return path, file_warnings, nbytes

    def _handle(path: Path):
        try:
            return _convert_one(path)
        except SlfError as exc:
            if mode is ParseMode.STRICT:
                raise
            return path, exc, 0

    if workers > 1 and len(edf_paths) > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(_handle, edf_paths))
    else:
        results = [_handle(p) for p in edf_paths]

    for path, outcome, nbytes in results:
        if isinstance(outcome, SlfError):
            report.skipped.append((path.name, f"[{outcome.code}] {outcome}"))
        else:
            report.converted += 1
            report.warnings.extend(outcome)
            report.total_bytes += nbytes
    report.elapsed_sec = time.perf_counter() - t0
    return report
