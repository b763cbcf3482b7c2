"""EDF/EDF+ parsing.

EDF files carry a 256-byte fixed ASCII header (8 fields), one 256-byte
header block per signal (10 fixed-width fields stored field-major), and then
data records of interleaved little-endian 16-bit samples. EDF+ adds
"EDF Annotations" channels whose samples carry Time-stamped Annotation Lists
(TALs): an onset, an optional duration after 0x15, and 0x14-separated texts,
each TAL terminated by 0x14 0x00.

Real-world EDF exports are frequently out of spec, so every entry point
takes a :class:`ParseMode`: ``strict`` rejects malformed fields,
``lenient`` substitutes documented defaults and records a warning. EDF+D
(discontinuous) files are rejected in both modes.
"""

from __future__ import annotations

import re
from datetime import datetime
from enum import Enum
from pathlib import Path
from typing import Optional

import numpy as np
from pydantic import BaseModel, ConfigDict

from . import kernels
from .errors import EdfParseError

ANNOTATIONS_LABEL = "EDF Annotations"

_FIXED_HEADER_LEN = 256
_PER_SIGNAL_LEN = 256
# (name, width) of the fixed header fields, in file order.
_FIXED_FIELDS = [
    ("version", 8),
    ("patient_id", 80),
    ("recording_id", 80),
    ("startdate", 8),
    ("starttime", 8),
    ("header_bytes", 8),
    ("reserved", 44),
    ("n_records", 8),
    ("record_duration", 8),
    ("n_signals", 4),
]
# (name, width per signal) of the per-signal fields, each stored for all
# signals before the next field starts.
_SIGNAL_FIELDS = [
    ("label", 16),
    ("transducer", 80),
    ("physical_dimension", 8),
    ("physical_min", 8),
    ("physical_max", 8),
    ("digital_min", 8),
    ("digital_max", 8),
    ("prefiltering", 80),
    ("samples_per_record", 8),
    ("reserved", 32),
]


class ParseMode(str, Enum):
    STRICT = "strict"
    LENIENT = "lenient"


class EdfSignalHeader(BaseModel):
    model_config = ConfigDict(frozen=True)

    label: str
    transducer: str = ""
    physical_dimension: str = ""
    physical_min: float
    physical_max: float
    digital_min: int
    digital_max: int
    prefiltering: str = ""
    samples_per_record: int

    @property
    def is_annotation_channel(self) -> bool:
        return self.label == ANNOTATIONS_LABEL


class EdfHeader(BaseModel):
    model_config = ConfigDict(frozen=True)

    version: str
    patient_id: str
    recording_id: str
    start_datetime: Optional[datetime]
    header_bytes: int
    reserved: str
    n_records: int
    record_duration_sec: float
    n_signals: int
    signals: list[EdfSignalHeader]


class TalAnnotation(BaseModel):
    """One decoded TAL: onset, optional duration, and its non-empty texts."""

    model_config = ConfigDict(frozen=True)

    onset_sec: float
    duration_sec: Optional[float] = None
    texts: list[str]


def _warn(warnings: Optional[list], message: str) -> None:
    if warnings is not None:
        warnings.append(message)


def _field_str(raw: bytes) -> str:
    return raw.decode("latin-1").strip()


def _parse_int(text: str, field: str, mode: ParseMode, default: int,
               warnings: Optional[list]) -> int:
    try:
        return int(text)
    except ValueError:
        if mode is ParseMode.STRICT:
            raise EdfParseError(f"non-numeric {field} field: {text!r}",
                                code="malformed_numeric_field") from None
        _warn(warnings, f"{field}: non-numeric value {text!r}, using {default}")
        return default


def _parse_float(text: str, field: str, mode: ParseMode, default: float,
                 warnings: Optional[list]) -> float:
    try:
        return float(text)
    except ValueError:
        if mode is ParseMode.STRICT:
            raise EdfParseError(f"non-numeric {field} field: {text!r}",
                                code="malformed_numeric_field") from None
        _warn(warnings, f"{field}: non-numeric value {text!r}, using {default}")
        return default


def _parse_start_datetime(date_str: str, time_str: str, mode: ParseMode,
                          warnings: Optional[list]) -> Optional[datetime]:
    # "dd.mm.yy" with the EDF+ century rule: yy >= 85 -> 19yy, else 20yy.
    # Lenient mode also accepts ':' or '-' separators seen in the wild.
    pattern = r"^(\d{1,2})\.(\d{1,2})\.(\d{1,2})$"
    if mode is ParseMode.LENIENT:
        pattern = r"^(\d{1,2})[.:\-](\d{1,2})[.:\-](\d{1,2})$"
    dm = re.match(pattern, date_str)
    tm = re.match(pattern, time_str)
    if not dm or not tm:
        if mode is ParseMode.STRICT:
            raise EdfParseError(
                f"malformed start date/time: {date_str!r} {time_str!r}",
                code="bad_start_datetime",
            )
        _warn(warnings, f"unparseable start date/time {date_str!r} {time_str!r}")
        return None
    day, month, yy = (int(g) for g in dm.groups())
    hour, minute, second = (int(g) for g in tm.groups())
    year = 1900 + yy if yy >= 85 else 2000 + yy
    try:
        return datetime(year, month, day, hour, minute, second)
    except ValueError as exc:
        if mode is ParseMode.STRICT:
            raise EdfParseError(f"invalid start date/time: {exc}",
                                code="bad_start_datetime") from None
        _warn(warnings, f"invalid start date/time ({exc})")
        return None


def parse_edf_header(data: bytes, mode: ParseMode = ParseMode.STRICT,
                     warnings: Optional[list] = None) -> EdfHeader:
    """Parse the fixed and per-signal header blocks from ``data``.

    ``data`` must hold at least the first 256 bytes plus 256 bytes per
    signal. Lenient-mode substitutions are appended to ``warnings``.
    """
    if len(data) < _FIXED_HEADER_LEN:
        raise EdfParseError(
            f"file too short for an EDF header ({len(data)} bytes)",
            code="truncated_header",
        )
    fields = {}
    pos = 0
    for name, width in _FIXED_FIELDS:
        fields[name] = _field_str(data[pos:pos + width])
        pos += width

    n_signals = _parse_int(fields["n_signals"], "n_signals", ParseMode.STRICT, 0, None)
    if n_signals < 1:
        raise EdfParseError(f"n_signals must be >= 1, got {n_signals}",
                            code="malformed_numeric_field")
    expected_header = _FIXED_HEADER_LEN + _PER_SIGNAL_LEN * n_signals
    if len(data) < expected_header:
        raise EdfParseError(
            f"header needs {expected_header} bytes for {n_signals} signals, "
            f"got {len(data)}",
            code="truncated_header",
        )

    header_bytes = _parse_int(fields["header_bytes"], "header_bytes", mode,
                              expected_header, warnings)
    if header_bytes != expected_header:
        if mode is ParseMode.STRICT:
            raise EdfParseError(
                f"header_bytes field says {header_bytes}, but 256 + 256 x "
                f"{n_signals} signals = {expected_header}",
                code="inconsistent_header_bytes",
            )
        _warn(warnings, f"header_bytes {header_bytes} inconsistent, "
                        f"using {expected_header}")
        header_bytes = expected_header

    n_records = _parse_int(fields["n_records"], "n_records", mode, -1, warnings)
    if n_records < -1:
        if mode is ParseMode.STRICT:
            raise EdfParseError(f"n_records must be >= 0 or -1, got {n_records}",
                                code="malformed_numeric_field")
        _warn(warnings, f"n_records {n_records} invalid, treating as unknown")
        n_records = -1

    record_duration = _parse_float(fields["record_duration"], "record_duration",
                                   mode, 1.0, warnings)

    # Per-signal fields are stored field-major: all labels, then all
    # transducers, and so on.
    raw_signals = [{} for _ in range(n_signals)]
    pos = _FIXED_HEADER_LEN
    for name, width in _SIGNAL_FIELDS:
        for i in range(n_signals):
            raw_signals[i][name] = _field_str(data[pos:pos + width])
            pos += width

    signals = []
    for i, raw in enumerate(raw_signals):
        label = raw["label"]
        sig = EdfSignalHeader(
            label=label,
            transducer=raw["transducer"],
            physical_dimension=raw["physical_dimension"],
            physical_min=_parse_float(raw["physical_min"], f"signal {i} physical_min",
                                      mode, 0.0, warnings),
            physical_max=_parse_float(raw["physical_max"], f"signal {i} physical_max",
                                      mode, 1.0, warnings),
            digital_min=_parse_int(raw["digital_min"], f"signal {i} digital_min",
                                   mode, -32768, warnings),
            digital_max=_parse_int(raw["digital_max"], f"signal {i} digital_max",
                                   mode, 32767, warnings),
            prefiltering=raw["prefiltering"],
            samples_per_record=_parse_int(raw["samples_per_record"],
                                          f"signal {i} samples_per_record",
                                          mode, 0, warnings),
        )
        if sig.samples_per_record < 1:
            if mode is ParseMode.STRICT:
                raise EdfParseError(
                    f"signal {i} ({label!r}): samples_per_record must be >= 1, "
                    f"got {sig.samples_per_record}",
                    code="bad_samples_per_record",
                )
            _warn(warnings, f"signal {i} ({label!r}): samples_per_record "
                            f"{sig.samples_per_record} < 1")
        if not sig.is_annotation_channel and sig.digital_min == sig.digital_max:
            if mode is ParseMode.STRICT:
                raise EdfParseError(
                    f"signal {i} ({label!r}): digital_min == digital_max "
                    f"({sig.digital_min})",
                    code="zero_digital_range",
                )
            _warn(warnings, f"signal {i} ({label!r}): zero digital range")
        signals.append(sig)

    annotation_only = all(s.is_annotation_channel for s in signals)
    if record_duration <= 0 and not annotation_only:
        if mode is ParseMode.STRICT:
            raise EdfParseError(
                f"record duration must be > 0, got {record_duration}",
                code="nonpositive_record_duration",
            )
        _warn(warnings, f"record duration {record_duration} <= 0, using 1.0")
        record_duration = 1.0

    start_datetime = _parse_start_datetime(fields["startdate"], fields["starttime"],
                                           mode, warnings)
    return EdfHeader(
        version=fields["version"],
        patient_id=fields["patient_id"],
        recording_id=fields["recording_id"],
        start_datetime=start_datetime,
        header_bytes=header_bytes,
        reserved=fields["reserved"],
        n_records=n_records,
        record_duration_sec=record_duration,
        n_signals=n_signals,
        signals=signals,
    )


def digital_to_physical(d: int, sh: EdfSignalHeader,
                        mode: ParseMode = ParseMode.STRICT,
                        warnings: Optional[list] = None) -> float:
    """Affine calibration of one digital sample.

    physical = (d - digital_min) * (physical_max - physical_min)
               / (digital_max - digital_min) + physical_min

    With a zero digital range, strict mode raises; lenient mode uses gain 1
    and offset physical_min.
    """
    if sh.digital_max == sh.digital_min:
        if mode is ParseMode.STRICT:
            raise EdfParseError(
                f"signal {sh.label!r}: digital_min == digital_max",
                code="zero_digital_range",
            )
        _warn(warnings, f"signal {sh.label!r}: zero digital range, "
                        f"using gain 1 and offset physical_min")
        return float(d) + sh.physical_min
    return ((d - sh.digital_min) * (sh.physical_max - sh.physical_min)
            / (sh.digital_max - sh.digital_min) + sh.physical_min)


class EdfFile:
    """A parsed EDF/EDF+ file.

    The header is parsed once at construction; sample reads open the file on
    demand, so one instance may serve reads from multiple threads.
    """

    def __init__(self, path, mode: ParseMode = ParseMode.LENIENT):
        self.path = Path(path)
        self.mode = mode
        self.warnings: list[str] = []
        file_size = self.path.stat().st_size
        with open(self.path, "rb") as f:
            head = f.read(_FIXED_HEADER_LEN)
            if len(head) >= _FIXED_HEADER_LEN:
                try:
                    ns = int(head[252:256].decode("latin-1").strip())
                except ValueError:
                    ns = 0
                head += f.read(max(ns, 0) * _PER_SIGNAL_LEN)
        self.header = parse_edf_header(head, mode, self.warnings)

        self.record_len_samples = sum(s.samples_per_record for s in self.header.signals)
        record_bytes = self.record_len_samples * 2
        data_bytes = file_size - self.header.header_bytes
        if record_bytes <= 0:
            self.n_records = 0
            return
        available = data_bytes // record_bytes
        if data_bytes % record_bytes != 0:
            if mode is ParseMode.STRICT:
                raise EdfParseError(
                    f"{self.path.name}: {data_bytes % record_bytes} trailing bytes "
                    f"form a partial data record",
                    code="truncated_record",
                )
            self.warnings.append(
                f"{self.path.name}: dropping trailing partial data record"
            )
        declared = self.header.n_records
        if declared == -1:
            self.n_records = available
        elif declared > available:
            if mode is ParseMode.STRICT:
                raise EdfParseError(
                    f"{self.path.name}: header declares {declared} records but only "
                    f"{available} are present",
                    code="truncated_record",
                )
            self.warnings.append(
                f"{self.path.name}: header declares {declared} records, "
                f"only {available} present"
            )
            self.n_records = available
        else:
            if declared < available:
                self.warnings.append(
                    f"{self.path.name}: ignoring {available - declared} extra "
                    f"records after the declared {declared}"
                )
            self.n_records = declared

    def _signal_slice(self, signal_index: int) -> tuple[int, int]:
        if not 0 <= signal_index < self.header.n_signals:
            raise EdfParseError(
                f"signal index {signal_index} out of range "
                f"[0, {self.header.n_signals})",
                code="bad_signal_index",
            )
        start = sum(s.samples_per_record
                    for s in self.header.signals[:signal_index])
        return start, start + self.header.signals[signal_index].samples_per_record

    def read_digital(self, signal_index: int) -> np.ndarray:
        """All digital samples of one signal, concatenated across records."""
        lo, hi = self._signal_slice(signal_index)
        if self.n_records == 0 or hi == lo:
            return np.empty(0, dtype="<i2")
        mm = np.memmap(self.path, dtype="<i2", mode="r",
                       offset=self.header.header_bytes,
                       shape=(self.n_records, self.record_len_samples))
        try:
            return np.ascontiguousarray(mm[:, lo:hi]).reshape(-1)
        finally:
            del mm

    def read_physical(self, signal_index: int) -> tuple[np.ndarray, float]:
        """Calibrated float32 samples and the sampling rate of one signal."""
        sh = self.header.signals[self._check_data_signal(signal_index)]
        digital = self.read_digital(signal_index)
        if sh.digital_max == sh.digital_min:
            if self.mode is ParseMode.STRICT:
                raise EdfParseError(
                    f"signal {sh.label!r}: digital_min == digital_max",
                    code="zero_digital_range",
                )
            values = (digital.astype(np.float64) + sh.physical_min).astype(np.float32)
        else:
            values = kernels.calibrate(digital, float(sh.digital_min),
                                       float(sh.digital_max),
                                       float(sh.physical_min), float(sh.physical_max))
        rate = sh.samples_per_record / self.header.record_duration_sec
        return values, rate

    def _check_data_signal(self, signal_index: int) -> int:
        self._signal_slice(signal_index)
        if self.header.signals[signal_index].is_annotation_channel:
            raise EdfParseError(
                f"signal {signal_index} is an annotation channel",
                code="annotation_channel",
            )
        return signal_index

    def annotation_bytes(self) -> bytes:
        """Raw TAL bytes of all annotation channels, concatenated across records."""
        chunks = []
        for i, sig in enumerate(self.header.signals):
            if not sig.is_annotation_channel:
                continue
            lo, hi = self._signal_slice(i)
            if self.n_records == 0:
                continue
            mm = np.memmap(self.path, dtype="<i2", mode="r",
                           offset=self.header.header_bytes,
                           shape=(self.n_records, self.record_len_samples))
            try:
                chunks.append(np.ascontiguousarray(mm[:, lo:hi]).tobytes())
            finally:
                del mm
        return b"".join(chunks)

    def sampling_rate(self, signal_index: int) -> float:
        sh = self.header.signals[signal_index]
        return sh.samples_per_record / self.header.record_duration_sec


def read_signal_physical(edf: EdfFile, signal_index: int) -> tuple[np.ndarray, float]:
    """Calibrated float32 values and sampling rate for one data signal."""
    return edf.read_physical(signal_index)


_ONSET_RE = re.compile(rb"^[+-]\d+(\.\d+)?$")
_DURATION_RE = re.compile(rb"^\d+(\.\d+)?$")


def parse_tal_records(data: bytes, mode: ParseMode = ParseMode.STRICT,
                      warnings: Optional[list] = None) -> list[TalAnnotation]:
    """Decode a stream of TALs taken from "EDF Annotations" samples.

    Time-keeping TALs (no non-empty text) are dropped. In strict mode a
    malformed TAL raises; in lenient mode it is skipped with a warning.
    """
    out: list[TalAnnotation] = []
    pos = 0
    size = len(data)
    while pos < size:
        if data[pos] == 0:
            pos += 1
            continue
        end = data.find(b"\x00", pos)
        if end == -1:
            if mode is ParseMode.STRICT:
                raise EdfParseError("unterminated TAL at end of stream",
                                    code="malformed_tal")
            _warn(warnings, "dropping unterminated TAL at end of stream")
            break
        piece = data[pos:end]
        pos = end + 1
        try:
            tal = _parse_tal_piece(piece)
        except EdfParseError as exc:
            if mode is ParseMode.STRICT:
                raise
            _warn(warnings, f"skipping malformed TAL: {exc}")
            continue
        except UnicodeDecodeError as exc:
            if mode is ParseMode.STRICT:
                raise EdfParseError(f"TAL text is not valid UTF-8: {exc}",
                                    code="malformed_tal") from None
            _warn(warnings, "TAL text is not valid UTF-8, replacing bad bytes")
            tal = _parse_tal_piece(piece, errors="replace")
        if tal is not None:
            out.append(tal)
    return out


def _parse_tal_piece(piece: bytes, errors: str = "strict") -> Optional[TalAnnotation]:
    if not piece.endswith(b"\x14"):
        raise EdfParseError(f"TAL does not end with 0x14: {piece!r}",
                            code="malformed_tal")
    parts = piece.split(b"\x14")
    head = parts[0]
    texts_raw = parts[1:-1]
    time_parts = head.split(b"\x15")
    if len(time_parts) > 2:
        raise EdfParseError(f"TAL has multiple 0x15 separators: {piece!r}",
                            code="malformed_tal")
    onset_raw = time_parts[0]
    if not _ONSET_RE.match(onset_raw):
        raise EdfParseError(f"bad TAL onset: {onset_raw!r}", code="malformed_tal")
    onset = float(onset_raw)
    duration = None
    if len(time_parts) == 2:
        if not _DURATION_RE.match(time_parts[1]):
            raise EdfParseError(f"bad TAL duration: {time_parts[1]!r}",
                                code="malformed_tal")
        duration = float(time_parts[1])
    texts = [t.decode("utf-8", errors=errors) for t in texts_raw]
    texts = [t for t in texts if t]
    if not texts:
        return None
    return TalAnnotation(onset_sec=onset, duration_sec=duration, texts=texts)
