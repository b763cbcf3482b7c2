"""Exception hierarchy for the slf package.

Every exception carries a short machine-readable ``code`` so that CLI tools
and tests can match failures without parsing messages. The closed set of
codes is documented on each class (or passed per instance where one class
covers several closely related failures).
"""

from __future__ import annotations


class SlfError(Exception):
    """Base class for all slf failures."""

    code: str = "slf_error"

    def __init__(self, message: str, *, code: str | None = None, path: str | None = None):
        super().__init__(message)
        if code is not None:
            self.code = code
        self.path = path

    def __str__(self) -> str:
        msg = super().__str__()
        if self.path:
            return f"{self.path}: {msg}"
        return msg


class UnknownSleepStageError(SlfError):
    """A string could not be parsed as an AASM sleep stage."""

    code = "unknown_sleep_stage"

    def __init__(self, label: str):
        super().__init__(f"unknown sleep stage label: {label!r}")
        self.label = label


class EmptySubjectError(SlfError):
    """An operation required a subject with at least one sample array."""

    code = "empty_subject"


class ValidationFailedError(SlfError):
    """A dataset failed validation; ``issues`` holds the error-level issues."""

    code = "validation_failed"

    def __init__(self, message: str, issues=None, *, path: str | None = None):
        super().__init__(message, path=path)
        self.issues = list(issues or [])


# --- storage ----------------------------------------------------------------

class StoreError(SlfError):
    """Base class for on-disk layout and I/O failures."""

    code = "store_error"


class NotSlfDatasetError(StoreError):
    code = "not_slf_dataset"


class DestinationExistsError(StoreError):
    code = "destination_exists"


class StoreReadError(StoreError):
    """One or more files failed to parse. ``failures`` is a list of
    (file path, code, message) tuples aggregated across the read."""

    code = "read_failed"

    def __init__(self, message: str, failures=None, *, path: str | None = None):
        super().__init__(message, path=path)
        self.failures = list(failures or [])

    def __str__(self) -> str:
        base = super().__str__()
        if self.failures:
            lines = [f"  {f}: [{c}] {m}" for f, c, m in self.failures]
            return base + "\n" + "\n".join(lines)
        return base


class WindowOutOfRangeError(StoreError):
    code = "window_out_of_range"


# --- array codecs -----------------------------------------------------------

class CodecError(SlfError):
    """Raised for malformed array payloads.

    Codes used: bad_magic, bad_header, unsupported_dtype, unsupported_shape,
    truncated_payload, unrepresentable_value, bad_zarray, bad_chunk_len,
    zstd_level_out_of_range, corrupt_chunk, missing_chunk.
    """

    code = "codec_error"


class ZstdUnavailableError(SlfError):
    """The system Zstandard library could not be loaded."""

    code = "zstd_unavailable"


# --- EDF ingestion ----------------------------------------------------------

class EdfError(SlfError):
    """Base class for EDF parsing and conversion failures.

    Codes used by ``EdfParseError`` instances: truncated_header,
    malformed_numeric_field, inconsistent_header_bytes, bad_start_datetime,
    nonpositive_record_duration, bad_samples_per_record, bad_signal_index,
    annotation_channel, zero_digital_range, truncated_record, malformed_tal,
    duplicate_label.
    """

    code = "edf_error"


class EdfParseError(EdfError):
    code = "edf_parse_error"


class UnsupportedEdfError(EdfError):
    """EDF+D (discontinuous recordings) and other unsupported variants."""

    code = "unsupported_discontinuous"


class EmptySourceDirectoryError(EdfError):
    code = "empty_source_directory"


# --- extraction -------------------------------------------------------------

class ExtractError(SlfError):
    code = "extract_error"


class NonIntegerFactorError(ExtractError):
    code = "non_integer_factor"
