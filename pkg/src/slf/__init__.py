"""slf: validated hierarchical storage for polysomnography recordings.

The Sleeplab format maps a Dataset -> Series -> Subject hierarchy onto the
file system, keeps all metadata as human-readable JSON, and stores signals
as raw NPY files or chunked Zstandard-compressed arrays with lazy windowed
reads. This package also ships an EDF/EDF+ converter, a subset extractor
with anti-aliased downsampling, and a benchmark harness.
"""

from .codecs import ArrayCodecSpec
from .errors import SlfError
from .models import (
    Annotation,
    AnnotationSet,
    ArrayAttributes,
    Dataset,
    SampleArray,
    Series,
    SleepStageLabel,
    Subject,
    SubjectMetadata,
    ValidationIssue,
    parse_sleep_stage,
    recording_span,
    validate_dataset,
)
from .store import (
    IoStats,
    ReadOptions,
    StoredArrayRef,
    list_dataset,
    open_array,
    read_dataset,
    read_window,
    write_dataset,
)

__version__ = "0.1.0"

__all__ = [
    "Annotation",
    "AnnotationSet",
    "ArrayAttributes",
    "ArrayCodecSpec",
    "Dataset",
    "IoStats",
    "ReadOptions",
    "SampleArray",
    "Series",
    "SleepStageLabel",
    "SlfError",
    "StoredArrayRef",
    "Subject",
    "SubjectMetadata",
    "ValidationIssue",
    "__version__",
    "list_dataset",
    "open_array",
    "parse_sleep_stage",
    "read_dataset",
    "read_window",
    "recording_span",
    "validate_dataset",
    "write_dataset",
]
