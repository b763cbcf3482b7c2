"""Benchmark harness: size, write time, and read time per codec scenario.

Methodology: for each scenario the dataset is written from memory (or
converted from EDF sources) while wall time is measured; on-disk size comes
from a directory walk; read time covers reading every sample array back and
computing its mean (the means are kept in the report so the reads cannot be
optimized away). Read speed is size/time for uncompressed rows and
compressed-bytes-read/time for compressed rows.

Wall times include OS page-cache effects. ``cold=True`` copies the dataset
to a fresh directory before the read phase, which defeats warm file caches
where possible without requiring privileges; the CLI prints this caveat.
"""

from __future__ import annotations

import csv
import io
import shutil
import time
from dataclasses import dataclass, field as dataclass_field
from pathlib import Path
from typing import Optional

import numpy as np

from .codecs import ArrayCodecSpec
from .convert import convert_directory
from .edf import EdfFile, ParseMode
from .errors import SlfError
from .models import Dataset
from .store import IoStats, ReadOptions, directory_size, read_dataset, write_dataset
from .synth import SynthSpec, generate_synthetic_dataset

CSV_HEADER = "format,data_type,compression,size_bytes,conversion_time_s,read_time_s,read_speed_bps"


@dataclass(frozen=True)
class BenchConfigRow:
    """One benchmark scenario: a label and an array codec."""

    label: str
    codec: ArrayCodecSpec
    compression: str


DEFAULT_ROWS = [
    BenchConfigRow("slf-raw", ArrayCodecSpec(kind="raw"), "-"),
    BenchConfigRow("slf-zstd9", ArrayCodecSpec(kind="chunked_zstd", zstd_level=9),
                   "zstd-9"),
    BenchConfigRow("slf-zstd22", ArrayCodecSpec(kind="chunked_zstd", zstd_level=22),
                   "zstd-22"),
]


@dataclass
class BenchRow:
    """One measured scenario, one line of the report."""

    format: str
    data_type: str
    compression: str
    size_bytes: int
    conversion_time_s: Optional[float]
    read_time_s: float
    read_speed_bps: float
    means: dict[str, float] = dataclass_field(default_factory=dict)


@dataclass
class BenchReport:
    rows: list[BenchRow]
    workers: int = 1
    cold: bool = False

    def to_csv(self) -> str:
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(CSV_HEADER.split(","))
        for row in self.rows:
            conv = "" if row.conversion_time_s is None else f"{row.conversion_time_s:.6f}"
            writer.writerow([
                row.format, row.data_type, row.compression, row.size_bytes,
                conv, f"{row.read_time_s:.6f}", f"{row.read_speed_bps:.1f}",
            ])
        return buf.getvalue()

    def to_table(self) -> str:
        headers = ["Format", "Data type", "Compression", "Size (MB)",
                   "Conversion time (s)", "Read time (s) (speed (MB/s))"]
        lines = []
        for row in self.rows:
            conv = "-" if row.conversion_time_s is None else f"{row.conversion_time_s:.2f}"
            speed_mb = row.read_speed_bps / 1e6
            lines.append([
                row.format, row.data_type, row.compression,
                f"{row.size_bytes / 1e6:.2f}", conv,
                f"{row.read_time_s:.2f} ({speed_mb:.1f})",
            ])
        widths = [max(len(h), *(len(line[i]) for line in lines)) if lines else len(h)
                  for i, h in enumerate(headers)]
        fmt = "  ".join(f"{{:<{w}}}" for w in widths)
        out = [fmt.format(*headers), fmt.format(*("-" * w for w in widths))]
        out.extend(fmt.format(*line) for line in lines)
        return "\n".join(out)


def _read_phase(ds_dir: Path, cold: bool, work_dir: Path, label: str
                ) -> tuple[float, int, dict[str, float]]:
    """Read every array, compute means; returns (seconds, bytes_read, means)."""
    target = ds_dir
    cold_copy = None
    if cold:
        cold_copy = work_dir / f"cold-{label}"
        if cold_copy.exists():
            shutil.rmtree(cold_copy)
        shutil.copytree(ds_dir, cold_copy)
        target = cold_copy
    stats = IoStats()
    means: dict[str, float] = {}
    t0 = time.perf_counter()
    dataset = read_dataset(target, ReadOptions(lazy_arrays=True), stats=stats)
    for sname, series in dataset.series.items():
        for sid, subject in series.subjects.items():
            for aname, sa in subject.sample_arrays.items():
                values = sa.values
                means[f"{sname}/{sid}/{aname}"] = \
                    float(np.mean(values)) if values.size else 0.0
    elapsed = time.perf_counter() - t0
    if cold_copy is not None:
        shutil.rmtree(cold_copy, ignore_errors=True)
    return elapsed, stats.bytes_read, means


def _dataset_data_type(dataset: Dataset) -> str:
    types = {sa.attributes.value_type
             for series in dataset.series.values()
             for subject in series.subjects.values()
             for sa in subject.sample_arrays.values()}
    if not types:
        return "-"
    return types.pop() if len(types) == 1 else "mixed"


def run_synth_bench(spec: SynthSpec, work_dir, rows: list[BenchConfigRow] = None,
                    *, cold: bool = False, workers: int = 1) -> BenchReport:
    """Generate one synthetic dataset and benchmark it under each scenario."""
    rows = DEFAULT_ROWS if rows is None else rows
    work_dir = Path(work_dir)
    work_dir.mkdir(parents=True, exist_ok=True)
    dataset = generate_synthetic_dataset(spec)
    data_type = _dataset_data_type(dataset)
    report = BenchReport(rows=[], workers=workers, cold=cold)
    for cfg in rows:
        scenario_root = work_dir / cfg.label
        t0 = time.perf_counter()
        write_report = write_dataset(dataset, scenario_root, cfg.codec,
                                     overwrite=True, workers=workers)
        conversion_time = time.perf_counter() - t0
        ds_dir = write_report.dataset_dir
        size = directory_size(ds_dir)
        read_time, bytes_read, means = _read_phase(ds_dir, cold, work_dir, cfg.label)
        numerator = size if cfg.codec.kind == "raw" else bytes_read
        speed = numerator / read_time if read_time > 0 else 0.0
        report.rows.append(BenchRow(
            format=cfg.label, data_type=data_type, compression=cfg.compression,
            size_bytes=size, conversion_time_s=conversion_time,
            read_time_s=read_time, read_speed_bps=speed, means=means,
        ))
    return report


def _edf_read_phase(edf_paths: list[Path]) -> tuple[float, dict[str, float]]:
    means: dict[str, float] = {}
    t0 = time.perf_counter()
    for path in edf_paths:
        edf = EdfFile(path, ParseMode.LENIENT)
        for i, sig in enumerate(edf.header.signals):
            if sig.is_annotation_channel:
                continue
            values, _rate = edf.read_physical(i)
            means[f"{path.stem}/{i}"] = float(np.mean(values)) if values.size else 0.0
    return time.perf_counter() - t0, means


def run_edf_bench(src_dir, work_dir, rows: list[BenchConfigRow] = None,
                  *, mode: ParseMode = ParseMode.LENIENT,
                  cold: bool = False, workers: int = 1) -> BenchReport:
    """Benchmark an EDF source directory: one source row plus SLF scenarios.

    The ``edf`` row has no conversion time; its read phase parses every file
    and computes every signal's mean directly from the source format.
    """
    rows = DEFAULT_ROWS if rows is None else rows
    src_dir = Path(src_dir)
    work_dir = Path(work_dir)
    work_dir.mkdir(parents=True, exist_ok=True)
    edf_paths = [p for p in sorted(src_dir.iterdir())
                 if p.is_file() and p.suffix.lower() == ".edf"]
    if not edf_paths:
        raise SlfError(f"no .edf files found in {src_dir}", code="empty_source_directory")
    report = BenchReport(rows=[], workers=workers, cold=cold)
    edf_size = sum(p.stat().st_size for p in edf_paths)
    read_time, means = _edf_read_phase(edf_paths)
    report.rows.append(BenchRow(
        format="edf", data_type="int16", compression="-", size_bytes=edf_size,
        conversion_time_s=None, read_time_s=read_time,
        read_speed_bps=edf_size / read_time if read_time > 0 else 0.0,
        means=means,
    ))
    for cfg in rows:
        scenario_root = work_dir / cfg.label
        conv = convert_directory(src_dir, "bench", "all", scenario_root,
                                 cfg.codec, mode, workers=workers, overwrite=True)
        ds_dir = conv.dataset_dir
        size = directory_size(ds_dir)
        read_time, bytes_read, slf_means = _read_phase(ds_dir, cold, work_dir, cfg.label)
        numerator = size if cfg.codec.kind == "raw" else bytes_read
        speed = numerator / read_time if read_time > 0 else 0.0
        report.rows.append(BenchRow(
            format=cfg.label, data_type="float32", compression=cfg.compression,
            size_bytes=size, conversion_time_s=conv.elapsed_sec,
            read_time_s=read_time, read_speed_bps=speed, means=slf_means,
        ))
    return report
