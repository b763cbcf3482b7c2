"""Command-line interface: validate, info, convert, extract, bench.

Exit codes: 0 success, 1 domain failure (invalid data, failed conversion,
bad configuration), 2 environment failure (missing paths, I/O errors, bad
usage). Human-readable results go to stdout, diagnostics to stderr;
``--json`` switches stdout to machine-readable reports.
"""

from __future__ import annotations

import argparse
import json
import sys
from dataclasses import asdict
from pathlib import Path

from . import bench as bench_mod
from . import zstd
from .codecs import ArrayCodecSpec
from .convert import DEFAULT_MAPPING, convert_directory, load_mapping
from .edf import ParseMode
from .errors import NotSlfDatasetError, SlfError
from .extract import extract, load_extract_config
from .store import IoStats, deep_validate, list_dataset
from .synth import ChannelSpec, SynthSpec


def _zstd_level(text: str) -> int:
    try:
        level = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not an integer: {text!r}") from None
    if not zstd.MIN_LEVEL <= level <= zstd.MAX_LEVEL:
        raise argparse.ArgumentTypeError(
            f"zstd level must be in [{zstd.MIN_LEVEL}, {zstd.MAX_LEVEL}], got {level}"
        )
    return level


def _channel(text: str) -> ChannelSpec:
    parts = text.split(":")
    if len(parts) != 3:
        raise argparse.ArgumentTypeError(
            f"expected name:rate:kind, got {text!r}"
        )
    name, rate, kind = parts
    try:
        return ChannelSpec(name=name, sampling_rate=float(rate), kind=kind)
    except ValueError as exc:
        raise argparse.ArgumentTypeError(str(exc)) from None


def _codec_from_args(args) -> ArrayCodecSpec:
    if args.codec == "raw":
        return ArrayCodecSpec(kind="raw")
    return ArrayCodecSpec(kind="chunked_zstd", zstd_level=args.level,
                          chunk_len=args.chunk_len)


def _emit(args, payload: dict, human: str) -> None:
    if args.json:
        print(json.dumps(payload, indent=2, default=str))
    elif human:
        print(human)


def _info_text(summary: dict) -> str:
    lines = [f"dataset {summary['name']} (format version {summary['format_version']})"]
    n_subjects = sum(len(s["subjects"]) for s in summary["series"])
    lines.append(f"series: {len(summary['series'])}  subjects: {n_subjects}")
    for series in summary["series"]:
        lines.append(f"{series['name']}/")
        for subject in series["subjects"]:
            lines.append(f"  {subject['subject_id']}/")
            for arr in subject["arrays"]:
                rate = arr["sampling_rate"]
                n = arr["n_samples"]
                duration = n / rate if rate else float("nan")
                lines.append(
                    f"    {arr['name']}  {rate:g} Hz  {arr['value_type']}  "
                    f"{n} samples  {duration:.1f} s"
                )
            if subject["annotation_sets"]:
                lines.append("    annotations: " + ", ".join(subject["annotation_sets"]))
    return "\n".join(lines)


def cmd_validate(args) -> int:
    issues, _dataset = deep_validate(Path(args.path))
    errors = [i for i in issues if i.severity == "error"]
    warnings = [i for i in issues if i.severity == "warning"]
    if args.json:
        print(json.dumps({
            "command": "validate",
            "path": str(args.path),
            "errors": len(errors),
            "warnings": len(warnings),
            "issues": [i.model_dump() for i in issues],
        }, indent=2))
    else:
        for issue in issues:
            print(issue)
        if not args.quiet:
            print(f"{len(errors)} error(s), {len(warnings)} warning(s)",
                  file=sys.stderr)
    return 1 if errors else 0


def cmd_info(args) -> int:
    stats = IoStats()
    summary = list_dataset(Path(args.path), stats)
    payload = {"command": "info", "summary": summary,
               "bytes_read": stats.bytes_read, "files_opened": stats.files_opened}
    _emit(args, payload, _info_text(summary))
    return 0


def cmd_convert(args) -> int:
    mapping = load_mapping(args.mapping) if args.mapping else DEFAULT_MAPPING
    report = convert_directory(
        Path(args.src), args.dataset_name, args.series_name, Path(args.dest),
        _codec_from_args(args), ParseMode(args.mode),
        mapping=mapping, workers=args.workers, overwrite=args.overwrite,
    )
    payload = {"command": "convert", "report": {
        "dataset_dir": str(report.dataset_dir),
        "converted": report.converted,
        "skipped": report.skipped,
        "warnings": report.warnings,
        "elapsed_sec": report.elapsed_sec,
        "total_bytes": report.total_bytes,
        "workers": report.workers,
    }}
    lines = [f"converted {report.converted} file(s) to {report.dataset_dir}",
             f"conversion time: {report.elapsed_sec:.2f} s"]
    if report.skipped:
        lines.append(f"skipped {len(report.skipped)} file(s):")
        lines.extend(f"  {name}: {reason}" for name, reason in report.skipped)
    _emit(args, payload, "\n".join(lines))
    if report.warnings and not args.quiet:
        for w in report.warnings:
            print(f"warning: {w}", file=sys.stderr)
    return 0


def cmd_extract(args) -> int:
    config = load_extract_config(args.config)
    report = extract(Path(args.src), config, Path(args.dest),
                     overwrite=args.overwrite, workers=args.workers)
    payload = {"command": "extract", "report": {
        "dataset_dir": str(report.dataset_dir),
        "subjects_processed": report.subjects_processed,
        "arrays_written": report.arrays_written,
        "resample_factors": report.resample_factors,
        "warnings": report.warnings,
    }}
    _emit(args, payload,
          f"extracted {report.subjects_processed} subject(s), "
          f"{report.arrays_written} array(s) to {report.dataset_dir}")
    if report.warnings and not args.quiet:
        for w in report.warnings:
            print(f"warning: {w}", file=sys.stderr)
    return 0


def cmd_bench(args) -> int:
    work_dir = Path(args.work_dir)
    if args.edf_src:
        report = bench_mod.run_edf_bench(Path(args.edf_src), work_dir,
                                         cold=args.cold, workers=args.workers)
    else:
        channels = args.channels or [
            ChannelSpec(name="c1", sampling_rate=64.0, kind="int16_quantized"),
            ChannelSpec(name="c2", sampling_rate=64.0, kind="int16_quantized"),
        ]
        spec = SynthSpec(n_subjects=args.subjects, duration_sec=args.duration,
                         channels=channels, seed=args.seed)
        report = bench_mod.run_synth_bench(spec, work_dir,
                                           cold=args.cold, workers=args.workers)
    csv_text = report.to_csv()
    csv_path = Path(args.csv) if args.csv else work_dir / "bench.csv"
    csv_path.write_text(csv_text)
    if args.json:
        print(json.dumps({
            "command": "bench",
            "workers": report.workers,
            "cold": report.cold,
            "csv_path": str(csv_path),
            "rows": [asdict(r) for r in report.rows],
        }, indent=2))
    else:
        print(report.to_table())
        checksum = sum(sum(r.means.values()) for r in report.rows)
        print(f"array means checksum: {checksum:.6e}")
        print(f"csv written to {csv_path}")
        if not args.quiet and not args.cold:
            print("note: wall times include OS page-cache effects; "
                  "use --cold to read from a fresh copy", file=sys.stderr)
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="slf",
        description="Store, validate, convert, extract, and benchmark "
                    "polysomnography datasets in the Sleeplab format.",
    )
    parser.add_argument("--quiet", action="store_true",
                        help="suppress informational stderr output")
    parser.add_argument("--json", action="store_true",
                        help="emit machine-readable JSON reports on stdout")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("validate", help="validate a dataset directory")
    p.add_argument("path")
    p.set_defaults(func=cmd_validate)

    p = sub.add_parser("info", help="summarize a dataset from its metadata")
    p.add_argument("path")
    p.set_defaults(func=cmd_info)

    p = sub.add_parser("convert", help="convert a directory of EDF files")
    p.add_argument("src")
    p.add_argument("dest")
    p.add_argument("--dataset-name", default="dataset")
    p.add_argument("--series-name", default="all")
    p.add_argument("--codec", choices=["raw", "zstd"], default="raw")
    p.add_argument("--level", type=_zstd_level, default=9,
                   help=f"zstd level in [{zstd.MIN_LEVEL}, {zstd.MAX_LEVEL}]")
    p.add_argument("--chunk-len", type=int, default=None,
                   help="samples per chunk (default ~1 MiB worth)")
    p.add_argument("--mode", choices=["strict", "lenient"], default="lenient")
    p.add_argument("--workers", type=int, default=1)
    p.add_argument("--overwrite", action="store_true")
    p.add_argument("--mapping", default=None,
                   help="JSON annotation-mapping config")
    p.set_defaults(func=cmd_convert)

    p = sub.add_parser("extract", help="extract/preprocess a dataset subset")
    p.add_argument("config", help="JSON extraction config")
    p.add_argument("src")
    p.add_argument("dest")
    p.add_argument("--workers", type=int, default=1)
    p.add_argument("--overwrite", action="store_true")
    p.set_defaults(func=cmd_extract)

    p = sub.add_parser("bench", help="size/read/write benchmark over codecs")
    p.add_argument("work_dir")
    p.add_argument("--subjects", type=int, default=2)
    p.add_argument("--duration", type=float, default=600.0,
                   help="recording length in seconds")
    p.add_argument("--seed", type=int, default=2024)
    p.add_argument("--channels", type=_channel, action="append", default=None,
                   metavar="NAME:RATE:KIND",
                   help="synthetic channel, kind in {gaussian_noise, "
                        "sine_plus_noise, int16_quantized}; repeatable")
    p.add_argument("--edf-src", default=None,
                   help="benchmark this EDF directory instead of synthetic data")
    p.add_argument("--csv", default=None, help="CSV output path")
    p.add_argument("--cold", action="store_true",
                   help="read from a fresh copy to defeat warm caches")
    p.add_argument("--workers", type=int, default=1)
    p.set_defaults(func=cmd_bench)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except NotSlfDatasetError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except SlfError as exc:
        print(f"error: [{exc.code}] {exc}", file=sys.stderr)
        return 1
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
