import json
import threading
from pathlib import Path

import numpy as np
import pytest

from conftest import random_dataset, tiny_dataset
from slf.codecs import ArrayCodecSpec
from slf.errors import (
    DestinationExistsError,
    NotSlfDatasetError,
    StoreReadError,
    ValidationFailedError,
    WindowOutOfRangeError,
)
from slf.models import datasets_equal, validate_dataset
from slf.store import (
    IoStats,
    ReadOptions,
    deep_validate,
    directory_size,
    list_dataset,
    open_array,
    read_dataset,
    read_window,
    summarize_dataset,
    write_dataset,
)

RAW = ArrayCodecSpec(kind="raw")
CHUNKED = ArrayCodecSpec(kind="chunked_zstd", zstd_level=9, chunk_len=64)
CODECS = [RAW, CHUNKED]


def json_size(root: Path) -> int:
    return sum(p.stat().st_size for p in Path(root).rglob("*")
               if p.is_file() and (p.suffix == ".json" or p.name == ".zarray"))


class TestWriteLayout:
    def test_empty_dataset(self, tmp_path):
        from slf.models import Dataset

        report = write_dataset(Dataset(name="d"), tmp_path, RAW)
        ds_dir = tmp_path / "d"
        assert report.dataset_dir == ds_dir
        assert [p.name for p in ds_dir.iterdir()] == ["metadata.json"]
        assert (report.n_series, report.n_subjects, report.n_arrays,
                report.n_annotation_sets) == (0, 0, 0, 0)

    def test_tree_shape_raw(self, tmp_path):
        write_dataset(tiny_dataset(), tmp_path, RAW)
        root = tmp_path / "d"
        expected = {
            "metadata.json",
            "series_a/metadata.json",
            "series_a/subj_01/metadata.json",
            "series_a/subj_01/annotations/hypnogram.json",
            "series_a/subj_01/sig/attributes.json",
            "series_a/subj_01/sig/data.npy",
        }
        found = {str(p.relative_to(root)) for p in root.rglob("*") if p.is_file()}
        assert found == expected

    def test_tree_shape_chunked(self, tmp_path):
        ds = tiny_dataset(n=10)
        write_dataset(ds, tmp_path, ArrayCodecSpec(kind="chunked_zstd",
                                                   zstd_level=9, chunk_len=4))
        zarr_dir = tmp_path / "d/series_a/subj_01/sig/data.zarr"
        assert sorted(p.name for p in zarr_dir.iterdir()) == [".zarray", "0", "1", "2"]

    def test_json_files_are_human_readable(self, tmp_path):
        write_dataset(tiny_dataset(n=10), tmp_path,
                      ArrayCodecSpec(kind="chunked_zstd", zstd_level=9,
                                     chunk_len=4))
        paths = [p for p in (tmp_path / "d").rglob("*")
                 if p.is_file() and (p.suffix == ".json" or p.name == ".zarray")]
        assert len(paths) >= 5
        for path in paths:
            text = path.read_bytes().decode("utf-8")
            assert text.endswith("\n")
            assert text.startswith("{\n  \"")
            json.loads(text)

    def test_attributes_json_keys(self, tmp_path):
        write_dataset(tiny_dataset(), tmp_path, RAW)
        doc = json.loads((tmp_path / "d/series_a/subj_01/sig/attributes.json")
                         .read_text())
        assert list(doc) == ["name", "sampling_rate", "unit", "value_type",
                             "n_samples", "start_offset"]

    def test_annotation_json_keys(self, tmp_path):
        write_dataset(tiny_dataset(), tmp_path, RAW)
        doc = json.loads(
            (tmp_path / "d/series_a/subj_01/annotations/hypnogram.json").read_text())
        assert list(doc) == ["name", "scorer", "name_type", "annotations"]
        assert list(doc["annotations"][0]) == ["name", "start_sec",
                                               "duration_sec", "extra"]

    def test_destination_exists(self, tmp_path):
        write_dataset(tiny_dataset(), tmp_path, RAW)
        with pytest.raises(DestinationExistsError):
            write_dataset(tiny_dataset(), tmp_path, RAW)
        write_dataset(tiny_dataset(), tmp_path, RAW, overwrite=True)

    def test_invalid_dataset_rejected(self, tmp_path):
        from test_models import _with_array_attrs

        bad = _with_array_attrs(tiny_dataset(), sampling_rate=-1.0)
        with pytest.raises(ValidationFailedError) as exc:
            write_dataset(bad, tmp_path, RAW)
        assert exc.value.issues[0].code == "nonpositive_sampling_rate"
        assert not (tmp_path / "d").exists()

    def test_workers_produce_identical_tree(self, tmp_path, rng):
        ds = random_dataset(rng, length_choices=(0, 10, 100))
        write_dataset(ds, tmp_path / "w1", RAW, workers=1)
        write_dataset(ds, tmp_path / "w4", RAW, workers=4)
        files1 = sorted(p.relative_to(tmp_path / "w1")
                        for p in (tmp_path / "w1").rglob("*") if p.is_file())
        files4 = sorted(p.relative_to(tmp_path / "w4")
                        for p in (tmp_path / "w4").rglob("*") if p.is_file())
        assert files1 == files4
        for rel in files1:
            assert (tmp_path / "w1" / rel).read_bytes() == \
                (tmp_path / "w4" / rel).read_bytes()

    def test_subject_atomicity(self, tmp_path):
        # a loader that blows up mid-subject must leave no subject directory
        from slf.models import (ArrayAttributes, Dataset, SampleArray, Series,
                                Subject, SubjectMetadata)

        def boom():
            raise RuntimeError("loader failed")

        attrs = ArrayAttributes(name="sig", sampling_rate=1.0,
                                value_type="float32", n_samples=4)
        subject = Subject(metadata=SubjectMetadata(subject_id="s1"),
                          sample_arrays={"sig": SampleArray(attributes=attrs,
                                                            values_func=boom)})
        ds = Dataset(name="d", series={"a": Series(name="a",
                                                   subjects={"s1": subject})})
        with pytest.raises(RuntimeError):
            write_dataset(ds, tmp_path, RAW)
        series_dir = tmp_path / "d" / "a"
        assert series_dir.is_dir()
        assert [p.name for p in series_dir.iterdir()] == ["metadata.json"]


class TestRoundTrip:
    @pytest.mark.parametrize("codec", CODECS, ids=["raw", "chunked"])
    def test_tiny(self, tmp_path, codec):
        ds = tiny_dataset()
        report = write_dataset(ds, tmp_path, codec)
        back = read_dataset(report.dataset_dir)
        assert datasets_equal(ds, back)

    @pytest.mark.parametrize("codec", CODECS, ids=["raw", "chunked"])
    def test_randomized(self, tmp_path, rng, codec):
        for i in range(10):
            ds = random_dataset(rng, name=f"ds{i}", length_choices=(0, 1, 7, 1000))
            report = write_dataset(ds, tmp_path / str(i), codec)
            back = read_dataset(report.dataset_dir)
            # same issues regardless of on-disk listing order
            original = {(i.path, i.code) for i in validate_dataset(ds)}
            reread = {(i.path, i.code) for i in validate_dataset(back)}
            assert reread == original
            assert datasets_equal(ds, back)

    @pytest.mark.parametrize("codec", CODECS, ids=["raw", "chunked"])
    def test_nan_and_inf_bit_exact(self, tmp_path, codec):
        from slf.models import (ArrayAttributes, Dataset, SampleArray, Series,
                                Subject, SubjectMetadata)

        values = np.array([np.nan, np.inf, -np.inf, 0.0, -0.0], np.float32)
        attrs = ArrayAttributes(name="sig", sampling_rate=1.0,
                                value_type="float32", n_samples=5)
        subject = Subject(metadata=SubjectMetadata(subject_id="s"),
                          sample_arrays={"sig": SampleArray.from_values(attrs,
                                                                        values)})
        ds = Dataset(name="d", series={"a": Series(name="a",
                                                   subjects={"s": subject})})
        report = write_dataset(ds, tmp_path, codec)
        back = read_dataset(report.dataset_dir)
        got = back.series["a"].subjects["s"].sample_arrays["sig"].values
        assert got.tobytes() == values.tobytes()

    def test_empty_subject_roundtrip(self, tmp_path):
        from slf.models import (Dataset, Series, Subject, SubjectMetadata)

        subject = Subject(metadata=SubjectMetadata(subject_id="s"))
        ds = Dataset(name="d", series={"a": Series(name="a",
                                                   subjects={"s": subject})})
        report = write_dataset(ds, tmp_path, RAW)
        back = read_dataset(report.dataset_dir)
        assert datasets_equal(ds, back)
        assert back.series["a"].subjects["s"].sample_arrays == {}
        assert back.series["a"].subjects["s"].annotations == {}

    def test_metadata_fields_roundtrip(self, tmp_path):
        from datetime import datetime

        from slf.models import (Annotation, AnnotationSet, Dataset, Series,
                                Subject, SubjectMetadata)

        subject = Subject(
            metadata=SubjectMetadata(
                subject_id="s1",
                recording_start=datetime(2022, 11, 5, 21, 30, 15),
                age=53.0, sex="F", extra={"site": "x", "visit": 2, "ok": True}),
            annotations={"ev": AnnotationSet(
                name="ev", scorer="tech_2", name_type="free_text",
                annotations=[Annotation(name="Apnea", start_sec=12.5,
                                        duration_sec=10.25,
                                        extra={"channel": "flow"})])},
        )
        ds = Dataset(name="d", format_version="1",
                     series={"a": Series(name="a", subjects={"s1": subject})})
        report = write_dataset(ds, tmp_path, RAW)
        back = read_dataset(report.dataset_dir)
        meta = back.series["a"].subjects["s1"].metadata
        assert meta == subject.metadata
        assert back.series["a"].subjects["s1"].annotations == subject.annotations


class TestFilters:
    def test_subject_filter(self, tmp_path, rng):
        ds = random_dataset(rng, length_choices=(10,))
        report = write_dataset(ds, tmp_path, RAW)
        back = read_dataset(report.dataset_dir,
                            ReadOptions(subject_filter={"subj_01"}))
        for series in back.series.values():
            assert set(series.subjects) <= {"subj_01"}

    def test_series_filter(self, tmp_path, rng):
        ds = random_dataset(rng, length_choices=(10,))
        report = write_dataset(ds, tmp_path, RAW)
        back = read_dataset(report.dataset_dir,
                            ReadOptions(series_filter={"series_0"}))
        assert set(back.series) == {"series_0"}


class TestLazyReads:
    def test_no_payload_bytes_until_access(self, tmp_path):
        ds = tiny_dataset(n=4096)
        report = write_dataset(ds, tmp_path, RAW)
        stats = IoStats()
        back = read_dataset(report.dataset_dir, stats=stats)
        assert stats.bytes_read == json_size(report.dataset_dir)
        sa = back.series["series_a"].subjects["subj_01"].sample_arrays["sig"]
        sa.values
        assert stats.bytes_read > json_size(report.dataset_dir)

    def test_eager_mode(self, tmp_path):
        ds = tiny_dataset(n=64)
        report = write_dataset(ds, tmp_path, RAW)
        stats = IoStats()
        back = read_dataset(report.dataset_dir, ReadOptions(lazy_arrays=False),
                            stats=stats)
        sa = back.series["series_a"].subjects["subj_01"].sample_arrays["sig"]
        assert sa.materialized_values is not None
        assert stats.bytes_read > json_size(report.dataset_dir)

    def test_validation_error_on_read_names_file(self, tmp_path):
        report = write_dataset(tiny_dataset(), tmp_path, RAW)
        attrs_path = report.dataset_dir / "series_a/subj_01/sig/attributes.json"
        doc = json.loads(attrs_path.read_text())
        doc["sampling_rate"] = -64
        attrs_path.write_text(json.dumps(doc))
        with pytest.raises(ValidationFailedError) as exc:
            read_dataset(report.dataset_dir)
        assert exc.value.issues[0].code == "nonpositive_sampling_rate"
        assert "attributes.json" in str(exc.value)


class TestReadWindow:
    @pytest.mark.parametrize("codec", CODECS, ids=["raw", "chunked"])
    def test_full_window_equals_eager(self, tmp_path, rng, codec):
        ds = tiny_dataset(n=300)
        report = write_dataset(ds, tmp_path, codec)
        ref = open_array(report.dataset_dir / "series_a/subj_01/sig")
        full = read_window(ref, 0, 300)
        eager = ds.series["series_a"].subjects["subj_01"].sample_arrays["sig"].values
        assert np.array_equal(full, eager)

    def test_raw_byte_bound(self, tmp_path):
        ds = tiny_dataset(n=100_000)
        report = write_dataset(ds, tmp_path, RAW)
        ref = open_array(report.dataset_dir / "series_a/subj_01/sig")
        stats = IoStats()
        read_window(ref, 50_000, 1920, stats)
        assert stats.bytes_read <= 1920 * 4 + 128
        assert stats.files_opened == 1

    def test_raw_byte_bound_random_windows(self, tmp_path, rng):
        n = 100_000
        ds = tiny_dataset(n=n)
        report = write_dataset(ds, tmp_path, RAW)
        ref = open_array(report.dataset_dir / "series_a/subj_01/sig")
        for _ in range(100):
            start = int(rng.integers(0, n))
            length = int(rng.integers(0, n - start + 1))
            stats = IoStats()
            read_window(ref, start, length, stats)
            assert stats.bytes_read <= length * 4 + 128

    def test_chunked_opens_only_overlapping_chunks(self, tmp_path):
        ds = tiny_dataset(n=5000)
        report = write_dataset(ds, tmp_path,
                               ArrayCodecSpec(kind="chunked_zstd", zstd_level=9,
                                              chunk_len=1024))
        ref = open_array(report.dataset_dir / "series_a/subj_01/sig")
        stats = IoStats()
        values = read_window(ref, 1000, 50, stats)
        assert stats.files_opened == 2  # chunks 0 and 1 only
        eager = ds.series["series_a"].subjects["subj_01"].sample_arrays["sig"].values
        assert np.array_equal(values, eager[1000:1050])

    @pytest.mark.parametrize("codec", CODECS, ids=["raw", "chunked"])
    def test_partition_concat_equals_eager(self, tmp_path, rng, codec):
        n = 777
        ds = tiny_dataset(n=n)
        report = write_dataset(ds, tmp_path, codec)
        ref = open_array(report.dataset_dir / "series_a/subj_01/sig")
        eager = ds.series["series_a"].subjects["subj_01"].sample_arrays["sig"].values
        for _ in range(20):
            cuts = np.sort(rng.integers(0, n + 1, rng.integers(0, 6)))
            bounds = [0, *cuts.tolist(), n]
            parts = [read_window(ref, lo, hi - lo)
                     for lo, hi in zip(bounds[:-1], bounds[1:])]
            joined = np.concatenate([p for p in parts]) if parts else np.array([])
            assert np.array_equal(joined, eager)

    def test_codec_equivalence_windows(self, tmp_path, rng):
        ds = tiny_dataset(n=2000)
        rep_raw = write_dataset(ds, tmp_path / "r", RAW)
        rep_chunked = write_dataset(ds, tmp_path / "c", CHUNKED)
        ref_r = open_array(rep_raw.dataset_dir / "series_a/subj_01/sig")
        ref_c = open_array(rep_chunked.dataset_dir / "series_a/subj_01/sig")
        for _ in range(25):
            start = int(rng.integers(0, 2000))
            n = int(rng.integers(0, 2000 - start + 1))
            assert np.array_equal(read_window(ref_r, start, n),
                                  read_window(ref_c, start, n))

    def test_out_of_range(self, tmp_path):
        report = write_dataset(tiny_dataset(n=10), tmp_path, RAW)
        ref = open_array(report.dataset_dir / "series_a/subj_01/sig")
        with pytest.raises(WindowOutOfRangeError):
            read_window(ref, 5, 6)
        with pytest.raises(WindowOutOfRangeError):
            read_window(ref, -1, 2)

    def test_zero_length_window(self, tmp_path):
        report = write_dataset(tiny_dataset(n=10), tmp_path, CHUNKED)
        ref = open_array(report.dataset_dir / "series_a/subj_01/sig")
        stats = IoStats()
        assert read_window(ref, 3, 0, stats).size == 0
        assert stats.files_opened == 0

    def test_concurrent_window_reads(self, tmp_path):
        ds = tiny_dataset(n=4096)
        report = write_dataset(ds, tmp_path, CHUNKED)
        ref = open_array(report.dataset_dir / "series_a/subj_01/sig")
        eager = ds.series["series_a"].subjects["subj_01"].sample_arrays["sig"].values
        stats = IoStats()
        errors = []

        def worker(seed):
            r = np.random.default_rng(seed)
            for _ in range(50):
                start = int(r.integers(0, 4096))
                n = int(r.integers(0, 4096 - start + 1))
                got = read_window(ref, start, n, stats)
                if not np.array_equal(got, eager[start:start + n]):
                    errors.append((start, n))

        threads = [threading.Thread(target=worker, args=(i,)) for i in range(8)]
        for t in threads:
            t.start()
        for t in threads:
            t.join()
        assert not errors


class TestListDataset:
    def test_matches_in_memory_summary(self, tmp_path, rng):
        ds = random_dataset(rng, length_choices=(0, 5, 50))
        report = write_dataset(ds, tmp_path, RAW)
        assert list_dataset(report.dataset_dir) == summarize_dataset(ds)

    def test_depth_first_order(self, tmp_path, rng):
        ds = random_dataset(rng, length_choices=(5,))
        report = write_dataset(ds, tmp_path, RAW)
        summary = list_dataset(report.dataset_dir)
        subjects = [(s["name"], subj["subject_id"])
                    for s in summary["series"] for subj in s["subjects"]]
        assert subjects == sorted(subjects)

    def test_two_by_three_has_six_subject_entries(self, tmp_path):
        from slf.models import Dataset, Series, Subject, SubjectMetadata

        series = {}
        for sname in ("s1", "s2"):
            subjects = {sid: Subject(metadata=SubjectMetadata(subject_id=sid))
                        for sid in ("a", "b", "c")}
            series[sname] = Series(name=sname, subjects=subjects)
        report = write_dataset(Dataset(name="d", series=series), tmp_path, RAW)
        summary = list_dataset(report.dataset_dir)
        entries = [(s["name"], subj["subject_id"])
                   for s in summary["series"] for subj in s["subjects"]]
        assert entries == [("s1", "a"), ("s1", "b"), ("s1", "c"),
                           ("s2", "a"), ("s2", "b"), ("s2", "c")]

    def test_reads_no_payload(self, tmp_path):
        report = write_dataset(tiny_dataset(n=8192), tmp_path, RAW)
        stats = IoStats()
        list_dataset(report.dataset_dir, stats)
        # everything read is JSON metadata; the 32 KiB payload is untouched
        assert 0 < stats.bytes_read <= json_size(report.dataset_dir)

    def test_not_a_dataset(self, tmp_path):
        with pytest.raises(NotSlfDatasetError):
            list_dataset(tmp_path)
        with pytest.raises(NotSlfDatasetError):
            read_dataset(tmp_path / "missing")


class TestCorruptionDetection:
    def _write(self, tmp_path, codec=RAW, n=200):
        return write_dataset(tiny_dataset(n=n), tmp_path, codec).dataset_dir

    def test_truncated_data_file(self, tmp_path):
        root = self._write(tmp_path)
        data = root / "series_a/subj_01/sig/data.npy"
        data.write_bytes(data.read_bytes()[:-10])
        issues, _ = deep_validate(root)
        assert any(i.code == "truncated_payload" for i in issues)

    def test_bad_magic(self, tmp_path):
        root = self._write(tmp_path)
        data = root / "series_a/subj_01/sig/data.npy"
        raw = bytearray(data.read_bytes())
        raw[:6] = b"XXXXXX"
        data.write_bytes(bytes(raw))
        issues, _ = deep_validate(root)
        assert any(i.code == "bad_magic" for i in issues)

    def test_shape_payload_mismatch(self, tmp_path):
        root = self._write(tmp_path)
        # rewrite the payload with a shorter array while attributes still say 200
        data = root / "series_a/subj_01/sig/data.npy"
        from slf.codecs import encode_raw_array
        data.write_bytes(encode_raw_array(np.zeros(8, np.float32), "float32"))
        issues, _ = deep_validate(root)
        assert any(i.code == "values_length_mismatch" for i in issues)

    def test_zstd_level_23(self, tmp_path):
        root = self._write(tmp_path, CHUNKED)
        zarray = root / "series_a/subj_01/sig/data.zarr/.zarray"
        doc = json.loads(zarray.read_text())
        doc["compressor"]["level"] = 23
        zarray.write_text(json.dumps(doc))
        issues, _ = deep_validate(root)
        assert any(i.code == "zstd_level_out_of_range" for i in issues)

    def test_corrupt_chunk(self, tmp_path):
        root = self._write(tmp_path, CHUNKED)
        chunk = root / "series_a/subj_01/sig/data.zarr/0"
        chunk.write_bytes(b"\x28\xb5\x2f\xfdgarbage")
        issues, _ = deep_validate(root)
        assert any(i.code == "corrupt_chunk" for i in issues)

    def test_non_json_metadata(self, tmp_path):
        root = self._write(tmp_path)
        (root / "series_a/subj_01/metadata.json").write_text("not json {")
        with pytest.raises(StoreReadError) as exc:
            read_dataset(root)
        assert any(code == "bad_json" for _, code, _ in exc.value.failures)

    def test_missing_array_data(self, tmp_path):
        root = self._write(tmp_path)
        (root / "series_a/subj_01/sig/data.npy").unlink()
        issues, _ = deep_validate(root)
        assert any(i.code == "missing_array_data" for i in issues)

    def test_key_mismatch_on_renamed_dir(self, tmp_path):
        root = self._write(tmp_path)
        (root / "series_a/subj_01/sig").rename(root / "series_a/subj_01/other")
        issues, _ = deep_validate(root)
        assert any(i.code == "key_mismatch" for i in issues)


def test_directory_size(tmp_path):
    (tmp_path / "a").write_bytes(b"12345")
    (tmp_path / "sub").mkdir()
    (tmp_path / "sub/b").write_bytes(b"123")
    assert directory_size(tmp_path) == 8
