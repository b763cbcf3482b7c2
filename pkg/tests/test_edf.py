import math
import re

import numpy as np
import pytest

from edfgen import FixtureSignal, annotation_signal, build_edf, tal, timekeeping_tal
from slf.edf import (
    EdfFile,
    ParseMode,
    digital_to_physical,
    parse_edf_header,
    parse_tal_records,
    read_signal_physical,
)
from slf.errors import EdfParseError


def two_signal_file(tmp_path, n_records=3):
    sigs = [
        FixtureSignal(label="EEG Fpz-Cz", samples_per_record=4),
        FixtureSignal(label="SpO2", samples_per_record=2, physical_min=0,
                      physical_max=100, digital_min=0, digital_max=1000,
                      physical_dimension="%"),
    ]
    rng = np.random.default_rng(5)
    digital = [
        rng.integers(-2048, 2048, n_records * 4, dtype=np.int16),
        rng.integers(0, 1001, n_records * 2, dtype=np.int16),
    ]
    path = tmp_path / "two.edf"
    path.write_bytes(build_edf(sigs, digital, n_records))
    return path, sigs, digital


class TestHeaderParsing:
    def test_minimal_header(self, tmp_path):
        sigs = [FixtureSignal(label="EEG", samples_per_record=4)]
        data = build_edf(sigs, [np.zeros(4, np.int16)], 1)
        header = parse_edf_header(data, ParseMode.STRICT)
        assert header.n_signals == 1
        assert header.header_bytes == 512
        assert header.n_records == 1
        assert header.record_duration_sec == 1.0
        assert header.signals[0].label == "EEG"
        assert not header.signals[0].is_annotation_channel

    def test_all_fields_roundtrip(self, tmp_path):
        path, sigs, _ = two_signal_file(tmp_path)
        edf = EdfFile(path, ParseMode.STRICT)
        h = edf.header
        assert h.version == "0"
        assert h.patient_id == "X X X X"
        assert h.n_signals == 2
        for parsed, built in zip(h.signals, sigs):
            assert parsed.label == built.label
            assert parsed.transducer == built.transducer
            assert parsed.physical_dimension == built.physical_dimension
            assert parsed.physical_min == built.physical_min
            assert parsed.physical_max == built.physical_max
            assert parsed.digital_min == built.digital_min
            assert parsed.digital_max == built.digital_max
            assert parsed.prefiltering == built.prefiltering
            assert parsed.samples_per_record == built.samples_per_record

    @pytest.mark.parametrize("datestr,year", [
        ("02.01.99", 1999), ("02.01.10", 2010), ("01.01.85", 1985),
        ("31.12.84", 2084), ("15.06.00", 2000),
    ])
    def test_century_rule(self, datestr, year):
        sigs = [FixtureSignal(label="EEG", samples_per_record=1)]
        data = build_edf(sigs, [np.zeros(1, np.int16)], 1, startdate=datestr)
        header = parse_edf_header(data, ParseMode.STRICT)
        assert header.start_datetime.year == year

    def test_start_datetime(self):
        sigs = [FixtureSignal(label="EEG", samples_per_record=1)]
        data = build_edf(sigs, [np.zeros(1, np.int16)], 1,
                         startdate="05.11.22", starttime="21.30.15")
        header = parse_edf_header(data, ParseMode.STRICT)
        assert header.start_datetime.isoformat() == "2022-11-05T21:30:15"

    def test_unknown_record_count_sentinel(self):
        sigs = [FixtureSignal(label="EEG", samples_per_record=1)]
        data = build_edf(sigs, [np.zeros(1, np.int16)], 1, n_records_field=-1)
        header = parse_edf_header(data, ParseMode.STRICT)
        assert header.n_records == -1

    def test_truncated_header(self):
        with pytest.raises(EdfParseError) as exc:
            parse_edf_header(b"0" * 100, ParseMode.STRICT)
        assert exc.value.code == "truncated_header"

    def test_inconsistent_header_bytes(self):
        sigs = [FixtureSignal(label="EEG", samples_per_record=1)]
        data = build_edf(sigs, [np.zeros(1, np.int16)], 1, header_bytes=768)
        with pytest.raises(EdfParseError) as exc:
            parse_edf_header(data, ParseMode.STRICT)
        assert exc.value.code == "inconsistent_header_bytes"
        warnings = []
        header = parse_edf_header(data, ParseMode.LENIENT, warnings)
        assert header.header_bytes == 512
        assert warnings

    def test_malformed_numeric_field(self):
        sigs = [FixtureSignal(label="EEG", samples_per_record=1)]
        data = bytearray(build_edf(sigs, [np.zeros(1, np.int16)], 1))
        data[236:244] = b"oops    "  # n_records field
        with pytest.raises(EdfParseError) as exc:
            parse_edf_header(bytes(data), ParseMode.STRICT)
        assert exc.value.code == "malformed_numeric_field"
        warnings = []
        header = parse_edf_header(bytes(data), ParseMode.LENIENT, warnings)
        assert header.n_records == -1
        assert warnings

    def test_zero_digital_range(self):
        sigs = [FixtureSignal(label="EEG", samples_per_record=1,
                              digital_min=5, digital_max=5)]
        data = build_edf(sigs, [np.zeros(1, np.int16)], 1)
        with pytest.raises(EdfParseError) as exc:
            parse_edf_header(data, ParseMode.STRICT)
        assert exc.value.code == "zero_digital_range"
        warnings = []
        parse_edf_header(data, ParseMode.LENIENT, warnings)
        assert any("zero digital range" in w for w in warnings)


class TestDigitalToPhysical:
    def test_endpoints(self):
        sh = FixtureSignal(label="x", samples_per_record=1)
        sig = _sig_header(sh)
        assert digital_to_physical(sig.digital_min, sig) == sig.physical_min
        assert digital_to_physical(sig.digital_max, sig) == sig.physical_max

    def test_worked_example(self):
        sig = _sig_header(FixtureSignal(label="x", samples_per_record=1,
                                        physical_min=-250, physical_max=250,
                                        digital_min=-2048, digital_max=2047))
        expected = 2048 * 500 / 4095 - 250
        assert math.isclose(digital_to_physical(0, sig), expected, rel_tol=1e-12)
        assert round(digital_to_physical(0, sig), 4) == 0.0611

    def test_matches_formula_oracle_to_one_ulp(self, rng):
        for _ in range(2000):
            dmin, dmax = sorted(rng.integers(-32768, 32768, 2).tolist())
            if dmin == dmax:
                continue
            pmin, pmax = np.sort(rng.uniform(-1e4, 1e4, 2)).tolist()
            d = int(rng.integers(dmin, dmax + 1))
            sig = _sig_header(FixtureSignal(label="x", samples_per_record=1,
                                            physical_min=pmin, physical_max=pmax,
                                            digital_min=dmin, digital_max=dmax))
            got = digital_to_physical(d, sig)
            oracle = (d - dmin) * (pmax - pmin) / (dmax - dmin) + pmin
            assert abs(got - oracle) <= math.ulp(max(abs(got), abs(oracle), 1e-300))

    def test_midpoint_maps_to_physical_midpoint(self, rng):
        for _ in range(200):
            half = int(rng.integers(1, 16384))
            center = int(rng.integers(-1000, 1000))
            dmin, dmax = center - half, center + half
            pmin, pmax = sorted(rng.uniform(-1e3, 1e3, 2).tolist())
            sig = _sig_header(FixtureSignal(label="x", samples_per_record=1,
                                            physical_min=pmin, physical_max=pmax,
                                            digital_min=dmin, digital_max=dmax))
            got = digital_to_physical(center, sig)
            assert math.isclose(got, (pmin + pmax) / 2, rel_tol=1e-12,
                                abs_tol=1e-9)

    def test_zero_range_strict_raises(self):
        sig = _sig_header(FixtureSignal(label="x", samples_per_record=1,
                                        digital_min=3, digital_max=3))
        with pytest.raises(EdfParseError):
            digital_to_physical(1, sig)
        warnings = []
        assert digital_to_physical(2, sig, ParseMode.LENIENT, warnings) == \
            2 + sig.physical_min
        assert warnings


def _sig_header(fx: FixtureSignal):
    from slf.edf import EdfSignalHeader

    return EdfSignalHeader(
        label=fx.label, transducer=fx.transducer,
        physical_dimension=fx.physical_dimension,
        physical_min=fx.physical_min, physical_max=fx.physical_max,
        digital_min=fx.digital_min, digital_max=fx.digital_max,
        prefiltering=fx.prefiltering, samples_per_record=fx.samples_per_record)


class TestSignalReads:
    def test_digital_roundtrip_exact(self, tmp_path):
        path, _sigs, digital = two_signal_file(tmp_path)
        edf = EdfFile(path, ParseMode.STRICT)
        assert np.array_equal(edf.read_digital(0), digital[0])
        assert np.array_equal(edf.read_digital(1), digital[1])

    def test_concatenation_and_rate(self, tmp_path):
        sigs = [FixtureSignal(label="EEG", samples_per_record=4)]
        digital = [np.arange(8, dtype=np.int16)]
        path = tmp_path / "x.edf"
        path.write_bytes(build_edf(sigs, digital, 2))
        edf = EdfFile(path, ParseMode.STRICT)
        values, rate = read_signal_physical(edf, 0)
        assert values.shape == (8,)
        assert rate == 4.0
        assert values.dtype == np.float32

    def test_all_digital_min_maps_to_physical_min(self, tmp_path):
        sigs = [FixtureSignal(label="EEG", samples_per_record=4)]
        digital = [np.full(8, sigs[0].digital_min, dtype=np.int16)]
        path = tmp_path / "x.edf"
        path.write_bytes(build_edf(sigs, digital, 2))
        values, _ = read_signal_physical(EdfFile(path), 0)
        assert np.all(values == np.float32(sigs[0].physical_min))

    def test_physical_matches_oracle(self, tmp_path):
        fx = FixtureSignal(label="EEG", samples_per_record=4,
                           physical_min=-250, physical_max=250,
                           digital_min=-2048, digital_max=2047)
        digital = [np.array([0, 1023, -1024, 2047], dtype=np.int16)]
        path = tmp_path / "x.edf"
        path.write_bytes(build_edf([fx], digital, 1))
        values, _ = read_signal_physical(EdfFile(path, ParseMode.STRICT), 0)
        for got, d in zip(values.tolist(), digital[0].tolist()):
            oracle = (d - fx.digital_min) * (fx.physical_max - fx.physical_min) \
                / (fx.digital_max - fx.digital_min) + fx.physical_min
            assert got == np.float32(oracle)

    def test_truncated_record_strict_vs_lenient(self, tmp_path):
        sigs = [FixtureSignal(label="EEG", samples_per_record=4)]
        data = build_edf(sigs, [np.arange(12, dtype=np.int16)], 3)
        path = tmp_path / "x.edf"
        path.write_bytes(data[:-4])  # drop half a record
        with pytest.raises(EdfParseError) as exc:
            EdfFile(path, ParseMode.STRICT)
        assert exc.value.code == "truncated_record"
        edf = EdfFile(path, ParseMode.LENIENT)
        assert edf.n_records == 2
        assert any("partial" in w for w in edf.warnings)
        assert np.array_equal(edf.read_digital(0), np.arange(8, dtype=np.int16))

    def test_unknown_count_computed_from_size(self, tmp_path):
        sigs = [FixtureSignal(label="EEG", samples_per_record=4)]
        data = build_edf(sigs, [np.arange(12, dtype=np.int16)], 3,
                         n_records_field=-1)
        path = tmp_path / "x.edf"
        path.write_bytes(data)
        edf = EdfFile(path, ParseMode.STRICT)
        assert edf.n_records == 3

    def test_annotation_channel_rejected_for_signals(self, tmp_path):
        sigs = [
            FixtureSignal(label="EEG", samples_per_record=2),
            FixtureSignal(label="EDF Annotations", samples_per_record=8,
                          digital_min=-32768, digital_max=32767),
        ]
        ann = annotation_signal([timekeeping_tal(0.0)], 8)
        path = tmp_path / "x.edf"
        path.write_bytes(build_edf(sigs, [np.zeros(2, np.int16), ann], 1,
                                   reserved="EDF+C"))
        edf = EdfFile(path, ParseMode.STRICT)
        with pytest.raises(EdfParseError) as exc:
            edf.read_physical(1)
        assert exc.value.code == "annotation_channel"

    def test_bad_signal_index(self, tmp_path):
        path, _, _ = two_signal_file(tmp_path)
        edf = EdfFile(path)
        with pytest.raises(EdfParseError) as exc:
            edf.read_digital(2)
        assert exc.value.code == "bad_signal_index"


class TestTalParsing:
    def test_spec_example(self):
        data = b"+30\x1515\x14Apnea\x14\x00"
        tals = parse_tal_records(data, ParseMode.STRICT)
        assert len(tals) == 1
        assert tals[0].onset_sec == 30.0
        assert tals[0].duration_sec == 15.0
        assert tals[0].texts == ["Apnea"]

    def test_timekeeping_dropped(self):
        assert parse_tal_records(b"+0\x14\x14\x00", ParseMode.STRICT) == []

    def test_empty_input(self):
        assert parse_tal_records(b"", ParseMode.STRICT) == []

    def test_multiple_texts_and_negative_onset(self):
        data = b"-2.5\x14Arousal\x14Leg movement\x14\x00"
        tals = parse_tal_records(data, ParseMode.STRICT)
        assert tals[0].onset_sec == -2.5
        assert tals[0].duration_sec is None
        assert tals[0].texts == ["Arousal", "Leg movement"]

    def test_padding_between_tals(self):
        data = b"+0\x14\x14\x00\x00\x00" + tal(5, 1, ["A"]) + b"\x00\x00"
        tals = parse_tal_records(data, ParseMode.STRICT)
        assert [t.texts for t in tals] == [["A"]]

    def test_malformed_strict_vs_lenient(self):
        bad = b"abc\x14Oops\x14\x00" + tal(1, None, ["Good"])
        with pytest.raises(EdfParseError) as exc:
            parse_tal_records(bad, ParseMode.STRICT)
        assert exc.value.code == "malformed_tal"
        warnings = []
        tals = parse_tal_records(bad, ParseMode.LENIENT, warnings)
        assert [t.texts for t in tals] == [["Good"]]
        assert warnings

    def test_unterminated_tal(self):
        with pytest.raises(EdfParseError):
            parse_tal_records(b"+1\x14Hang", ParseMode.STRICT)
        assert parse_tal_records(b"+1\x14Hang", ParseMode.LENIENT, []) == []

    def test_agrees_with_regex_oracle(self, rng):
        for i in range(100):
            stream, expected = random_tal_stream(rng)
            tals = parse_tal_records(stream, ParseMode.STRICT)
            got = [(t.onset_sec, t.duration_sec, tuple(t.texts)) for t in tals]
            assert got == expected, f"stream {i}: {stream!r}"


_TAL_ORACLE_RE = re.compile(
    rb"([+-][0-9]+(?:\.[0-9]+)?)(?:\x15([0-9]+(?:\.[0-9]+)?))?\x14((?:[^\x14\x15\x00]*\x14)*)\x00")


def oracle_parse_tals(stream: bytes):
    """Regex-based TAL interpretation, independent of the scanner under test."""
    out = []
    for onset, duration, texts_blob in _TAL_ORACLE_RE.findall(stream):
        texts = tuple(t.decode("utf-8")
                      for t in texts_blob.split(b"\x14")[:-1] if t) \
            if texts_blob else ()
        if texts:
            out.append((float(onset), float(duration) if duration else None, texts))
    return out


def random_tal_stream(rng, n_tals=None):
    """A well-formed TAL stream and its expected (onset, duration, texts)."""
    words = ["Apnea", "Hypopnea", "Arousal", "Desat 3%", "Sleep stage N2",
             "Lights off", "Movement (leg)", "Snore", "Stage R"]
    n_tals = n_tals or int(rng.integers(1, 8))
    buf = bytearray()
    expected = []
    for _ in range(n_tals):
        if rng.random() < 0.25:
            buf += timekeeping_tal(float(rng.integers(0, 100)))
        else:
            onset = round(float(rng.uniform(-50, 3600)), 2)
            duration = round(float(rng.uniform(0, 120)), 2) \
                if rng.random() < 0.6 else None
            texts = [words[rng.integers(0, len(words))]
                     for _ in range(rng.integers(1, 3))]
            buf += tal(onset, duration, texts)
            expected.append((float(f"{onset:+g}"),
                             float(f"{duration:g}") if duration is not None else None,
                             tuple(texts)))
        buf += b"\x00" * int(rng.integers(0, 3))
    return bytes(buf), expected


def test_oracle_agrees_on_spec_example():
    assert oracle_parse_tals(b"+30\x1515\x14Apnea\x14\x00") == \
        [(30.0, 15.0, ("Apnea",))]
    assert oracle_parse_tals(b"+0\x14\x14\x00") == []
