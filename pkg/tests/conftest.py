import numpy as np
import pytest

from slf.models import (
    Annotation,
    AnnotationSet,
    ArrayAttributes,
    Dataset,
    SampleArray,
    Series,
    Subject,
    SubjectMetadata,
)

VALUE_TYPE_DTYPES = {
    "float32": np.float32,
    "float64": np.float64,
    "int16": np.int16,
    "int32": np.int32,
}

# Mostly small arrays (keeps 200-dataset sweeps fast) with the 0 and 1e5
# boundaries always reachable.
LENGTH_CHOICES = (0, 1, 7, 100, 1000, 10_000, 100_000)


def random_values(rng: np.random.Generator, n: int, value_type: str) -> np.ndarray:
    if value_type in ("float32", "float64"):
        return rng.standard_normal(n).astype(VALUE_TYPE_DTYPES[value_type])
    info = np.iinfo(VALUE_TYPE_DTYPES[value_type])
    return rng.integers(info.min, info.max, n, dtype=VALUE_TYPE_DTYPES[value_type],
                        endpoint=True)


def random_dataset(rng: np.random.Generator, name: str = "ds",
                   length_choices=LENGTH_CHOICES) -> Dataset:
    value_types = list(VALUE_TYPE_DTYPES)
    series = {}
    for si in range(rng.integers(1, 4)):
        sname = f"series_{si}"
        subjects = {}
        for ji in range(rng.integers(1, 6)):
            sid = f"subj_{ji:02d}"
            arrays = {}
            for ai in range(rng.integers(1, 4)):
                aname = f"sig_{ai}"
                vt = value_types[rng.integers(0, len(value_types))]
                n = int(length_choices[rng.integers(0, len(length_choices))])
                rate = float(rng.choice([1.0, 4.0, 64.0, 256.0]))
                attrs = ArrayAttributes(name=aname, sampling_rate=rate,
                                        unit="uV" if rng.random() < 0.5 else None,
                                        value_type=vt, n_samples=n,
                                        start_offset=float(rng.choice([0.0, 2.5])))
                arrays[aname] = SampleArray.from_values(
                    attrs, random_values(rng, n, vt))
            annotations = {}
            if rng.random() < 0.7:
                stages = ["W", "N1", "N2", "N3", "R"]
                anns = [Annotation(name=stages[k % 5], start_sec=30.0 * k,
                                   duration_sec=30.0)
                        for k in range(int(rng.integers(0, 4)))]
                annotations["hypnogram"] = AnnotationSet(
                    name="hypnogram", scorer="rater_1",
                    name_type="aasm_sleep_stage", annotations=anns)
            if rng.random() < 0.4:
                annotations["events"] = AnnotationSet(
                    name="events", name_type="free_text",
                    annotations=[Annotation(name="Lights off", start_sec=1.0,
                                            duration_sec=0.0,
                                            extra={"channel": "all"})])
            subjects[sid] = Subject(
                metadata=SubjectMetadata(
                    subject_id=sid,
                    recording_start=None,
                    age=float(rng.integers(18, 90)) if rng.random() < 0.5 else None,
                    sex=str(rng.choice(["M", "F"])) if rng.random() < 0.5 else None,
                    extra={"site": "lab_a"} if rng.random() < 0.3 else {},
                ),
                sample_arrays=arrays,
                annotations=annotations,
            )
        series[sname] = Series(name=sname, subjects=subjects)
    return Dataset(name=name, series=series)


def tiny_dataset(name: str = "d", value_type: str = "float32",
                 n: int = 16, rate: float = 8.0) -> Dataset:
    values = np.arange(n, dtype=VALUE_TYPE_DTYPES[value_type])
    attrs = ArrayAttributes(name="sig", sampling_rate=rate, unit="uV",
                            value_type=value_type, n_samples=n)
    subject = Subject(
        metadata=SubjectMetadata(subject_id="subj_01"),
        sample_arrays={"sig": SampleArray.from_values(attrs, values)},
        annotations={"hypnogram": AnnotationSet(
            name="hypnogram", name_type="aasm_sleep_stage",
            annotations=[Annotation(name="W", start_sec=0.0, duration_sec=n / rate)],
        )},
    )
    return Dataset(name=name, series={
        "series_a": Series(name="series_a", subjects={"subj_01": subject})})


@pytest.fixture
def rng():
    return np.random.default_rng(20240501)
