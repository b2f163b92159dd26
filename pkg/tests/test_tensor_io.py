"""Exchange-format parsing/writing, manifests, and per-class selection."""

import io
import json
import struct

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from infex import (
    DomainError,
    DuplicateId,
    FormatError,
    Manifest,
    ManifestRecord,
    RangeError,
    SchemaError,
    TruncatedFile,
    UnsupportedDtype,
    UnsupportedLayout,
    dump_manifest,
    load_manifest,
    parse_npy,
    select_top_n_per_class,
    write_npy,
)

# ---------------------------------------------------------------------------
# NPY parsing and writing
# ---------------------------------------------------------------------------


def reference_npy_bytes(arr: np.ndarray) -> bytes:
    """Serialize with the reference writer (independent of write_npy)."""
    buf = io.BytesIO()
    np.save(buf, arr)
    return buf.getvalue()


def test_parse_reference_written_f4_pair():
    data = reference_npy_bytes(np.array([1.0, 2.0], dtype=np.float32))
    arr = parse_npy(data)
    assert arr.shape == (2,)
    assert arr.dtype == np.dtype("<f4")
    assert arr.tolist() == [1.0, 2.0]


@pytest.mark.parametrize("dtype", ["<f4", "<f8"])
@pytest.mark.parametrize("shape", [(1,), (3,), (2, 3), (13, 13, 7), (2, 1, 2, 2)])
def test_parse_matches_reference_loader(dtype, shape):
    rng = np.random.default_rng(7)
    arr = (rng.random(shape) * 10).astype(dtype)
    data = reference_npy_bytes(arr)
    ours = parse_npy(data)
    ref = np.load(io.BytesIO(data))
    assert ours.dtype == ref.dtype
    assert np.array_equal(ours, ref)


def test_write_bytes_equal_reference_writer():
    arr = np.linspace(0.0, 1.0, 12, dtype=np.float64).reshape(3, 4)
    assert write_npy(arr, "f8") == reference_npy_bytes(arr)
    arr32 = arr.astype(np.float32)
    assert write_npy(arr32, "f4") == reference_npy_bytes(arr32)


def test_write_is_deterministic():
    arr = np.array([[0.1, 0.2], [0.3, 0.4]])
    assert write_npy(arr, "f8") == write_npy(arr, "f8")


def test_header_preamble_is_64_aligned_and_newline_terminated():
    data = write_npy(np.zeros((2, 2)), "f8")
    (header_len,) = struct.unpack("<H", data[8:10])
    assert (10 + header_len) % 64 == 0
    assert data[10 + header_len - 1 : 10 + header_len] == b"\n"


def test_f8_write_preserves_value_exactly():
    arr = parse_npy(write_npy(np.array([0.1]), "f8"))
    assert arr[0] == 0.1


def test_single_zero_round_trip():
    arr = parse_npy(write_npy(np.array([0.0]), "f8"))
    assert arr.shape == (1,) and arr[0] == 0.0


def test_f4_overflow_raises_range_error():
    with pytest.raises(RangeError):
        write_npy(np.array([1e39]), "f4")


def test_write_rejects_nan_and_inf():
    with pytest.raises(DomainError):
        write_npy(np.array([np.nan]), "f8")
    with pytest.raises(DomainError):
        write_npy(np.array([np.inf]), "f8")


def test_parse_bad_magic():
    with pytest.raises(FormatError):
        parse_npy(b"\x93NUMPX" + b"\x01\x00" + b"\x00" * 100)
    with pytest.raises(FormatError):
        parse_npy(b"")


def test_parse_rejects_other_versions():
    data = bytearray(write_npy(np.zeros(2), "f8"))
    data[6:8] = b"\x02\x00"
    with pytest.raises(FormatError):
        parse_npy(bytes(data))


def _raw_npy(header: str, payload: bytes) -> bytes:
    pad = 64 - ((10 + len(header) + 1) % 64)
    header = header + " " * pad + "\n"
    return b"\x93NUMPY\x01\x00" + struct.pack("<H", len(header)) + header.encode() + payload


def test_parse_fortran_order_rejected():
    data = _raw_npy(
        "{'descr': '<f8', 'fortran_order': True, 'shape': (2,), }", np.zeros(2).tobytes()
    )
    with pytest.raises(UnsupportedLayout):
        parse_npy(data)


@pytest.mark.parametrize("descr", ["'<i4'", "'>f4'", "'<f2'", "'|b1'"])
def test_parse_unsupported_dtypes(descr):
    data = _raw_npy(
        f"{{'descr': {descr}, 'fortran_order': False, 'shape': (2,), }}", b"\x00" * 16
    )
    with pytest.raises(UnsupportedDtype):
        parse_npy(data)


def test_parse_truncated_payload():
    data = write_npy(np.arange(4, dtype=np.float64), "f8")
    with pytest.raises(TruncatedFile):
        parse_npy(data[:-8])
    with pytest.raises(TruncatedFile):
        parse_npy(data + b"\x00" * 8)


def test_parse_rejects_nonfinite_payload():
    data = _raw_npy(
        "{'descr': '<f8', 'fortran_order': False, 'shape': (1,), }",
        np.array([np.nan]).tobytes(),
    )
    with pytest.raises(DomainError):
        parse_npy(data)


def test_parse_rejects_zero_dimension():
    data = reference_npy_bytes(np.zeros((0,), dtype=np.float64))
    with pytest.raises(FormatError):
        parse_npy(data)


def test_parse_rejects_garbled_header():
    data = _raw_npy("{'descr': '<f8', 'fortran_order': False", b"")
    with pytest.raises(FormatError):
        parse_npy(data)


def test_parse_rejects_extra_header_keys():
    data = _raw_npy(
        "{'descr': '<f8', 'fortran_order': False, 'shape': (1,), 'x': 1, }",
        np.zeros(1).tobytes(),
    )
    with pytest.raises(FormatError):
        parse_npy(data)


@st.composite
def float_tensors(draw, width=64):
    shape = tuple(draw(st.lists(st.integers(1, 4), min_size=0, max_size=3)))
    n = 1
    for dim in shape:
        n *= dim
    elements = st.floats(allow_nan=False, allow_infinity=False, width=width)
    values = draw(st.lists(elements, min_size=n, max_size=n))
    dtype = np.float64 if width == 64 else np.float32
    return np.array(values, dtype=dtype).reshape(shape)


@settings(max_examples=200)
@given(float_tensors(width=64))
def test_round_trip_f8_exact(arr):
    back = parse_npy(write_npy(arr, "f8"))
    assert back.shape == arr.shape
    assert back.dtype == np.dtype("<f8")
    assert np.array_equal(back, arr)


@settings(max_examples=200)
@given(float_tensors(width=32))
def test_round_trip_f4_exact_for_representable(arr):
    back = parse_npy(write_npy(arr, "f4"))
    assert back.dtype == np.dtype("<f4")
    assert np.array_equal(back, arr.astype(np.float32))


# ---------------------------------------------------------------------------
# Manifests
# ---------------------------------------------------------------------------


def make_line(**overrides) -> str:
    obj = {
        "id": "ex1",
        "class": "dog",
        "feature": "feats/ex1.npy",
        "prob": 0.9,
        "split": "train",
    }
    obj.update(overrides)
    return json.dumps(obj)


def test_empty_manifest():
    assert len(load_manifest(b"")) == 0
    assert len(load_manifest("\n\n")) == 0


def test_manifest_preserves_order():
    text = "\n".join(make_line(id=f"ex{i}", prob=0.1 * i) for i in range(3))
    manifest = load_manifest(text)
    assert [r.example_id for r in manifest.records] == ["ex0", "ex1", "ex2"]
    assert manifest.records[1].softmax_prob == pytest.approx(0.1)


def test_manifest_duplicate_id():
    text = make_line() + "\n" + make_line(prob=0.5)
    with pytest.raises(DuplicateId):
        load_manifest(text)


def test_manifest_missing_field():
    obj = json.loads(make_line())
    del obj["prob"]
    with pytest.raises(SchemaError):
        load_manifest(json.dumps(obj))


def test_manifest_unknown_field():
    with pytest.raises(SchemaError):
        load_manifest(make_line(extra=1))


def test_manifest_prob_out_of_range():
    with pytest.raises(ValueError):
        load_manifest(make_line(prob=1.5))
    with pytest.raises(ValueError):
        load_manifest(make_line(prob=-0.1))


def test_manifest_bad_split():
    with pytest.raises(SchemaError):
        load_manifest(make_line(split="validation"))


def test_manifest_not_json():
    with pytest.raises(SchemaError):
        load_manifest("not json at all")
    with pytest.raises(SchemaError):
        load_manifest('["not", "an", "object"]')


def test_manifest_optional_prediction_field():
    manifest = load_manifest(make_line(split="test", pred="cat"))
    assert manifest.records[0].predicted_class == "cat"


def test_manifest_dump_load_round_trip():
    text = (
        make_line()
        + "\n"
        + make_line(id="ex2", prob=0.25, split="test", pred="cat")
        + "\n"
    )
    manifest = load_manifest(text)
    assert dump_manifest(manifest) == text
    assert load_manifest(dump_manifest(manifest)) == manifest


# ---------------------------------------------------------------------------
# Per-class selection
# ---------------------------------------------------------------------------


def record(example_id, class_label="c", prob=0.5, split="train"):
    return ManifestRecord(
        example_id=example_id,
        class_label=class_label,
        feature_path=f"{example_id}.npy",
        softmax_prob=prob,
        split=split,
    )


def select_oracle(records, n):
    """Brute-force per-class sort-and-truncate, independent of the library."""
    classes = []
    for rec in records:
        if rec.class_label not in classes:
            classes.append(rec.class_label)
    out = []
    for cls in classes:
        group = [r for r in records if r.class_label == cls]
        group.sort(key=lambda r: (-r.softmax_prob, r.example_id))
        out.extend(group[:n])
    return out


def test_select_spec_example():
    manifest = Manifest(
        records=[record("a", prob=0.9), record("b", prob=0.5), record("c", prob=0.7)]
    )
    result = select_top_n_per_class(manifest, 2)
    assert [r.example_id for r in result.records] == ["a", "c"]


def test_select_keeps_small_classes_whole():
    manifest = Manifest(records=[record("a", prob=0.9), record("b", prob=0.5)])
    result = select_top_n_per_class(manifest, 10)
    assert len(result) == 2


def test_select_breaks_ties_by_ascending_id():
    manifest = Manifest(
        records=[record("b", prob=0.5), record("a", prob=0.5), record("c", prob=0.5)]
    )
    result = select_top_n_per_class(manifest, 2)
    assert [r.example_id for r in result.records] == ["a", "b"]


def test_select_orders_classes_by_first_appearance():
    manifest = Manifest(
        records=[
            record("x1", class_label="x", prob=0.1),
            record("y1", class_label="y", prob=0.9),
            record("x2", class_label="x", prob=0.8),
        ]
    )
    result = select_top_n_per_class(manifest, 5)
    assert [r.example_id for r in result.records] == ["x2", "x1", "y1"]


def test_select_rejects_bad_n():
    with pytest.raises(ValueError):
        select_top_n_per_class(Manifest(), 0)


def random_manifest(rng, size=1000, classes=7):
    labels = [f"class{i}" for i in range(classes)]
    records = []
    for i in range(size):
        records.append(
            record(
                f"ex{i:04d}",
                class_label=labels[int(rng.integers(classes))],
                # Coarse grid so probability ties actually occur.
                prob=float(rng.integers(0, 20)) / 20.0,
            )
        )
    return Manifest(records=records)


def test_select_matches_oracle_on_random_manifest():
    rng = np.random.default_rng(42)
    manifest = random_manifest(rng)
    for n in (1, 10, 100, 2000):
        result = select_top_n_per_class(manifest, n)
        assert result.records == select_oracle(manifest.records, n)


def test_select_idempotent_and_sized():
    rng = np.random.default_rng(43)
    manifest = random_manifest(rng)
    n = 10
    once = select_top_n_per_class(manifest, n)
    twice = select_top_n_per_class(once, n)
    assert once.records == twice.records

    per_class: dict[str, int] = {}
    for rec in manifest.records:
        per_class[rec.class_label] = per_class.get(rec.class_label, 0) + 1
    assert len(once) == sum(min(n, count) for count in per_class.values())
