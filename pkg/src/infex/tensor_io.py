"""Tensor exchange format, dataset manifests, and per-class example selection.

The exchange format is NPY v1.0 restricted to little-endian ``f4``/``f8``
row-major arrays: every deep-learning framework can emit it, and the
restriction keeps the parser small and the error surface explicit. Parsing
is strict by design; a file that deviates from the documented layout raises
a typed error instead of being guessed at.

Manifests are UTF-8 JSON-lines files, one record per line::

    {"id": "...", "class": "...", "feature": "relative/path.npy", "prob": 0.97, "split": "train"}

plus an optional ``"pred"`` key carrying the model's predicted class for
test-split records.
"""

from __future__ import annotations

import ast
import json
import struct
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Iterable

import numpy as np

from .errors import (
    DomainError,
    DuplicateId,
    FormatError,
    RangeError,
    SchemaError,
    ShapeError,
    TruncatedFile,
    UnsupportedDtype,
    UnsupportedLayout,
)

MAGIC = b"\x93NUMPY"
VERSION = b"\x01\x00"
HEADER_ALIGN = 64

_DTYPES = {"f4": np.dtype("<f4"), "f8": np.dtype("<f8")}

__all__ = [
    "Manifest",
    "ManifestRecord",
    "parse_npy",
    "write_npy",
    "read_npy_file",
    "write_npy_file",
    "load_manifest",
    "dump_manifest",
    "select_top_n_per_class",
    "validate_tensor",
]


def validate_tensor(arr: np.ndarray) -> np.ndarray:
    """Check the tensor contract: float array, positive dims, finite values.

    Returns the array unchanged so calls can be chained.
    """
    arr = np.asarray(arr)
    if arr.dtype.kind != "f":
        raise DomainError(f"tensor elements must be floats, got dtype {arr.dtype}")
    if any(dim < 1 for dim in arr.shape):
        raise ShapeError(f"tensor dimensions must be positive, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise DomainError("tensor contains NaN or Inf")
    return arr


def parse_npy(data: bytes) -> np.ndarray:
    """Parse exchange-format bytes into a float array.

    Accepts exactly NPY v1.0 with little-endian ``f4``/``f8`` elements in
    row-major order. The returned array owns its memory (safe to mutate).

    Raises:
        FormatError: magic, version, or header is malformed.
        UnsupportedLayout: header declares column-major order.
        UnsupportedDtype: element type is not ``<f4`` or ``<f8``.
        TruncatedFile: payload length does not match the declared shape.
        DomainError: payload contains NaN or Inf.
    """
    if len(data) < 10:
        raise FormatError("file shorter than the fixed 10-byte preamble")
    if data[:6] != MAGIC:
        raise FormatError("bad magic; not an NPY file")
    if data[6:8] != VERSION:
        raise FormatError(
            f"unsupported NPY version {data[6]}.{data[7]}; only 1.0 is accepted"
        )
    (header_len,) = struct.unpack("<H", data[8:10])
    if len(data) < 10 + header_len:
        raise FormatError("declared header length exceeds file size")
    header_bytes = data[10 : 10 + header_len]
    if not header_bytes.endswith(b"\n"):
        raise FormatError("header is not newline-terminated")

    try:
        header = ast.literal_eval(header_bytes.decode("latin1"))
    except (ValueError, SyntaxError) as exc:
        raise FormatError(f"header is not a Python dict literal: {exc}") from exc
    if not isinstance(header, dict) or set(header) != {"descr", "fortran_order", "shape"}:
        raise FormatError(f"header keys must be descr/fortran_order/shape, got {header!r}")

    if header["fortran_order"] is not False:
        if header["fortran_order"] is True:
            raise UnsupportedLayout("column-major (fortran_order) files are not supported")
        raise FormatError(f"fortran_order must be a bool, got {header['fortran_order']!r}")

    descr = header["descr"]
    if descr not in ("<f4", "<f8"):
        raise UnsupportedDtype(f"dtype {descr!r} not supported; expected '<f4' or '<f8'")
    dtype = np.dtype(descr)

    shape = header["shape"]
    if not isinstance(shape, tuple) or not all(
        isinstance(dim, int) and not isinstance(dim, bool) for dim in shape
    ):
        raise FormatError(f"shape must be a tuple of ints, got {shape!r}")
    if any(dim < 1 for dim in shape):
        raise FormatError(f"tensor dimensions must be positive, got shape {shape}")

    count = 1
    for dim in shape:
        count *= dim
    payload = data[10 + header_len :]
    expected = count * dtype.itemsize
    if len(payload) != expected:
        raise TruncatedFile(
            f"payload is {len(payload)} bytes, shape {shape} requires {expected}"
        )

    arr = np.frombuffer(payload, dtype=dtype).reshape(shape).copy()
    if not np.all(np.isfinite(arr)):
        raise DomainError("tensor contains NaN or Inf")
    return arr


def write_npy(arr: np.ndarray, dtype: str = "f8") -> bytes:
    """Serialize a float array to exchange-format bytes.

    Output is deterministic: identical input always yields identical bytes,
    and the result is byte-compatible with the reference NPY v1.0 writer.

    Raises:
        RangeError: ``dtype='f4'`` requested but a value overflows f4.
    """
    if dtype not in _DTYPES:
        raise ValueError(f"dtype must be 'f4' or 'f8', got {dtype!r}")
    arr = validate_tensor(arr)
    target = _DTYPES[dtype]
    with np.errstate(over="ignore"):
        out = np.ascontiguousarray(arr, dtype=target)
    if not np.all(np.isfinite(out)):
        raise RangeError("value outside f4 range; write as f8 instead")

    header = (
        f"{{'descr': '{target.str}', 'fortran_order': False, "
        f"'shape': {tuple(int(d) for d in arr.shape)!r}, }}"
    )
    # Pad so the whole preamble (magic + version + length + header + newline)
    # is a multiple of 64, matching the reference writer byte for byte.
    pad = HEADER_ALIGN - ((10 + len(header) + 1) % HEADER_ALIGN)
    header = header + " " * pad + "\n"
    return MAGIC + VERSION + struct.pack("<H", len(header)) + header.encode("latin1") + out.tobytes()


def read_npy_file(path: str | Path) -> np.ndarray:
    return parse_npy(Path(path).read_bytes())


def write_npy_file(path: str | Path, arr: np.ndarray, dtype: str = "f8") -> None:
    Path(path).write_bytes(write_npy(arr, dtype))


@dataclass(frozen=True)
class ManifestRecord:
    """One dataset example: id, label, feature file, and selection score."""

    example_id: str
    class_label: str
    feature_path: str
    softmax_prob: float
    split: str
    predicted_class: str | None = None


@dataclass
class Manifest:
    """Ordered dataset index. ``channel_count`` is set once features are loaded."""

    records: list[ManifestRecord] = field(default_factory=list)
    channel_count: int | None = None

    def __len__(self) -> int:
        return len(self.records)


_REQUIRED_FIELDS = ("id", "class", "feature", "prob", "split")
_OPTIONAL_FIELDS = ("pred",)
_SPLITS = ("train", "test")


def _parse_record(line: str, lineno: int) -> ManifestRecord:
    try:
        obj = json.loads(line)
    except json.JSONDecodeError as exc:
        raise SchemaError(f"line {lineno}: not valid JSON: {exc}") from exc
    if not isinstance(obj, dict):
        raise SchemaError(f"line {lineno}: record must be a JSON object")

    missing = [key for key in _REQUIRED_FIELDS if key not in obj]
    if missing:
        raise SchemaError(f"line {lineno}: missing field(s) {', '.join(missing)}")
    unknown = [key for key in obj if key not in _REQUIRED_FIELDS + _OPTIONAL_FIELDS]
    if unknown:
        raise SchemaError(f"line {lineno}: unknown field(s) {', '.join(unknown)}")

    for key in ("id", "class", "feature", "split"):
        if not isinstance(obj[key], str) or not obj[key]:
            raise SchemaError(f"line {lineno}: field {key!r} must be a non-empty string")
    prob = obj["prob"]
    if isinstance(prob, bool) or not isinstance(prob, (int, float)):
        raise SchemaError(f"line {lineno}: field 'prob' must be a number")
    if not 0.0 <= prob <= 1.0:
        raise ValueError(f"line {lineno}: prob {prob} outside [0, 1]")
    if obj["split"] not in _SPLITS:
        raise SchemaError(f"line {lineno}: split must be one of {_SPLITS}, got {obj['split']!r}")
    pred = obj.get("pred")
    if pred is not None and (not isinstance(pred, str) or not pred):
        raise SchemaError(f"line {lineno}: field 'pred' must be a non-empty string")

    return ManifestRecord(
        example_id=obj["id"],
        class_label=obj["class"],
        feature_path=obj["feature"],
        softmax_prob=float(prob),
        split=obj["split"],
        predicted_class=pred,
    )


def load_manifest(data: bytes | str) -> Manifest:
    """Parse a JSON-lines manifest, preserving file order.

    Raises:
        SchemaError: malformed line, missing/unknown field, bad field type.
        DuplicateId: two records share an example id.
        ValueError: softmax probability outside [0, 1].
    """
    if isinstance(data, bytes):
        try:
            data = data.decode("utf-8")
        except UnicodeDecodeError as exc:
            raise SchemaError(f"manifest is not valid UTF-8: {exc}") from exc

    records: list[ManifestRecord] = []
    seen: set[str] = set()
    for lineno, line in enumerate(data.splitlines(), start=1):
        if not line.strip():
            continue
        record = _parse_record(line, lineno)
        if record.example_id in seen:
            raise DuplicateId(f"line {lineno}: duplicate example id {record.example_id!r}")
        seen.add(record.example_id)
        records.append(record)
    return Manifest(records=records)


def dump_manifest(manifest: Manifest) -> str:
    """Serialize a manifest back to JSON lines (inverse of load_manifest)."""
    lines = []
    for rec in manifest.records:
        obj: dict = {
            "id": rec.example_id,
            "class": rec.class_label,
            "feature": rec.feature_path,
            "prob": rec.softmax_prob,
            "split": rec.split,
        }
        if rec.predicted_class is not None:
            obj["pred"] = rec.predicted_class
        lines.append(json.dumps(obj, ensure_ascii=False))
    return "".join(line + "\n" for line in lines)


def select_top_n_per_class(manifest: Manifest, n: int) -> Manifest:
    """Keep the ``n`` highest-probability records of each class.

    Classes stay in first-appearance order; within a class, records are
    ordered by descending probability with ties broken by ascending
    example id, so output is deterministic and the operation idempotent.
    Classes with fewer than ``n`` records keep everything they have.
    """
    if n < 1:
        raise ValueError(f"n must be >= 1, got {n}")
    by_class: dict[str, list[ManifestRecord]] = {}
    for rec in manifest.records:
        by_class.setdefault(rec.class_label, []).append(rec)

    selected: list[ManifestRecord] = []
    for recs in by_class.values():
        recs = sorted(recs, key=lambda r: (-r.softmax_prob, r.example_id))
        selected.extend(recs[:n])
    return replace(manifest, records=selected)
