"""Per-class frequent-feature table built from binarized training features.

For each class, summing its binary activation patterns counts how often
every channel fired; the k most frequent channels become that class's
frequent-feature bit vector, kept in a lookup table keyed by class label.

Selection is deterministic: ties on count break toward the lower channel
index, and channels that never fired for a class are excluded even when
that leaves fewer than k bits set (a channel that never activates cannot
be called frequent). Counts are exact integers, so ordering is never
subject to float rounding.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Iterable, Mapping

import numpy as np

from .errors import DomainError, SchemaError, ShapeError, UnknownClass

__all__ = [
    "ClassCounts",
    "ClassFrequentTable",
    "accumulate_class_counts",
    "top_k_select",
    "build_class_frequent_table",
    "lookup",
    "table_to_json",
    "table_from_json",
    "counts_to_json",
]


@dataclass
class ClassCounts:
    """How many training samples of one class activated each channel."""

    class_label: str
    counts: np.ndarray
    sample_count: int

    def __post_init__(self) -> None:
        self.counts = np.asarray(self.counts, dtype=np.int64)
        if self.counts.ndim != 1:
            raise ShapeError(f"counts must be a vector, got shape {self.counts.shape}")
        if np.any(self.counts < 0):
            raise DomainError("activation counts cannot be negative")
        if self.sample_count < 0:
            raise ValueError(f"sample_count cannot be negative, got {self.sample_count}")
        if np.any(self.counts > self.sample_count):
            raise DomainError("a channel cannot be active more often than there are samples")


@dataclass
class ClassFrequentTable:
    """class label -> frequent-feature bits, plus the k used to build it."""

    k: int
    channels: int
    entries: dict[str, np.ndarray] = field(default_factory=dict)

    def __post_init__(self) -> None:
        if self.k < 1:
            raise ValueError(f"k must be >= 1, got {self.k}")
        if self.channels < 1:
            raise ValueError(f"channels must be >= 1, got {self.channels}")
        frozen = {}
        for label, bits in self.entries.items():
            bits = np.array(bits, dtype=np.uint8)  # owned copy; frozen below
            if bits.shape != (self.channels,):
                raise ShapeError(
                    f"entry {label!r} has shape {bits.shape}, expected ({self.channels},)"
                )
            if np.any(bits > 1):
                raise DomainError(f"entry {label!r} is not a 0/1 vector")
            bits.flags.writeable = False
            frozen[label] = bits
        self.entries = frozen

    @property
    def class_labels(self) -> list[str]:
        return list(self.entries)


def accumulate_class_counts(
    labeled_bits: Iterable[tuple[str, np.ndarray]],
) -> dict[str, ClassCounts]:
    """Sum binary activation patterns per class.

    Accumulation is a commutative integer merge, so partial counts computed
    in parallel and added elementwise give identical results; this sequential
    fold is the reference. Classes appear in first-encounter order.
    """
    totals: dict[str, np.ndarray] = {}
    samples: dict[str, int] = {}
    channels: int | None = None
    for label, bits in labeled_bits:
        bits = np.asarray(bits)
        if bits.ndim != 1:
            raise ShapeError(f"binary feature must be a vector, got shape {bits.shape}")
        if channels is None:
            channels = bits.size
        elif bits.size != channels:
            raise ShapeError(f"inconsistent feature length: expected {channels}, got {bits.size}")
        if np.any((bits != 0) & (bits != 1)):
            raise DomainError("binary feature contains values other than 0/1")
        if label not in totals:
            totals[label] = np.zeros(channels, dtype=np.int64)
            samples[label] = 0
        totals[label] += bits.astype(np.int64)
        samples[label] += 1

    return {
        label: ClassCounts(class_label=label, counts=counts, sample_count=samples[label])
        for label, counts in totals.items()
    }


def top_k_select(counts: ClassCounts | np.ndarray, k: int) -> np.ndarray:
    """Mark the k channels with the largest counts.

    Ties break toward the lower channel index; channels with count 0 are
    never selected, so the result can have fewer than k bits set.
    """
    if k < 1:
        raise ValueError(f"k must be >= 1, got {k}")
    arr = counts.counts if isinstance(counts, ClassCounts) else np.asarray(counts, dtype=np.int64)
    if arr.ndim != 1:
        raise ShapeError(f"counts must be a vector, got shape {arr.shape}")
    # Stable sort on descending count keeps ascending channel order for ties;
    # zero-count channels sort last, so positives form a prefix.
    order = np.argsort(-arr, kind="stable")
    positive = int(np.count_nonzero(arr > 0))
    bits = np.zeros(arr.size, dtype=np.uint8)
    bits[order[: min(k, positive)]] = 1
    return bits


def build_class_frequent_table(
    counts: Mapping[str, ClassCounts], k: int
) -> ClassFrequentTable:
    """Run top-k selection for every class and record k alongside the rows."""
    if not counts:
        raise ValueError("cannot build a table from an empty counts map")
    sizes = {cc.counts.size for cc in counts.values()}
    if len(sizes) != 1:
        raise ShapeError(f"classes disagree on channel count: {sorted(sizes)}")
    channels = sizes.pop()
    entries = {label: top_k_select(cc, k) for label, cc in counts.items()}
    return ClassFrequentTable(k=k, channels=channels, entries=entries)


def lookup(table: ClassFrequentTable, predicted_class: str) -> np.ndarray:
    """Fetch the frequent-feature bits for a predicted class label."""
    try:
        return table.entries[predicted_class]
    except KeyError:
        raise UnknownClass(
            f"class {predicted_class!r} has no entry in the frequent-feature table"
        ) from None


def _bits_to_string(bits: np.ndarray) -> str:
    return "".join("1" if b else "0" for b in bits)


def table_to_json(table: ClassFrequentTable, gamma: float) -> str:
    """Serialize the table; rows are fixed-length 0/1 strings, channel 0 leftmost.

    Classes are emitted sorted by label so equal tables always produce
    byte-identical files regardless of build order.
    """
    obj = {
        "k": table.k,
        "channels": table.channels,
        "gamma": gamma,
        "classes": {
            label: _bits_to_string(table.entries[label]) for label in sorted(table.entries)
        },
    }
    return json.dumps(obj) + "\n"


def table_from_json(text: str) -> tuple[ClassFrequentTable, float]:
    """Inverse of :func:`table_to_json`; returns ``(table, gamma)``."""
    try:
        obj = json.loads(text)
    except json.JSONDecodeError as exc:
        raise SchemaError(f"table file is not valid JSON: {exc}") from exc
    if not isinstance(obj, dict):
        raise SchemaError("table file must be a JSON object")
    missing = [key for key in ("k", "channels", "gamma", "classes") if key not in obj]
    if missing:
        raise SchemaError(f"table file missing field(s) {', '.join(missing)}")
    channels = obj["channels"]
    if not isinstance(channels, int) or isinstance(channels, bool):
        raise SchemaError(f"table 'channels' must be an integer, got {channels!r}")
    classes = obj["classes"]
    if not isinstance(classes, dict):
        raise SchemaError("table 'classes' must be an object")
    entries: dict[str, np.ndarray] = {}
    for label, bitstring in classes.items():
        if not isinstance(bitstring, str) or len(bitstring) != channels:
            raise SchemaError(
                f"row {label!r} must be a {channels}-character bit string, got {bitstring!r}"
            )
        if set(bitstring) - {"0", "1"}:
            raise SchemaError(f"row {label!r} contains characters other than 0/1")
        entries[label] = np.frombuffer(bitstring.encode("ascii"), dtype=np.uint8) - ord("0")
    table = ClassFrequentTable(k=int(obj["k"]), channels=int(channels), entries=entries)
    gamma = float(obj["gamma"])
    if not gamma > 0:
        raise SchemaError(f"table 'gamma' must be positive, got {gamma}")
    return table, gamma


def counts_to_json(counts: Mapping[str, ClassCounts]) -> str:
    """Audit-trail serialization of the raw per-class activation counts."""
    obj = {
        label: {
            "counts": [int(c) for c in counts[label].counts],
            "samples": counts[label].sample_count,
        }
        for label in sorted(counts)
    }
    return json.dumps(obj) + "\n"
