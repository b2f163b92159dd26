"""Per-image feature transform: pool, mean-normalize, threshold.

An intermediate activation volume ``[H, W, C]`` is reduced to a length-C
vector by global max pooling, scaled channel-wise by the training-set mean
so channels with different dynamic ranges become comparable, and thresholded
into a binary activation pattern.

Normalization is division, ``z[j] / (mean[j] + epsilon)``: equalizing scale
is what makes channels comparable, and the epsilon guard keeps dead channels
(mean 0) at exactly 0 instead of dividing by zero. The threshold comparison
is strict, so a channel sitting exactly at the threshold is inactive.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from typing import Iterable

import numpy as np

from .errors import DomainError, EmptyDataset, SchemaError, ShapeError

DEFAULT_EPSILON = 1e-12
DEFAULT_GAMMA = 1.0

__all__ = [
    "DEFAULT_EPSILON",
    "DEFAULT_GAMMA",
    "NormStats",
    "global_max_pool",
    "compute_mean_stats",
    "normalize",
    "binarize",
    "stats_to_json",
    "stats_from_json",
]


@dataclass
class NormStats:
    """Per-channel training means used for mean normalization."""

    means: np.ndarray
    sample_count: int
    epsilon: float

    def __post_init__(self) -> None:
        self.means = np.asarray(self.means, dtype=np.float64)
        if self.means.ndim != 1 or self.means.size < 1:
            raise ShapeError(f"means must be a non-empty vector, got shape {self.means.shape}")
        if np.any(self.means < 0) or not np.all(np.isfinite(self.means)):
            raise DomainError("means must be finite and non-negative")
        if self.sample_count < 1:
            raise ValueError(f"sample_count must be >= 1, got {self.sample_count}")
        if not self.epsilon > 0:
            raise ValueError(f"epsilon must be positive, got {self.epsilon}")

    @property
    def channels(self) -> int:
        return self.means.size


def global_max_pool(tensor: np.ndarray) -> np.ndarray:
    """Reduce an ``[H, W, C]`` activation volume to its per-channel maxima.

    Elements must be non-negative (post-activation values); the result is a
    float64 vector of length C.
    """
    tensor = np.asarray(tensor)
    if tensor.ndim != 3:
        raise ShapeError(f"expected rank-3 [H, W, C] tensor, got shape {tensor.shape}")
    if np.any(tensor < 0):
        raise DomainError("activation volume contains negative elements")
    return tensor.max(axis=(0, 1)).astype(np.float64)


def compute_mean_stats(pooled: Iterable[np.ndarray], epsilon: float = DEFAULT_EPSILON) -> NormStats:
    """Fold a stream of pooled vectors into per-channel arithmetic means.

    Accepts length-C vectors or ``(N, C)`` chunks of them; either way the
    fold is row by row in stream order with a float64 accumulator, so the
    result is bitwise independent of how the stream was chunked.

    Raises:
        EmptyDataset: the stream yields no vectors.
        ShapeError: vectors disagree on length.
    """
    if not epsilon > 0:
        raise ValueError(f"epsilon must be positive, got {epsilon}")

    total: np.ndarray | None = None
    count = 0
    for item in pooled:
        arr = np.asarray(item, dtype=np.float64)
        if arr.ndim == 1:
            rows = arr[np.newaxis, :]
        elif arr.ndim == 2:
            rows = arr
        else:
            raise ShapeError(f"pooled items must be rank 1 or 2, got shape {arr.shape}")
        if not np.all(np.isfinite(rows)) or np.any(rows < 0):
            raise DomainError("pooled values must be finite and non-negative")
        for row in rows:
            if total is None:
                total = np.zeros(row.size, dtype=np.float64)
            elif row.size != total.size:
                raise ShapeError(
                    f"inconsistent vector length: expected {total.size}, got {row.size}"
                )
            total += row
            count += 1

    if total is None:
        raise EmptyDataset("cannot compute means over an empty stream")
    return NormStats(means=total / count, sample_count=count, epsilon=epsilon)


def normalize(pooled: np.ndarray, stats: NormStats) -> np.ndarray:
    """Scale each channel by its training mean: ``z[j] / (mean[j] + epsilon)``."""
    pooled = np.asarray(pooled, dtype=np.float64)
    if pooled.ndim != 1 or pooled.size != stats.channels:
        raise ShapeError(
            f"pooled vector length {pooled.shape} does not match {stats.channels} channels"
        )
    return pooled / (stats.means + stats.epsilon)


def binarize(normalized: np.ndarray, gamma: float) -> np.ndarray:
    """Threshold a normalized vector into 0/1 bits; strictly above gamma is active."""
    if not gamma > 0:
        raise ValueError(f"gamma must be positive, got {gamma}")
    normalized = np.asarray(normalized)
    return (normalized > gamma).astype(np.uint8)


def stats_to_json(stats: NormStats, gamma: float = DEFAULT_GAMMA) -> str:
    """Serialize stats plus the threshold they are meant to be used with."""
    obj = {
        "means": [float(m) for m in stats.means],
        "count": stats.sample_count,
        "epsilon": stats.epsilon,
        "gamma": gamma,
        "channels": stats.channels,
    }
    return json.dumps(obj) + "\n"


def stats_from_json(text: str) -> tuple[NormStats, float]:
    """Inverse of :func:`stats_to_json`; returns ``(stats, gamma)``."""
    try:
        obj = json.loads(text)
    except json.JSONDecodeError as exc:
        raise SchemaError(f"stats file is not valid JSON: {exc}") from exc
    if not isinstance(obj, dict):
        raise SchemaError("stats file must be a JSON object")
    missing = [k for k in ("means", "count", "epsilon", "gamma", "channels") if k not in obj]
    if missing:
        raise SchemaError(f"stats file missing field(s) {', '.join(missing)}")
    means = obj["means"]
    if not isinstance(means, list):
        raise SchemaError("stats 'means' must be a list")
    if obj["channels"] != len(means):
        raise SchemaError(
            f"stats 'channels' is {obj['channels']} but 'means' has {len(means)} entries"
        )
    stats = NormStats(
        means=np.asarray(means, dtype=np.float64),
        sample_count=int(obj["count"]),
        epsilon=float(obj["epsilon"]),
    )
    gamma = float(obj["gamma"])
    if not gamma > 0:
        raise SchemaError(f"stats 'gamma' must be positive, got {gamma}")
    return stats, gamma
