"""Walk a manifest's feature files: load, validate channels, pool.

Feature paths in a manifest are relative; callers supply the data root they
resolve against. The first loaded file fixes the manifest's channel count
and every later file must agree, so shape drift is caught at the offending
file instead of surfacing as a confusing downstream length error.
"""

from __future__ import annotations

from pathlib import Path
from typing import Iterator

import numpy as np

from .errors import ShapeError
from .stats import global_max_pool
from .tensor_io import Manifest, ManifestRecord, read_npy_file

__all__ = ["resolve_feature_path", "iter_tensors", "iter_pooled"]


def resolve_feature_path(data_root: str | Path, record: ManifestRecord) -> Path:
    return Path(data_root) / record.feature_path


def iter_tensors(
    manifest: Manifest,
    data_root: str | Path,
    split: str | None = None,
) -> Iterator[tuple[ManifestRecord, np.ndarray]]:
    """Yield ``(record, tensor)`` in manifest order, checking channel agreement.

    ``split`` filters records ("train"/"test"); None yields everything.
    Sets ``manifest.channel_count`` from the first file when unset.
    """
    for record in manifest.records:
        if split is not None and record.split != split:
            continue
        path = resolve_feature_path(data_root, record)
        tensor = read_npy_file(path)
        channels = int(tensor.shape[-1]) if tensor.ndim > 0 else 0
        if manifest.channel_count is None:
            manifest.channel_count = channels
        elif channels != manifest.channel_count:
            raise ShapeError(
                f"{path}: feature has {channels} channels, manifest expects "
                f"{manifest.channel_count}"
            )
        yield record, tensor


def iter_pooled(
    manifest: Manifest,
    data_root: str | Path,
    split: str | None = None,
) -> Iterator[tuple[ManifestRecord, np.ndarray]]:
    """Like :func:`iter_tensors` but yields the pooled per-channel maxima."""
    for record, tensor in iter_tensors(manifest, data_root, split):
        if tensor.ndim != 3:
            path = resolve_feature_path(data_root, record)
            raise ShapeError(f"{path}: expected rank-3 [H, W, C] feature, got {tensor.shape}")
        yield record, global_max_pool(tensor)
