"""Annotation-assist report and dataset-level explanation metrics.

Writing the attribute lexicon is human work: an annotator looks at the
training examples that drive each channel hardest and names the visual
concept they share. The report here surfaces exactly that, per channel,
as a static markdown document, plus which classes' frequent sets include
the channel (those are the channels worth annotating first).

The evaluation summary is a small set of popcount/coverage aggregates over
a test manifest, meant for regression checks on a built pipeline rather
than as a fidelity claim.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, TextIO

import numpy as np

from .classmodel import ClassFrequentTable, lookup
from .dataset import iter_pooled
from .errors import UnknownClass
from .explain import AttributeLexicon, explainable_feature
from .stats import NormStats, binarize, normalize
from .tensor_io import Manifest

DEFAULT_EXAMPLES_PER_CHANNEL = 20

__all__ = [
    "DEFAULT_EXAMPLES_PER_CHANNEL",
    "ChannelRanking",
    "EvalSummary",
    "ClassEval",
    "rank_channel_examples",
    "rank_all_channels",
    "emit_annotation_report",
    "evaluate",
    "eval_summary_to_json",
]


@dataclass
class ChannelRanking:
    """Top training examples for one channel, strongest activation first."""

    channel: int
    examples: list[tuple[str, float]]


def _rank_channels(
    manifest: Manifest,
    stats: NormStats,
    channels: Iterable[int],
    m: int,
    data_root: str | Path,
) -> list[ChannelRanking]:
    """One pass over the training features, then per-channel sort-and-truncate."""
    channels = list(channels)
    for channel in channels:
        if not 0 <= channel < stats.channels:
            raise IndexError(f"channel {channel} outside [0, {stats.channels})")
    if m < 1:
        raise ValueError(f"m must be >= 1, got {m}")

    ids: list[str] = []
    activations: list[np.ndarray] = []
    for record, pooled in iter_pooled(manifest, data_root, split="train"):
        ids.append(record.example_id)
        activations.append(normalize(pooled, stats))

    rankings = []
    for channel in channels:
        scored = [(ids[i], float(vec[channel])) for i, vec in enumerate(activations)]
        scored.sort(key=lambda pair: (-pair[1], pair[0]))
        rankings.append(ChannelRanking(channel=channel, examples=scored[:m]))
    return rankings


def rank_channel_examples(
    manifest: Manifest,
    stats: NormStats,
    channel: int,
    m: int = DEFAULT_EXAMPLES_PER_CHANNEL,
    data_root: str | Path = ".",
) -> ChannelRanking:
    """The m training examples with the largest normalized activation on a channel.

    Ties break by ascending example id; fewer than m come back when the
    training split is smaller.
    """
    return _rank_channels(manifest, stats, [channel], m, data_root)[0]


def rank_all_channels(
    manifest: Manifest,
    stats: NormStats,
    m: int = DEFAULT_EXAMPLES_PER_CHANNEL,
    data_root: str | Path = ".",
) -> list[ChannelRanking]:
    """Rankings for every channel, loading each feature file only once."""
    return _rank_channels(manifest, stats, range(stats.channels), m, data_root)


def emit_annotation_report(
    rankings: list[ChannelRanking],
    table: ClassFrequentTable,
    out: TextIO,
    url_prefix: str | None = None,
) -> None:
    """Write the markdown document an annotator reads before writing the lexicon.

    One section per channel, ordered by channel index; each section lists the
    top-activating training examples and the classes whose frequent set
    includes the channel. Output contains no timestamps or other run-varying
    content: identical inputs give byte-identical reports.
    """
    out.write("# Channel annotation report\n\n")
    out.write(
        "Look at each channel's top-activating training examples, name the "
        "visual concept they share, and record the phrases in the attribute "
        "lexicon file. Channels used by some class's frequent features are "
        "the ones that matter.\n\n"
    )
    out.write(f"Channels: {table.channels}. ")
    out.write(f"Classes: {', '.join(sorted(table.entries))}.\n")

    for ranking in sorted(rankings, key=lambda r: r.channel):
        out.write(f"\n## Channel {ranking.channel}\n\n")
        members = sorted(
            label for label, bits in table.entries.items() if bits[ranking.channel]
        )
        if members:
            out.write(f"Frequent for: {', '.join(members)}.\n\n")
        else:
            out.write("Frequent for: (no class).\n\n")
        if not ranking.examples:
            out.write("No training examples.\n")
            continue
        out.write("| rank | example | activation |\n")
        out.write("| ---: | --- | ---: |\n")
        for position, (example_id, activation) in enumerate(ranking.examples, start=1):
            shown = (
                f"[{example_id}]({url_prefix.rstrip('/')}/{example_id})"
                if url_prefix
                else example_id
            )
            out.write(f"| {position} | {shown} | {activation:.6f} |\n")


@dataclass
class ClassEval:
    """Popcount/coverage aggregates for one predicted class."""

    mean_popcount_e: float
    mean_popcount_a: float
    coverage: float


@dataclass
class EvalSummary:
    """Dataset-level explanation statistics over a test manifest."""

    per_class: dict[str, ClassEval] = field(default_factory=dict)
    annotated_fraction: float = 0.0
    unknown_class_count: int = 0
    test_examples: int = 0


def evaluate(
    manifest: Manifest,
    stats: NormStats,
    table: ClassFrequentTable,
    lexicon: AttributeLexicon,
    gamma: float,
    data_root: str | Path = ".",
) -> EvalSummary:
    """Aggregate activation/overlap statistics over the test split.

    The record's predicted class (``pred`` field if present, else the class
    field) selects the frequent-feature row. Predictions absent from the
    table are counted in ``unknown_class_count`` rather than aborting the run.
    """
    pop_e: dict[str, int] = {}
    pop_a: dict[str, int] = {}
    covered: dict[str, int] = {}
    seen: dict[str, int] = {}
    unknown = 0
    total = 0

    for record, pooled in iter_pooled(manifest, data_root, split="test"):
        total += 1
        label = record.predicted_class or record.class_label
        normalized = normalize(pooled, stats)
        activated = binarize(normalized, gamma)
        try:
            frequent = lookup(table, label)
        except UnknownClass:
            unknown += 1
            continue
        overlap = explainable_feature(activated, frequent)
        pop_e[label] = pop_e.get(label, 0) + int(overlap.sum())
        pop_a[label] = pop_a.get(label, 0) + int(activated.sum())
        covered[label] = covered.get(label, 0) + (1 if overlap.any() else 0)
        seen[label] = seen.get(label, 0) + 1

    per_class = {
        label: ClassEval(
            mean_popcount_e=pop_e[label] / seen[label],
            mean_popcount_a=pop_a[label] / seen[label],
            coverage=covered[label] / seen[label],
        )
        for label in seen
    }

    used_channels = sorted(
        {int(j) for bits in table.entries.values() for j in np.flatnonzero(bits)}
    )
    if used_channels:
        annotated = sum(1 for j in used_channels if lexicon.phrases_for(j))
        annotated_fraction = annotated / len(used_channels)
    else:
        annotated_fraction = 0.0

    return EvalSummary(
        per_class=per_class,
        annotated_fraction=annotated_fraction,
        unknown_class_count=unknown,
        test_examples=total,
    )


def eval_summary_to_json(summary: EvalSummary) -> str:
    obj = {
        "per_class": {
            label: {
                "mean_popcount_e": stats.mean_popcount_e,
                "mean_popcount_a": stats.mean_popcount_a,
                "coverage": stats.coverage,
            }
            for label, stats in sorted(summary.per_class.items())
        },
        "annotated_fraction": summary.annotated_fraction,
        "unknown_class_count": summary.unknown_class_count,
        "test_examples": summary.test_examples,
    }
    return json.dumps(obj) + "\n"
