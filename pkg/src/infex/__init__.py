"""Explain image-classifier inferences from binarized intermediate-feature statistics.

The pipeline has three stages. At training time, every example's activation
volume is max-pooled, mean-normalized, and thresholded into a binary
activation pattern; per class, the k most frequently active channels become
that class's frequent-feature row in a lookup table. At test time, the
overlap between the input's activation pattern and the predicted class's
row is the basis of the inference, and its strongest channels are rendered
as a human-readable explanation via an annotated attribute lexicon.
"""

from .classmodel import (
    ClassCounts,
    ClassFrequentTable,
    accumulate_class_counts,
    build_class_frequent_table,
    lookup,
    table_from_json,
    table_to_json,
    top_k_select,
)
from .errors import (
    DomainError,
    DuplicateId,
    EmptyDataset,
    FormatError,
    InfexError,
    RangeError,
    SchemaError,
    ShapeError,
    TruncatedFile,
    UnknownClass,
    UnsupportedDtype,
    UnsupportedLayout,
)
from .explain import (
    AttributeLexicon,
    Explanation,
    Reason,
    explain_one,
    explainable_feature,
    lexicon_from_json,
    lexicon_to_json,
    rank_reasons,
    render_explanation,
)
from .report import (
    ChannelRanking,
    EvalSummary,
    emit_annotation_report,
    evaluate,
    rank_channel_examples,
)
from .stats import (
    NormStats,
    binarize,
    compute_mean_stats,
    global_max_pool,
    normalize,
    stats_from_json,
    stats_to_json,
)
from .tensor_io import (
    Manifest,
    ManifestRecord,
    dump_manifest,
    load_manifest,
    parse_npy,
    select_top_n_per_class,
    write_npy,
)

__version__ = "0.1.0"

__all__ = [
    "AttributeLexicon",
    "ChannelRanking",
    "ClassCounts",
    "ClassFrequentTable",
    "DomainError",
    "DuplicateId",
    "EmptyDataset",
    "EvalSummary",
    "Explanation",
    "FormatError",
    "InfexError",
    "Manifest",
    "ManifestRecord",
    "NormStats",
    "RangeError",
    "Reason",
    "SchemaError",
    "ShapeError",
    "TruncatedFile",
    "UnknownClass",
    "UnsupportedDtype",
    "UnsupportedLayout",
    "accumulate_class_counts",
    "binarize",
    "build_class_frequent_table",
    "compute_mean_stats",
    "dump_manifest",
    "emit_annotation_report",
    "evaluate",
    "explain_one",
    "explainable_feature",
    "global_max_pool",
    "lexicon_from_json",
    "lexicon_to_json",
    "load_manifest",
    "lookup",
    "normalize",
    "parse_npy",
    "rank_channel_examples",
    "rank_reasons",
    "render_explanation",
    "select_top_n_per_class",
    "stats_from_json",
    "stats_to_json",
    "table_from_json",
    "table_to_json",
    "top_k_select",
    "write_npy",
]
