"""Command-line pipeline: select, stats, classfeat, explain, report, eval.

Every artifact file embeds the parameters that produced it (threshold,
k, epsilon, channel count); downstream commands verify compatibility and
fail loudly on a mismatch instead of silently mixing regimes. All outputs
are deterministic given identical inputs and flags: no clocks, randomness,
or locale dependence.

Exit codes: 0 success, 2 input/validation error, 64 usage error.
"""

from __future__ import annotations

import argparse
import io
import json
import sys
from dataclasses import dataclass
from pathlib import Path

from . import classmodel, report as report_mod
from .dataset import iter_pooled, iter_tensors, resolve_feature_path
from .errors import InfexError, ShapeError, UnknownClass
from .explain import (
    DEFAULT_ELL,
    AttributeLexicon,
    explain_one,
    explanation_to_record,
    lexicon_from_json,
    render_explanation,
)
from .stats import (
    DEFAULT_EPSILON,
    DEFAULT_GAMMA,
    NormStats,
    binarize,
    compute_mean_stats,
    normalize,
    stats_from_json,
    stats_to_json,
)
from .tensor_io import (
    Manifest,
    dump_manifest,
    load_manifest,
    read_npy_file,
    select_top_n_per_class,
)

EXIT_OK = 0
EXIT_INPUT = 2
EXIT_USAGE = 64

DEFAULT_K = 3
DEFAULT_N_SELECT = 100


@dataclass
class RunConfig:
    """Resolved pipeline parameters; defaults match the documented flags."""

    gamma: float = DEFAULT_GAMMA
    k: int = DEFAULT_K
    ell: int = DEFAULT_ELL
    epsilon: float = DEFAULT_EPSILON
    n_select: int = DEFAULT_N_SELECT


class _Parser(argparse.ArgumentParser):
    """argparse variant that reports usage problems with exit code 64."""

    def error(self, message: str) -> None:  # type: ignore[override]
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _read_manifest(path: str) -> Manifest:
    return load_manifest(Path(path).read_bytes())


def _read_stats(path: str) -> tuple[NormStats, float]:
    return stats_from_json(Path(path).read_text(encoding="utf-8"))


def _read_table(path: str) -> tuple[classmodel.ClassFrequentTable, float]:
    return classmodel.table_from_json(Path(path).read_text(encoding="utf-8"))


def _read_lexicon(path: str) -> AttributeLexicon:
    return lexicon_from_json(Path(path).read_text(encoding="utf-8"))


def _write_text(path: str | None, text: str) -> None:
    if path is None:
        sys.stdout.write(text)
    else:
        Path(path).write_text(text, encoding="utf-8")


def _check_gamma_flag(flag_gamma: float | None, artifact_gamma: float, source: str) -> float:
    if flag_gamma is not None and flag_gamma != artifact_gamma:
        raise InfexError(
            f"--gamma {flag_gamma} does not match gamma {artifact_gamma} recorded in {source}; "
            f"rebuild the artifacts or drop the flag"
        )
    return artifact_gamma


def cmd_select(args: argparse.Namespace) -> int:
    manifest = _read_manifest(args.manifest)
    selected = select_top_n_per_class(manifest, args.n)

    total_by_class: dict[str, int] = {}
    for rec in manifest.records:
        total_by_class[rec.class_label] = total_by_class.get(rec.class_label, 0) + 1
    kept_by_class: dict[str, int] = {}
    for rec in selected.records:
        kept_by_class[rec.class_label] = kept_by_class.get(rec.class_label, 0) + 1

    _write_text(args.out, dump_manifest(selected))
    for label, total in total_by_class.items():
        kept = kept_by_class.get(label, 0)
        print(f"{label}: kept {kept} of {total}")
        if total < args.n:
            print(
                f"warning: class {label!r} has only {total} records (< {args.n})",
                file=sys.stderr,
            )
    return EXIT_OK


def cmd_stats(args: argparse.Namespace) -> int:
    manifest = _read_manifest(args.manifest)
    if not any(rec.split == "train" for rec in manifest.records):
        raise InfexError(f"no train-split records in {args.manifest}")
    pooled = (vec for _, vec in iter_pooled(manifest, args.data_root, split="train"))
    stats = compute_mean_stats(pooled, epsilon=args.epsilon)
    _write_text(args.out, stats_to_json(stats, gamma=args.gamma))
    print(f"stats: {stats.channels} channels over {stats.sample_count} training examples")
    return EXIT_OK


def cmd_classfeat(args: argparse.Namespace) -> int:
    stats, gamma = _read_stats(args.stats)
    gamma = _check_gamma_flag(args.gamma, gamma, args.stats)
    manifest = _read_manifest(args.manifest)

    def labeled_bits():
        for record, vec in iter_pooled(manifest, args.data_root, split="train"):
            if vec.size != stats.channels:
                path = resolve_feature_path(args.data_root, record)
                raise ShapeError(
                    f"{path}: feature has {vec.size} channels, stats file has {stats.channels}"
                )
            yield record.class_label, binarize(normalize(vec, stats), gamma)

    counts = classmodel.accumulate_class_counts(labeled_bits())
    if not counts:
        raise InfexError("no training records in manifest; nothing to build a table from")
    table = classmodel.build_class_frequent_table(counts, k=args.k)
    _write_text(args.out, classmodel.table_to_json(table, gamma=gamma))
    if args.counts_out:
        _write_text(args.counts_out, classmodel.counts_to_json(counts))
    print(f"table: {len(table.entries)} classes, k={table.k}, {table.channels} channels")
    return EXIT_OK


def _load_compatible_artifacts(
    args: argparse.Namespace,
) -> tuple[NormStats, float, classmodel.ClassFrequentTable, AttributeLexicon | None]:
    stats, stats_gamma = _read_stats(args.stats)
    table, table_gamma = _read_table(args.table)
    if stats_gamma != table_gamma:
        raise InfexError(
            f"gamma mismatch: stats file records {stats_gamma}, table records {table_gamma}"
        )
    gamma = _check_gamma_flag(getattr(args, "gamma", None), stats_gamma, args.stats)
    if table.channels != stats.channels:
        raise InfexError(
            f"channel mismatch: stats file has {stats.channels}, table has {table.channels}"
        )
    lexicon = None
    if getattr(args, "lexicon", None):
        lexicon = _read_lexicon(args.lexicon)
        if lexicon.channels != stats.channels:
            raise InfexError(
                f"channel mismatch: stats file has {stats.channels}, "
                f"lexicon has {lexicon.channels}"
            )
    return stats, gamma, table, lexicon


def cmd_explain(args: argparse.Namespace) -> int:
    if (args.feature is None) == (args.manifest is None):
        raise InfexError("give exactly one input: --feature with --class, or --manifest")
    if args.feature is not None and args.predicted is None:
        raise InfexError("--feature needs --class LABEL (the model's inference result)")

    stats, gamma, table, lexicon = _load_compatible_artifacts(args)
    if lexicon is None:
        lexicon = AttributeLexicon(channels=stats.channels)

    inputs: list[tuple[str, str, object]] = []
    if args.feature is not None:
        inputs.append((args.feature, args.predicted, read_npy_file(args.feature)))
    else:
        manifest = _read_manifest(args.manifest)
        for record, tensor in iter_tensors(manifest, args.data_root):
            label = record.predicted_class or record.class_label
            inputs.append((record.example_id, label, tensor))

    lines: list[str] = []
    failures = 0
    for example_id, label, tensor in inputs:
        try:
            explanation = explain_one(
                tensor, label, stats, table, lexicon, gamma=gamma, ell=args.ell
            )
        except UnknownClass as exc:
            failures += 1
            if args.format == "records":
                lines.append(json.dumps({"id": example_id, "error": str(exc)}))
            else:
                lines.append(f"error: {example_id}: {exc}")
            continue
        if args.format == "records":
            lines.append(json.dumps(explanation_to_record(explanation, example_id)))
        else:
            lines.append(render_explanation(explanation))

    _write_text(args.out, "".join(line + "\n" for line in lines))
    return EXIT_INPUT if failures else EXIT_OK


def cmd_report(args: argparse.Namespace) -> int:
    stats, _, table, _ = _load_compatible_artifacts(args)
    manifest = _read_manifest(args.manifest)
    rankings = report_mod.rank_all_channels(manifest, stats, m=args.m, data_root=args.data_root)

    buf = io.StringIO()
    report_mod.emit_annotation_report(rankings, table, buf, url_prefix=args.url_prefix)
    _write_text(args.out, buf.getvalue())
    return EXIT_OK


def cmd_eval(args: argparse.Namespace) -> int:
    stats, gamma, table, lexicon = _load_compatible_artifacts(args)
    if lexicon is None:
        lexicon = AttributeLexicon(channels=stats.channels)
    manifest = _read_manifest(args.manifest)
    summary = report_mod.evaluate(
        manifest, stats, table, lexicon, gamma=gamma, data_root=args.data_root
    )
    _write_text(args.out, report_mod.eval_summary_to_json(summary))
    if summary.unknown_class_count:
        print(
            f"warning: {summary.unknown_class_count} prediction(s) had no table entry",
            file=sys.stderr,
        )
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(
        prog="infex",
        description=(
            "Explain image-classifier inferences from binarized "
            "intermediate-feature statistics."
        ),
    )
    sub = parser.add_subparsers(
        dest="command", required=True, metavar="COMMAND", parser_class=_Parser
    )

    p = sub.add_parser("select", help="keep top-n records per class")
    p.add_argument("--manifest", required=True, help="input manifest (JSON lines)")
    p.add_argument(
        "--n",
        type=int,
        default=DEFAULT_N_SELECT,
        help=f"records to keep per class, by softmax probability (default: {DEFAULT_N_SELECT})",
    )
    p.add_argument("--out", required=True, help="output manifest path")
    p.set_defaults(func=cmd_select)

    p = sub.add_parser("stats", help="compute per-channel training means")
    p.add_argument("--manifest", required=True)
    p.add_argument("--data-root", default=".", help="directory feature paths resolve against")
    p.add_argument(
        "--epsilon",
        type=float,
        default=DEFAULT_EPSILON,
        help=f"dead-channel guard added to each mean (default: {DEFAULT_EPSILON})",
    )
    p.add_argument(
        "--gamma",
        type=float,
        default=DEFAULT_GAMMA,
        help=f"activation threshold to record (default: {DEFAULT_GAMMA})",
    )
    p.add_argument("--out", required=True, help="output stats file path")
    p.set_defaults(func=cmd_stats)

    p = sub.add_parser(
        "classfeat", help="build the class frequent-feature table"
    )
    p.add_argument("--manifest", required=True)
    p.add_argument("--data-root", default=".")
    p.add_argument("--stats", required=True, help="stats file from the stats command")
    p.add_argument(
        "--k",
        type=int,
        default=DEFAULT_K,
        help=f"frequent channels to keep per class (default: {DEFAULT_K})",
    )
    p.add_argument(
        "--gamma",
        type=float,
        default=None,
        help="must match the stats file when given (default: use recorded value)",
    )
    p.add_argument("--out", required=True, help="output table file path")
    p.add_argument("--counts-out", default=None, help="also write raw counts for audit")
    p.set_defaults(func=cmd_classfeat)

    p = sub.add_parser("explain", help="explain one or many inferences")
    p.add_argument("--stats", required=True)
    p.add_argument("--table", required=True)
    p.add_argument("--lexicon", default=None, help="attribute lexicon file (optional)")
    p.add_argument("--feature", default=None, help="single feature file to explain")
    p.add_argument(
        "--class",
        dest="predicted",
        default=None,
        help="predicted class for --feature (batch mode takes it from the manifest)",
    )
    p.add_argument("--manifest", default=None, help="manifest to explain record by record")
    p.add_argument("--data-root", default=".")
    p.add_argument(
        "--ell",
        type=int,
        default=DEFAULT_ELL,
        help=f"maximum reasons per explanation (default: {DEFAULT_ELL})",
    )
    p.add_argument(
        "--gamma",
        type=float,
        default=None,
        help="must match the artifact files when given (default: use recorded value)",
    )
    p.add_argument("--format", choices=("text", "records"), default="text")
    p.add_argument("--out", default=None, help="output path (default: stdout)")
    p.set_defaults(func=cmd_explain)

    p = sub.add_parser(
        "report", help="write the channel annotation report"
    )
    p.add_argument("--manifest", required=True)
    p.add_argument("--data-root", default=".")
    p.add_argument("--stats", required=True)
    p.add_argument("--table", required=True)
    p.add_argument(
        "--m",
        type=int,
        default=report_mod.DEFAULT_EXAMPLES_PER_CHANNEL,
        help=(
            "training examples listed per channel "
            f"(default: {report_mod.DEFAULT_EXAMPLES_PER_CHANNEL})"
        ),
    )
    p.add_argument("--url-prefix", default=None, help="link prefix for example ids")
    p.add_argument("--out", default=None, help="output path (default: stdout)")
    p.set_defaults(func=cmd_report)

    p = sub.add_parser("eval", help="explanation statistics on a test split")
    p.add_argument("--manifest", required=True)
    p.add_argument("--data-root", default=".")
    p.add_argument("--stats", required=True)
    p.add_argument("--table", required=True)
    p.add_argument("--lexicon", default=None)
    p.add_argument("--out", default=None, help="output path (default: stdout)")
    p.set_defaults(func=cmd_eval)

    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except FileNotFoundError as exc:
        print(f"error: file not found: {exc.filename}", file=sys.stderr)
        return EXIT_INPUT
    except (InfexError, OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
