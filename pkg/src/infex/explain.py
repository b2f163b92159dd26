"""Turn one inference into ranked, attribute-annotated reasons.

The basis of an explanation is the overlap (elementwise AND) between the
input's binary activation pattern and the frequent-feature bits of the
predicted class: channels that both fired for this input and are typical
for the predicted class. Active overlap channels are ranked by their
mean-normalized activation and the strongest few are rendered as a
sentence using human-annotated attribute phrases.

Each channel may carry several phrases; they are alternatives (any one of
them may be what the channel responds to), so a rendered clause joins them
with "or". Active channels nobody has annotated yet are still shown, as a
visible placeholder, because hiding part of the inference basis would
misrepresent it.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from .classmodel import ClassFrequentTable, lookup
from .errors import SchemaError, ShapeError
from .stats import NormStats, binarize, global_max_pool, normalize

DEFAULT_ELL = 3

__all__ = [
    "DEFAULT_ELL",
    "AttributeLexicon",
    "Reason",
    "Explanation",
    "explainable_feature",
    "rank_reasons",
    "render_explanation",
    "explain_one",
    "explanation_to_record",
    "lexicon_to_json",
    "lexicon_from_json",
]


@dataclass
class AttributeLexicon:
    """channel index -> alternative attribute phrases for that channel."""

    channels: int
    attributes: dict[int, list[str]] = field(default_factory=dict)

    def __post_init__(self) -> None:
        if self.channels < 1:
            raise ValueError(f"channels must be >= 1, got {self.channels}")
        for index, phrases in self.attributes.items():
            if not 0 <= index < self.channels:
                raise SchemaError(
                    f"attribute index {index} outside [0, {self.channels})"
                )
            if not isinstance(phrases, list) or not all(
                isinstance(p, str) and p for p in phrases
            ):
                raise SchemaError(f"phrases for channel {index} must be non-empty strings")

    def phrases_for(self, channel: int) -> list[str]:
        return list(self.attributes.get(channel, ()))


@dataclass
class Reason:
    """One active overlap channel with its activation strength and phrases."""

    channel: int
    activation: float
    phrases: list[str]


@dataclass
class Explanation:
    """Ranked reasons for one inference, plus the parameters that produced them."""

    predicted_class: str
    reasons: list[Reason]
    gamma: float
    ell: int


def explainable_feature(activated: np.ndarray, frequent: np.ndarray) -> np.ndarray:
    """Overlap of the input's active channels with the class's frequent channels."""
    activated = np.asarray(activated, dtype=np.uint8)
    frequent = np.asarray(frequent, dtype=np.uint8)
    if activated.shape != frequent.shape or activated.ndim != 1:
        raise ShapeError(
            f"bit vectors must be equal-length: {activated.shape} vs {frequent.shape}"
        )
    return activated & frequent


def rank_reasons(
    overlap: np.ndarray,
    normalized: np.ndarray,
    ell: int,
    lexicon: AttributeLexicon,
) -> list[Reason]:
    """Pick the strongest overlap channels, at most ``ell`` of them.

    Channels are ordered by descending mean-normalized activation, ties by
    ascending channel index. Fewer than ``ell`` reasons come back when the
    overlap has fewer active channels.
    """
    if ell < 1:
        raise ValueError(f"ell must be >= 1, got {ell}")
    overlap = np.asarray(overlap)
    normalized = np.asarray(normalized, dtype=np.float64)
    if overlap.shape != normalized.shape or overlap.ndim != 1:
        raise ShapeError(
            f"bit vector and activations must be equal-length: "
            f"{overlap.shape} vs {normalized.shape}"
        )
    active = np.flatnonzero(overlap)
    ranked = sorted(active, key=lambda j: (-normalized[j], j))[:ell]
    return [
        Reason(channel=int(j), activation=float(normalized[j]), phrases=lexicon.phrases_for(int(j)))
        for j in ranked
    ]


def _join_phrases(phrases: list[str]) -> str:
    if len(phrases) == 1:
        return phrases[0]
    return ", ".join(phrases[:-1]) + " or " + phrases[-1]


def render_explanation(explanation: Explanation) -> str:
    """Render the canonical sentence for one explanation.

    ``This is {class} because, 1) it has ...; 2) it has ... .`` A reason
    without annotated phrases renders as ``feature #N (unannotated)``; an
    explanation with no reasons states that nothing cleared the threshold.
    Output is deterministic, byte for byte, for equal explanations.
    """
    if not explanation.reasons:
        return f"This is {explanation.predicted_class}. (no explainable features above threshold)"
    clauses = []
    for i, reason in enumerate(explanation.reasons, start=1):
        if reason.phrases:
            clauses.append(f"{i}) it has {_join_phrases(reason.phrases)}")
        else:
            clauses.append(f"{i}) feature #{reason.channel} (unannotated)")
    return f"This is {explanation.predicted_class} because, " + "; ".join(clauses) + "."


def explain_one(
    tensor: np.ndarray,
    predicted_class: str,
    stats: NormStats,
    table: ClassFrequentTable,
    lexicon: AttributeLexicon,
    gamma: float,
    ell: int = DEFAULT_ELL,
) -> Explanation:
    """Full single-input pipeline: pool, normalize, threshold, overlap, rank.

    Raises:
        ShapeError: tensor/stats/table/lexicon disagree on channel count.
        UnknownClass: the predicted class is absent from the table.
    """
    tensor = np.asarray(tensor)
    if tensor.ndim != 3:
        raise ShapeError(f"expected rank-3 [H, W, C] tensor, got shape {tensor.shape}")
    channels = tensor.shape[2]
    for name, have in (
        ("stats", stats.channels),
        ("table", table.channels),
        ("lexicon", lexicon.channels),
    ):
        if have != channels:
            raise ShapeError(f"{name} has {have} channels, tensor has {channels}")

    pooled = global_max_pool(tensor)
    normalized = normalize(pooled, stats)
    activated = binarize(normalized, gamma)
    frequent = lookup(table, predicted_class)
    overlap = explainable_feature(activated, frequent)
    reasons = rank_reasons(overlap, normalized, ell, lexicon)
    return Explanation(predicted_class=predicted_class, reasons=reasons, gamma=gamma, ell=ell)


def explanation_to_record(explanation: Explanation, example_id: str) -> dict:
    """Structured output record for one explained example."""
    return {
        "id": example_id,
        "class": explanation.predicted_class,
        "reasons": [
            {"channel": r.channel, "activation": r.activation, "phrases": list(r.phrases)}
            for r in explanation.reasons
        ],
        "text": render_explanation(explanation),
    }


def lexicon_to_json(lexicon: AttributeLexicon) -> str:
    """Serialize with channel indices as decimal strings, ascending."""
    obj = {
        "channels": lexicon.channels,
        "attributes": {
            str(index): list(lexicon.attributes[index])
            for index in sorted(lexicon.attributes)
            if lexicon.attributes[index]
        },
    }
    return json.dumps(obj, ensure_ascii=False) + "\n"


def lexicon_from_json(text: str) -> AttributeLexicon:
    """Parse and validate a lexicon file; indices at or beyond C are rejected."""
    try:
        obj = json.loads(text)
    except json.JSONDecodeError as exc:
        raise SchemaError(f"lexicon file is not valid JSON: {exc}") from exc
    if not isinstance(obj, dict) or "channels" not in obj or "attributes" not in obj:
        raise SchemaError("lexicon file must be an object with 'channels' and 'attributes'")
    channels = obj["channels"]
    if not isinstance(channels, int) or isinstance(channels, bool) or channels < 1:
        raise SchemaError(f"lexicon 'channels' must be a positive integer, got {channels!r}")
    raw = obj["attributes"]
    if not isinstance(raw, dict):
        raise SchemaError("lexicon 'attributes' must be an object")
    attributes: dict[int, list[str]] = {}
    for key, phrases in raw.items():
        try:
            index = int(key, 10)
        except ValueError:
            raise SchemaError(f"attribute key {key!r} is not a decimal integer") from None
        if str(index) != key or index < 0:
            raise SchemaError(f"attribute key {key!r} is not a canonical non-negative integer")
        attributes[index] = phrases
    return AttributeLexicon(channels=channels, attributes=attributes)
