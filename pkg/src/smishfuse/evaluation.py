"""Held-out evaluation, stream ablation, and corpus co-occurrence summaries."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .corpus import LabeledMessage
from .errors import ConfigError, DataError
from .fusion import STREAM_ORDER, train_fusion
from .metrics import MetricsReport, compute_metrics
from .pipeline import TrainedPipeline
from .tagging import EntityGazetteer, tag_semantic

ABLATION_MODES = ("retrain", "zero")
COMBINED = "COMBINED"


@dataclass
class EvaluationReport:
    n_messages: int
    threshold: float
    per_stream: dict[str, MetricsReport]
    combined: MetricsReport

    def as_dict(self) -> dict:
        return {
            "n_messages": self.n_messages,
            "threshold": self.threshold,
            "per_stream": {k: v.as_dict() for k, v in self.per_stream.items()},
            "combined": self.combined.as_dict(),
        }


def evaluate(pipeline: TrainedPipeline, messages: Sequence[LabeledMessage]) -> EvaluationReport:
    """Score each stream's standalone classifier and the fused model."""
    if not messages:
        raise DataError("evaluation needs at least one message")
    texts = [m.text for m in messages]
    y = np.array([m.binary_target for m in messages], dtype=np.int64)
    threshold = pipeline.threshold

    per_stream = {
        name: compute_metrics(y, scores, threshold)
        for name, scores in pipeline.stream_probabilities(texts).items()
    }
    probs, _ = pipeline.predict_batch(texts)
    combined = compute_metrics(y, probs, threshold)
    return EvaluationReport(
        n_messages=len(messages),
        threshold=threshold,
        per_stream=per_stream,
        combined=combined,
    )


def render_table(report: EvaluationReport) -> str:
    rows = [("Stream", "Accuracy", "AUC", "Recall", "Precision", "F1")]
    for name in (*STREAM_ORDER, COMBINED):
        m = report.combined if name == COMBINED else report.per_stream[name]
        rows.append(
            (
                name.title() if name != COMBINED else "Combined",
                f"{m.accuracy * 100:.2f}%",
                f"{m.auc:.3f}",
                f"{m.recall * 100:.2f}%",
                f"{m.precision * 100:.2f}%",
                f"{m.f1 * 100:.2f}%",
            )
        )
    widths = [max(len(r[i]) for r in rows) for i in range(len(rows[0]))]
    lines = []
    for i, row in enumerate(rows):
        lines.append("  ".join(cell.ljust(w) for cell, w in zip(row, widths)).rstrip())
        if i == 0:
            lines.append("  ".join("-" * w for w in widths))
    return "\n".join(lines)


@dataclass
class AblationVariant:
    removed: str
    accuracy: float
    auc: float
    delta_points: float  # full accuracy minus ablated accuracy, in points

    def as_dict(self) -> dict:
        return {
            "removed": self.removed,
            "accuracy": self.accuracy,
            "auc": self.auc,
            "delta_points": self.delta_points,
        }


@dataclass
class AblationReport:
    mode: str
    full_accuracy: float
    full_auc: float
    variants: list[AblationVariant]

    def as_dict(self) -> dict:
        return {
            "mode": self.mode,
            "full_accuracy": self.full_accuracy,
            "full_auc": self.full_auc,
            "variants": [v.as_dict() for v in self.variants],
        }


def run_ablation(
    pipeline: TrainedPipeline,
    train_messages: Sequence[LabeledMessage],
    test_messages: Sequence[LabeledMessage],
    mode: str = "retrain",
) -> AblationReport:
    """Drop one stream at a time and re-measure held-out accuracy.

    ``retrain`` (default) keeps the stream artifacts and reductions fixed but
    retrains the fusion classifier with the removed stream excluded from the
    attention softmax; ``zero`` skips retraining and just zeroes the removed
    block at inference on the full model.
    """
    if mode not in ABLATION_MODES:
        raise ConfigError(f"ablation mode must be one of {ABLATION_MODES}, got {mode!r}")
    if not test_messages:
        raise DataError("ablation needs a non-empty test partition")
    if mode == "retrain" and not train_messages:
        raise DataError("retrain-mode ablation needs the training partition")

    y_test = np.array([m.binary_target for m in test_messages], dtype=np.int64)
    test_blocks = pipeline.stream_blocks([m.text for m in test_messages])
    threshold = pipeline.threshold

    full_probs, _ = pipeline.fusion_model.predict(test_blocks)
    full = compute_metrics(y_test, full_probs, threshold)

    variants = []
    if mode == "retrain":
        train_blocks = pipeline.stream_blocks([m.text for m in train_messages])
        y_train = np.array([m.binary_target for m in train_messages], dtype=np.int64)
        fusion_seed = pipeline.config.seed + 5
        for i, removed in enumerate(STREAM_ORDER):
            active = [name != removed for name in STREAM_ORDER]
            variant_model = train_fusion(
                train_blocks, y_train, pipeline.config.fusion, seed=fusion_seed, active=active
            )
            probs, _ = variant_model.predict(test_blocks)
            m = compute_metrics(y_test, probs, threshold)
            variants.append(
                AblationVariant(
                    removed=removed,
                    accuracy=m.accuracy,
                    auc=m.auc,
                    delta_points=(full.accuracy - m.accuracy) * 100.0,
                )
            )
    else:
        for i, removed in enumerate(STREAM_ORDER):
            blocks = test_blocks.copy()
            blocks[:, i, :] = 0.0
            probs, _ = pipeline.fusion_model.predict(blocks)
            m = compute_metrics(y_test, probs, threshold)
            variants.append(
                AblationVariant(
                    removed=removed,
                    accuracy=m.accuracy,
                    auc=m.auc,
                    delta_points=(full.accuracy - m.accuracy) * 100.0,
                )
            )

    return AblationReport(
        mode=mode,
        full_accuracy=full.accuracy,
        full_auc=full.auc,
        variants=variants,
    )


def render_ablation(report: AblationReport) -> str:
    rows = [("Removed stream", "Accuracy", "AUC", "Delta (pts)")]
    rows.append(("(none)", f"{report.full_accuracy * 100:.2f}%", f"{report.full_auc:.3f}", ""))
    for v in report.variants:
        rows.append(
            (
                v.removed.title(),
                f"{v.accuracy * 100:.2f}%",
                f"{v.auc:.3f}",
                f"{v.delta_points:+.2f}",
            )
        )
    widths = [max(len(r[i]) for r in rows) for i in range(len(rows[0]))]
    lines = [f"Ablation mode: {report.mode}"]
    for i, row in enumerate(rows):
        lines.append("  ".join(cell.ljust(w) for cell, w in zip(row, widths)).rstrip())
        if i == 0:
            lines.append("  ".join("-" * w for w in widths))
    return "\n".join(lines)


@dataclass
class CountryCooccurrence:
    country: str
    by_label: dict[str, int]
    total: int
    smishing_share: float

    def as_dict(self) -> dict:
        return {
            "country": self.country,
            "by_label": dict(self.by_label),
            "total": self.total,
            "smishing_share": self.smishing_share,
        }


def country_label_cooccurrence(
    messages: Sequence[LabeledMessage], gazetteer: EntityGazetteer
) -> list[CountryCooccurrence]:
    """How often each gazetteer country co-occurs with each ternary label."""
    counts: dict[str, dict[str, int]] = {}
    for msg in messages:
        tagged = tag_semantic(msg.text, gazetteer)
        for country in set(tagged.appended_countries):
            counts.setdefault(country, {})
            counts[country][msg.ternary_label] = counts[country].get(msg.ternary_label, 0) + 1
    out = []
    for country, by_label in counts.items():
        total = sum(by_label.values())
        smishing = by_label.get("SMISHING", 0)
        out.append(
            CountryCooccurrence(
                country=country,
                by_label=by_label,
                total=total,
                smishing_share=smishing / total,
            )
        )
    out.sort(key=lambda c: (-c.total, c.country))
    return out
