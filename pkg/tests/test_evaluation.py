import numpy as np
import pytest

from smishfuse.corpus import HAM, SMISHING, LabeledMessage
from smishfuse.errors import ConfigError, DataError
from smishfuse.evaluation import (
    country_label_cooccurrence,
    evaluate,
    render_ablation,
    render_table,
    run_ablation,
)
from smishfuse.fusion import STREAM_ORDER
from smishfuse.metrics import compute_metrics


@pytest.fixture(scope="module")
def split(tiny_corpus):
    from smishfuse.corpus import split as split_corpus

    return split_corpus(tiny_corpus, train_fraction=0.8, seed=9)


@pytest.fixture(scope="module")
def report(tiny_pipeline, split):
    return evaluate(tiny_pipeline, split.test)


def test_report_structure(report, split):
    assert report.n_messages == len(split.test)
    assert set(report.per_stream) == set(STREAM_ORDER)
    for m in report.per_stream.values():
        assert 0.0 <= m.accuracy <= 1.0
    d = report.as_dict()
    assert set(d) == {"n_messages", "threshold", "per_stream", "combined"}
    assert set(d["combined"]) == {"accuracy", "precision", "recall", "f1", "auc", "confusion"}


def test_combined_metrics_consistent_with_predictions(report, tiny_pipeline, split):
    texts = [m.text for m in split.test]
    y = np.array([m.binary_target for m in split.test])
    probs, _ = tiny_pipeline.predict_batch(texts)
    direct = compute_metrics(y, probs, tiny_pipeline.threshold)
    assert report.combined.accuracy == direct.accuracy
    assert report.combined.auc == direct.auc
    assert report.combined.confusion == direct.confusion


def test_per_stream_metrics_consistent_with_stream_probs(report, tiny_pipeline, split):
    texts = [m.text for m in split.test]
    y = np.array([m.binary_target for m in split.test])
    stream_probs = tiny_pipeline.stream_probabilities(texts)
    for name in STREAM_ORDER:
        direct = compute_metrics(y, stream_probs[name], tiny_pipeline.threshold)
        assert report.per_stream[name].accuracy == direct.accuracy, name


def test_evaluate_rejects_empty(tiny_pipeline):
    with pytest.raises(DataError):
        evaluate(tiny_pipeline, [])


def test_render_table_lists_all_streams(report):
    table = render_table(report)
    for word in ("Stream", "Semantic", "Structural", "Char", "Contextual", "Combined"):
        assert word in table
    assert f"{report.combined.accuracy * 100:.2f}%" in table


def test_retrain_ablation(tiny_pipeline, split):
    ablation = run_ablation(tiny_pipeline, split.train, split.test, mode="retrain")
    assert ablation.mode == "retrain"
    assert [v.removed for v in ablation.variants] == list(STREAM_ORDER)
    for v in ablation.variants:
        assert v.delta_points == pytest.approx((ablation.full_accuracy - v.accuracy) * 100.0)
    d = ablation.as_dict()
    assert set(d) == {"mode", "full_accuracy", "full_auc", "variants"}


def test_retrain_ablation_deterministic(tiny_pipeline, split):
    a = run_ablation(tiny_pipeline, split.train, split.test, mode="retrain")
    b = run_ablation(tiny_pipeline, split.train, split.test, mode="retrain")
    assert [v.accuracy for v in a.variants] == [v.accuracy for v in b.variants]


def test_zero_ablation_matches_manual_zeroing(tiny_pipeline, split):
    ablation = run_ablation(tiny_pipeline, [], split.test, mode="zero")
    texts = [m.text for m in split.test]
    y = np.array([m.binary_target for m in split.test])
    blocks = tiny_pipeline.stream_blocks(texts)
    for i, v in enumerate(ablation.variants):
        zeroed = blocks.copy()
        zeroed[:, i, :] = 0.0
        probs, _ = tiny_pipeline.fusion_model.predict(zeroed)
        direct = compute_metrics(y, probs, tiny_pipeline.threshold)
        assert v.accuracy == direct.accuracy, v.removed
        assert v.auc == direct.auc, v.removed


def test_ablation_guards(tiny_pipeline, split):
    with pytest.raises(ConfigError):
        run_ablation(tiny_pipeline, split.train, split.test, mode="drop")
    with pytest.raises(DataError):
        run_ablation(tiny_pipeline, split.train, [], mode="zero")
    with pytest.raises(DataError):
        run_ablation(tiny_pipeline, [], split.test, mode="retrain")


def test_render_ablation_format(tiny_pipeline, split):
    ablation = run_ablation(tiny_pipeline, [], split.test, mode="zero")
    text = render_ablation(ablation)
    assert "Ablation mode: zero" in text
    assert "(none)" in text
    for name in ("Semantic", "Structural", "Char", "Contextual"):
        assert name in text
    assert "+" in text or "-" in text  # signed deltas


def test_country_label_cooccurrence(gazetteer):
    messages = [
        LabeledMessage("1", "visit Britain today", SMISHING, 1, "t"),
        LabeledMessage("2", "tea from England", SMISHING, 1, "t"),
        LabeledMessage("3", "London rain again", HAM, 0, "t"),
        LabeledMessage("4", "postcard from Paris", HAM, 0, "t"),
        LabeledMessage("5", "no places here", HAM, 0, "t"),
    ]
    rows = country_label_cooccurrence(messages, gazetteer)
    assert [r.country for r in rows] == ["UK", "France"]
    uk = rows[0]
    assert uk.by_label == {"SMISHING": 2, "HAM": 1}
    assert uk.total == 3
    assert uk.smishing_share == pytest.approx(2 / 3)
    assert rows[1].smishing_share == 0.0
    d = uk.as_dict()
    assert set(d) == {"country", "by_label", "total", "smishing_share"}


def test_cooccurrence_counts_each_message_once(gazetteer):
    messages = [
        LabeledMessage("1", "London and Manchester and Leeds", SMISHING, 1, "t"),
    ]
    rows = country_label_cooccurrence(messages, gazetteer)
    assert rows[0].country == "UK"
    assert rows[0].total == 1
