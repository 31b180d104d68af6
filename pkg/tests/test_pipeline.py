import numpy as np
import pytest

from smishfuse.corpus import LabeledMessage
from smishfuse.errors import ConfigError, DataError
from smishfuse.fusion import STREAM_ORDER
from smishfuse.pipeline import SEED_OFFSETS, load_tagging_resources, train_pipeline
from smishfuse.tfidf import transform_matrix


def test_seed_offsets_are_distinct():
    assert set(SEED_OFFSETS) == {*STREAM_ORDER, "FUSION"}
    assert len(set(SEED_OFFSETS.values())) == len(SEED_OFFSETS)


def test_load_tagging_resources_defaults(tiny_config):
    gazetteer, lexicon = load_tagging_resources(tiny_config)
    assert gazetteer.entries
    assert lexicon.smishing_phrases


def test_load_tagging_resources_requires_paired_phrase_paths(tiny_config, tmp_path):
    import dataclasses

    lone = dataclasses.replace(
        tiny_config.tagging, smishing_phrases_path=str(tmp_path / "x.txt")
    )
    config = dataclasses.replace(tiny_config, tagging=lone)
    with pytest.raises(ConfigError):
        load_tagging_resources(config)


def test_train_rejects_empty_partition(tiny_config):
    with pytest.raises(DataError):
        train_pipeline([], tiny_config)


def test_stream_blocks_shape_and_order(tiny_pipeline):
    texts = ["verify your account at http://x.co", "see you soon", ""]
    blocks = tiny_pipeline.stream_blocks(texts)
    k = tiny_pipeline.config.fusion.k
    assert blocks.shape == (3, len(STREAM_ORDER), k)
    raw = tiny_pipeline.raw_stream_features(texts)
    for i, name in enumerate(STREAM_ORDER):
        expected = tiny_pipeline.projections[name].project(raw[name])
        assert np.allclose(blocks[:, i, :], expected, atol=1e-12), name


def test_stream_probabilities_keys_and_ranges(tiny_pipeline):
    probs = tiny_pipeline.stream_probabilities(["free prize now", "lunch at noon"])
    assert set(probs) == set(STREAM_ORDER)
    for name, p in probs.items():
        assert p.shape == (2,), name
        assert np.all((p >= 0) & (p <= 1)), name


def test_semantic_view_feeds_tfidf_as_trained(tiny_pipeline):
    text = "Britain says hello"
    view = tiny_pipeline.semantic_views([text])[0]
    vec = transform_matrix([view], tiny_pipeline.semantic_vocab)
    direct = tiny_pipeline.raw_stream_features([text])["SEMANTIC"]
    assert np.allclose(np.asarray(vec.todense()), np.asarray(direct.todense()))


def test_predict_batch_and_message_agree(tiny_pipeline):
    texts = ["URGENT claim your prize at http://bit.ly/x", "movie night was fun"]
    probs, alphas = tiny_pipeline.predict_batch(texts)
    assert probs.shape == (2,)
    assert alphas.shape == (2, len(STREAM_ORDER))
    assert np.allclose(alphas.sum(axis=1), 1.0, atol=1e-9)

    result = tiny_pipeline.predict_message(texts[0])
    assert result.probability == pytest.approx(float(probs[0]), abs=1e-12)
    assert result.label == int(result.probability >= tiny_pipeline.threshold)
    assert result.prediction in ("smishing", "not_smishing")
    assert set(result.attention) == set(STREAM_ORDER)
    assert set(result.stream_probabilities) == set(STREAM_ORDER)
    d = result.as_dict()
    assert d["threshold"] == tiny_pipeline.threshold


def test_predict_batch_rejects_empty(tiny_pipeline):
    with pytest.raises(DataError):
        tiny_pipeline.predict_batch([])


def test_empty_text_is_scoreable(tiny_pipeline):
    result = tiny_pipeline.predict_message("")
    assert 0.0 <= result.probability <= 1.0


def test_training_is_deterministic(tiny_corpus, tiny_config):
    a = train_pipeline(tiny_corpus[:120], tiny_config)
    b = train_pipeline(tiny_corpus[:120], tiny_config)
    texts = [m.text for m in tiny_corpus[120:140]]
    pa, aa = a.predict_batch(texts)
    pb, ab = b.predict_batch(texts)
    assert np.array_equal(pa, pb)
    assert np.array_equal(aa, ab)


def test_charset_is_built_from_training_text_only(tiny_pipeline, tiny_corpus):
    train_text = "".join(m.text for m in tiny_corpus)
    non_ascii = {c for c in train_text if ord(c) > 126}
    assert non_ascii.issubset(set(tiny_pipeline.charset.chars))
    # unseen non-ASCII maps to UNK rather than growing the charset
    from smishfuse.charcnn import UNK_INDEX

    assert tiny_pipeline.charset.index("☃") == UNK_INDEX


def test_projection_passthrough_vs_svd_assignment(tiny_pipeline):
    k = tiny_pipeline.config.fusion.k
    for name in STREAM_ORDER:
        proj = tiny_pipeline.projections[name]
        assert proj.k == k
        assert proj.passthrough == (proj.native_dim <= k), name


def test_retrained_stream_seed_isolation(tiny_corpus, tiny_config):
    """Same run seed trains identical forests regardless of later components."""
    import dataclasses

    changed = dataclasses.replace(
        tiny_config, fusion=dataclasses.replace(tiny_config.fusion, epochs=1)
    )
    a = train_pipeline(tiny_corpus[:100], tiny_config)
    b = train_pipeline(tiny_corpus[:100], changed)
    assert a.semantic_forest.to_json_obj() == b.semantic_forest.to_json_obj()
    for key, v in a.char_model.params.items():
        assert np.array_equal(v, b.char_model.params[key]), key


def test_prediction_result_roundtrips_to_json(tiny_pipeline):
    import json

    result = tiny_pipeline.predict_message("verify your account now")
    encoded = json.dumps(result.as_dict())
    decoded = json.loads(encoded)
    assert decoded["prediction"] == result.prediction
