import numpy as np
import pytest

from smishfuse.corpus import HAM, SMISHING
from smishfuse.synthetic import SOURCE_ID, SyntheticSpec, experiment_config, generate_corpus
from smishfuse.tagging import tag_phrases, tag_semantic, tag_structural


@pytest.fixture(scope="module")
def corpus():
    return generate_corpus(SyntheticSpec(n_messages=200, seed=5))


def test_counts_and_labels(corpus):
    assert len(corpus) == 200
    positives = [m for m in corpus if m.binary_target == 1]
    negatives = [m for m in corpus if m.binary_target == 0]
    assert len(positives) == 100 and len(negatives) == 100
    assert all(m.ternary_label == SMISHING for m in positives)
    assert all(m.ternary_label == HAM for m in negatives)
    assert all(m.source_id == SOURCE_ID for m in corpus)


def test_ids_unique_and_content_addressed(corpus):
    from smishfuse.corpus import message_id

    ids = [m.id for m in corpus]
    assert len(set(ids)) == len(ids)
    assert all(m.id == message_id(m.text) for m in corpus)


def test_deterministic_per_seed(corpus):
    again = generate_corpus(SyntheticSpec(n_messages=200, seed=5))
    assert [(m.id, m.text, m.binary_target) for m in again] == [
        (m.id, m.text, m.binary_target) for m in corpus
    ]
    other = generate_corpus(SyntheticSpec(n_messages=200, seed=6))
    assert [m.text for m in other] != [m.text for m in corpus]


def test_positive_fraction_respected():
    corpus = generate_corpus(SyntheticSpec(n_messages=40, seed=1, positive_fraction=0.25))
    assert sum(m.binary_target for m in corpus) == 10


def test_each_positive_carries_exactly_one_cue(corpus, gazetteer, lexicon):
    cue_counts = {"uk": 0, "struct": 0, "trigram": 0, "phrase": 0}
    for m in corpus:
        if m.binary_target != 1:
            continue
        cues = {
            "uk": "country=UK" in tag_semantic(m.text, gazetteer).tagged,
            "struct": any(
                t in tag_structural(m.text).tagged for t in ("[URL]", "[EMAIL]", "[PHONE]")
            ),
            "trigram": "£$€" in m.text,
            "phrase": "[smishing_like]" in tag_phrases(m.text, lexicon).tagged,
        }
        assert sum(cues.values()) == 1, (m.text, cues)
        cue_counts[next(k for k, v in cues.items() if v)] += 1
    # 100 positives split evenly across the four cue quarters
    assert cue_counts == {"uk": 25, "struct": 25, "trigram": 25, "phrase": 25}


def test_negatives_are_cue_free(corpus, gazetteer, lexicon):
    for m in corpus:
        if m.binary_target != 0:
            continue
        assert "country=UK" not in tag_semantic(m.text, gazetteer).tagged, m.text
        structural = tag_structural(m.text).tagged
        assert not any(t in structural for t in ("[URL]", "[EMAIL]", "[PHONE]")), m.text
        assert "£$€" not in m.text
        assert "[smishing_like]" not in tag_phrases(m.text, lexicon).tagged, m.text


def test_texts_are_normalized_single_line(corpus):
    for m in corpus:
        assert m.text == " ".join(m.text.split())
        assert m.text


def test_experiment_config_pins():
    config = experiment_config(seed=42)
    assert config.seed == 42
    assert config.data.train_fraction == 0.8
    assert config.data.relabel.enabled is False
    assert config.semantic.min_df == 3
    assert config.semantic.max_features == 64
    assert config.structural.max_features == 64
    assert config.fusion.epochs == 20
    assert config.char.epochs == 4
    assert config.contextual_head.epochs == 10
    override = experiment_config(seed=7)
    assert override.seed == 7


def test_rng_stream_isolated_from_global_numpy():
    np.random.seed(0)
    a = generate_corpus(SyntheticSpec(n_messages=24, seed=3))
    np.random.seed(99)
    b = generate_corpus(SyntheticSpec(n_messages=24, seed=3))
    assert [m.text for m in a] == [m.text for m in b]
