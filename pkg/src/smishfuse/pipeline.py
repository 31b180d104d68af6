"""End-to-end training and inference.

Each message is viewed four ways in parallel: entity-tagged text (TF-IDF +
random forest), structure-tagged text (TF-IDF + random forest), raw
characters (char CNN), and phrase-annotated text (contextual encoder + conv
head). Stream features are reduced to a common width, concatenated in the
pinned stream order, and classified by the attention-gated fusion MLP.

A single run seed drives everything; per-component seeds are derived with
fixed offsets so retraining one component never perturbs another.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
import scipy.sparse as sp

from .charcnn import (
    CharCnnModel,
    Charset,
    build_charset,
    encode_chars_batch,
    train_charcnn,
)
from .config import RunConfig
from .contextual import (
    ContextualEncoder,
    ContextualEncoderSpec,
    ConvHeadModel,
    build_encoder,
    encode_pooled_batch,
    encode_token_batch,
    train_contextual_head,
)
from .corpus import LabeledMessage
from .errors import ConfigError, DataError
from .forest import ForestModel, predict_forest_batch, train_forest
from .fusion import STREAM_ORDER, FusionModel, SvdProjection, fit_projection, train_fusion
from .tagging import EntityGazetteer, PhraseLexicon, tag_phrases, tag_semantic, tag_structural
from .tfidf import TfidfVocabulary, fit_tfidf, transform_matrix

SEED_OFFSETS = {"SEMANTIC": 1, "STRUCTURAL": 2, "CHAR": 3, "CONTEXTUAL": 4, "FUSION": 5}


def load_tagging_resources(config: RunConfig) -> tuple[EntityGazetteer, PhraseLexicon]:
    t = config.tagging
    gazetteer = (
        EntityGazetteer.from_file(t.gazetteer_path) if t.gazetteer_path else EntityGazetteer.default()
    )
    if (t.smishing_phrases_path is None) != (t.legitimate_phrases_path is None):
        raise ConfigError(
            "tagging.smishing_phrases_path and tagging.legitimate_phrases_path "
            "must be overridden together"
        )
    lexicon = (
        PhraseLexicon.from_files(t.legitimate_phrases_path, t.smishing_phrases_path)
        if t.smishing_phrases_path
        else PhraseLexicon.default()
    )
    return gazetteer, lexicon


@dataclass
class PredictionResult:
    probability: float
    label: int
    prediction: str
    threshold: float
    attention: dict[str, float]
    stream_probabilities: dict[str, float]

    def as_dict(self) -> dict:
        return {
            "probability": self.probability,
            "label": self.label,
            "prediction": self.prediction,
            "threshold": self.threshold,
            "attention": self.attention,
            "stream_probabilities": self.stream_probabilities,
        }


@dataclass
class TrainedPipeline:
    config: RunConfig
    gazetteer: EntityGazetteer
    lexicon: PhraseLexicon
    semantic_vocab: TfidfVocabulary
    semantic_forest: ForestModel
    structural_vocab: TfidfVocabulary
    structural_forest: ForestModel
    charset: Charset
    char_model: CharCnnModel
    encoder_spec: ContextualEncoderSpec
    head_model: ConvHeadModel
    projections: dict[str, SvdProjection]
    fusion_model: FusionModel
    _encoder: ContextualEncoder | None = field(default=None, repr=False)

    @property
    def encoder(self) -> ContextualEncoder:
        if self._encoder is None:
            self._encoder = build_encoder(self.encoder_spec)
        return self._encoder

    @property
    def threshold(self) -> float:
        return self.fusion_model.config.threshold

    # ---- per-stream views and raw features -------------------------------

    def semantic_views(self, texts: Sequence[str]) -> list[str]:
        return [tag_semantic(t, self.gazetteer).tagged for t in texts]

    def structural_views(self, texts: Sequence[str]) -> list[str]:
        return [tag_structural(t).tagged for t in texts]

    def contextual_views(self, texts: Sequence[str]) -> list[str]:
        return [tag_phrases(t, self.lexicon).tagged for t in texts]

    def raw_stream_features(self, texts: Sequence[str]) -> dict[str, object]:
        """Native-width feature matrix per stream (sparse for the tag streams)."""
        seqs = encode_chars_batch(texts, self.char_model.config.max_len, self.charset)
        return {
            "SEMANTIC": transform_matrix(self.semantic_views(texts), self.semantic_vocab),
            "STRUCTURAL": transform_matrix(self.structural_views(texts), self.structural_vocab),
            "CHAR": self.char_model.features(seqs),
            "CONTEXTUAL": encode_pooled_batch(self.encoder, self.contextual_views(texts)),
        }

    def stream_blocks(self, texts: Sequence[str]) -> np.ndarray:
        """Reduced blocks, shape (N, n_streams, k), in the pinned stream order."""
        raw = self.raw_stream_features(texts)
        return np.stack(
            [self.projections[name].project(raw[name]) for name in STREAM_ORDER], axis=1
        )

    # ---- standalone per-stream classifiers -------------------------------

    def stream_probabilities(self, texts: Sequence[str]) -> dict[str, np.ndarray]:
        seqs = encode_chars_batch(texts, self.char_model.config.max_len, self.charset)
        tokens = encode_token_batch(self.encoder, self.contextual_views(texts))
        return {
            "SEMANTIC": predict_forest_batch(
                self.semantic_forest,
                transform_matrix(self.semantic_views(texts), self.semantic_vocab),
            ),
            "STRUCTURAL": predict_forest_batch(
                self.structural_forest,
                transform_matrix(self.structural_views(texts), self.structural_vocab),
            ),
            "CHAR": self.char_model.predict_proba(seqs),
            "CONTEXTUAL": self.head_model.predict_proba(tokens),
        }

    # ---- fused prediction --------------------------------------------------

    def predict_batch(self, texts: Sequence[str]) -> tuple[np.ndarray, np.ndarray]:
        """Fused probabilities and attention weights for a batch of texts."""
        if not texts:
            raise DataError("predict_batch needs at least one message")
        blocks = self.stream_blocks(texts)
        return self.fusion_model.predict(blocks)

    def predict_message(self, text: str) -> PredictionResult:
        probs, alphas = self.predict_batch([text])
        stream_probs = self.stream_probabilities([text])
        prob = float(probs[0])
        label = int(prob >= self.threshold)
        return PredictionResult(
            probability=prob,
            label=label,
            prediction="smishing" if label else "not_smishing",
            threshold=self.threshold,
            attention={name: float(a) for name, a in zip(STREAM_ORDER, alphas[0])},
            stream_probabilities={k: float(v[0]) for k, v in stream_probs.items()},
        )


def train_pipeline(train_messages: Sequence[LabeledMessage], config: RunConfig) -> TrainedPipeline:
    """Train all four streams, the reductions, and fusion on one partition."""
    if not train_messages:
        raise DataError("cannot train on an empty partition")
    gazetteer, lexicon = load_tagging_resources(config)
    texts = [m.text for m in train_messages]
    y = np.array([m.binary_target for m in train_messages], dtype=np.int64)
    seed = config.seed

    # Tag-stream views.
    sem_views = [tag_semantic(t, gazetteer).tagged for t in texts]
    str_views = [tag_structural(t).tagged for t in texts]
    ctx_views = [tag_phrases(t, lexicon).tagged for t in texts]

    # SEMANTIC / STRUCTURAL: TF-IDF + random forest.
    sem_vocab = fit_tfidf(sem_views, config.semantic.min_df, config.semantic.max_features)
    X_sem = transform_matrix(sem_views, sem_vocab)
    sem_forest = train_forest(
        X_sem,
        y,
        trees=config.semantic.n_trees,
        seed=seed + SEED_OFFSETS["SEMANTIC"],
        bootstrap=config.semantic.bootstrap,
        stream_id="SEMANTIC",
        vote=config.semantic.vote,
    )
    str_vocab = fit_tfidf(str_views, config.structural.min_df, config.structural.max_features)
    X_str = transform_matrix(str_views, str_vocab)
    str_forest = train_forest(
        X_str,
        y,
        trees=config.structural.n_trees,
        seed=seed + SEED_OFFSETS["STRUCTURAL"],
        bootstrap=config.structural.bootstrap,
        stream_id="STRUCTURAL",
        vote=config.structural.vote,
    )

    # CHAR: charset from training text only, then the CNN.
    charset = build_charset(texts)
    seqs = encode_chars_batch(texts, config.char.max_len, charset)
    char_model = train_charcnn(seqs, y, config.char, charset, seed=seed + SEED_OFFSETS["CHAR"])

    # CONTEXTUAL: encoder + conv head over token matrices.
    encoder = build_encoder(config.contextual_encoder)
    tok = encode_token_batch(encoder, ctx_views)
    head_model = train_contextual_head(
        tok, y, config.contextual_head, config.contextual_encoder,
        seed=seed + SEED_OFFSETS["CONTEXTUAL"],
    )
    pooled = encode_pooled_batch(encoder, ctx_views)

    # Per-stream reduction, fit on training features only.
    k = config.fusion.k
    raw = {
        "SEMANTIC": X_sem,
        "STRUCTURAL": X_str,
        "CHAR": char_model.features(seqs),
        "CONTEXTUAL": pooled,
    }
    projections = {name: fit_projection(raw[name], k, name) for name in STREAM_ORDER}
    blocks = np.stack([projections[name].project(raw[name]) for name in STREAM_ORDER], axis=1)

    fusion_model = train_fusion(blocks, y, config.fusion, seed=seed + SEED_OFFSETS["FUSION"])

    return TrainedPipeline(
        config=config,
        gazetteer=gazetteer,
        lexicon=lexicon,
        semantic_vocab=sem_vocab,
        semantic_forest=sem_forest,
        structural_vocab=str_vocab,
        structural_forest=str_forest,
        charset=charset,
        char_model=char_model,
        encoder_spec=config.contextual_encoder,
        head_model=head_model,
        projections=projections,
        fusion_model=fusion_model,
        _encoder=encoder,
    )
