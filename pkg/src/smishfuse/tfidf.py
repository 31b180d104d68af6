"""TF-IDF vectorization for the tagged-text streams.

Pinned weighting: value(t) = raw count * idf(t) with
idf(t) = ln((1 + N) / (1 + df(t))) + 1, then L2 normalization. The vocabulary
is fit on the training partition only; terms below min_df are dropped and a
max_features cap keeps the highest document frequencies (ties lexicographic).
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from collections import Counter
from typing import Iterable, Sequence

import numpy as np
import scipy.sparse as sp

from .errors import DataError
from .tokenize import tokenize


@dataclass(frozen=True)
class SparseFeatureVector:
    """Nonzero entries of one nonnegative feature vector, sorted by index."""

    dimension: int
    indices: np.ndarray  # int64, strictly increasing
    values: np.ndarray  # float64, >= 0

    def as_dict(self) -> dict[int, float]:
        return {int(i): float(v) for i, v in zip(self.indices, self.values)}

    def to_dense(self) -> np.ndarray:
        dense = np.zeros(self.dimension)
        dense[self.indices] = self.values
        return dense


@dataclass
class TfidfVocabulary:
    term_to_index: dict[str, int]
    idf: np.ndarray  # aligned with indices 0..V-1
    n_docs: int
    min_df: int
    max_features: int | None

    @property
    def size(self) -> int:
        return len(self.term_to_index)


def fit_tfidf(
    training_texts: Sequence[str], min_df: int = 1, max_features: int | None = None
) -> TfidfVocabulary:
    """Build a vocabulary and idf weights from tagged training texts."""
    if not training_texts:
        raise DataError("cannot fit a TF-IDF vocabulary on an empty corpus")
    df: Counter[str] = Counter()
    for text in training_texts:
        df.update(set(tokenize(text)))

    terms = [t for t, c in df.items() if c >= min_df]
    if max_features is not None and len(terms) > max_features:
        terms.sort(key=lambda t: (-df[t], t))
        terms = terms[:max_features]
    terms.sort()
    if not terms:
        raise DataError(
            f"TF-IDF vocabulary is empty after filtering (min_df={min_df})"
        )

    n = len(training_texts)
    term_to_index = {t: i for i, t in enumerate(terms)}
    idf = np.array([math.log((1 + n) / (1 + df[t])) + 1.0 for t in terms])
    return TfidfVocabulary(term_to_index, idf, n, min_df, max_features)


def transform_tfidf(text: str, vocab: TfidfVocabulary) -> SparseFeatureVector:
    """Vectorize one tagged text; out-of-vocabulary tokens are ignored."""
    counts: Counter[int] = Counter()
    for tok in tokenize(text):
        idx = vocab.term_to_index.get(tok)
        if idx is not None:
            counts[idx] += 1
    if not counts:
        return SparseFeatureVector(
            vocab.size, np.empty(0, dtype=np.int64), np.empty(0)
        )
    indices = np.array(sorted(counts), dtype=np.int64)
    values = np.array([counts[i] for i in indices], dtype=np.float64)
    values *= vocab.idf[indices]
    norm = float(np.sqrt(np.sum(values * values)))
    if norm > 0:
        values /= norm
    return SparseFeatureVector(vocab.size, indices, values)


def transform_matrix(texts: Iterable[str], vocab: TfidfVocabulary) -> sp.csr_matrix:
    """Vectorize a batch of texts into a CSR matrix (rows in input order)."""
    data: list[float] = []
    indices: list[int] = []
    indptr = [0]
    for text in texts:
        vec = transform_tfidf(text, vocab)
        indices.extend(vec.indices.tolist())
        data.extend(vec.values.tolist())
        indptr.append(len(indices))
    return sp.csr_matrix(
        (np.array(data), np.array(indices, dtype=np.int64), np.array(indptr, dtype=np.int64)),
        shape=(len(indptr) - 1, vocab.size),
    )
