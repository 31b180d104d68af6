"""Random-forest classifiers for the two TF-IDF streams.

Training delegates to scikit-learn (bootstrapped CART trees, Gini criterion,
sqrt-of-V feature candidates, grown to purity); the fitted ensemble is
immediately converted into a plain array representation that this module owns:
prediction, JSON persistence, and bundle round-trips never touch sklearn
objects.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
import scipy.sparse as sp

from .errors import DataError, TrainingError
from .tfidf import SparseFeatureVector

VOTE_SOFT = "soft"
VOTE_HARD = "hard"


@dataclass
class TreeArrays:
    """One decision tree: parallel node arrays, -1 children mark leaves."""

    feature: np.ndarray  # int64; -2 on leaves
    threshold: np.ndarray  # float64; route left when x[feature] <= threshold
    left: np.ndarray  # int64
    right: np.ndarray  # int64
    leaf_fraction: np.ndarray  # float64; P(class 1) at each node

    def to_json_obj(self) -> list[dict]:
        return [
            {
                "feature": int(self.feature[i]),
                "threshold": float(self.threshold[i]),
                "left": int(self.left[i]),
                "right": int(self.right[i]),
                "fractions": [1.0 - float(self.leaf_fraction[i]), float(self.leaf_fraction[i])],
            }
            for i in range(len(self.feature))
        ]

    @classmethod
    def from_json_obj(cls, nodes: list[dict]) -> "TreeArrays":
        return cls(
            feature=np.array([n["feature"] for n in nodes], dtype=np.int64),
            threshold=np.array([n["threshold"] for n in nodes]),
            left=np.array([n["left"] for n in nodes], dtype=np.int64),
            right=np.array([n["right"] for n in nodes], dtype=np.int64),
            leaf_fraction=np.array([n["fractions"][1] for n in nodes]),
        )


@dataclass
class ForestModel:
    stream_id: str
    feature_dim: int
    trees: list[TreeArrays]
    vote: str = VOTE_SOFT
    seed: int = 0

    def to_json_obj(self) -> dict:
        return {
            "stream_id": self.stream_id,
            "feature_dim": self.feature_dim,
            "vote": self.vote,
            "seed": self.seed,
            "trees": [t.to_json_obj() for t in self.trees],
        }

    @classmethod
    def from_json_obj(cls, obj: dict) -> "ForestModel":
        return cls(
            stream_id=obj["stream_id"],
            feature_dim=int(obj["feature_dim"]),
            trees=[TreeArrays.from_json_obj(t) for t in obj["trees"]],
            vote=obj["vote"],
            seed=int(obj["seed"]),
        )


def _to_csr(X: Sequence[SparseFeatureVector] | sp.spmatrix | np.ndarray) -> sp.csr_matrix:
    if sp.issparse(X):
        return X.tocsr()
    if isinstance(X, np.ndarray):
        return sp.csr_matrix(X)
    data: list[float] = []
    indices: list[int] = []
    indptr = [0]
    dim = X[0].dimension
    for vec in X:
        if vec.dimension != dim:
            raise DataError(f"feature dimension mismatch: {vec.dimension} != {dim}")
        indices.extend(vec.indices.tolist())
        data.extend(vec.values.tolist())
        indptr.append(len(indices))
    return sp.csr_matrix(
        (np.array(data), np.array(indices, dtype=np.int64), np.array(indptr, dtype=np.int64)),
        shape=(len(indptr) - 1, dim),
    )


def train_forest(
    X: Sequence[SparseFeatureVector] | sp.spmatrix | np.ndarray,
    y: Sequence[int],
    trees: int = 200,
    seed: int = 0,
    bootstrap: bool = True,
    stream_id: str = "",
    vote: str = VOTE_SOFT,
) -> ForestModel:
    """Fit the ensemble; deterministic for a fixed seed.

    ``bootstrap=False`` fits every tree on the full sample (no resampling),
    which makes predictions invariant to duplicating the training set.
    """
    from sklearn.ensemble import RandomForestClassifier

    Xc = _to_csr(X)
    y = np.asarray(y, dtype=np.int64)
    if Xc.shape[0] != len(y):
        raise DataError(f"X and y length mismatch: {Xc.shape[0]} != {len(y)}")
    if len(y) < 10:
        raise DataError(f"need at least 10 training samples, got {len(y)}")
    classes = np.unique(y)
    if not np.array_equal(classes, [0, 1]):
        raise TrainingError(f"need both classes in training data, got classes {classes.tolist()}")

    clf = RandomForestClassifier(
        n_estimators=trees,
        criterion="gini",
        max_features="sqrt",
        max_depth=None,
        min_samples_leaf=1,
        bootstrap=bootstrap,
        random_state=seed,
        n_jobs=1,
    )
    clf.fit(Xc, y)

    exported = []
    for est in clf.estimators_:
        t = est.tree_
        value = t.value[:, 0, :]
        totals = value.sum(axis=1)
        totals[totals == 0] = 1.0
        exported.append(
            TreeArrays(
                feature=t.feature.astype(np.int64),
                threshold=t.threshold.astype(np.float64),
                left=t.children_left.astype(np.int64),
                right=t.children_right.astype(np.int64),
                leaf_fraction=(value[:, 1] / totals).astype(np.float64),
            )
        )
    return ForestModel(
        stream_id=stream_id,
        feature_dim=Xc.shape[1],
        trees=exported,
        vote=vote,
        seed=seed,
    )


def _route(tree: TreeArrays, Xd: np.ndarray) -> np.ndarray:
    """Leaf class-1 fraction for every row of a dense matrix."""
    pos = np.zeros(Xd.shape[0], dtype=np.int64)
    while True:
        at_leaf = tree.left[pos] == -1
        if at_leaf.all():
            break
        feat = np.where(at_leaf, 0, tree.feature[pos])
        go_left = Xd[np.arange(Xd.shape[0]), feat] <= tree.threshold[pos]
        nxt = np.where(go_left, tree.left[pos], tree.right[pos])
        pos = np.where(at_leaf, pos, nxt)
    return tree.leaf_fraction[pos]


def predict_forest_batch(
    model: ForestModel, X: Sequence[SparseFeatureVector] | sp.spmatrix | np.ndarray
) -> np.ndarray:
    """Positive-class probability per row.

    Soft vote averages leaf class fractions; hard vote counts trees whose
    leaf majority (fraction > 0.5) is positive.
    """
    Xc = _to_csr(X)
    if Xc.shape[1] != model.feature_dim:
        raise DataError(
            f"feature dimension mismatch: model expects {model.feature_dim}, got {Xc.shape[1]}"
        )
    Xd = np.asarray(Xc.todense())
    acc = np.zeros(Xd.shape[0])
    for tree in model.trees:
        frac = _route(tree, Xd)
        acc += frac if model.vote == VOTE_SOFT else (frac > 0.5).astype(np.float64)
    return acc / len(model.trees)


def predict_forest(model: ForestModel, x: SparseFeatureVector) -> float:
    return float(predict_forest_batch(model, [x])[0])
