"""Estimator facade over the functional training and evaluation core.

`HegClassifier` follows the scikit-learn contract: constructor stores
hyperparameters verbatim, `fit` validates and trains, fitted state lives
in trailing-underscore attributes, and `get_params` round-trips.
X is a list of temporal bipartite graphs rather than a feature matrix.
"""

from __future__ import annotations

from dataclasses import replace

import numpy as np
from sklearn.base import BaseEstimator, ClassifierMixin
from sklearn.exceptions import NotFittedError

from .aggregators import KIND_ORDER
from .errors import DataError
from .evaluation import predict as _predict
from .training import TrainConfig, train
from .validation import check_graphs, check_labels


class HegClassifier(BaseEstimator, ClassifierMixin):
    """Graph classifier with multi-statistic aggregation and gated pooling."""

    def __init__(self, kinds=KIND_ORDER, pooling="feature_gated_attention",
                 compression=True, activation="relu", std_epsilon=1e-5,
                 learning_rate=1e-4, weight_decay=0.5, batch_size=32,
                 epochs=200, seed=0):
        self.kinds = kinds
        self.pooling = pooling
        self.compression = compression
        self.activation = activation
        self.std_epsilon = std_epsilon
        self.learning_rate = learning_rate
        self.weight_decay = weight_decay
        self.batch_size = batch_size
        self.epochs = epochs
        self.seed = seed

    def fit(self, X, y=None):
        """Train on labelled graphs.

        y overrides any labels stored on the graphs; label values may be
        arbitrary integers and are encoded to contiguous class indices.
        """
        self.n_features_in_ = check_graphs(X)
        if y is not None:
            y = np.asarray(y, dtype=np.int64)
            if y.shape != (len(X),):
                raise DataError(f"y has shape {y.shape}, expected ({len(X)},)")
        else:
            y = check_labels(X)
        self.classes_, encoded = np.unique(y, return_inverse=True)
        if self.classes_.size < 2:
            raise DataError("fit needs at least two distinct classes")
        graphs = [replace(g, label=int(lab), _in_lists=g._in_lists)
                  for g, lab in zip(X, encoded)]
        config = TrainConfig(
            num_classes=int(self.classes_.size), kinds=tuple(self.kinds),
            pooling=self.pooling, compression=self.compression,
            activation=self.activation, std_epsilon=self.std_epsilon,
            learning_rate=self.learning_rate, weight_decay=self.weight_decay,
            batch_size=self.batch_size, epochs=self.epochs, seed=self.seed)
        result = train(config, graphs)
        self.model_ = result.model
        self.head_ = result.head
        self.loss_history_ = result.loss_history
        return self

    def _check_fitted(self):
        if not hasattr(self, "model_"):
            raise NotFittedError("HegClassifier is not fitted; call fit first")

    def predict_proba(self, X):
        """Per-graph class probabilities, columns ordered like classes_."""
        self._check_fitted()
        width = check_graphs(X)
        if width != self.n_features_in_:
            raise DataError(f"graphs have feature width {width}, "
                            f"fitted on {self.n_features_in_}")
        _, probs = _predict(self.model_, self.head_, X)
        return probs

    def predict(self, X):
        probs = self.predict_proba(X)
        return self.classes_[np.argmax(probs, axis=1)]
