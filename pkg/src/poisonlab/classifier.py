"""L2-regularized logistic regression trained by full-batch gradient descent.

Training is deterministic: parameters start at zero and every epoch applies
one full-batch update, so retraining on the same instances always yields the
same model. That property is what makes poison-impact measurements
reproducible.
"""

from __future__ import annotations

from dataclasses import dataclass, asdict

import numpy as np
from sklearn.base import BaseEstimator, ClassifierMixin
from sklearn.utils.validation import check_X_y, check_array, check_is_fitted

from .data import Dataset, POSITIVE, NEGATIVE

PROB_CLIP = 1e-15


@dataclass(frozen=True)
class ModelConfig:
    """Hyperparameters of the gradient-descent trainer."""

    learning_rate: float = 0.1
    l2_lambda: float = 1e-3
    max_epochs: int = 2000
    convergence_tol: float = 1e-6

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, payload: dict) -> "ModelConfig":
        return cls(
            learning_rate=float(payload["learning_rate"]),
            l2_lambda=float(payload["l2_lambda"]),
            max_epochs=int(payload["max_epochs"]),
            convergence_tol=float(payload["convergence_tol"]),
        )


def stable_sigmoid(z: np.ndarray) -> np.ndarray:
    """Sigmoid with outputs clipped into (0, 1) so logs never blow up."""
    z = np.asarray(z, dtype=np.float64)
    with np.errstate(over="ignore"):
        p = 1.0 / (1.0 + np.exp(-z))
    return np.clip(p, PROB_CLIP, 1.0 - PROB_CLIP)


class LogisticRegressionGD(BaseEstimator, ClassifierMixin):
    """Binary logistic regression for labels in {-1, +1}.

    Minimizes mean logistic loss plus ``0.5 * l2_lambda * ||w||^2`` (bias
    unregularized) by full-batch gradient descent from zero initialization.
    Stops after ``max_epochs`` updates or once the gradient infinity norm
    falls below ``convergence_tol``.

    Fitted attributes: ``weights_``, ``bias_``, ``loss_curve_`` (one entry
    per visited parameter state, so ``len == n_epochs_ + 1``), ``n_epochs_``.
    """

    def __init__(
        self,
        learning_rate: float = 0.1,
        l2_lambda: float = 1e-3,
        max_epochs: int = 2000,
        convergence_tol: float = 1e-6,
    ):
        self.learning_rate = learning_rate
        self.l2_lambda = l2_lambda
        self.max_epochs = max_epochs
        self.convergence_tol = convergence_tol

    def fit(self, X, y) -> "LogisticRegressionGD":
        X, y = check_X_y(X, y, dtype=np.float64)
        if not np.all(np.isin(y, (NEGATIVE, POSITIVE))):
            raise ValueError("labels must be -1 or +1")
        if len(np.unique(y)) < 2:
            raise ValueError("training requires both classes to be present")
        if self.learning_rate <= 0 or self.l2_lambda < 0 or self.max_epochs < 1:
            raise ValueError("invalid hyperparameters")
        n, d = X.shape
        self.n_features_in_ = d
        self.classes_ = np.array([NEGATIVE, POSITIVE])
        t = (y == POSITIVE).astype(np.float64)
        w = np.zeros(d)
        b = 0.0
        lr = self.learning_rate
        lam = self.l2_lambda
        losses: list[float] = []

        def forward():
            p = stable_sigmoid(X @ w + b)
            data_loss = -np.mean(np.where(t == 1.0, np.log(p), np.log1p(-p)))
            losses.append(float(data_loss + 0.5 * lam * (w @ w)))
            return p

        p = forward()
        updates = 0
        for _ in range(self.max_epochs):
            err = p - t
            grad_w = X.T @ err / n + lam * w
            grad_b = float(err.mean())
            if max(float(np.max(np.abs(grad_w))), abs(grad_b)) < self.convergence_tol:
                break
            w -= lr * grad_w
            b -= lr * grad_b
            updates += 1
            p = forward()
        self.weights_ = w
        self.bias_ = b
        self.loss_curve_ = losses
        self.n_epochs_ = updates
        return self

    def decision_function(self, X) -> np.ndarray:
        check_is_fitted(self, "weights_")
        X = check_array(X, dtype=np.float64)
        if X.shape[1] != self.n_features_in_:
            raise ValueError(f"expected {self.n_features_in_} features, got {X.shape[1]}")
        return X @ self.weights_ + self.bias_

    def predict(self, X) -> np.ndarray:
        # ties at a decision value of exactly 0 go to the positive class
        scores = self.decision_function(X)
        return np.where(scores >= 0.0, POSITIVE, NEGATIVE).astype(np.int64)

    def predict_proba(self, X) -> np.ndarray:
        p = stable_sigmoid(self.decision_function(X))
        return np.column_stack([1.0 - p, p])

    def positive_proba(self, X) -> np.ndarray:
        """P(label = +1) for each row, strictly inside (0, 1)."""
        return stable_sigmoid(self.decision_function(X))

    def config(self) -> ModelConfig:
        return ModelConfig(
            learning_rate=self.learning_rate,
            l2_lambda=self.l2_lambda,
            max_epochs=self.max_epochs,
            convergence_tol=self.convergence_tol,
        )


def train(dataset: Dataset, config: ModelConfig | None = None) -> LogisticRegressionGD:
    """Fit a model on the dataset and stamp it with the dataset fingerprint."""
    config = config or ModelConfig()
    model = LogisticRegressionGD(**config.to_dict())
    model.fit(dataset.X, dataset.y)
    model.trained_on_ = dataset.fingerprint()
    return model


def predict_proba(model: LogisticRegressionGD, features: np.ndarray) -> float | np.ndarray:
    """Probability of class +1 for one vector or a batch of rows."""
    features = np.asarray(features, dtype=np.float64)
    if features.ndim == 1:
        return float(model.positive_proba(features.reshape(1, -1))[0])
    return model.positive_proba(features)


def predict(model: LogisticRegressionGD, features: np.ndarray) -> int | np.ndarray:
    """Predicted label (+1 on ties) for one vector or a batch of rows."""
    features = np.asarray(features, dtype=np.float64)
    if features.ndim == 1:
        return int(model.predict(features.reshape(1, -1))[0])
    return model.predict(features)


@dataclass(frozen=True)
class Metrics:
    """Confusion counts and summary scores with +1 as the positive class."""

    tn: int
    fn: int
    tp: int
    fp: int
    accuracy: float
    recall: float
    f1: float
    roc_auc: float | None

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, payload: dict) -> "Metrics":
        return cls(
            tn=int(payload["tn"]),
            fn=int(payload["fn"]),
            tp=int(payload["tp"]),
            fp=int(payload["fp"]),
            accuracy=float(payload["accuracy"]),
            recall=float(payload["recall"]),
            f1=float(payload["f1"]),
            roc_auc=None if payload["roc_auc"] is None else float(payload["roc_auc"]),
        )


def _average_ranks(values: np.ndarray) -> np.ndarray:
    """1-based ranks; tied values share the mean of their rank range."""
    n = len(values)
    order = np.argsort(values, kind="mergesort")
    inverse = np.empty(n, dtype=np.int64)
    inverse[order] = np.arange(n)
    sorted_vals = values[order]
    group_start = np.concatenate(([True], sorted_vals[1:] != sorted_vals[:-1]))
    group_id = np.cumsum(group_start) - 1
    counts = np.bincount(group_id)
    starts = np.concatenate(([0], np.cumsum(counts)[:-1]))
    mean_rank = starts + (counts + 1) / 2.0
    return mean_rank[group_id][inverse]


def roc_auc(y: np.ndarray, scores: np.ndarray) -> float | None:
    """Rank-based ROC-AUC; ties earn half credit. None if a class is absent."""
    y = np.asarray(y)
    scores = np.asarray(scores, dtype=np.float64)
    n_pos = int(np.sum(y == POSITIVE))
    n_neg = int(np.sum(y == NEGATIVE))
    if n_pos == 0 or n_neg == 0:
        return None
    ranks = _average_ranks(scores)
    pos_rank_sum = float(ranks[y == POSITIVE].sum())
    return (pos_rank_sum - n_pos * (n_pos + 1) / 2.0) / (n_pos * n_neg)


def evaluate(model: LogisticRegressionGD, dataset: Dataset) -> Metrics:
    """Confusion counts, accuracy, recall, F1 and ROC-AUC on a dataset."""
    predicted = model.predict(dataset.X)
    y = dataset.y
    tp = int(np.sum((predicted == POSITIVE) & (y == POSITIVE)))
    fp = int(np.sum((predicted == POSITIVE) & (y == NEGATIVE)))
    tn = int(np.sum((predicted == NEGATIVE) & (y == NEGATIVE)))
    fn = int(np.sum((predicted == NEGATIVE) & (y == POSITIVE)))
    precision = tp / (tp + fp) if tp + fp > 0 else 0.0
    recall = tp / (tp + fn) if tp + fn > 0 else 0.0
    f1 = 2 * precision * recall / (precision + recall) if tp > 0 else 0.0
    return Metrics(
        tn=tn,
        fn=fn,
        tp=tp,
        fp=fp,
        accuracy=(tp + tn) / dataset.n,
        recall=recall,
        f1=f1,
        roc_auc=roc_auc(y, model.positive_proba(dataset.X)),
    )


def feature_importance(model: LogisticRegressionGD) -> list[tuple[int, float]]:
    """(feature index, |weight|) pairs, descending; ties by ascending index.

    The tail of this list is the "less informative" feature set that the
    StingRay attack is allowed to perturb.
    """
    check_is_fitted(model, "weights_")
    magnitudes = np.abs(model.weights_)
    order = np.argsort(-magnitudes, kind="stable")
    return [(int(i), float(magnitudes[i])) for i in order]


def model_to_dict(model: LogisticRegressionGD) -> dict:
    """Portable model payload: weights, bias, config, trained_on."""
    check_is_fitted(model, "weights_")
    return {
        "weights": [float(w) for w in model.weights_],
        "bias": float(model.bias_),
        "config": model.config().to_dict(),
        "trained_on": getattr(model, "trained_on_", None),
    }


def model_from_dict(payload: dict) -> LogisticRegressionGD:
    """Rebuild a fitted model from :func:`model_to_dict` output."""
    config = ModelConfig.from_dict(payload["config"])
    model = LogisticRegressionGD(**config.to_dict())
    model.weights_ = np.asarray(payload["weights"], dtype=np.float64)
    model.bias_ = float(payload["bias"])
    model.n_features_in_ = len(model.weights_)
    model.classes_ = np.array([NEGATIVE, POSITIVE])
    model.loss_curve_ = []
    model.n_epochs_ = 0
    model.trained_on_ = payload.get("trained_on")
    return model
