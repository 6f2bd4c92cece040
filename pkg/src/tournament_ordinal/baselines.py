"""Comparison models sharing the logistic/SGD machinery of the tournament.

* rank aggregation: N-1 threshold models over the full training set, grade = 1 + votes
* linear regression on the grade, rounded half-up and clamped
* flat softmax multiclass classification
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .data import Dataset
from .errors import DimensionError, DomainError, NumericError, TrainingError
from .learner import BinaryModel, TrainConfig, derive_seed, fit_logistic, iter_minibatches, score_batch


def _features(X, dim: int) -> np.ndarray:
    if isinstance(X, Dataset):
        X = X.features
    X = np.asarray(X, dtype=np.float64)
    if X.ndim == 1:
        X = X.reshape(1, -1) if X.size else X.reshape(0, dim)
    if X.shape[1] != dim:
        raise DimensionError(f"expected {dim} features, got {X.shape[1]}")
    return X


def _check_trainable(ds: Dataset):
    if ds.num_classes < 2:
        raise DomainError("need at least two grades")


# --- rank aggregation ----------------------------------------------------------

@dataclass(frozen=True, eq=False)
class RankEnsemble:
    models: tuple[BinaryModel, ...]
    num_classes: int

    def __post_init__(self):
        if len(self.models) != self.num_classes - 1:
            raise DomainError(f"need {self.num_classes - 1} threshold models, got {len(self.models)}")

    @property
    def feature_dim(self) -> int:
        return self.models[0].dim

    def indicators(self, X) -> np.ndarray:
        X = _features(X, self.feature_dim)
        return np.column_stack([score_batch(m, X) > 0.5 for m in self.models]).astype(np.int64)

    def predict_batch(self, X) -> np.ndarray:
        return aggregate_votes(self.indicators(X))

    def to_dict(self) -> dict:
        return {"num_classes": self.num_classes, "models": [m.to_dict() for m in self.models]}

    @classmethod
    def from_dict(cls, d: dict) -> "RankEnsemble":
        return cls(tuple(BinaryModel.from_dict(m) for m in d["models"]), d["num_classes"])


def aggregate_votes(indicators) -> np.ndarray:
    """1 + number of thresholds voting "above"; non-monotone votes are summed as-is."""
    ind = np.asarray(indicators, dtype=np.int64)
    if ind.ndim == 1:
        ind = ind[None, :]
    return 1 + ind.sum(axis=1)


def train_rank_ensemble(ds: Dataset, cfg: TrainConfig | None = None) -> RankEnsemble:
    cfg = cfg or TrainConfig()
    _check_trainable(ds)
    models = tuple(
        fit_logistic(ds.features, (ds.grades > k).astype(np.int64),
                     cfg.with_seed(derive_seed(cfg.seed, k, "rank")), k=k)
        for k in range(1, ds.num_classes)
    )
    return RankEnsemble(models, ds.num_classes)


def predict_rank(e: RankEnsemble, x) -> int:
    return int(e.predict_batch(np.asarray(x, dtype=np.float64).reshape(1, -1))[0])


# --- linear regression on the grade -----------------------------------------------

def round_grade(raw, num_classes: int) -> np.ndarray:
    """Round half-up, then clamp into [1, N]."""
    r = np.floor(np.asarray(raw, dtype=np.float64) + 0.5)
    return np.clip(r, 1, num_classes).astype(np.int64)


@dataclass(frozen=True, eq=False)
class RegressionModel:
    weights: np.ndarray
    bias: float
    num_classes: int
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        w = np.asarray(self.weights, dtype=np.float64).reshape(-1).copy()
        if not np.all(np.isfinite(w)) or not math.isfinite(self.bias):
            raise NumericError("regression parameters must be finite")
        w.setflags(write=False)
        object.__setattr__(self, "weights", w)
        object.__setattr__(self, "bias", float(self.bias))

    @property
    def feature_dim(self) -> int:
        return len(self.weights)

    def raw(self, X) -> np.ndarray:
        return _features(X, self.feature_dim) @ self.weights + self.bias

    def predict_batch(self, X) -> np.ndarray:
        return round_grade(self.raw(X), self.num_classes)

    def to_dict(self) -> dict:
        return {"num_classes": self.num_classes, "weights": [float(v) for v in self.weights],
                "bias": self.bias, "meta": dict(self.meta)}

    @classmethod
    def from_dict(cls, d: dict) -> "RegressionModel":
        return cls(np.array(d["weights"]), d["bias"], d["num_classes"], dict(d.get("meta", {})))


def squared_loss_grad(w, b, X, y, l2=0.0):
    r = X @ w + b - y
    n = len(y)
    loss = float(0.5 * np.dot(r, r) / n + 0.5 * l2 * np.dot(w, w))
    return loss, X.T @ r / n + l2 * w, float(r.sum() / n)


@np.errstate(over="ignore", invalid="ignore")
def train_regression(ds: Dataset, cfg: TrainConfig | None = None) -> RegressionModel:
    cfg = cfg or TrainConfig()
    _check_trainable(ds)
    X = ds.features
    y = ds.grades.astype(np.float64)
    rng = np.random.default_rng(derive_seed(cfg.seed, "linear"))
    # centred features, unregularized bias: same objective, shorter path
    center = X.mean(axis=0)
    Xc = X - center
    w = np.zeros(ds.feature_dim)
    b = float(y.mean())
    # the squared-loss Hessian is bounded by the trace E|x_c|^2; capping the step at
    # its inverse keeps SGD stable however strongly the features correlate
    lr = min(cfg.learning_rate, 1.0 / max(float(np.mean(np.sum(Xc * Xc, axis=1))), 1e-12))
    start = squared_loss_grad(w, b, Xc, y, cfg.l2)[0]
    for _ in range(cfg.epochs):
        for idx in iter_minibatches(len(y), cfg.batch_size, rng):
            _, gw, gb = squared_loss_grad(w, b, Xc[idx], y[idx], cfg.l2)
            w -= lr * gw
            b -= lr * gb
        if not np.all(np.isfinite(w)):
            raise TrainingError("regression SGD diverged; lower the learning rate")
    if squared_loss_grad(w, b, Xc, y, cfg.l2)[0] > 10 * start + 1.0:
        raise TrainingError("regression SGD diverged; lower the learning rate")
    b -= float(w @ center)
    loss = squared_loss_grad(w, b, X, y, cfg.l2)[0]
    return RegressionModel(w, b, ds.num_classes, {"epochs": cfg.epochs, "final_loss": loss, "seed": cfg.seed,
                                                  "step": lr})


def predict_regression(m: RegressionModel, x) -> int:
    return int(m.predict_batch(np.asarray(x, dtype=np.float64).reshape(1, -1))[0])


# --- softmax multiclass --------------------------------------------------------------

def softmax(z) -> np.ndarray:
    z = np.asarray(z, dtype=np.float64)
    z = z - z.max(axis=-1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=-1, keepdims=True)


@dataclass(frozen=True, eq=False)
class MulticlassModel:
    """Row ``g - 1`` of ``weights`` / entry ``g - 1`` of ``biases`` score grade g."""

    weights: np.ndarray
    biases: np.ndarray
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        W = np.asarray(self.weights, dtype=np.float64).copy()
        b = np.asarray(self.biases, dtype=np.float64).reshape(-1).copy()
        if W.ndim != 2 or W.shape[0] != len(b):
            raise DimensionError("weights must be N x d with N biases")
        if not (np.all(np.isfinite(W)) and np.all(np.isfinite(b))):
            raise NumericError("multiclass parameters must be finite")
        W.setflags(write=False)
        b.setflags(write=False)
        object.__setattr__(self, "weights", W)
        object.__setattr__(self, "biases", b)

    @property
    def num_classes(self) -> int:
        return self.weights.shape[0]

    @property
    def feature_dim(self) -> int:
        return self.weights.shape[1]

    def probabilities(self, X) -> np.ndarray:
        return softmax(_features(X, self.feature_dim) @ self.weights.T + self.biases)

    def predict_batch(self, X) -> np.ndarray:
        # argmax returns the first maximum, i.e. the lowest grade on ties
        return np.argmax(self.probabilities(X), axis=1).astype(np.int64) + 1

    def to_dict(self) -> dict:
        return {"weights": self.weights.tolist(), "biases": self.biases.tolist(), "meta": dict(self.meta)}

    @classmethod
    def from_dict(cls, d: dict) -> "MulticlassModel":
        return cls(np.array(d["weights"]), np.array(d["biases"]), dict(d.get("meta", {})))


def cross_entropy_grad(W, b, X, y_idx, l2=0.0):
    n = len(y_idx)
    z = X @ W.T + b
    z = z - z.max(axis=1, keepdims=True)
    log_p = z - np.log(np.exp(z).sum(axis=1, keepdims=True))
    loss = float(-log_p[np.arange(n), y_idx].sum() / n + 0.5 * l2 * np.sum(W * W))
    r = np.exp(log_p)
    r[np.arange(n), y_idx] -= 1.0
    r /= n
    return loss, r.T @ X + l2 * W, r.sum(axis=0)


@np.errstate(over="ignore", invalid="ignore")
def train_multiclass(ds: Dataset, cfg: TrainConfig | None = None) -> MulticlassModel:
    cfg = cfg or TrainConfig()
    _check_trainable(ds)
    X = ds.features
    y_idx = ds.grades - 1
    rng = np.random.default_rng(derive_seed(cfg.seed, "multiclass"))
    center = X.mean(axis=0)
    Xc = X - center
    W = np.zeros((ds.num_classes, ds.feature_dim))
    # start from the log class priors (absent grades get a large negative logit)
    prior = np.bincount(y_idx, minlength=ds.num_classes) / len(y_idx)
    b = np.log(np.maximum(prior, 1e-9))
    for _ in range(cfg.epochs):
        for idx in iter_minibatches(len(y_idx), cfg.batch_size, rng):
            _, gW, gb = cross_entropy_grad(W, b, Xc[idx], y_idx[idx], cfg.l2)
            W -= cfg.learning_rate * gW
            b -= cfg.learning_rate * gb
    b = b - W @ center
    if not (np.all(np.isfinite(W)) and np.all(np.isfinite(b))):
        raise TrainingError("multiclass SGD diverged; lower the learning rate")
    loss = cross_entropy_grad(W, b, X, y_idx, cfg.l2)[0]
    return MulticlassModel(W, b, {"epochs": cfg.epochs, "final_loss": loss, "seed": cfg.seed})


def predict_multiclass(m: MulticlassModel, x) -> int:
    return int(m.predict_batch(np.asarray(x, dtype=np.float64).reshape(1, -1))[0])
