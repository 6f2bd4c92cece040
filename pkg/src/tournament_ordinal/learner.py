"""Binary base learner: L2-regularized logistic regression fit by mini-batch SGD.

A model scores the probability that a sample's grade exceeds its threshold K.
"""

from __future__ import annotations

import zlib
from dataclasses import dataclass, field, replace

import numpy as np

from .data import Dataset
from .errors import ConfigError, DimensionError, DomainError, NumericError, TrainingError

# |bias| of the constant model returned when training labels hold a single class
DEGENERATE_BIAS = 20.0


def derive_seed(*parts) -> int:
    """Deterministic 32-bit seed from ints and strings, independent of call order."""
    entropy = [zlib.crc32(p.encode()) if isinstance(p, str) else int(p) for p in parts]
    if any(e < 0 for e in entropy):
        raise ConfigError("seed components must be non-negative")
    return int(np.random.SeedSequence(entropy).generate_state(1)[0])


@dataclass(frozen=True)
class TrainConfig:
    learning_rate: float = 0.1
    l2: float = 1e-4
    epochs: int = 300
    batch_size: int = 32
    seed: int = 0
    class_weighting: bool = False

    def __post_init__(self):
        if not self.learning_rate > 0:
            raise ConfigError("learning_rate must be > 0")
        if self.l2 < 0:
            raise ConfigError("l2 must be >= 0")
        if self.epochs < 1 or self.batch_size < 1:
            raise ConfigError("epochs and batch_size must be >= 1")

    def with_seed(self, seed: int) -> "TrainConfig":
        return replace(self, seed=seed)

    def to_dict(self) -> dict:
        return {
            "learning_rate": self.learning_rate,
            "l2": self.l2,
            "epochs": self.epochs,
            "batch_size": self.batch_size,
            "seed": self.seed,
            "class_weighting": self.class_weighting,
        }


def sigmoid(z):
    z = np.asarray(z, dtype=np.float64)
    out = np.empty_like(z)
    pos = z >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-z[pos]))
    ez = np.exp(z[~pos])
    out[~pos] = ez / (1.0 + ez)
    return out


def balanced_weights(y) -> np.ndarray:
    """Inverse-frequency weights ``n / (2 n_y)``; the weighted mean loss is the
    average of the two per-class mean losses."""
    y = np.asarray(y)
    n = len(y)
    n_pos = int(y.sum())
    n_neg = n - n_pos
    w = np.empty(n, dtype=np.float64)
    w[y == 1] = n / (2.0 * n_pos) if n_pos else 0.0
    w[y == 0] = n / (2.0 * n_neg) if n_neg else 0.0
    return w


def logistic_loss_grad(w, b, X, y, l2=0.0, sample_weight=None):
    """Mean (optionally weighted) logistic loss plus ``l2 * |w|^2 / 2``.

    Returns ``(loss, grad_w, grad_b)``. The bias is not regularized.
    """
    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    z = X @ w + b
    sw = np.ones(len(y)) if sample_weight is None else np.asarray(sample_weight, dtype=np.float64)
    n = len(y)
    loss = float(np.sum(sw * (np.logaddexp(0.0, z) - y * z)) / n + 0.5 * l2 * np.dot(w, w))
    r = sw * (sigmoid(z) - y) / n
    return loss, X.T @ r + l2 * w, float(np.sum(r))


def iter_minibatches(n: int, batch_size: int, rng: np.random.Generator):
    order = rng.permutation(n)
    for start in range(0, n, batch_size):
        yield order[start:start + batch_size]


@dataclass(frozen=True, eq=False)
class BinaryModel:
    weights: np.ndarray
    bias: float
    k: int | None = None
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        w = np.asarray(self.weights, dtype=np.float64).reshape(-1).copy()
        if not np.all(np.isfinite(w)) or not np.isfinite(self.bias):
            raise NumericError("model parameters must be finite")
        w.setflags(write=False)
        object.__setattr__(self, "weights", w)
        object.__setattr__(self, "bias", float(self.bias))

    @property
    def dim(self) -> int:
        return len(self.weights)

    @property
    def degenerate(self) -> bool:
        return bool(self.meta.get("degenerate", False))

    def to_dict(self) -> dict:
        return {
            "k": self.k,
            "weights": [float(v) for v in self.weights],
            "bias": self.bias,
            "meta": dict(self.meta),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "BinaryModel":
        return cls(np.array(d["weights"], dtype=np.float64), d["bias"], d.get("k"), dict(d.get("meta", {})))


def constant_model(dim: int, positive: bool, k=None, **meta) -> BinaryModel:
    bias = DEGENERATE_BIAS if positive else -DEGENERATE_BIAS
    return BinaryModel(np.zeros(dim), bias, k, {"degenerate": True, "epochs": 0, **meta})


def make_binary_labels(ds: Dataset, k: int) -> np.ndarray:
    """1 where ``grade > k``, else 0."""
    if not 1 <= k <= ds.num_classes - 1:
        raise DomainError(f"K={k} outside [1, {ds.num_classes - 1}]")
    return (ds.grades > k).astype(np.int64)


@np.errstate(over="ignore", invalid="ignore")
def fit_logistic(X, y, cfg: TrainConfig, k=None) -> BinaryModel:
    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(y, dtype=np.int64).reshape(-1)
    if X.ndim != 2 or len(X) == 0:
        raise DomainError("cannot train on an empty dataset")
    if len(y) != len(X):
        raise DimensionError(f"{len(y)} labels for {len(X)} samples")
    if not np.all(np.isfinite(X)):
        raise NumericError("non-finite feature value")
    if np.any((y != 0) & (y != 1)):
        raise DomainError("labels must be 0 or 1")

    n, d = X.shape
    n_pos = int(y.sum())
    if n_pos == 0 or n_pos == n:
        return constant_model(d, positive=n_pos == n, k=k, seed=cfg.seed, final_loss=0.0)

    sw = balanced_weights(y) if cfg.class_weighting else np.ones(n)
    rng = np.random.default_rng(cfg.seed)
    # SGD runs on centred features, starting from the weighted base-rate log-odds.
    # The bias is unregularized, so this reparametrization leaves the objective
    # unchanged; it only spares the bias a long walk away from zero.
    center = X.mean(axis=0)
    Xc = X - center
    p = float(np.sum(sw * y) / np.sum(sw))
    w = np.zeros(d)
    b = float(np.log(p / (1.0 - p)))
    for _ in range(cfg.epochs):
        for idx in iter_minibatches(n, cfg.batch_size, rng):
            _, gw, gb = logistic_loss_grad(w, b, Xc[idx], y[idx], cfg.l2, sw[idx])
            w -= cfg.learning_rate * gw
            b -= cfg.learning_rate * gb
    b -= float(w @ center)
    if not np.all(np.isfinite(w)) or not np.isfinite(b):
        raise TrainingError("SGD diverged; lower the learning rate")
    loss = logistic_loss_grad(w, b, X, y, cfg.l2, sw)[0]
    return BinaryModel(w, b, k, {"degenerate": False, "epochs": cfg.epochs, "final_loss": loss, "seed": cfg.seed})


def train_binary(ds: Dataset, labels, cfg: TrainConfig, k=None) -> BinaryModel:
    return fit_logistic(ds.features, labels, cfg, k=k)


def score_batch(model: BinaryModel, X) -> np.ndarray:
    X = np.asarray(X, dtype=np.float64)
    if X.ndim != 2 or X.shape[1] != model.dim:
        raise DimensionError(f"expected {model.dim} features, got shape {X.shape}")
    return sigmoid(X @ model.weights + model.bias)


def score(model: BinaryModel, x) -> float:
    x = np.asarray(x, dtype=np.float64).reshape(-1)
    if len(x) != model.dim:
        raise DimensionError(f"expected {model.dim} features, got {len(x)}")
    return float(score_batch(model, x[None, :])[0])
