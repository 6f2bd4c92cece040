import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from tournament_ordinal.data import generate_synthetic
from tournament_ordinal.errors import ConfigError, DimensionError, DomainError
from tournament_ordinal.learner import (
    BinaryModel,
    TrainConfig,
    balanced_weights,
    derive_seed,
    fit_logistic,
    logistic_loss_grad,
    make_binary_labels,
    score,
    score_batch,
    train_binary,
)

from conftest import central_diff_grad, make_dataset, rel_err


@pytest.mark.parametrize("grades,k,expected", [
    ([1, 2, 3, 4, 5, 6], 2, [0, 0, 1, 1, 1, 1]),
    ([3, 3], 3, [0, 0]),
    ([6], 5, [1]),
])
def test_make_binary_labels(grades, k, expected):
    ds = make_dataset(grades, num_classes=6)
    assert make_binary_labels(ds, k).tolist() == expected


def test_make_binary_labels_range():
    ds = make_dataset([1, 2, 3])
    for k in (0, 3):
        with pytest.raises(DomainError):
            make_binary_labels(ds, k)


def test_score_examples():
    zero = BinaryModel(np.zeros(3), 0.0)
    assert score(zero, [4.0, -2.0, 9.0]) == 0.5
    unit = BinaryModel(np.array([1.0]), 0.0)
    assert score(unit, [0.0]) == 0.5
    assert score(unit, [5.0]) < score(unit, [20.0]) <= 1.0
    assert score(unit, [20.0]) > 1 - 1e-8
    assert score(BinaryModel(np.array([math.log(3)]), 0.0), [1.0]) == pytest.approx(0.75, abs=1e-15)


def test_score_dimension_mismatch():
    with pytest.raises(DimensionError):
        score(BinaryModel(np.zeros(2), 0.0), [1.0, 2.0, 3.0])


def test_score_stays_inside_unit_interval():
    m = BinaryModel(np.array([1.0]), 0.0)
    s = score_batch(m, np.array([[-30.0], [30.0]]))
    assert 0 < s[0] < s[1] < 1


def test_separable_training_accuracy():
    ds = generate_synthetic([5, 5], d=3, separation=1000, seed=2)
    y = make_binary_labels(ds, 1)
    m = train_binary(ds, y, TrainConfig(epochs=50))
    pred = (score_batch(m, ds.features) > 0.5).astype(int)
    assert np.array_equal(pred, y)


def test_all_positive_labels_give_constant_model():
    ds = make_dataset([2, 2, 2], np.random.default_rng(0).normal(size=(3, 4)))
    m = train_binary(ds, np.ones(3, dtype=int), TrainConfig())
    assert m.degenerate
    assert np.all(score_batch(m, np.random.default_rng(1).normal(size=(10, 4))) > 0.5)
    neg = train_binary(ds, np.zeros(3, dtype=int), TrainConfig())
    assert neg.degenerate and score(neg, [0, 0, 0, 0]) < 0.5


def test_training_is_deterministic(graded_ds):
    y = make_binary_labels(graded_ds, 2)
    cfg = TrainConfig(seed=42)
    a, b = train_binary(graded_ds, y, cfg), train_binary(graded_ds, y, cfg)
    assert a.weights.tobytes() == b.weights.tobytes() and a.bias == b.bias
    c = train_binary(graded_ds, y, TrainConfig(seed=43))
    assert c.weights.tobytes() != a.weights.tobytes()


def test_empty_and_bad_inputs():
    with pytest.raises(DomainError):
        fit_logistic(np.zeros((0, 2)), np.zeros(0), TrainConfig())
    with pytest.raises(DimensionError):
        fit_logistic(np.zeros((3, 2)), np.zeros(2), TrainConfig())
    with pytest.raises(Exception):
        fit_logistic(np.array([[np.nan, 1.0], [0.0, 1.0]]), np.array([0, 1]), TrainConfig())


def test_train_config_validation():
    for bad in ({"learning_rate": 0}, {"l2": -1}, {"epochs": 0}, {"batch_size": 0}):
        with pytest.raises(ConfigError):
            TrainConfig(**bad)


@settings(max_examples=40, deadline=None)
@given(seed=st.integers(0, 2**31 - 1), d=st.integers(1, 8), n=st.integers(2, 32),
       weighted=st.booleans(), l2=st.sampled_from([0.0, 1e-3, 0.5]))
def test_gradient_matches_finite_differences(seed, d, n, weighted, l2):
    rng = np.random.default_rng(seed)
    X = rng.normal(size=(n, d))
    y = rng.integers(0, 2, size=n)
    y[0], y[-1] = 0, 1
    w, b = rng.normal(size=d), float(rng.normal())
    sw = balanced_weights(y) if weighted else None
    _, gw, gb = logistic_loss_grad(w, b, X, y, l2, sw)
    fw, fb = central_diff_grad(w, b, X, y, l2, sw)
    assert rel_err(np.r_[gw, gb], np.r_[fw, fb]) < 1e-5


def test_full_batch_loss_non_increasing():
    ds = generate_synthetic([20, 20], d=4, separation=1.5, seed=5)
    X, y = ds.features, make_binary_labels(ds, 1)
    w, b, lr = np.zeros(4), 0.0, 0.05
    losses = []
    for _ in range(200):
        loss, gw, gb = logistic_loss_grad(w, b, X, y, 1e-3)
        losses.append(loss)
        w, b = w - lr * gw, b - lr * gb
    assert all(b_ <= a_ + 1e-15 for a_, b_ in zip(losses, losses[1:]))

    # the trainer in full-batch mode reaches a loss no worse than the start
    cfg = TrainConfig(learning_rate=0.05, l2=1e-3, epochs=5, batch_size=len(y))
    per_epoch = [fit_logistic(X, y, TrainConfig(**{**cfg.to_dict(), "epochs": e})).meta["final_loss"]
                 for e in range(1, 6)]
    assert all(b_ <= a_ + 1e-12 for a_, b_ in zip(per_epoch, per_epoch[1:]))


@settings(max_examples=30, deadline=None)
@given(seed=st.integers(0, 10_000), m=st.integers(2, 5), dup_positive=st.booleans())
def test_weighted_loss_invariant_to_class_duplication(seed, m, dup_positive):
    rng = np.random.default_rng(seed)
    X = rng.normal(size=(12, 3))
    y = np.array([0] * 5 + [1] * 7)
    w, b = rng.normal(size=3), float(rng.normal())
    base = logistic_loss_grad(w, b, X, y, 0.1, balanced_weights(y))[0]
    cls = 1 if dup_positive else 0
    X2 = np.vstack([X[y != cls]] + [X[y == cls]] * m)
    y2 = np.r_[y[y != cls], np.tile(y[y == cls], m)]
    dup = logistic_loss_grad(w, b, X2, y2, 0.1, balanced_weights(y2))[0]
    assert abs(base - dup) < 1e-9


def test_model_json_round_trip():
    m = BinaryModel(np.array([0.1, -1 / 3]), 2 / 7, k=3, meta={"epochs": 7})
    back = BinaryModel.from_dict(m.to_dict())
    assert back.weights.tolist() == m.weights.tolist()
    assert back.bias == m.bias and back.k == 3


def test_derive_seed_is_stable():
    assert derive_seed(1, 2, "x") == derive_seed(1, 2, "x")
    assert derive_seed(1, 2, 3) != derive_seed(1, 3, 2)
