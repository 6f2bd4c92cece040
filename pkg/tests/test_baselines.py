import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from tournament_ordinal.baselines import (
    MulticlassModel,
    RankEnsemble,
    RegressionModel,
    aggregate_votes,
    predict_multiclass,
    predict_rank,
    round_grade,
    softmax,
    train_multiclass,
    train_rank_ensemble,
    train_regression,
)
from tournament_ordinal.data import generate_synthetic
from tournament_ordinal.errors import DimensionError, DomainError
from tournament_ordinal.learner import BinaryModel, TrainConfig
from tournament_ordinal.metrics import exact_match

from conftest import make_dataset


# --- rank aggregation ----------------------------------------------------------

def test_rank_ensemble_sizes(graded_ds):
    e = train_rank_ensemble(graded_ds, TrainConfig(epochs=5))
    assert len(e.models) == 5
    assert [m.k for m in e.models] == [1, 2, 3, 4, 5]


def test_rank_models_use_all_samples(graded_ds):
    # the K=4 model sees every sample, not only grades 4..5
    e = train_rank_ensemble(graded_ds, TrainConfig(epochs=5))
    assert not any(m.degenerate for m in e.models)


def test_two_class_rank_is_thresholding():
    ds = generate_synthetic([20, 20], d=3, separation=2, seed=4)
    e = train_rank_ensemble(ds, TrainConfig(epochs=10))
    assert len(e.models) == 1
    from tournament_ordinal.learner import score_batch
    expected = 1 + (score_batch(e.models[0], ds.features) > 0.5)
    assert np.array_equal(e.predict_batch(ds), expected)


def test_rank_is_reproducible(graded_ds):
    cfg = TrainConfig(epochs=5, seed=3)
    a, b = train_rank_ensemble(graded_ds, cfg), train_rank_ensemble(graded_ds, cfg)
    assert a.to_dict() == b.to_dict()


@pytest.mark.parametrize("votes,grade", [
    ([1, 1, 0, 0, 0], 3),
    ([0, 0, 0, 0, 0], 1),
    ([1, 1, 1, 1, 1], 6),
    ([1, 0, 1, 0, 0], 3),
])
def test_aggregate_votes(votes, grade):
    assert aggregate_votes(votes).tolist() == [grade]


@settings(max_examples=200, deadline=None)
@given(n=st.integers(2, 12), data=st.data())
def test_monotone_votes_match_crossing(n, data):
    g = data.draw(st.integers(1, n))
    votes = [1 if j < g else 0 for j in range(1, n)]
    crossing = next((j for j, v in enumerate(votes, start=1) if v == 0), n)
    assert aggregate_votes(votes)[0] == crossing == g


@settings(max_examples=100, deadline=None)
@given(votes=st.lists(st.integers(0, 1), min_size=1, max_size=11))
def test_votes_stay_in_range(votes):
    assert 1 <= aggregate_votes(votes)[0] <= len(votes) + 1


def test_predict_rank_dimension_and_round_trip():
    models = tuple(BinaryModel(np.array([1.0]), -float(k), k) for k in range(1, 4))
    e = RankEnsemble(models, 4)
    assert [predict_rank(e, [x]) for x in (0.5, 1.5, 2.5, 3.5)] == [1, 2, 3, 4]
    assert RankEnsemble.from_dict(e.to_dict()).predict_batch(np.array([[2.5]])).tolist() == [3]
    with pytest.raises(DimensionError):
        predict_rank(e, [1.0, 2.0])
    with pytest.raises(DomainError):
        RankEnsemble(models[:2], 4)


# --- regression -------------------------------------------------------------------

@pytest.mark.parametrize("raw,grade", [(3.49, 3), (3.5, 4), (0.2, 1), (6.8, 6), (-4.0, 1), (2.5, 3)])
def test_round_grade(raw, grade):
    assert round_grade([raw], 6).tolist() == [grade]


@settings(max_examples=100, deadline=None)
@given(a=st.floats(-20, 20), b=st.floats(-20, 20))
def test_rounding_is_monotone(a, b):
    lo, hi = sorted((a, b))
    ra, rb = round_grade([lo, hi], 6)
    assert 1 <= ra <= rb <= 6


def test_regression_fits_linear_grades():
    # grade is an exact linear function of one feature, no noise
    grades = np.repeat(np.arange(1, 7), 10)
    rng = np.random.default_rng(0)
    X = np.column_stack([(grades - 3.5) / 1.7, rng.normal(size=len(grades))])
    ds = make_dataset(grades, X)
    m = train_regression(ds, TrainConfig(epochs=200, l2=0.0))
    assert exact_match(m.predict_batch(ds), grades) == 100.0
    assert RegressionModel.from_dict(m.to_dict()).predict_batch(ds).tolist() == grades.tolist()


# --- multiclass -------------------------------------------------------------------

def test_zero_model_is_uniform_and_picks_grade_one():
    m = MulticlassModel(np.zeros((6, 3)), np.zeros(6))
    p = m.probabilities(np.ones((2, 3)))
    assert np.allclose(p, 1 / 6)
    assert m.predict_batch(np.ones((2, 3))).tolist() == [1, 1]
    assert predict_multiclass(m, [0.0, 1.0, 2.0]) == 1


@settings(max_examples=100, deadline=None)
@given(z=st.lists(st.floats(-500, 500), min_size=2, max_size=12))
def test_softmax_normalized(z):
    p = softmax(np.array(z))
    assert abs(p.sum() - 1.0) < 1e-9
    assert np.all(p >= 0)


def test_multiclass_separable(separable_ds):
    m = train_multiclass(separable_ds)
    assert exact_match(m.predict_batch(separable_ds), separable_ds.grades) == 100.0
    rows = m.probabilities(separable_ds.features).sum(axis=1)
    assert np.max(np.abs(rows - 1)) < 1e-9


def test_multiclass_deterministic(graded_ds):
    cfg = TrainConfig(epochs=5, seed=2)
    a, b = train_multiclass(graded_ds, cfg), train_multiclass(graded_ds, cfg)
    assert a.to_dict() == b.to_dict()
    assert MulticlassModel.from_dict(a.to_dict()).predict_batch(graded_ds).tolist() == a.predict_batch(graded_ds).tolist()


def test_baselines_reject_single_grade_range():
    ds = make_dataset([1, 1], np.zeros((2, 1)), num_classes=2)
    # a one-grade range is rejected by the dataset; two grades with one present trains a constant model
    e = train_rank_ensemble(ds, TrainConfig(epochs=2))
    assert e.models[0].degenerate


def test_regression_step_is_stable_on_correlated_features():
    # 64 copies of one standardized column: squared-loss curvature is about 64
    base = generate_synthetic([30, 30, 30], d=1, separation=5, seed=2)
    X = np.repeat(base.features, 64, axis=1)
    ds = make_dataset(base.grades, X)
    m = train_regression(ds, TrainConfig(learning_rate=0.5, epochs=50))
    assert m.meta["step"] < 0.5
    assert exact_match(m.predict_batch(ds), ds.grades) > 90
