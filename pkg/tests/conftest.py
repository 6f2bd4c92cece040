import itertools

import numpy as np
import pytest

from tournament_ordinal.data import GRADE_COUNTS, Dataset, generate_synthetic
from tournament_ordinal.learner import logistic_loss_grad


def pairwise_auc(scores, labels):
    """Brute-force Mann-Whitney over every positive/negative pair, ties worth 1/2."""
    pos = [s for s, y in zip(scores, labels) if y == 1]
    neg = [s for s, y in zip(scores, labels) if y == 0]
    total = 0.0
    for p, q in itertools.product(pos, neg):
        total += 1.0 if p > q else 0.5 if p == q else 0.0
    return total / (len(pos) * len(neg))


def central_diff_grad(w, b, X, y, l2, sw, eps=1e-6):
    f = lambda w_, b_: logistic_loss_grad(w_, b_, X, y, l2, sw)[0]
    gw = np.zeros_like(w)
    for j in range(len(w)):
        e = np.zeros_like(w)
        e[j] = eps
        gw[j] = (f(w + e, b) - f(w - e, b)) / (2 * eps)
    gb = (f(w, b + eps) - f(w, b - eps)) / (2 * eps)
    return gw, gb


def rel_err(a, b):
    return np.linalg.norm(a - b) / max(np.linalg.norm(a) + np.linalg.norm(b), 1e-12)


def make_dataset(grades, features=None, num_classes=None):
    grades = np.asarray(grades)
    if features is None:
        features = np.zeros((len(grades), 1))
    return Dataset(tuple(f"s{i}" for i in range(len(grades))), grades, features,
                   num_classes or int(grades.max()))


@pytest.fixture(scope="session")
def graded_ds():
    return generate_synthetic(GRADE_COUNTS, d=16, separation=3, seed=7)


@pytest.fixture(scope="session")
def separable_ds():
    return generate_synthetic(GRADE_COUNTS, d=8, separation=1000, seed=3)
