import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from tournament_ordinal.data import (
    GRADE_COUNTS,
    generate_synthetic,
    latent_positions,
    load_csv,
    stratified_kfold,
    write_csv,
)
from tournament_ordinal.errors import DataError, DimensionError, DomainError, ParseError

from conftest import make_dataset


def write(tmp_path, text, name="d.csv"):
    p = tmp_path / name
    p.write_text(text, encoding="utf-8")
    return p


def test_load_two_rows(tmp_path):
    p = write(tmp_path, "id,grade,f0,f1,f2\na,1,0.5,1,2\nb,2,-1,0,3.25\n")
    ds = load_csv(p)
    assert (ds.num_classes, ds.feature_dim, len(ds)) == (2, 3, 2)
    assert ds.ids == ("a", "b")
    assert ds.grades.tolist() == [1, 2]
    assert ds.features[1].tolist() == [-1.0, 0.0, 3.25]


def test_load_crlf(tmp_path):
    p = tmp_path / "crlf.csv"
    p.write_bytes(b"id,grade,f0\r\na,1,0.5\r\nb,3,1\r\n")
    ds = load_csv(p)
    assert ds.grades.tolist() == [1, 3]
    assert ds.num_classes == 3


def test_header_only_is_empty(tmp_path):
    with pytest.raises(DataError, match="empty dataset"):
        load_csv(write(tmp_path, "id,grade,f0,f1,f2\n"))


def test_short_row_reports_line(tmp_path):
    p = write(tmp_path, "id,grade,f0,f1,f2\na,1,0,0,0\nb,2,1,1\n")
    with pytest.raises(DimensionError, match="line 3"):
        load_csv(p)


def test_bad_grade(tmp_path):
    with pytest.raises(ParseError, match="line 2"):
        load_csv(write(tmp_path, "id,grade,f0\na,x,1\n"))
    with pytest.raises(DomainError):
        load_csv(write(tmp_path, "id,grade,f0\na,0,1\n", "z.csv"))


def test_num_classes_override(tmp_path):
    ds = load_csv(write(tmp_path, "id,grade,f0\na,1,1\nb,2,2\n"), num_classes=6)
    assert ds.num_classes == 6
    assert ds.counts().tolist() == [1, 1, 0, 0, 0, 0]
    with pytest.raises(DomainError):
        load_csv(write(tmp_path, "id,grade,f0\na,5,1\n", "o.csv"), num_classes=3)


def test_standardize_flag(tmp_path):
    ds = load_csv(write(tmp_path, "id,grade,f0\na,1,1\nb,2,3\n"), standardize=True)
    assert ds.features[:, 0].tolist() == [-1.0, 1.0]


def test_csv_round_trip(tmp_path, graded_ds):
    p = tmp_path / "rt.csv"
    write_csv(graded_ds, p)
    back = load_csv(p)
    assert back.ids == graded_ds.ids
    assert np.array_equal(back.grades, graded_ds.grades)
    assert np.array_equal(back.features, graded_ds.features)
    assert back.content_hash() == graded_ds.content_hash()


def test_default_counts_generator():
    ds = generate_synthetic(GRADE_COUNTS, d=16, separation=3, seed=7)
    assert len(ds) == 294
    assert ds.num_classes == 6
    assert ds.counts().tolist() == list(GRADE_COUNTS)


def test_generator_is_deterministic():
    a = generate_synthetic(GRADE_COUNTS, d=16, separation=3, seed=7)
    b = generate_synthetic(GRADE_COUNTS, d=16, separation=3, seed=7)
    assert a.features.tobytes() == b.features.tobytes()
    assert a.content_hash() == b.content_hash()
    c = generate_synthetic(GRADE_COUNTS, d=16, separation=3, seed=8)
    assert a.content_hash() != c.content_hash()


def test_generator_rejects_zero_count():
    with pytest.raises(DomainError):
        generate_synthetic([3, 0, 2], d=2, seed=0)


def test_extreme_separation_is_linearly_separable():
    ds = generate_synthetic([5, 5], d=3, separation=1000, seed=1)
    proj = ds.features @ np.array(ds.meta["latent_axis"])
    assert proj[ds.grades == 1].max() < proj[ds.grades == 2].min()


def test_latent_positions():
    assert latent_positions(4).tolist() == [0.0, 1.0, 2.0, 3.0]
    pos = latent_positions(6, nonlinearity=3.0)
    assert np.allclose(np.diff(pos), [0.25, 1, 1, 1, 0.25])
    assert np.allclose(np.diff(latent_positions(3, 1.0, compressed_pairs=[(1, 2)])), [0.5, 1])


@settings(max_examples=25, deadline=None)
@given(nl=st.floats(0, 10), seed=st.integers(0, 10_000), bend=st.sampled_from([0.0, 0.5, 1.0]))
def test_empirical_means_monotone_along_axis(nl, seed, bend):
    ds = generate_synthetic([40, 60, 60, 40], d=6, separation=40, nonlinearity=nl, seed=seed, bend=bend)
    proj = ds.features @ np.array(ds.meta["latent_axis"])
    means = [proj[ds.grades == g].mean() for g in range(1, 5)]
    assert all(a < b for a, b in zip(means, means[1:]))


def test_fold_counts_for_eight_samples():
    ds = make_dataset([1] * 8 + [2] * 8)
    split = stratified_kfold(ds, 5, seed=0)
    per_fold = np.bincount(split.assignments[:8], minlength=5)
    assert sorted(per_fold.tolist()) == [1, 1, 2, 2, 2]


def test_even_split():
    split = stratified_kfold(make_dataset([1, 1, 1, 1], num_classes=2), 2, seed=4)
    assert split.fold_sizes() == [2, 2]


def test_default_counts_folds(graded_ds):
    split = stratified_kfold(graded_ds, 5, seed=0)
    g3 = split.assignments[graded_ds.grades == 3]
    assert np.bincount(g3, minlength=5).tolist() == [21] * 5
    assert sorted(set(split.fold_sizes())) == [58, 59]
    assert sum(split.fold_sizes()) == 294


def test_rare_grades_recorded_missing():
    ds = make_dataset([1, 1, 2, 2, 2, 2, 2, 2])
    split = stratified_kfold(ds, 5, seed=0)
    assert set(split.missing) == {1}
    assert len(split.missing[1]) == 3


def test_k_bounds():
    ds = make_dataset([1, 2, 2])
    with pytest.raises(DomainError):
        stratified_kfold(ds, 4, seed=0)
    with pytest.raises(DomainError):
        stratified_kfold(ds, 1, seed=0)


def test_folds_deterministic(graded_ds):
    a = stratified_kfold(graded_ds, 5, seed=11)
    b = stratified_kfold(graded_ds, 5, seed=11)
    assert a.digest() == b.digest()


@settings(max_examples=60, deadline=None)
@given(counts=st.lists(st.integers(1, 30), min_size=2, max_size=8), k=st.integers(2, 7), seed=st.integers(0, 99))
def test_fold_partition_and_balance(counts, k, seed):
    grades = np.repeat(np.arange(1, len(counts) + 1), counts)
    if k > len(grades):
        return
    ds = make_dataset(grades, num_classes=len(counts))
    split = stratified_kfold(ds, k, seed)
    # each index in exactly one fold
    tests = np.concatenate([split.test_indices(f) for f in range(k)])
    assert sorted(tests.tolist()) == list(range(len(grades)))
    for g in range(1, len(counts) + 1):
        per = np.bincount(split.assignments[grades == g], minlength=k)
        assert per.max() - per.min() <= 1
    sizes = split.fold_sizes()
    assert max(sizes) - min(sizes) <= 1
