"""Datasets of graded feature vectors: CSV I/O, synthetic generation, stratified folds."""

from __future__ import annotations

import csv
import hashlib
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from .errors import DataError, DimensionError, DomainError, NumericError, ParseError

# Default per-grade sample counts: six grades with rare extremes.
GRADE_COUNTS = (8, 96, 105, 63, 14, 8)


@dataclass(frozen=True)
class Sample:
    id: str
    grade: int
    features: tuple[float, ...]


@dataclass(frozen=True, eq=False)
class Dataset:
    """Immutable table of samples: ids, integer grades in [1, N], and a feature matrix."""

    ids: tuple[str, ...]
    grades: np.ndarray
    features: np.ndarray
    num_classes: int
    meta: dict = field(default_factory=dict, compare=False)

    def __post_init__(self):
        grades = np.asarray(self.grades, dtype=np.int64).reshape(-1)
        features = np.asarray(self.features, dtype=np.float64)
        if features.ndim != 2:
            raise DimensionError(f"features must be 2-D, got shape {features.shape}")
        n = len(grades)
        if n == 0:
            raise DataError("empty dataset")
        if features.shape[0] != n or len(self.ids) != n:
            raise DimensionError("ids, grades and features disagree on sample count")
        if features.shape[1] < 1:
            raise DimensionError("feature dimension must be at least 1")
        if self.num_classes < 2:
            raise DomainError(f"num_classes must be >= 2, got {self.num_classes}")
        if grades.min() < 1 or grades.max() > self.num_classes:
            raise DomainError(f"grades must lie in [1, {self.num_classes}]")
        if not np.all(np.isfinite(features)):
            raise NumericError("non-finite feature value")
        grades = grades.copy()
        features = features.copy()
        grades.setflags(write=False)
        features.setflags(write=False)
        object.__setattr__(self, "grades", grades)
        object.__setattr__(self, "features", features)
        object.__setattr__(self, "ids", tuple(str(i) for i in self.ids))

    def __len__(self):
        return len(self.grades)

    @property
    def feature_dim(self) -> int:
        return self.features.shape[1]

    @property
    def samples(self) -> list[Sample]:
        return [
            Sample(i, int(g), tuple(float(v) for v in row))
            for i, g, row in zip(self.ids, self.grades, self.features)
        ]

    def counts(self) -> np.ndarray:
        """Per-grade sample counts; entry ``g - 1`` holds grade ``g``."""
        return np.bincount(self.grades - 1, minlength=self.num_classes)

    def subset(self, indices) -> "Dataset":
        idx = np.asarray(indices, dtype=np.int64)
        return Dataset(
            ids=tuple(self.ids[i] for i in idx),
            grades=self.grades[idx],
            features=self.features[idx],
            num_classes=self.num_classes,
            meta=dict(self.meta),
        )

    def content_hash(self) -> str:
        h = hashlib.sha256()
        h.update(str(self.num_classes).encode())
        h.update("\x1f".join(self.ids).encode())
        h.update(self.grades.astype("<i8").tobytes())
        h.update(np.ascontiguousarray(self.features, dtype="<f8").tobytes())
        return h.hexdigest()


def load_csv(path, num_classes: int | None = None, standardize: bool = False) -> Dataset:
    """Read ``id,grade,f0,...,f{d-1}`` rows.

    ``num_classes`` defaults to the largest grade observed; it may be set higher
    when rare grades are absent from the file.
    """
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except FileNotFoundError:
        raise DataError(f"no such file: {path}") from None
    rows = csv.reader(text.splitlines())
    try:
        header = next(rows)
    except StopIteration:
        raise ParseError("missing header row", line=1) from None
    header = [h.strip() for h in header]
    if len(header) < 3 or header[0] != "id" or header[1] != "grade":
        raise ParseError("header must start with id,grade,f0", line=1)
    d = len(header) - 2
    if header[2:] != [f"f{j}" for j in range(d)]:
        raise ParseError("feature columns must be named f0..f{d-1}", line=1)

    ids, grades, feats = [], [], []
    for lineno, row in enumerate(rows, start=2):
        if not row or all(not c.strip() for c in row):
            continue
        if len(row) != d + 2:
            raise DimensionError(f"line {lineno}: expected {d} features, got {len(row) - 2}")
        try:
            grade = int(row[1])
        except ValueError:
            raise ParseError(f"grade {row[1]!r} is not an integer", line=lineno) from None
        if grade < 1:
            raise DomainError(f"line {lineno}: grade {grade} < 1")
        try:
            values = [float(c) for c in row[2:]]
        except ValueError as exc:
            raise ParseError(str(exc), line=lineno) from None
        if not all(math.isfinite(v) for v in values):
            raise NumericError(f"line {lineno}: non-finite feature value")
        ids.append(row[0])
        grades.append(grade)
        feats.append(values)
    if not ids:
        raise DataError("empty dataset")

    n_cls = max(grades) if num_classes is None else num_classes
    if max(grades) > n_cls:
        raise DomainError(f"grade {max(grades)} exceeds num_classes={n_cls}")
    ds = Dataset(tuple(ids), np.array(grades), np.array(feats, dtype=np.float64), n_cls)
    return standardize_features(ds) if standardize else ds


def write_csv(ds: Dataset, path) -> None:
    path = Path(path)
    with path.open("w", encoding="utf-8", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["id", "grade"] + [f"f{j}" for j in range(ds.feature_dim)])
        for i, g, row in zip(ds.ids, ds.grades, ds.features):
            # repr() of a float is the shortest string that round-trips exactly
            w.writerow([i, int(g)] + [repr(float(v)) for v in row])


def standardize_features(ds: Dataset) -> Dataset:
    mean = ds.features.mean(axis=0)
    std = ds.features.std(axis=0)
    std[std == 0] = 1.0
    return Dataset(ds.ids, ds.grades, (ds.features - mean) / std, ds.num_classes, dict(ds.meta))


def _compressed_lows(num_classes: int, compressed_pairs) -> list[int]:
    if compressed_pairs is None:
        compressed_pairs = [(1, 2)]
        if num_classes >= 4:
            compressed_pairs.append((num_classes - 1, num_classes))
    lows = []
    for a, b in compressed_pairs:
        if b != a + 1 or not 1 <= a < num_classes:
            raise DomainError(f"compressed pair ({a}, {b}) is not an adjacent grade pair")
        lows.append(a)
    return sorted(set(lows))


def latent_positions(num_classes: int, nonlinearity: float = 0.0, compressed_pairs=None) -> np.ndarray:
    """Positions of the grade means along the latent severity axis.

    Adjacent grades are one unit apart, except the pairs in ``compressed_pairs``
    whose gap shrinks to ``1 / (1 + nonlinearity)``. By default the lowest and
    highest adjacent pairs are compressed (only the lowest when N < 4).
    """
    if nonlinearity < 0:
        raise DomainError("nonlinearity must be >= 0")
    lows = set(_compressed_lows(num_classes, compressed_pairs))
    gaps = np.array([1.0 / (1.0 + nonlinearity) if g in lows else 1.0 for g in range(1, num_classes)])
    return np.concatenate([[0.0], np.cumsum(gaps)])


def bend_offsets(num_classes: int, nonlinearity: float = 0.0, bend: float = 0.0, compressed_pairs=None) -> np.ndarray:
    """Off-axis displacement of each grade mean.

    For every compressed pair, the member nearer the end of the grade range
    (and every grade beyond it) moves ``bend * sqrt(1 - gap**2)`` along a second
    axis, so the mean curve turns the same way at both ends. With ``bend=1``
    compressed neighbours stay one unit apart, just not along the severity axis.
    """
    if not 0.0 <= bend <= 1.0:
        raise DomainError("bend must lie in [0, 1]")
    gap = 1.0 / (1.0 + nonlinearity)
    h = bend * np.sqrt(max(0.0, 1.0 - gap * gap))
    off = np.zeros(num_classes)
    grades = np.arange(1, num_classes + 1)
    for a in _compressed_lows(num_classes, compressed_pairs):
        if a + 0.5 <= (num_classes + 1) / 2.0:
            off[grades <= a] += h
        else:
            off[grades >= a + 1] += h
    return off


def generate_synthetic(
    counts: Sequence[int] = GRADE_COUNTS,
    d: int = 16,
    separation: float = 3.0,
    nonlinearity: float = 0.0,
    seed: int = 0,
    compressed_pairs=None,
    bend: float = 0.0,
) -> Dataset:
    """Gaussian grade clusters whose means march along a random unit axis.

    ``bend > 0`` (needs d >= 2) also pushes compressed end grades off the axis;
    see :func:`bend_offsets`. Features are standardized per column.
    ``meta["latent_axis"]`` holds the direction (in standardized coordinates)
    along which the grade means are strictly increasing.
    """
    counts = [int(c) for c in counts]
    if not counts:
        raise DomainError("counts must be non-empty")
    if any(c < 1 for c in counts):
        raise DomainError("every grade needs at least one sample")
    if d < 1:
        raise DomainError("d must be >= 1")
    if separation < 0:
        raise DomainError("separation must be >= 0")
    num_classes = len(counts)
    if num_classes < 2:
        raise DomainError("need at least two grades")
    if bend > 0 and d < 2:
        raise DomainError("bend needs d >= 2")

    rng = np.random.default_rng(seed)
    axis = rng.standard_normal(d)
    axis /= np.linalg.norm(axis)
    pos = latent_positions(num_classes, nonlinearity, compressed_pairs)
    off = bend_offsets(num_classes, nonlinearity, bend, compressed_pairs)

    # Scaling the means by `separation` over unit noise equals unit means over
    # noise / separation once the columns are standardized, and allows separation=0.
    grades = np.repeat(np.arange(1, num_classes + 1), counts)
    means = separation * pos[grades - 1][:, None] * axis[None, :]
    if bend > 0:
        side = rng.standard_normal(d)
        side -= np.dot(side, axis) * axis
        side /= np.linalg.norm(side)
        means = means + separation * off[grades - 1][:, None] * side[None, :]
    x = means + rng.standard_normal((len(grades), d))

    mu = x.mean(axis=0)
    sd = x.std(axis=0)
    sd[sd == 0] = 1.0
    z = (x - mu) / sd
    std_axis = axis * sd
    std_axis /= np.linalg.norm(std_axis)

    width = len(str(len(grades) - 1))
    ids = tuple(f"s{i:0{width}d}" for i in range(len(grades)))
    meta = {
        "latent_axis": tuple(float(v) for v in std_axis),
        "latent_positions": tuple(float(v) for v in pos),
        "generator": {
            "counts": counts,
            "d": d,
            "separation": separation,
            "nonlinearity": nonlinearity,
            "bend": bend,
            "seed": seed,
        },
    }
    return Dataset(ids, grades, z, num_classes, meta)


@dataclass(frozen=True, eq=False)
class FoldSplit:
    fold_count: int
    assignments: np.ndarray
    # grade -> folds holding no sample of that grade
    missing: dict = field(default_factory=dict)

    def __post_init__(self):
        a = np.asarray(self.assignments, dtype=np.int64).copy()
        a.setflags(write=False)
        object.__setattr__(self, "assignments", a)

    def test_indices(self, fold: int) -> np.ndarray:
        return np.flatnonzero(self.assignments == fold)

    def train_indices(self, fold: int) -> np.ndarray:
        return np.flatnonzero(self.assignments != fold)

    def fold_sizes(self) -> list[int]:
        return np.bincount(self.assignments, minlength=self.fold_count).tolist()

    def digest(self) -> str:
        h = hashlib.sha256(str(self.fold_count).encode())
        h.update(self.assignments.astype("<i8").tobytes())
        return h.hexdigest()


def stratified_kfold(ds: Dataset, k: int, seed: int = 0) -> FoldSplit:
    """Shuffle each grade with a seeded PRNG, then deal its samples round-robin.

    The dealing pointer carries over from one grade to the next, so both
    per-grade and total fold sizes differ by at most one.
    """
    if k < 2:
        raise DomainError("k must be >= 2")
    if k > len(ds):
        raise DomainError(f"k={k} exceeds sample count {len(ds)}")
    rng = np.random.default_rng(seed)
    assignments = np.empty(len(ds), dtype=np.int64)
    pointer = 0
    missing = {}
    for g in range(1, ds.num_classes + 1):
        members = np.flatnonzero(ds.grades == g)
        members = members[rng.permutation(len(members))]
        for idx in members:
            assignments[idx] = pointer % k
            pointer += 1
        if len(members) < k:
            present = set(assignments[members].tolist())
            missing[g] = [f for f in range(k) if f not in present]
    return FoldSplit(k, assignments, missing)
