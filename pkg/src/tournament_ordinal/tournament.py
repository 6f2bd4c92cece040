"""Tournament trees over ordered grade ranges.

Each internal node splits its contiguous grade range ``[lo, hi]`` at a
threshold K into ``[lo, K]`` and ``[K+1, hi]`` and owns a binary model for
"grade > K", trained only on samples whose grade falls inside the node's
range. Prediction walks from the root, going right when the node model
scores above 0.5, until it reaches a single-grade leaf.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Union

import numpy as np

from .data import Dataset
from .errors import BuildError, ConfigError, DimensionError, DomainError, UndefinedAUCError
from .learner import BinaryModel, TrainConfig, constant_model, derive_seed, fit_logistic, score_batch
from .metrics import auc

STRATEGIES = ("auc", "image_balance", "class_balance")


@dataclass(frozen=True, order=True)
class ClassSet:
    lo: int
    hi: int

    def __post_init__(self):
        if self.lo > self.hi:
            raise DomainError(f"empty class range [{self.lo}, {self.hi}]")

    @property
    def size(self) -> int:
        return self.hi - self.lo + 1

    def candidates(self) -> range:
        return range(self.lo, self.hi)

    def split(self, k: int) -> tuple["ClassSet", "ClassSet"]:
        if not self.lo <= k < self.hi:
            raise DomainError(f"K={k} not strictly inside [{self.lo}, {self.hi}]")
        return ClassSet(self.lo, k), ClassSet(k + 1, self.hi)

    def as_list(self) -> list[int]:
        return [self.lo, self.hi]


@dataclass(frozen=True)
class Leaf:
    grade: int

    @property
    def classes(self) -> ClassSet:
        return ClassSet(self.grade, self.grade)


@dataclass(frozen=True, eq=False)
class SplitNode:
    classes: ClassSet
    k: int
    model: BinaryModel
    left: "Node"
    right: "Node"


Node = Union[SplitNode, Leaf]


@dataclass(frozen=True)
class BuildConfig:
    strategy: str = "auc"
    train: TrainConfig = field(default_factory=TrainConfig)
    auc_eval_fraction: float = 0.25
    seed: int = 0
    # "error": raise BuildError when no AUC candidate is defined at a node;
    # "fallback": use the image-balance rule there and record a warning.
    on_undefined_auc: str = "error"

    def __post_init__(self):
        if self.strategy not in STRATEGIES:
            raise ConfigError(f"unknown strategy {self.strategy!r}; expected one of {STRATEGIES}")
        if not 0.0 < self.auc_eval_fraction < 1.0:
            raise ConfigError("auc_eval_fraction must lie in (0, 1)")
        if self.on_undefined_auc not in ("error", "fallback"):
            raise ConfigError("on_undefined_auc must be 'error' or 'fallback'")


@dataclass(frozen=True, eq=False)
class TournamentTree:
    root: Node
    strategy: str
    num_classes: int
    feature_dim: int
    build_meta: list = field(default_factory=list)
    warnings: list = field(default_factory=list)

    def internal_nodes(self) -> list[SplitNode]:
        out, stack = [], [self.root]
        while stack:
            node = stack.pop()
            if isinstance(node, SplitNode):
                out.append(node)
                stack.extend((node.right, node.left))
        return out

    def leaves(self) -> list[Leaf]:
        out, stack = [], [self.root]
        while stack:
            node = stack.pop()
            if isinstance(node, SplitNode):
                stack.extend((node.right, node.left))
            else:
                out.append(node)
        return out

    def predict_batch(self, X) -> np.ndarray:
        return predict_batch(self, X)

    def to_dict(self) -> dict:
        return {
            "strategy": self.strategy,
            "num_classes": self.num_classes,
            "feature_dim": self.feature_dim,
            "root": node_to_dict(self.root),
        }

    @classmethod
    def from_dict(cls, d: dict, build_meta=None) -> "TournamentTree":
        return cls(node_from_dict(d["root"]), d["strategy"], d["num_classes"], d["feature_dim"], build_meta or [])


def node_to_dict(node: Node) -> dict:
    if isinstance(node, Leaf):
        return {"classes": [node.grade, node.grade]}
    return {
        "classes": node.classes.as_list(),
        "k": node.k,
        "model": node.model.to_dict(),
        "left": node_to_dict(node.left),
        "right": node_to_dict(node.right),
    }


def node_from_dict(d: dict) -> Node:
    lo, hi = d["classes"]
    if lo == hi:
        return Leaf(lo)
    return SplitNode(ClassSet(lo, hi), d["k"], BinaryModel.from_dict(d["model"]),
                     node_from_dict(d["left"]), node_from_dict(d["right"]))


# --- split rules -------------------------------------------------------------

def _check_counts(counts, cs: ClassSet) -> np.ndarray:
    c = np.asarray(counts, dtype=np.int64).reshape(-1)
    if cs.size < 2:
        raise DomainError(f"class set [{cs.lo}, {cs.hi}] has a single class; nothing to split")
    if len(c) != cs.size:
        raise DimensionError(f"{len(c)} counts for class set [{cs.lo}, {cs.hi}]")
    return c


def image_balance_products(counts, cs: ClassSet) -> dict[int, int]:
    """(images at or below K) * (images above K) for every candidate K."""
    c = _check_counts(counts, cs)
    low = np.cumsum(c)[:-1]
    high = c.sum() - low
    return {k: int(a * b) for k, a, b in zip(cs.candidates(), low, high)}


def choose_k_image_balance(counts, cs: ClassSet) -> int:
    products = image_balance_products(counts, cs)
    best = max(products.values())
    return min(k for k, p in products.items() if p == best)


def class_balance_options(counts, cs: ClassSet) -> dict[int, int]:
    """Candidate K -> image count of the side holding the extra class.

    Even ranges have a single candidate (mapped to 0 images).
    """
    c = _check_counts(counts, cs)
    m = cs.size
    if m % 2 == 0:
        return {cs.lo + m // 2 - 1: 0}
    half = m // 2
    k_high_heavy = cs.lo + half - 1  # low side gets floor(m/2) classes
    k_low_heavy = cs.lo + half       # low side gets ceil(m/2) classes
    return {
        k_high_heavy: int(c[half:].sum()),
        k_low_heavy: int(c[: half + 1].sum()),
    }


def choose_k_class_balance(counts, cs: ClassSet) -> int:
    """Halve the class range; for odd ranges the extra class joins the side with fewer images."""
    options = class_balance_options(counts, cs)
    best = min(options.values())
    return min(k for k, v in options.items() if v == best)


def _holdout_mask(grades: np.ndarray, fraction: float, rng: np.random.Generator) -> np.ndarray:
    """Stratified held-out selection: about ``fraction`` of each grade, never all of it."""
    mask = np.zeros(len(grades), dtype=bool)
    for g in np.unique(grades):
        members = np.flatnonzero(grades == g)
        members = members[rng.permutation(len(members))]
        take = min(int(math.floor(fraction * len(members) + 0.5)), len(members) - 1)
        mask[members[:take]] = True
    return mask


def choose_k_auc(ds: Dataset, cs: ClassSet, cfg: BuildConfig) -> tuple[int, list[dict]]:
    """Pick the threshold whose binary model reaches the highest held-out AUC.

    ``ds`` holds the node's samples (grades inside ``cs``). Every candidate is
    trained on the same stratified split; a candidate whose held-out part
    lacks one side is scored by its training AUC and flagged. Ties go to the
    smallest K.
    """
    if cs.size < 2:
        raise DomainError(f"class set [{cs.lo}, {cs.hi}] has a single class; nothing to split")
    if cs.size == 2:
        return cs.lo, [{"k": cs.lo, "auc": None, "source": "single-candidate"}]
    grades = ds.grades
    if np.any((grades < cs.lo) | (grades > cs.hi)):
        raise DomainError("node dataset holds grades outside its class set")

    rng = np.random.default_rng(derive_seed(cfg.seed, cs.lo, cs.hi, "holdout"))
    held = _holdout_mask(grades, cfg.auc_eval_fraction, rng)
    X_tr, X_ev = ds.features[~held], ds.features[held]
    g_tr, g_ev = grades[~held], grades[held]

    diagnostics = []
    best_k, best_auc = None, -1.0
    for k in cs.candidates():
        entry = {"k": k, "auc": None, "source": None}
        y_tr = (g_tr > k).astype(np.int64)
        y_ev = (g_ev > k).astype(np.int64)
        if len(y_tr) == 0 or y_tr.min() == y_tr.max():
            entry["source"] = "undefined"
            diagnostics.append(entry)
            continue
        model = fit_logistic(X_tr, y_tr, cfg.train.with_seed(derive_seed(cfg.seed, cs.lo, cs.hi, k)), k=k)
        try:
            value = auc(score_batch(model, X_ev), y_ev) if len(y_ev) else None
            if value is None:
                raise UndefinedAUCError("empty held-out split")
            entry["source"] = "heldout"
        except UndefinedAUCError:
            value = auc(score_batch(model, X_tr), y_tr)
            entry["source"] = "train"
            entry["flagged"] = True
        entry["auc"] = value
        diagnostics.append(entry)
        if value > best_auc:
            best_k, best_auc = k, value
    if best_k is None:
        raise BuildError("no candidate threshold has samples on both sides", classes=(cs.lo, cs.hi))
    return best_k, diagnostics


# --- building and prediction -------------------------------------------------

def node_seed(cfg: BuildConfig, cs: ClassSet, k: int) -> int:
    return derive_seed(cfg.seed, cs.lo, cs.hi, k)


def _choose(ds_node, counts, cs, cfg, record, warnings):
    if cfg.strategy == "image_balance":
        record["candidates"] = [{"k": k, "product": p} for k, p in image_balance_products(counts, cs).items()]
        return choose_k_image_balance(counts, cs)
    if cfg.strategy == "class_balance":
        record["candidates"] = [{"k": k, "extra_side_images": v} for k, v in class_balance_options(counts, cs).items()]
        return choose_k_class_balance(counts, cs)
    try:
        if ds_node is None:
            raise BuildError("node holds no training samples", classes=(cs.lo, cs.hi))
        k, diag = choose_k_auc(ds_node, cs, cfg)
        record["candidates"] = diag
        return k
    except BuildError as exc:
        if cfg.on_undefined_auc == "error":
            raise
        warnings.append(f"{exc}; fell back to image-balance split")
        record["fallback"] = "image_balance"
        record["candidates"] = [{"k": k, "product": p} for k, p in image_balance_products(counts, cs).items()]
        return choose_k_image_balance(counts, cs)


def build_tree(ds: Dataset, cfg: BuildConfig | None = None) -> TournamentTree:
    cfg = cfg or BuildConfig()
    build_meta: list[dict] = []
    warnings: list[str] = []

    def grow(cs: ClassSet) -> Node:
        if cs.size == 1:
            return Leaf(cs.lo)
        in_range = np.flatnonzero((ds.grades >= cs.lo) & (ds.grades <= cs.hi))
        ds_node = ds.subset(in_range) if len(in_range) else None
        counts = np.bincount(ds.grades[in_range] - cs.lo, minlength=cs.size)
        record = {"classes": cs.as_list(), "counts": counts.tolist()}
        build_meta.append(record)
        k = _choose(ds_node, counts, cs, cfg, record, warnings)
        record["k"] = k

        seed = node_seed(cfg, cs, k)
        if ds_node is None:
            model = constant_model(ds.feature_dim, positive=False, k=k, seed=seed, empty=True)
            warnings.append(f"class set [{cs.lo}, {cs.hi}]: no training samples; constant model routes left")
        else:
            model = fit_logistic(ds_node.features, (ds_node.grades > k).astype(np.int64),
                                 cfg.train.with_seed(seed), k=k)
            if model.degenerate:
                warnings.append(f"class set [{cs.lo}, {cs.hi}]: K={k} leaves one side empty; constant model")
        record["degenerate"] = model.degenerate
        left_cs, right_cs = cs.split(k)
        return SplitNode(cs, k, model, grow(left_cs), grow(right_cs))

    root = grow(ClassSet(1, ds.num_classes))
    return TournamentTree(root, cfg.strategy, ds.num_classes, ds.feature_dim, build_meta, warnings)


def _as_matrix(tree: TournamentTree, X) -> np.ndarray:
    if isinstance(X, Dataset):
        X = X.features
    X = np.asarray(X, dtype=np.float64)
    if X.ndim == 1 and X.size == 0:
        X = X.reshape(0, tree.feature_dim)
    if X.ndim != 2 or X.shape[1] != tree.feature_dim:
        raise DimensionError(f"expected {tree.feature_dim} features, got shape {X.shape}")
    return X


def predict_batch(tree: TournamentTree, X) -> np.ndarray:
    """Route every row down the tree at once; order is preserved."""
    X = _as_matrix(tree, X)
    out = np.zeros(len(X), dtype=np.int64)
    stack = [(tree.root, np.arange(len(X)))]
    while stack:
        node, rows = stack.pop()
        if len(rows) == 0:
            continue
        if isinstance(node, Leaf):
            out[rows] = node.grade
            continue
        up = score_batch(node.model, X[rows]) > 0.5
        stack.append((node.left, rows[~up]))
        stack.append((node.right, rows[up]))
    return out


def predict(tree: TournamentTree, x) -> int:
    x = np.asarray(x, dtype=np.float64).reshape(-1)
    return int(predict_batch(tree, x[None, :])[0])


def predict_path(tree: TournamentTree, x) -> list[tuple[ClassSet, int, float]]:
    """(class set, K, score) for each internal node visited."""
    x = _as_matrix(tree, np.asarray(x, dtype=np.float64).reshape(1, -1))
    path, node = [], tree.root
    while isinstance(node, SplitNode):
        s = float(score_batch(node.model, x)[0])
        path.append((node.classes, node.k, s))
        node = node.right if s > 0.5 else node.left
    return path
