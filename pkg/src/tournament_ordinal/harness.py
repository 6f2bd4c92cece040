"""Cross-validation experiments, model comparison and text report rendering."""

from __future__ import annotations

import json
import logging
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, fields, replace
from pathlib import Path

import numpy as np

from .baselines import (
    MulticlassModel,
    RankEnsemble,
    RegressionModel,
    train_multiclass,
    train_rank_ensemble,
    train_regression,
)
from .data import GRADE_COUNTS, Dataset, FoldSplit, generate_synthetic, load_csv, stratified_kfold
from .errors import ConfigError
from .learner import TrainConfig, derive_seed
from .metrics import EvalReport, build_report
from .tournament import BuildConfig, TournamentTree, build_tree

log = logging.getLogger(__name__)

SCHEMA_VERSION = 1

MODEL_KINDS = (
    "tournament-auc",
    "tournament-image",
    "tournament-class",
    "rank",
    "linear",
    "multiclass",
)
TREE_STRATEGY = {
    "tournament-auc": "auc",
    "tournament-image": "image_balance",
    "tournament-class": "class_balance",
}


@dataclass(frozen=True)
class ExperimentConfig:
    model: str = "tournament-auc"
    # data source: a CSV path, or the synthetic generator when data is None
    data: str | None = None
    num_classes: int | None = None
    standardize: bool = False
    counts: tuple[int, ...] = GRADE_COUNTS
    d: int = 16
    separation: float = 3.0
    nonlinearity: float = 0.0
    bend: float = 0.0
    data_seed: int = 0
    # training
    learning_rate: float = 0.1
    l2: float = 1e-4
    epochs: int = 300
    batch_size: int = 32
    class_weighting: bool = False
    auc_eval_fraction: float = 0.25
    # protocol
    fold_count: int = 5
    seed: int = 0
    workers: int = 1
    output: str | None = None

    def __post_init__(self):
        if self.model not in MODEL_KINDS:
            raise ConfigError(f"unknown model {self.model!r}; expected one of {', '.join(MODEL_KINDS)}")
        if self.fold_count < 2:
            raise ConfigError("fold_count must be >= 2")
        if self.workers < 1:
            raise ConfigError("workers must be >= 1")
        object.__setattr__(self, "counts", tuple(int(c) for c in self.counts))
        self.train_config()

    def train_config(self, seed: int | None = None) -> TrainConfig:
        return TrainConfig(self.learning_rate, self.l2, self.epochs, self.batch_size,
                           self.seed if seed is None else seed, self.class_weighting)

    def load_dataset(self) -> Dataset:
        if self.data is not None:
            return load_csv(self.data, num_classes=self.num_classes, standardize=self.standardize)
        return generate_synthetic(self.counts, self.d, self.separation, self.nonlinearity,
                                  self.data_seed, bend=self.bend)

    def to_dict(self) -> dict:
        d = asdict(self)
        d["counts"] = list(self.counts)
        # runtime knobs that must not change results
        d.pop("workers")
        d.pop("output")
        return d

    @classmethod
    def from_mapping(cls, values: dict) -> "ExperimentConfig":
        known = {f.name: f for f in fields(cls)}
        kwargs = {}
        for key, raw in values.items():
            key = key.strip().replace("-", "_")
            if key == "folds":
                key = "fold_count"
            if key not in known:
                raise ConfigError(f"unknown config key {key!r}")
            kwargs[key] = _coerce(key, raw, known[key].default)
        return cls(**kwargs)

    @classmethod
    def from_file(cls, path, overrides: dict | None = None) -> "ExperimentConfig":
        return cls.from_mapping({**read_config_file(path), **(overrides or {})})


def _coerce(key, raw, default):
    if not isinstance(raw, str):
        if key == "counts":
            return tuple(int(c) for c in raw)
        return raw
    raw = raw.strip()
    if key == "counts":
        return tuple(int(c) for c in raw.replace("[", "").replace("]", "").split(",") if c.strip())
    if key in ("data", "output"):
        return raw or None
    if key == "num_classes":
        return int(raw) if raw and raw.lower() != "none" else None
    if isinstance(default, bool):
        if raw.lower() in ("1", "true", "yes", "on"):
            return True
        if raw.lower() in ("0", "false", "no", "off"):
            return False
        raise ConfigError(f"{key}: {raw!r} is not a boolean")
    try:
        if isinstance(default, int):
            return int(raw)
        if isinstance(default, float):
            return float(raw)
    except ValueError:
        raise ConfigError(f"{key}: cannot parse {raw!r}") from None
    return raw


def read_config_file(path) -> dict:
    """JSON object or flat ``key = value`` lines (``#`` starts a comment)."""
    text = Path(path).read_text(encoding="utf-8")
    if text.lstrip().startswith("{"):
        try:
            values = json.loads(text)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"{path}: {exc}") from None
        if not isinstance(values, dict):
            raise ConfigError(f"{path}: expected a JSON object")
        return values
    values = {}
    for lineno, line in enumerate(text.splitlines(), start=1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{path}:{lineno}: expected key=value")
        key, value = line.split("=", 1)
        values[key.strip()] = value.strip()
    return values


# --- fitting any model kind ---------------------------------------------------------

def fit_model(kind: str, ds: Dataset, cfg: ExperimentConfig, seed: int):
    """Train one model of ``kind``. Tournament builds never abort on undefined AUC."""
    train = cfg.train_config(seed)
    if kind in TREE_STRATEGY:
        build = BuildConfig(TREE_STRATEGY[kind], train, cfg.auc_eval_fraction, seed, on_undefined_auc="fallback")
        return build_tree(ds, build)
    if kind == "rank":
        return train_rank_ensemble(ds, train)
    if kind == "linear":
        return train_regression(ds, train)
    if kind == "multiclass":
        return train_multiclass(ds, train)
    raise ConfigError(f"unknown model {kind!r}")


def model_to_dict(kind: str, model) -> dict:
    return {
        "schema_version": SCHEMA_VERSION,
        "kind": kind,
        "num_classes": model.num_classes,
        "feature_dim": model.feature_dim,
        "model": model.to_dict(),
    }


def model_from_dict(d: dict):
    kind = d.get("kind")
    if kind in TREE_STRATEGY:
        return kind, TournamentTree.from_dict(d["model"])
    loaders = {"rank": RankEnsemble, "linear": RegressionModel, "multiclass": MulticlassModel}
    if kind not in loaders:
        raise ConfigError(f"model file has unknown kind {kind!r}")
    return kind, loaders[kind].from_dict(d["model"])


def fold_seed(cfg: ExperimentConfig, fold: int, kind: str | None = None) -> int:
    return derive_seed(cfg.seed, fold, kind or cfg.model)


# --- cross-validation -------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class FoldOutcome:
    fold: int
    test_indices: np.ndarray
    predictions: np.ndarray
    report: EvalReport
    build_meta: list | None = None
    warnings: list = field(default_factory=list)


@dataclass(frozen=True, eq=False)
class CvResult:
    config: ExperimentConfig
    dataset_hash: str
    folds_digest: str
    folds: list
    pooled: EvalReport
    predictions: np.ndarray
    truth: np.ndarray

    @property
    def model(self) -> str:
        return self.config.model

    def to_dict(self) -> dict:
        return {
            "schema_version": SCHEMA_VERSION,
            "config": self.config.to_dict(),
            "dataset_hash": self.dataset_hash,
            "folds_digest": self.folds_digest,
            "pooled": self.pooled.to_dict(),
            "folds": [
                {
                    "fold": f.fold,
                    "size": int(len(f.test_indices)),
                    "report": f.report.to_dict(),
                    "build_meta": f.build_meta,
                    "warnings": list(f.warnings),
                }
                for f in self.folds
            ],
            "predictions": self.predictions.tolist(),
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True, indent=2) + "\n"


def _run_fold(cfg: ExperimentConfig, ds: Dataset, split: FoldSplit, fold: int) -> FoldOutcome:
    test = split.test_indices(fold)
    train_ds = ds.subset(split.train_indices(fold))
    model = fit_model(cfg.model, train_ds, cfg, fold_seed(cfg, fold))
    pred = model.predict_batch(ds.features[test])
    report = build_report(pred, ds.grades[test], ds.num_classes)
    meta = warnings = None
    if isinstance(model, TournamentTree):
        meta, warnings = model.build_meta, model.warnings
    warnings = list(warnings or [])
    missing = sorted(g for g in range(1, ds.num_classes + 1) if not np.any(train_ds.grades == g))
    if missing:
        warnings.append(f"training folds lack grades {missing}")
    for w in warnings:
        log.warning("fold %d (%s): %s", fold, cfg.model, w)
    return FoldOutcome(fold, test, pred, report, meta, warnings)


def run_cv(cfg: ExperimentConfig, ds: Dataset | None = None) -> CvResult:
    """k-fold CV: train on k-1 folds, predict the held-out fold, pool all predictions."""
    ds = ds if ds is not None else cfg.load_dataset()
    split = stratified_kfold(ds, cfg.fold_count, cfg.seed)
    folds = range(cfg.fold_count)
    if cfg.workers > 1:
        with ProcessPoolExecutor(max_workers=cfg.workers) as pool:
            outcomes = list(pool.map(_run_fold, [cfg] * len(folds), [ds] * len(folds), [split] * len(folds), folds))
    else:
        outcomes = [_run_fold(cfg, ds, split, f) for f in folds]

    pred = np.zeros(len(ds), dtype=np.int64)
    for o in outcomes:
        pred[o.test_indices] = o.predictions
    pooled = build_report(pred, ds.grades, ds.num_classes)
    return CvResult(cfg, ds.content_hash(), split.digest(), outcomes, pooled, pred, ds.grades.copy())


# --- comparison ------------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class Comparison:
    results: list
    reference: str | None

    def rows(self) -> list[tuple[str, EvalReport]]:
        return [(r.model, r.pooled) for r in self.results]

    def deltas(self) -> dict:
        if self.reference is None:
            return {}
        ref = next(r.pooled for r in self.results if r.model == self.reference)
        out = {}
        for r in self.results:
            out[r.model] = {
                "exact": _delta_row(r.pooled.per_grade_exact, ref.per_grade_exact,
                                    r.pooled.average_exact, ref.average_exact),
                "within_one": _delta_row(r.pooled.per_grade_within_one, ref.per_grade_within_one,
                                         r.pooled.average_within_one, ref.average_within_one),
            }
        return out

    def to_dict(self) -> dict:
        return {
            "schema_version": SCHEMA_VERSION,
            "reference": self.reference,
            "dataset_hash": self.results[0].dataset_hash,
            "folds_digest": self.results[0].folds_digest,
            "models": [{"model": r.model, "config": r.config.to_dict(), "pooled": r.pooled.to_dict()}
                       for r in self.results],
            "deltas": self.deltas(),
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True, indent=2) + "\n"


def _delta_row(row, ref_row, avg, ref_avg) -> dict:
    out = {}
    for g, v in row.items():
        r = ref_row.get(g)
        out[str(g)] = None if v is None or r is None else v - r
    out["average"] = avg - ref_avg
    return out


def compare_models(cfgs, reference: str | None = None) -> Comparison:
    """Cross-validate several configs on one dataset with one fold assignment."""
    cfgs = list(cfgs)
    if not cfgs:
        raise ConfigError("nothing to compare")
    if len({(c.fold_count, c.seed) for c in cfgs}) != 1:
        raise ConfigError("compared configs must share fold_count and seed")
    datasets = [c.load_dataset() for c in cfgs]
    hashes = {d.content_hash() for d in datasets}
    if len(hashes) != 1:
        raise ConfigError("compared configs load different datasets (content hash mismatch)")
    results = [run_cv(c, d) for c, d in zip(cfgs, datasets)]
    if len({r.folds_digest for r in results}) != 1:
        raise ConfigError("fold assignments differ across configs")
    if reference is not None and reference not in [r.model for r in results]:
        raise ConfigError(f"reference model {reference!r} is not among the compared models")
    return Comparison(results, reference)


# --- text rendering ---------------------------------------------------------------

def _cell(v) -> str:
    return "n/a" if v is None else f"{v:.2f}"


def render_accuracy_table(title: str, rows, attr: str) -> str:
    n_cls = rows[0][1].num_classes
    header = [""] + [f"Grade {g}" for g in range(1, n_cls + 1)] + ["Average"]
    body = []
    for name, rep in rows:
        per = getattr(rep, f"per_grade_{attr}")
        avg = getattr(rep, f"average_{attr}")
        body.append([name] + [_cell(per[g]) for g in range(1, n_cls + 1)] + [_cell(avg)])
    widths = [max(len(r[i]) for r in [header] + body) for i in range(len(header))]
    fmt = lambda r: "  ".join(c.ljust(widths[0]) if i == 0 else c.rjust(widths[i]) for i, c in enumerate(r)).rstrip()
    rule = "-" * len(fmt(header))
    return "\n".join([title, fmt(header), rule] + [fmt(r) for r in body])


def render_confusion(name: str, rep: EvalReport) -> str:
    n_cls = rep.num_classes
    cm = rep.confusion
    w = max(4, len(str(cm.max())) + 1)
    lines = [f"Confusion matrix: {name} (rows = true grade, columns = predicted)"]
    lines.append("true\\pred".ljust(10) + "".join(str(g).rjust(w) for g in range(1, n_cls + 1)))
    for g in range(n_cls):
        lines.append(str(g + 1).ljust(10) + "".join(str(int(v)).rjust(w) for v in cm[g]))
    return "\n".join(lines)


def render_tables(result) -> str:
    """Exact-match and within-one tables (percent, 2 decimals) plus confusion matrices.

    Accepts a :class:`CvResult`, a :class:`Comparison`, or ``(name, EvalReport)`` rows.
    """
    if isinstance(result, CvResult):
        rows = [(result.model, result.pooled)]
    elif isinstance(result, Comparison):
        rows = result.rows()
    else:
        rows = list(result)
    parts = [
        render_accuracy_table("Accuracy (%) of exact match", rows, "exact"),
        render_accuracy_table("Accuracy (%) of within-one-category-off match", rows, "within_one"),
    ]
    if isinstance(result, Comparison) and result.reference is not None:
        deltas = result.deltas()
        n_cls = rows[0][1].num_classes
        header = ["delta vs " + result.reference] + [f"Grade {g}" for g in range(1, n_cls + 1)] + ["Average"]
        lines = ["Exact-match delta (percentage points)", "  ".join(header)]
        for name, _ in rows:
            d = deltas[name]["exact"]
            lines.append("  ".join([name] + [_cell(d[str(g)]) for g in range(1, n_cls + 1)] + [_cell(d["average"])]))
        parts.append("\n".join(lines))
    parts += [render_confusion(name, rep) for name, rep in rows]
    return "\n\n".join(parts) + "\n"


def write_outputs(out_dir, stem: str, payload_json: str, text: str) -> tuple[Path, Path]:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    jpath, tpath = out / f"{stem}.json", out / f"{stem}.txt"
    jpath.write_text(payload_json, encoding="utf-8")
    tpath.write_text(text, encoding="utf-8")
    return jpath, tpath


def with_model(cfg: ExperimentConfig, kind: str) -> ExperimentConfig:
    return replace(cfg, model=kind)
