"""Tournament-tree ordinal classification with imbalance-aware evaluation."""

from .baselines import (
    MulticlassModel,
    RankEnsemble,
    RegressionModel,
    predict_multiclass,
    predict_rank,
    predict_regression,
    train_multiclass,
    train_rank_ensemble,
    train_regression,
)
from .cam import CamInput, CamMap, bilinear_upsample, compute_cam, normalize_cam
from .data import (
    GRADE_COUNTS,
    Dataset,
    FoldSplit,
    Sample,
    generate_synthetic,
    load_csv,
    stratified_kfold,
    write_csv,
)
from .harness import ExperimentConfig, compare_models, render_tables, run_cv
from .learner import BinaryModel, TrainConfig, make_binary_labels, score, train_binary
from .metrics import EvalReport, auc, build_report, exact_match, within_one
from .tournament import (
    BuildConfig,
    ClassSet,
    TournamentTree,
    build_tree,
    choose_k_auc,
    choose_k_class_balance,
    choose_k_image_balance,
    predict,
    predict_batch,
)

__version__ = "0.1.0"
