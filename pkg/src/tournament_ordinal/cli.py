"""Command-line entry point.

Exit codes: 0 success, 1 usage/config error, 2 data error, 3 build/training error.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from dataclasses import replace
from pathlib import Path

from . import cam as cam_mod
from .data import generate_synthetic, load_csv, write_csv
from .errors import ConfigError, DataError, TournamentError
from .harness import (
    MODEL_KINDS,
    SCHEMA_VERSION,
    ExperimentConfig,
    TournamentTree,
    compare_models,
    fit_model,
    model_from_dict,
    model_to_dict,
    render_tables,
    run_cv,
    write_outputs,
)
from .metrics import build_report

log = logging.getLogger("tournament_ordinal")


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(1, f"{self.prog}: error: {message}\n")


def _counts(text: str) -> tuple[int, ...]:
    try:
        return tuple(int(c) for c in text.split(",") if c.strip())
    except ValueError:
        raise argparse.ArgumentTypeError(f"counts must be comma-separated integers, got {text!r}") from None


def _size(text: str) -> tuple[int, int]:
    try:
        h, w = text.lower().split("x")
        return int(h), int(w)
    except ValueError:
        raise argparse.ArgumentTypeError(f"size must look like 224x224, got {text!r}") from None


def _add_experiment_flags(p: argparse.ArgumentParser, with_model: bool = True):
    g = p.add_argument_group("experiment (override config file values)")
    if with_model:
        g.add_argument("--model", choices=MODEL_KINDS)
    g.add_argument("--data", help="CSV dataset; omit to use the synthetic generator")
    g.add_argument("--num-classes", type=int)
    g.add_argument("--standardize", action="store_const", const=True)
    g.add_argument("--counts", type=_counts)
    g.add_argument("--d", type=int)
    g.add_argument("--separation", type=float)
    g.add_argument("--nonlinearity", type=float)
    g.add_argument("--bend", type=float)
    g.add_argument("--data-seed", type=int)
    g.add_argument("--learning-rate", type=float)
    g.add_argument("--l2", type=float)
    g.add_argument("--epochs", type=int)
    g.add_argument("--batch-size", type=int)
    g.add_argument("--class-weighting", action="store_const", const=True)
    g.add_argument("--auc-eval-fraction", type=float)
    g.add_argument("--folds", dest="fold_count", type=int)
    g.add_argument("--seed", type=int)
    g.add_argument("--workers", type=int)


_EXPERIMENT_KEYS = ("model", "data", "num_classes", "standardize", "counts", "d", "separation",
                    "nonlinearity", "bend", "data_seed", "learning_rate", "l2", "epochs", "batch_size",
                    "class_weighting", "auc_eval_fraction", "fold_count", "seed", "workers")


def _overrides(args) -> dict:
    return {k: getattr(args, k) for k in _EXPERIMENT_KEYS if getattr(args, k, None) is not None}


def _experiment(args, config_path=None) -> ExperimentConfig:
    if config_path:
        return ExperimentConfig.from_file(config_path, _overrides(args))
    return ExperimentConfig.from_mapping(_overrides(args))


def _dump(obj) -> str:
    return json.dumps(obj, sort_keys=True, indent=2) + "\n"


def cmd_gen_data(args):
    ds = generate_synthetic(args.counts, args.d, args.separation, args.nonlinearity, args.seed, bend=args.bend)
    write_csv(ds, args.out)
    print(f"wrote {len(ds)} samples, N={ds.num_classes}, d={ds.feature_dim} to {args.out}")


def cmd_train(args):
    cfg = _experiment(args, args.config)
    ds = cfg.load_dataset()
    model = fit_model(cfg.model, ds, cfg, cfg.seed)
    payload = model_to_dict(cfg.model, model)
    payload["config"] = cfg.to_dict()
    out = Path(args.out)
    out.write_text(_dump(payload), encoding="utf-8")
    print(f"wrote {cfg.model} model to {out}")
    if isinstance(model, TournamentTree):
        meta_path = Path(args.meta) if args.meta else out.with_suffix(".meta.json")
        meta_path.write_text(_dump({"schema_version": SCHEMA_VERSION, "build_meta": model.build_meta,
                                    "warnings": model.warnings}), encoding="utf-8")
        print(f"wrote build diagnostics to {meta_path}")


def cmd_eval(args):
    try:
        payload = json.loads(Path(args.model_file).read_text(encoding="utf-8"))
    except (OSError, json.JSONDecodeError) as exc:
        raise DataError(f"cannot read model file: {exc}") from None
    kind, model = model_from_dict(payload)
    ds = load_csv(args.data, num_classes=args.num_classes or payload["num_classes"], standardize=bool(args.standardize))
    if ds.num_classes != model.num_classes:
        raise DataError(f"dataset has N={ds.num_classes}, model expects N={model.num_classes}")
    report = build_report(model.predict_batch(ds.features), ds.grades, ds.num_classes)
    text = render_tables([(kind, report)])
    print(text, end="")
    if args.out:
        body = _dump({"schema_version": SCHEMA_VERSION, "model": kind, "report": report.to_dict()})
        jpath, _ = write_outputs(args.out, "eval_report", body, text)
        print(f"wrote {jpath}")


def cmd_cv(args):
    cfg = _experiment(args, args.config)
    result = run_cv(cfg)
    text = render_tables(result)
    print(text, end="")
    out = args.out or cfg.output
    if out:
        jpath, tpath = write_outputs(out, "cv_report", result.to_json(), text)
        print(f"wrote {jpath} and {tpath}")


def cmd_compare(args):
    if args.config and len(args.config) > 1:
        cfgs = [ExperimentConfig.from_file(p, _overrides(args)) for p in args.config]
    else:
        base = _experiment(args, args.config[0] if args.config else None)
        kinds = args.models.split(",") if args.models else list(MODEL_KINDS)
        try:
            cfgs = [replace(base, model=k.strip()) for k in kinds]
        except ValueError as exc:
            raise ConfigError(str(exc)) from None
    result = compare_models(cfgs, reference=args.reference)
    text = render_tables(result)
    print(text, end="")
    if args.out:
        jpath, tpath = write_outputs(args.out, "comparison", result.to_json(), text)
        print(f"wrote {jpath} and {tpath}")


def cmd_cam(args):
    try:
        payload = json.loads(Path(args.input).read_text(encoding="utf-8"))
        maps, weights = payload["maps"], payload["weights"]
    except (OSError, json.JSONDecodeError, KeyError, TypeError) as exc:
        raise DataError(f"cannot read CAM input: {exc}") from None
    grid = cam_mod.compute_cam(cam_mod.CamInput.from_lists(maps, weights))
    up = cam_mod.bilinear_upsample(grid, args.size)
    norm = cam_mod.normalize_cam(up)
    out_json = Path(args.out_json)
    out_json.write_text(_dump({"schema_version": SCHEMA_VERSION, "source_shape": list(norm.source_shape),
                               "target_shape": list(norm.target_shape), "constant": norm.constant,
                               "grid": norm.grid.tolist()}), encoding="utf-8")
    print(f"wrote {out_json}")
    if args.out_pgm:
        Path(args.out_pgm).write_text(cam_mod.to_pgm(norm), encoding="ascii")
        print(f"wrote {args.out_pgm}")


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="tournament-ordinal", description="Tournament-tree ordinal classification")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    g = sub.add_parser("gen-data", help="write a synthetic dataset as CSV")
    g.add_argument("--counts", type=_counts, default=(8, 96, 105, 63, 14, 8))
    g.add_argument("--d", type=int, default=16)
    g.add_argument("--separation", type=float, default=3.0)
    g.add_argument("--nonlinearity", type=float, default=0.0)
    g.add_argument("--bend", type=float, default=0.0)
    g.add_argument("--seed", type=int, default=0)
    g.add_argument("--out", required=True)
    g.set_defaults(func=cmd_gen_data)

    t = sub.add_parser("train", help="train one model on a full dataset")
    t.add_argument("--config")
    _add_experiment_flags(t)
    t.add_argument("--out", required=True, help="model JSON path")
    t.add_argument("--meta", help="build diagnostics JSON path (tournaments only)")
    t.set_defaults(func=cmd_train)

    e = sub.add_parser("eval", help="evaluate a saved model on a CSV dataset")
    e.add_argument("--model-file", required=True)
    e.add_argument("--data", required=True)
    e.add_argument("--num-classes", type=int)
    e.add_argument("--standardize", action="store_true")
    e.add_argument("--out", help="output directory for eval_report.json/.txt")
    e.set_defaults(func=cmd_eval)

    c = sub.add_parser("cv", help="k-fold cross-validation of one model kind")
    c.add_argument("--config")
    _add_experiment_flags(c)
    c.add_argument("--out", help="output directory for cv_report.json/.txt")
    c.set_defaults(func=cmd_cv)

    m = sub.add_parser("compare", help="cross-validate several model kinds on shared folds")
    m.add_argument("--config", action="append", help="config file; repeat for one config per model")
    m.add_argument("--models", help=f"comma-separated kinds (default: all of {', '.join(MODEL_KINDS)})")
    m.add_argument("--reference", help="model kind to report deltas against")
    _add_experiment_flags(m, with_model=False)
    m.add_argument("--out", help="output directory for comparison.json/.txt")
    m.set_defaults(func=cmd_compare)

    a = sub.add_parser("cam", help="class activation map from a JSON feature stack")
    a.add_argument("--input", required=True, help='JSON {"maps": [[[...]]], "weights": [...]}')
    a.add_argument("--size", type=_size, default=(224, 224), help="target HxW (default 224x224)")
    a.add_argument("--out-json", required=True)
    a.add_argument("--out-pgm")
    a.set_defaults(func=cmd_cam)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.ERROR,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        args.func(args)
    except TournamentError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.exit_code
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return DataError.exit_code
    return 0


if __name__ == "__main__":
    sys.exit(main())
