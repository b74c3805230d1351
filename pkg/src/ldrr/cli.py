"""Command line interface.

Exit codes: 0 success, 1 usage error, 2 data error (files, CSV, model
format), 3 numeric failure (singular or ill-posed problems). Every run
prints its resolved configuration and seed unless --quiet is given, and
all outputs are deterministic for a fixed seed.
"""

import argparse
import csv
import json
import sys
from dataclasses import asdict

import numpy as np

from . import io
from .classifier import fit_ldrr, fit_ldrr_f, penalty_family, select_penalty_cv, select_rank_cv
from .errors import (
    ClassMissingInFoldError,
    CsvParseError,
    DimensionMismatchError,
    EmptyClassError,
    KTooLargeError,
    LdrrError,
    ModelFileError,
    NotCenteredError,
    SingularMatrixError,
)
from .regression import NoPenalty
from .simulation import (
    LowRankScenarioConfig,
    SparseScenarioConfig,
    ldrr_method,
    oracle_method,
    run_experiment,
)

EXIT_USAGE = 1
EXIT_DATA = 2
EXIT_NUMERIC = 3

_DATA_ERRORS = (
    CsvParseError,
    ModelFileError,
    EmptyClassError,
    DimensionMismatchError,
    ClassMissingInFoldError,
)
_NUMERIC_ERRORS = (SingularMatrixError, NotCenteredError, KTooLargeError)

_PENALTY_CHOICES = ("lasso", "enet", "grplasso", "rr", "rr-ridge", "ridge", "none")


class _Parser(argparse.ArgumentParser):
    """argparse parser that exits with the usage code on bad arguments."""

    def error(self, message):
        self.print_usage(sys.stderr)
        print(f"error[usage]: {message}", file=sys.stderr)
        sys.exit(EXIT_USAGE)


def _echo(args, extra: dict | None = None) -> None:
    if getattr(args, "quiet", False):
        return
    shown = {k: v for k, v in vars(args).items() if k not in ("func", "quiet")}
    if extra:
        shown.update(extra)
    print("config: " + json.dumps(shown, sort_keys=True, default=str))


def _write_csv(path: str | None, header: list[str], rows: list[list]) -> None:
    if path is None:
        writer = csv.writer(sys.stdout, lineterminator="\n")
        writer.writerow(header)
        writer.writerows(rows)
        return
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(header)
        writer.writerows(rows)


def _fmt(x) -> str:
    return repr(float(x)) if isinstance(x, (float, np.floating)) else str(x)


# ---------------------------------------------------------------------------
# penalty resolution shared by fit and cv


def _add_penalty_flags(p: argparse.ArgumentParser, folds_default: int = 10) -> None:
    p.add_argument("--penalty", choices=_PENALTY_CHOICES, default="lasso")
    p.add_argument("--lambda", dest="lam", default="cv",
                   help="penalty strength, or 'cv' to cross-validate")
    p.add_argument("--alpha", type=float, default=0.5,
                   help="mixing weight inside enet/grplasso/rr-ridge")
    p.add_argument("--rank-cv", action="store_true",
                   help="cross-validate the rank directly (rank families)")
    p.add_argument("--ridge", type=float, default=0.0,
                   help="ridge strength used with --rank-cv")
    p.add_argument("--folds", type=int, default=folds_default)
    p.add_argument("--grid", type=int, default=10, help="grid size for --lambda cv")
    p.add_argument("--loss", choices=("mse", "misclassification"), default="mse")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--standardize", action="store_true",
                   help="scale features by training sd as well as centering")
    p.add_argument("--quiet", action="store_true")


def _resolve_penalty(args, data):
    """Returns (penalty, note) after any cross-validation."""
    if args.penalty == "none":
        return NoPenalty(), "no penalty"
    if args.rank_cv:
        if args.penalty not in ("rr", "rr-ridge"):
            raise ValueError("--rank-cv applies to the rank families (rr, rr-ridge)")
        cv = select_rank_cv(data, ridge=args.ridge, n_folds=args.folds,
                            seed=args.seed, loss=args.loss)
        return cv.best_penalty, f"rank-cv selected rank {int(cv.best_value)}"
    if args.lam == "cv":
        cv = select_penalty_cv(data, args.penalty, args.alpha, n_grid=args.grid,
                               n_folds=args.folds, seed=args.seed, loss=args.loss)
        return cv.best_penalty, f"cv selected lambda {cv.best_value!r}"
    try:
        lam = float(args.lam)
    except ValueError:
        raise ValueError(f"--lambda must be a number or 'cv', got {args.lam!r}")
    return penalty_family(args.penalty, args.alpha)(lam), f"lambda {lam!r}"


# ---------------------------------------------------------------------------
# commands


def _cmd_fit(args) -> int:
    data_csv = io.load_csv_dataset(args.train, label_column=args.label_column)
    data = data_csv.to_dataset()
    penalty, note = _resolve_penalty(args, data)
    if args.fisher:
        model = fit_ldrr_f(data, penalty, k=args.k, standardize=args.standardize)
    else:
        model = fit_ldrr(data, penalty, standardize=args.standardize)
    _echo(args, {"resolved_penalty": io.penalty_to_dict(penalty), "note": note})
    meta = {"seed": args.seed, "penalty_note": note}
    io.save_model(model, args.out, class_names=data_csv.class_names,
                  feature_names=data_csv.feature_names, meta=meta)
    if not args.quiet:
        if not args.fisher and model.link_warning:
            print(f"warning: link matrix nearly singular "
                  f"(singular value ratio {model.link_ratio!r})")
        print(f"saved {args.out}")
    return 0


def _cmd_cv(args) -> int:
    data_csv = io.load_csv_dataset(args.train, label_column=args.label_column)
    data = data_csv.to_dataset()
    if args.penalty == "none":
        raise ValueError("--penalty none has nothing to cross-validate")
    _echo(args)
    if args.rank_cv:
        if args.penalty not in ("rr", "rr-ridge"):
            raise ValueError("--rank-cv applies to the rank families (rr, rr-ridge)")
        cv = select_rank_cv(data, ridge=args.ridge, n_folds=args.folds,
                            seed=args.seed, loss=args.loss)
        param = "rank"
    else:
        cv = select_penalty_cv(data, args.penalty, args.alpha, n_grid=args.grid,
                               n_folds=args.folds, seed=args.seed, loss=args.loss)
        param = "lambda"
    rows = [[_fmt(v), _fmt(m), _fmt(s)]
            for v, m, s in zip(cv.grid, cv.mean_loss, cv.se_loss)]
    if args.out:
        _write_csv(args.out, [param, "mean_loss", "se_loss"], rows)
    if not args.quiet:
        for row in rows:
            print("  ".join(row))
    print(f"best_{param}: {_fmt(cv.best_value)}")
    return 0


def _load_for_model(args, loaded: io.LoadedModel, require_label: bool) -> io.CsvData:
    data_csv = io.load_csv_dataset(
        args.data, label_column=args.label_column,
        class_names=loaded.class_names, require_label=require_label,
    )
    model = loaded.model
    if data_csv.features.shape[1] != model.n_features:
        raise DimensionMismatchError(
            f"{args.data} has {data_csv.features.shape[1]} feature columns, "
            f"model expects {model.n_features}"
        )
    if loaded.feature_names is not None and data_csv.feature_names != loaded.feature_names:
        raise CsvParseError(
            f"{args.data} feature columns differ from the model's "
            f"({data_csv.feature_names} vs {loaded.feature_names})"
        )
    return data_csv


def _cmd_predict(args) -> int:
    loaded = io.load_model(args.model)
    data_csv = _load_for_model(args, loaded, require_label=False)
    _echo(args)
    pred = loaded.model.predict(data_csv.features)
    rows = [[loaded.class_names[i]] for i in pred]
    _write_csv(args.out, ["predicted"], rows)
    if not args.quiet and args.out:
        print(f"wrote {len(rows)} predictions to {args.out}")
    return 0


def _cmd_evaluate(args) -> int:
    loaded = io.load_model(args.model)
    data_csv = _load_for_model(args, loaded, require_label=True)
    _echo(args)
    pred = loaded.model.predict(data_csv.features)
    wrong = int(np.sum(pred != data_csv.labels))
    rate = wrong / data_csv.labels.size
    if args.out:
        _write_csv(args.out, ["n", "errors", "error_rate"],
                   [[data_csv.labels.size, wrong, _fmt(rate)]])
    print(f"test_error: {_fmt(rate)}")
    return 0


def _cmd_project(args) -> int:
    loaded = io.load_model(args.model)
    if not hasattr(loaded.model, "project"):
        raise ValueError("project needs a subspace model (fit with --fisher)")
    data_csv = _load_for_model(args, loaded, require_label=False)
    _echo(args)
    coords = loaded.model.project(data_csv.features)
    if data_csv.labels is not None:
        label_names = [loaded.class_names[i] for i in data_csv.labels]
    else:
        pred = loaded.model.predict(data_csv.features)
        label_names = [loaded.class_names[i] for i in pred]
    header = [f"d{j + 1}" for j in range(coords.shape[1])] + ["label"]
    rows = [[_fmt(v) for v in coords[i]] + [label_names[i]]
            for i in range(coords.shape[0])]
    _write_csv(args.out, header, rows)
    if not args.quiet and args.out:
        print(f"wrote {len(rows)} projections to {args.out}")
    return 0


# ---------------------------------------------------------------------------
# simulate


def _scenario_config(args, seed: int):
    if args.scenario == "sparse":
        return SparseScenarioConfig(
            n=args.n or 300, p=args.p or 500, n_classes=args.classes or 5,
            rho=args.rho, sigma=args.sigma, imbalance=args.imbalance,
            n_test=args.n_test, seed=seed,
        )
    variant = 1 if args.scenario == "lowrank1" else 2
    return LowRankScenarioConfig(
        variant=variant, n=args.n or 1000, p=args.p or 100,
        n_classes=args.classes or 10, rank=args.rank, rho=args.rho,
        eta=args.eta, n_test=args.n_test, seed=seed,
    )


def _parse_methods(args) -> list:
    methods = []
    for token in args.methods.split(","):
        token = token.strip()
        if not token:
            continue
        if token == "oracle":
            methods.append(oracle_method())
            continue
        fisher = token.endswith("-f")
        kind = token[:-2] if fisher else token
        if kind not in _PENALTY_CHOICES or kind == "none":
            raise ValueError(f"unknown method {token!r}")
        lam = args.lam if args.lam == "cv" else float(args.lam)
        methods.append(ldrr_method(
            kind=kind, alpha=args.alpha, lam=lam, fisher=fisher, k=args.k,
            rank_cv=args.rank_cv and kind in ("rr", "rr-ridge"),
            ridge=args.ridge, n_folds=args.folds, n_grid=args.grid,
            loss=args.loss, standardize=args.standardize, name=token,
        ))
    if not methods:
        raise ValueError("no methods given")
    return methods


def _cmd_simulate(args) -> int:
    methods = _parse_methods(args)
    sweep: list[tuple[str, str]]
    if args.vary:
        if not args.values:
            raise ValueError("--vary needs --values")
        sweep = [(args.vary, v.strip()) for v in args.values.split(",") if v.strip()]
    else:
        sweep = [("", "")]
    _echo(args)
    header = ["scenario", "param", "value", "method", "mean_error", "se",
              "bayes_error", "excess_risk", "link_warnings"]
    rows = []
    for param, value in sweep:
        cfg = _scenario_config(args, args.seed)
        if param:
            if not hasattr(cfg, param):
                raise ValueError(f"unknown scenario field {param!r}")
            field_type = int if isinstance(getattr(cfg, param), int) else float
            cfg = type(cfg)(**{**asdict(cfg), param: field_type(float(value))})
        report = run_experiment(cfg, methods, n_reps=args.reps,
                                base_seed=args.seed, bayes_mc=args.mc,
                                threads=args.threads)
        for s in report.summaries():
            rows.append([
                report.scenario["scenario"], param, value, s.name,
                _fmt(s.mean_error), _fmt(s.se_error), _fmt(report.bayes_mean),
                _fmt(s.excess_risk), s.link_warnings,
            ])
        for name, rep, msg in report.failures:
            print(f"warning: rep {rep} method {name} failed: {msg}", file=sys.stderr)
    if args.out:
        _write_csv(args.out, header, rows)
    if not args.quiet or not args.out:
        print(",".join(header))
        for row in rows:
            print(",".join(str(c) for c in row))
    return 0


# ---------------------------------------------------------------------------
# parser assembly


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="ldrr", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p_fit = sub.add_parser("fit", help="fit a classifier from a CSV")
    p_fit.add_argument("--train", required=True)
    p_fit.add_argument("--label-column", default="label")
    p_fit.add_argument("--out", "--model", dest="out", required=True,
                       help="model file to write")
    p_fit.add_argument("--fisher", action="store_true",
                       help="fit the subspace variant")
    p_fit.add_argument("--k", type=int, default=None,
                       help="number of directions for --fisher")
    _add_penalty_flags(p_fit)
    p_fit.set_defaults(func=_cmd_fit)

    p_cv = sub.add_parser("cv", help="cross-validate penalty strength")
    p_cv.add_argument("--train", required=True)
    p_cv.add_argument("--label-column", default="label")
    p_cv.add_argument("--out", default=None, help="CSV of the loss table")
    _add_penalty_flags(p_cv)
    p_cv.set_defaults(func=_cmd_cv)

    p_pred = sub.add_parser("predict", help="predict labels for a CSV")
    p_pred.add_argument("--model", required=True)
    p_pred.add_argument("--data", required=True)
    p_pred.add_argument("--label-column", default="label")
    p_pred.add_argument("--out", default=None, help="CSV path, stdout if absent")
    p_pred.add_argument("--quiet", action="store_true")
    p_pred.set_defaults(func=_cmd_predict)

    p_eval = sub.add_parser("evaluate", help="misclassification rate on a labeled CSV")
    p_eval.add_argument("--model", required=True)
    p_eval.add_argument("--data", required=True)
    p_eval.add_argument("--label-column", default="label")
    p_eval.add_argument("--out", default=None)
    p_eval.add_argument("--quiet", action="store_true")
    p_eval.set_defaults(func=_cmd_evaluate)

    p_proj = sub.add_parser("project", help="discriminant coordinates for a CSV")
    p_proj.add_argument("--model", required=True)
    p_proj.add_argument("--data", required=True)
    p_proj.add_argument("--label-column", default="label")
    p_proj.add_argument("--out", default=None, help="CSV path, stdout if absent")
    p_proj.add_argument("--quiet", action="store_true")
    p_proj.set_defaults(func=_cmd_project)

    p_sim = sub.add_parser("simulate", help="benchmark methods on a synthetic scenario")
    p_sim.add_argument("--scenario", choices=("sparse", "lowrank1", "lowrank2"),
                       required=True)
    p_sim.add_argument("--n", type=int, default=None, help="training sample size")
    p_sim.add_argument("--p", type=int, default=None, help="feature count")
    p_sim.add_argument("--classes", type=int, default=None)
    p_sim.add_argument("--rho", type=float, default=0.6)
    p_sim.add_argument("--sigma", type=float, default=1.0, help="sparse noise scale")
    p_sim.add_argument("--imbalance", type=float, default=0.0)
    p_sim.add_argument("--rank", type=int, default=3, help="low-rank subspace dimension")
    p_sim.add_argument("--eta", type=float, default=None, help="low-rank mean scale")
    p_sim.add_argument("--n-test", type=int, default=500)
    p_sim.add_argument("--reps", type=int, default=10)
    p_sim.add_argument("--mc", type=int, default=2000,
                       help="Monte Carlo draws for the exact-rule error")
    p_sim.add_argument("--methods", default="oracle,lasso",
                       help="comma list: oracle or a penalty kind, '-f' suffix "
                            "for the subspace variant (e.g. lasso,rr-f)")
    p_sim.add_argument("--k", type=int, default=None)
    p_sim.add_argument("--vary", default=None, help="scenario field to sweep")
    p_sim.add_argument("--values", default=None, help="comma list of sweep values")
    p_sim.add_argument("--threads", type=int, default=1)
    p_sim.add_argument("--out", default=None, help="report CSV")
    _add_penalty_flags(p_sim, folds_default=5)
    p_sim.set_defaults(func=_cmd_simulate)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except _DATA_ERRORS as exc:
        print(f"error[{type(exc).__name__}]: {exc}", file=sys.stderr)
        return EXIT_DATA
    except _NUMERIC_ERRORS as exc:
        print(f"error[{type(exc).__name__}]: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except LdrrError as exc:  # anything typed but unclassified counts as data
        print(f"error[{type(exc).__name__}]: {exc}", file=sys.stderr)
        return EXIT_DATA
    except np.linalg.LinAlgError as exc:  # subclasses ValueError, keep above it
        print(f"error[LinAlgError]: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except OSError as exc:
        print(f"error[IoError]: {exc}", file=sys.stderr)
        return EXIT_DATA
    except ValueError as exc:
        print(f"error[usage]: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
