"""Command-line interface: fit, score, eval, inspect, demo-kepler, sweep.

Every subcommand is batch-oriented and reproducible: a fixed ``--seed``
(or the ``SYRAN_SEED`` environment variable) makes output byte-identical
across runs and worker counts.  Exit status is 0 on success, 1 on runtime
errors (bad data, IO failures), 2 on usage errors.
"""

from __future__ import annotations

import argparse
import csv
import dataclasses
import json
import os
import sys
import time

import numpy as np

from . import __version__
from . import expr as ex
from .data import Dataset, kepler_dataset, load_csv, train_test_split
from .ensemble import (
    Hyperparameters,
    fit,
    load_model,
    save_model,
    score,
    to_json,
)
from .search import EvolutionConfig
from .evaluation import (
    kepler_equivalence_rate,
    report_json,
    report_text,
    run_experiment,
)

_GRID_FLAGS = ("grid_gamma", "grid_bag_size", "grid_delta")


def _default_seed():
    env = os.environ.get("SYRAN_SEED")
    if env is not None:
        try:
            return int(env)
        except ValueError:
            raise SystemExit(f"syran: error: SYRAN_SEED must be an integer, "
                             f"got {env!r}") from None
    return 0


def _add_common(parser):
    parser.add_argument("--seed", type=int, default=None,
                        help="master seed (default: $SYRAN_SEED or 0)")
    parser.add_argument("--workers", type=int, default=None,
                        help="parallel worker processes (default: all CPUs)")
    parser.add_argument("--format", choices=("text", "json"), default="text",
                        help="report format (default: text)")
    parser.add_argument("--output", help="write report/scores here instead of stdout")


def _add_hyper(parser):
    parser.add_argument("--ensemble-size", type=int, default=50, metavar="M",
                        help="number of ensemble members (default: 50)")
    parser.add_argument("--bag-size", type=int, default=2, metavar="K",
                        help="feature subset size per member (default: 2)")
    parser.add_argument("--delta", type=float, default=1.0,
                        help="noise-contrast margin (default: 1.0)")
    parser.add_argument("--gamma", type=float, default=0.1,
                        help="complexity weight (default: 0.1)")
    parser.add_argument("--generations", type=int, default=30000, metavar="G",
                        help="candidate evaluations per member (default: 30000)")
    parser.add_argument("--population", type=int, default=100,
                        help="evolution population size (default: 100)")


def build_parser():
    parser = argparse.ArgumentParser(
        prog="syran",
        description="Learn symbolic invariants on normal data and score "
                    "anomalies by calibrated deviation.",
    )
    parser.add_argument("--version", action="version", version=f"syran {__version__}")
    sub = parser.add_subparsers(dest="subcommand", required=True)

    p = sub.add_parser("fit", help="train an ensemble on a CSV and save it")
    p.add_argument("--input", required=True, help="training CSV (header row required)")
    p.add_argument("--model", required=True, help="path to write the model file")
    p.add_argument("--label-column", help="column to strip before training")
    _add_hyper(p)
    _add_common(p)

    p = sub.add_parser("score", help="score rows of a CSV with a saved model")
    p.add_argument("--input", required=True, help="CSV of rows to score")
    p.add_argument("--model", required=True, help="trained model file")
    p.add_argument("--label-column", help="column to strip before scoring")
    _add_common(p)

    p = sub.add_parser("eval", help="one-class split, train, and report AUC-ROC")
    p.add_argument("--input", required=True, help="labeled CSV")
    p.add_argument("--label-column", required=True,
                   help="binary label column (1 = anomaly)")
    p.add_argument("--train-fraction", type=float, default=0.5,
                   help="fraction of normal rows used for training (default: 0.5)")
    _add_hyper(p)
    _add_common(p)

    p = sub.add_parser("inspect", help="print a saved model's equations")
    p.add_argument("--model", required=True, help="trained model file")
    _add_common(p)

    p = sub.add_parser("demo-kepler",
                       help="rediscover the T^2 = a^3 law on 13 solar-system bodies")
    p.add_argument("--model", help="optionally save the trained model here")
    p.add_argument("--tol", type=float, default=1e-3,
                   help="relative tolerance of the equivalence check (default: 1e-3)")
    _add_hyper(p)
    _add_common(p)

    p = sub.add_parser("sweep",
                       help="vary one hyperparameter over a grid and tabulate AUC")
    p.add_argument("--input", required=True, help="labeled CSV")
    p.add_argument("--label-column", required=True,
                   help="binary label column (1 = anomaly)")
    p.add_argument("--train-fraction", type=float, default=0.5,
                   help="fraction of normal rows used for training (default: 0.5)")
    p.add_argument("--grid-gamma", help="comma-separated gamma values")
    p.add_argument("--grid-bag-size", help="comma-separated bag sizes")
    p.add_argument("--grid-delta", help="comma-separated delta values")
    _add_hyper(p)
    _add_common(p)

    return parser


def _hyperparameters(args):
    return Hyperparameters(
        ensemble_size=args.ensemble_size,
        bag_size=args.bag_size,
        delta=args.delta,
        gamma=args.gamma,
        evolution=EvolutionConfig(generations=args.generations,
                                  population_size=args.population),
        master_seed=args.seed,
    )


def _emit(args, text):
    if args.output:
        with open(args.output, "w", encoding="utf-8") as handle:
            handle.write(text)
    else:
        sys.stdout.write(text)


def _member_lines(model):
    lines = []
    for i, member in enumerate(model.members):
        names = [model.feature_names[j] for j in member.subset]
        lines.append(
            f"[{i:3d}] loss={member.train_loss.total:.6f} "
            f"d_bar={member.mean_deviation:.6g} "
            f"complexity={ex.complexity(member.expression):g}  "
            f"{ex.to_text(member.expression, feature_names=names)}"
        )
    return lines


def cmd_fit(args):
    ds = load_csv(args.input, label_column=args.label_column)
    if len(ds) < 2:
        raise ValueError(f"{args.input}: need at least 2 training rows, got {len(ds)}")
    model = fit(ds, _hyperparameters(args), workers=args.workers)
    save_model(model, args.model)
    if args.format == "json":
        _emit(args, to_json(model))
    else:
        lines = [f"trained {len(model.members)} members on "
                 f"{len(ds)} rows x {ds.dimension} features"]
        lines += _member_lines(model)
        lines.append(f"model written to {args.model}")
        _emit(args, "\n".join(lines) + "\n")
    return 0


def cmd_score(args):
    model = load_model(args.model)
    ds = load_csv(args.input, label_column=args.label_column)
    if ds.dimension != model.dimension:
        raise ValueError(
            f"{args.input}: expected {model.dimension} feature columns "
            f"(model dimension), got {ds.dimension}"
        )
    values = score(model, ds.rows)
    out = sys.stdout if not args.output else open(args.output, "w",
                                                  encoding="utf-8", newline="")
    try:
        writer = csv.writer(out)
        writer.writerow(["score"])
        for v in values:
            writer.writerow([repr(float(v))])
    finally:
        if args.output:
            out.close()
    return 0


def cmd_eval(args):
    ds = load_csv(args.input, label_column=args.label_column)
    train, test = train_test_split(ds, args.train_fraction, seed=args.seed)
    report = run_experiment(train, test, _hyperparameters(args),
                            workers=args.workers)
    _emit(args, report_json(report) if args.format == "json" else report_text(report))
    return 0


def cmd_inspect(args):
    model = load_model(args.model)
    order = sorted(range(len(model.members)),
                   key=lambda i: model.members[i].train_loss.total)
    if args.format == "json":
        document = {
            "dimension": model.dimension,
            "feature_names": list(model.feature_names),
            "members": [
                {
                    "equation": ex.to_text(
                        model.members[i].expression,
                        feature_names=[model.feature_names[j]
                                       for j in model.members[i].subset],
                    ),
                    "subset": list(model.members[i].subset),
                    "train_loss": model.members[i].train_loss.total,
                    "mean_deviation": model.members[i].mean_deviation,
                    "complexity": ex.complexity(model.members[i].expression),
                }
                for i in order
            ],
        }
        _emit(args, json.dumps(document, indent=2, sort_keys=True) + "\n")
    else:
        reordered = dataclasses.replace(
            model, members=tuple(model.members[i] for i in order)
        )
        _emit(args, "\n".join(_member_lines(reordered)) + "\n")
    return 0


def cmd_demo_kepler(args):
    ds = kepler_dataset()
    hp = _hyperparameters(args)
    start = time.perf_counter()
    model = fit(ds, hp, workers=args.workers)
    elapsed = time.perf_counter() - start
    rate = kepler_equivalence_rate(model, tol=args.tol, seed=args.seed)
    if args.model:
        save_model(model, args.model)

    if args.format == "json":
        document = {
            "equivalence_rate": rate,
            "elapsed_seconds": elapsed,
            "seconds_per_member": elapsed / len(model.members),
            "members": [
                {
                    "equation": ex.to_text(
                        m.expression,
                        feature_names=[model.feature_names[j] for j in m.subset],
                    ),
                    "train_loss": m.train_loss.total,
                    "mean_deviation": m.mean_deviation,
                }
                for m in model.members
            ],
        }
        _emit(args, json.dumps(document, indent=2, sort_keys=True) + "\n")
    else:
        lines = [
            f"training {hp.ensemble_size} members on the 13-body orbital table "
            f"(T in years, a in AU)",
        ]
        lines += _member_lines(model)
        lines.append(f"equivalence rate : {rate:.2f} "
                     f"({round(rate * len(model.members))}/{len(model.members)} "
                     f"members match a T^2/a^3 rearrangement)")
        lines.append(f"elapsed          : {elapsed:.1f}s "
                     f"({elapsed / len(model.members):.1f}s per member)")
        if args.model:
            lines.append(f"model written to {args.model}")
        _emit(args, "\n".join(lines) + "\n")
    return 0


def _parse_grid(text, kind):
    try:
        return tuple(kind(v) for v in text.split(","))
    except ValueError:
        raise ValueError(f"invalid grid value in {text!r}") from None


def cmd_sweep(args):
    chosen = [flag for flag in _GRID_FLAGS if getattr(args, flag)]
    if len(chosen) != 1:
        raise ValueError("exactly one of --grid-gamma, --grid-bag-size, "
                         "--grid-delta must be given")
    flag = chosen[0]
    kind = int if flag == "grid_bag_size" else float
    grid = _parse_grid(getattr(args, flag), kind)

    ds = load_csv(args.input, label_column=args.label_column)
    train, test = train_test_split(ds, args.train_fraction, seed=args.seed)
    base = _hyperparameters(args)
    field = {"grid_gamma": "gamma", "grid_bag_size": "bag_size",
             "grid_delta": "delta"}[flag]

    rows = []
    for value in grid:
        hp = dataclasses.replace(base, **{field: value})
        report = run_experiment(train, test, hp, workers=args.workers)
        rows.append({
            field: value,
            "auc_mean": report.auc_mean,
            "auc_max": report.auc_max,
            "best_equation": report.equations[0].equation,
        })

    if args.format == "json":
        _emit(args, json.dumps(rows, indent=2, sort_keys=True) + "\n")
    else:
        lines = [f"{field:>10}  {'auc_mean':>8}  {'auc_max':>8}  best member equation"]
        for row in rows:
            lines.append(f"{row[field]:>10}  {row['auc_mean']:8.4f}  "
                         f"{row['auc_max']:8.4f}  {row['best_equation']}")
        _emit(args, "\n".join(lines) + "\n")
    return 0


_COMMANDS = {
    "fit": cmd_fit,
    "score": cmd_score,
    "eval": cmd_eval,
    "inspect": cmd_inspect,
    "demo-kepler": cmd_demo_kepler,
    "sweep": cmd_sweep,
}


def main(argv=None):
    args = build_parser().parse_args(argv)
    if getattr(args, "seed", None) is None:
        args.seed = _default_seed()
    if getattr(args, "workers", None) is None:
        args.workers = os.cpu_count() or 1
    try:
        return _COMMANDS[args.subcommand](args)
    except (ValueError, OSError, ex.ExpressionError) as error:
        print(f"syran: error: {error}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
