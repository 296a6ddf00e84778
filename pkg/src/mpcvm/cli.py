"""Command-line entry point: ``mpcvm <command> [flags]``.

Every command echoes its resolved configuration to stderr and embeds it in
what it writes: JSON documents get a ``config`` key, CSV tables start with a
``# config: {...}`` comment line. Exit codes are 0 success, 2 usage error,
3 data error, 4 numerical failure.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import logging
import sys
from dataclasses import replace

import numpy as np

from . import dataset as ds
from . import harness
from . import model as mdl
from .em import EmConfig
from .fmlm import FmlmConfig
from .kernel import theta_grid
from .metrics import (RankTable, average_ranks, bonferroni_dunn, chi_square_sf,
                      confusion_matrix, critical_difference, error_rate, friedman_q,
                      generalized_auc, q_alpha)

EXIT_OK, EXIT_USAGE, EXIT_DATA, EXIT_NUMERIC = 0, 2, 3, 4

log = logging.getLogger("mpcvm")


class UsageError(Exception):
    pass


# ---------------------------------------------------------------- output helpers

def _json_default(obj):
    if isinstance(obj, np.generic):
        return obj.item()
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    raise TypeError(f"cannot serialize {type(obj).__name__}")


def _dumps(doc) -> str:
    return json.dumps(doc, indent=1, default=_json_default)


def _write_text(text: str, path) -> None:
    if path in (None, "-"):
        sys.stdout.write(text)
    else:
        with open(path, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)


def _write_json(doc: dict, path, config: dict) -> None:
    _write_text(_dumps({"config": config, **doc}) + "\n", path)


def _csv_text(header, rows, config: dict) -> str:
    buf = io.StringIO()
    buf.write("# config: " + json.dumps(config, sort_keys=True, default=_json_default) + "\n")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for row in rows:
        w.writerow([_cell(v) for v in row])
    return buf.getvalue()


def _cell(v):
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    if isinstance(v, np.integer):
        return int(v)
    return v


def _resolved(args) -> dict:
    cfg = {k: v for k, v in vars(args).items() if k not in ("func", "verbose")}
    log.info("config: %s", json.dumps(cfg, sort_keys=True, default=_json_default))
    print("# config: " + json.dumps(cfg, sort_keys=True, default=_json_default), file=sys.stderr)
    return cfg


def _settings(args) -> harness.TrainerSettings:
    em = EmConfig(u1=args.u1, v1=args.v1, u2=args.u2, v2=args.v2,
                  prune_threshold=args.prune_threshold, alpha_init=args.alpha_init,
                  max_iter=args.max_iter, tol=args.tol, seed=args.seed,
                  quad_nodes=args.quad_nodes)
    fm = FmlmConfig(max_epochs=args.max_epochs, tol=args.fmlm_tol, seed=args.seed,
                    quad_nodes=args.quad_nodes)
    return harness.TrainerSettings(em, fm)


def _grid(args, data: ds.Dataset):
    if args.theta:
        return [float(t) for t in args.theta]
    params = ds.fit_standardizer(data)
    return [float(t) for t in theta_grid(params.transform(data.features), args.grid_size)]


def _train_count(args, data: ds.Dataset) -> int:
    return args.train_count if args.train_count is not None else int(round(0.8 * data.n_samples))


# ---------------------------------------------------------------- commands

def cmd_synth(args) -> int:
    cfg = _resolved(args)
    gen = {"overlap": ds.gen_overlap, "overclass": ds.gen_overclass}[args.name]
    data = gen(args.seed)
    buf = io.StringIO()
    buf.write("# config: " + json.dumps(cfg, sort_keys=True) + "\n")
    names = tuple(f"x{j + 1}" for j in range(data.n_features))
    w = csv.writer(buf, lineterminator="\n")
    w.writerow([*names, "label"])
    for x, t in zip(data.features, data.original_labels()):
        w.writerow([*(repr(float(v)) for v in x), int(t)])
    _write_text(buf.getvalue(), args.out)
    return EXIT_OK


def cmd_tune(args) -> int:
    cfg = _resolved(args)
    data = ds.load_csv(args.data, args.label_col)
    grid = _grid(args, data)
    best, rows = harness.tune(data, args.trainer, grid, _train_count(args, data), args.seed,
                              args.partitions, _settings(args))
    text = _csv_text(["theta", "mean_accuracy", "succeeded", "failed"],
                     [[r["theta"], r["mean_accuracy"], r["succeeded"], r["failed"]] for r in rows],
                     cfg)
    _write_text(text, args.out)
    print(_dumps({"best_theta": best, "accuracy_on": "test half of each tuning partition"}),
          file=sys.stderr)
    return EXIT_OK


def cmd_train(args) -> int:
    cfg = _resolved(args)
    data = ds.load_csv(args.data, args.label_col)
    if args.theta is None:
        raise UsageError("--theta is required for train (use `tune` to choose it)")
    model, report = harness.fit(args.trainer, data, args.theta, _settings(args))
    model = replace(model, metadata={**model.metadata, "config": cfg})
    mdl.save(model, args.out)
    sp = mdl.sparsity_report(model)
    doc = {**report.to_dict(), "relevant_vectors": sp.relevant_vectors,
           "nonzero_weights": sp.nonzero_weights, "union_relevant_vectors":
           sp.union_relevant_vectors, "vectors(nonzero)": sp.format_row()}
    _write_json(doc, args.report or args.out + ".report.json", cfg)
    if not report.converged:
        log.warning("training stopped at the iteration cap without meeting the tolerance")
    return EXIT_OK


def cmd_predict(args) -> int:
    cfg = _resolved(args)
    model = mdl.load(args.model)
    x = ds.load_features(args.data, args.label_col)
    labels = mdl.predict_class(model, x)
    header = ["label"]
    if args.with_proba:
        proba = mdl.predict_proba(model, x)
        header += [f"p_{v}" for v in model.label_map]
        rows = [[int(t), *p] for t, p in zip(labels, proba)]
    else:
        rows = [[int(t)] for t in labels]
    _write_text(_csv_text(header, rows, cfg), args.out)
    return EXIT_OK


def cmd_evaluate(args) -> int:
    cfg = _resolved(args)
    model = mdl.load(args.model)
    data = ds.load_csv(args.data, args.label_col)
    known = set(model.label_map)
    for v in data.label_map:
        if v not in known:
            raise ds.DataError(f"class {v} in the test data is absent from the model")
    truth = data.original_labels()
    pred = mdl.predict_class(model, data.features)
    proba = mdl.predict_proba(model, data.features)
    # AUC is averaged over the class pairs that occur in the test data
    cols = [model.label_map.index(v) for v in data.label_map]
    doc = {"err": error_rate(pred, truth),
           "auc": generalized_auc(proba[:, cols], truth, data.label_map),
           "classes": [int(v) for v in model.label_map],
           "confusion": confusion_matrix(pred, truth, model.label_map).tolist(),
           "n_samples": int(data.n_samples)}
    _write_json(doc, args.out, cfg)
    return EXIT_OK


_ROW_FIELDS = ["trainer", "k", "seed", "theta", "ok", "err", "auc", "iterations",
               "converged", "nonzero", "error"]


def cmd_benchmark(args) -> int:
    cfg = _resolved(args)
    data = ds.load_csv(args.data, args.label_col)
    count = _train_count(args, data)
    settings = _settings(args)
    grid = None if args.theta and len(args.theta) == 1 else _grid(args, data)
    theta = float(args.theta[0]) if args.theta and len(args.theta) == 1 else None
    rows, summaries = [], []
    for trainer in args.trainer:
        if args.first_k_classes:
            runs = harness.class_curriculum(data, trainer, args.first_k_classes, count, theta,
                                            grid, args.seed, args.partitions,
                                            args.tune_partitions, settings)
        else:
            res = harness.benchmark(data, trainer, count, args.seed, theta, grid,
                                    args.partitions, args.tune_partitions, settings)
            runs = [{"k": data.class_count, "train_count": count, **res}]
        for run in runs:
            for r in run["rows"]:
                rows.append([r["trainer"], run["k"], r["seed"], r["theta"], int(r["ok"]),
                             r["err"], r["auc"], r["iterations"], int(r["converged"]),
                             r["nonzero"], r["error"]])
            summaries.append({"trainer": trainer, "k": run["k"], "train_count":
                              run["train_count"], "theta": run["theta"], **run["summary"]})
    _write_text(_csv_text(_ROW_FIELDS, rows, cfg), args.out)
    summary_header = ["trainer", "k", "train_count", "theta", "partitions", "failed", "err", "auc"]
    text = _csv_text(summary_header, [[s[h] for h in summary_header] for s in summaries], cfg)
    _write_text(text, args.summary)
    return EXIT_OK


def _read_table(path):
    with open(path, newline="", encoding="utf-8") as fh:
        rows = [r for r in csv.reader(fh) if r and not r[0].lstrip().startswith("#")]
    if len(rows) < 2:
        raise ds.DataError(f"{path}: need a header row and at least one data row")
    header, body = rows[0], rows[1:]
    first_is_name = any(ds._parse_float(r[0]) is None for r in body)
    names = header[1:] if first_is_name else header
    try:
        values = np.array([[float(c) for c in (r[1:] if first_is_name else r)] for r in body])
    except ValueError as exc:
        raise ds.DataError(f"{path}: malformed score table ({exc})") from exc
    if values.ndim != 2 or values.shape[1] != len(names):
        raise ds.DataError(f"{path}: ragged score table")
    return names, values


def cmd_stats(args) -> int:
    cfg = _resolved(args)
    names, values = _read_table(args.table)
    if args.ranks:
        if values.shape[0] != 1 or args.n_datasets is None:
            raise UsageError("--ranks needs a single row of average ranks and --n-datasets")
        ranks = RankTable(len(names), args.n_datasets, values[0], tuple(names))
    else:
        ranks = average_ranks(values, args.direction, names)
    if args.control in names:
        control = names.index(args.control)
    else:
        try:
            control = int(args.control)
        except ValueError:
            raise UsageError(f"control {args.control!r} is not a column name or index") from None
    qa = args.q_alpha if args.q_alpha is not None else q_alpha(ranks.k, args.alpha)
    q = friedman_q(ranks)
    doc = {
        "algorithms": list(names),
        "average_ranks": ranks.avg_ranks.tolist(),
        "n_datasets": ranks.n_datasets,
        "friedman_q": q,
        "p_value": chi_square_sf(max(q, 0.0), ranks.k - 1),
        "q_alpha": qa,
        "critical_difference": critical_difference(ranks.k, ranks.n_datasets, qa),
        "control": names[control],
        "comparisons": bonferroni_dunn(ranks, control, qa, args.alpha),
    }
    _write_json(doc, args.out, cfg)
    return EXIT_OK


# ---------------------------------------------------------------- parser

def _add_data(p, required=True):
    p.add_argument("--data", required=required, help="CSV file, label column last by default")
    p.add_argument("--label-col", type=int, default=-1, help="label column index (default -1)")


def _add_hyper(p):
    em, fm = EmConfig(), FmlmConfig()
    g = p.add_argument_group("trainer hyper-parameters")
    for name in ("u1", "v1", "u2", "v2"):
        g.add_argument(f"--{name}", type=float, default=getattr(em, name))
    g.add_argument("--prune-threshold", type=float, default=em.prune_threshold)
    g.add_argument("--alpha-init", type=float, default=em.alpha_init)
    g.add_argument("--max-iter", type=int, default=em.max_iter)
    g.add_argument("--tol", type=float, default=em.tol, help="EM weight-change tolerance")
    g.add_argument("--max-epochs", type=int, default=fm.max_epochs)
    g.add_argument("--fmlm-tol", type=float, default=fm.tol,
                   help="marginal-likelihood tolerance (default 1e-6 * N)")
    g.add_argument("--quad-nodes", type=int, default=em.quad_nodes)


def _add_theta(p, many=True):
    if many:
        p.add_argument("--theta", type=float, nargs="+", help="kernel width(s)")
        p.add_argument("--grid-size", type=int, default=9,
                       help="size of the default median-distance grid when --theta is absent")
    else:
        p.add_argument("--theta", type=float, help="kernel width")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="mpcvm", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("synth", help="write a synthetic data set")
    p.add_argument("--name", choices=["overlap", "overclass"], required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", default="-")
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("tune", help="choose the kernel width on seeded partitions")
    _add_data(p)
    p.add_argument("--trainer", choices=harness.TRAINERS, default="mpcvm2")
    _add_theta(p)
    p.add_argument("--partitions", type=int, default=5)
    p.add_argument("--train-count", type=int)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", default="-", help="per-width accuracy CSV")
    _add_hyper(p)
    p.set_defaults(func=cmd_tune)

    p = sub.add_parser("train", help="fit a model on a whole file")
    _add_data(p)
    p.add_argument("--trainer", choices=harness.TRAINERS, default="mpcvm2")
    _add_theta(p, many=False)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True, help="model JSON path")
    p.add_argument("--report", help="train report path (default <out>.report.json)")
    _add_hyper(p)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("predict", help="label (and optionally score) new points")
    p.add_argument("--model", required=True)
    p.add_argument("--data", required=True)
    p.add_argument("--label-col", type=int, help="drop this column before predicting")
    p.add_argument("--with-proba", action="store_true")
    p.add_argument("--out", default="-")
    p.set_defaults(func=cmd_predict)

    p = sub.add_parser("evaluate", help="error rate, AUC and confusion matrix")
    p.add_argument("--model", required=True)
    _add_data(p)
    p.add_argument("--out", default="-")
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("benchmark", help="tuning plus repeated seeded partitions")
    _add_data(p)
    p.add_argument("--trainer", choices=harness.TRAINERS, nargs="+", default=["mpcvm2"])
    _add_theta(p)
    p.add_argument("--partitions", type=int, default=45)
    p.add_argument("--tune-partitions", type=int, default=5)
    p.add_argument("--train-count", type=int, help="default: 80%% of the rows")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--first-k-classes", type=int, nargs="+",
                   help="class-curriculum sweep: one summary row per k")
    p.add_argument("--out", default="-", help="per-partition CSV")
    p.add_argument("--summary", default="-", help="summary CSV")
    _add_hyper(p)
    p.set_defaults(func=cmd_benchmark)

    p = sub.add_parser("stats", help="Friedman test with Bonferroni-Dunn post-hoc")
    p.add_argument("--table", required=True,
                   help="CSV, algorithms as columns, data sets as rows")
    p.add_argument("--control", required=True, help="control column name or index")
    p.add_argument("--direction", choices=["lower", "higher"], default="lower",
                   help="lower for error rates, higher for AUC")
    p.add_argument("--alpha", type=float, default=0.10)
    p.add_argument("--q-alpha", type=float, help="override the tabulated critical value")
    p.add_argument("--ranks", action="store_true",
                   help="the table holds one row of average ranks instead of scores")
    p.add_argument("--n-datasets", type=int, help="number of data sets behind --ranks")
    p.add_argument("--out", default="-")
    p.set_defaults(func=cmd_stats)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_USAGE if exc.code not in (0, None) else EXIT_OK
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (ds.DataError, mdl.ModelFormatError, OSError) as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except (ArithmeticError, np.linalg.LinAlgError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except ValueError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
