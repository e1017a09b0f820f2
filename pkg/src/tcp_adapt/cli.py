"""Command-line interface.

Subcommands: sample-bias, fit-source, fit-tcp, evaluate, experiment-ssb,
experiment-da, mmd. Exit codes: 0 success, 1 usage error, 2 data or
numerical error. All randomness flows from --seed and every output
artifact records the seed, the chosen lambda and the solver options.
"""

from __future__ import annotations

import argparse
import json
import sys

import numpy as np

from .data import load_csv, one_hot
from .discriminant import GaussianParams, da_risk, fit_tcp_da, log_joint_scores
from .experiments import (
    LAMBDA_GRID,
    ExperimentConfig,
    crossval_lambda,
    pca_2d,
    run_da_experiment,
    run_ssb_experiment,
    _fit_source,
    _positive_class_auc,
)
from .least_squares import LinearParams, fit_tcp_ls, ls_risk
from .metrics import mmd_rbf
from .sampling import BiasSampleSpec, sample_biased
from .solver import NumericalBlowupError, SolverOptions, write_trace_csv

VERSION_LINE = "# tcp-adapt v1"


class _Parser(argparse.ArgumentParser):
    """argparse exits 2 on usage errors; the CLI contract wants 1."""

    def error(self, message):
        self.print_usage(sys.stderr)
        sys.stderr.write(f"{self.prog}: error: {message}\n")
        raise SystemExit(1)


def _add_data_flags(p, label_required=False):
    p.add_argument("--label-col", default=None,
                   help="label column: 0-based index, or name with --header"
                        + ("" if not label_required else " (required)"))
    p.add_argument("--header", action="store_true",
                   help="first CSV row holds column names")
    p.add_argument("--standardize", action="store_true",
                   help="z-score features after loading (off by default)")


def _add_solver_flags(p):
    p.add_argument("--alpha0", type=float, default=None,
                   help="initial step size (default: number of target samples)")
    p.add_argument("--epsilon", type=float, default=1e-9,
                   help="convergence threshold on the objective change")
    p.add_argument("--max-iter", type=int, default=5000)
    p.add_argument("--schedule", choices=["inverse_t", "inverse_sqrt_t"],
                   default="inverse_t")


def _add_lambda_flags(p):
    p.add_argument("--lambda", dest="fixed_lambda", type=float, default=None,
                   help="fixed regularization (skips cross-validation)")
    p.add_argument("--lambda-grid", type=str, default=None,
                   help="comma-separated grid for cross-validation")
    p.add_argument("--folds", type=int, default=5)


def _parse_label_col(value):
    if value is None:
        return None
    try:
        return int(value)
    except ValueError:
        return value


def _load(path, args, need_labels):
    ds = load_csv(path, label_column=_parse_label_col(args.label_col),
                  header=args.header)
    if need_labels and ds.labels is None:
        raise ValueError(f"{path}: --label-col is required for this command")
    if getattr(args, "standardize", False):
        mu = ds.features.mean(axis=0)
        sd = ds.features.std(axis=0)
        sd[sd == 0] = 1.0
        ds.features = (ds.features - mu) / sd
    return ds


def _grid(args):
    if args.lambda_grid is None:
        return LAMBDA_GRID
    return tuple(float(tok) for tok in args.lambda_grid.split(","))


def _config(args, model=None):
    return ExperimentConfig(
        model=model if model is not None else args.model,
        lambda_grid=_grid(args),
        cv_folds=args.folds,
        n_source=getattr(args, "n_source", 50),
        rng_seed=args.seed,
        repeats=getattr(args, "repeats", 1),
        alpha0=args.alpha0,
        epsilon=args.epsilon,
        max_iter=args.max_iter,
        schedule=args.schedule,
        fixed_lambda=args.fixed_lambda,
    )


def _fmt(value):
    if isinstance(value, float):
        return repr(value)
    if isinstance(value, (bool, np.bool_)):
        return str(bool(value)).lower()
    return str(value)


def _write_rows(path, fieldnames, rows, meta):
    lines = [VERSION_LINE]
    lines.append("# " + " ".join(f"{k}={v}" for k, v in meta.items()))
    lines.append(",".join(fieldnames))
    for row in rows:
        lines.append(",".join(_fmt(row.get(f, "")) for f in fieldnames))
    text = "\n".join(lines) + "\n"
    if path is None:
        sys.stdout.write(text)
    else:
        with open(path, "w", encoding="utf-8") as fh:
            fh.write(text)


def _write_json(path, doc):
    doc = {"version": "tcp-adapt v1", **doc}
    text = json.dumps(doc, indent=2, sort_keys=True) + "\n"
    if path is None:
        sys.stdout.write(text)
    else:
        with open(path, "w", encoding="utf-8") as fh:
            fh.write(text)


def _solver_meta(config, m):
    opts = config.solver_opts(m)
    return (f"alpha0:{opts.alpha0!r},schedule:{opts.schedule},"
            f"epsilon:{opts.epsilon!r},max_iter:{opts.max_iter}")


def _load_params(path):
    with open(path, encoding="utf-8") as fh:
        doc = json.load(fh)
    kind = doc.get("kind")
    if kind == "ls":
        return LinearParams.from_json(doc), "ls"
    if kind in ("lda", "qda"):
        return GaussianParams.from_json(doc), kind
    raise ValueError(f"{path}: unknown parameter kind {kind!r}")


def _dump_q_csv(path, Z, q_star):
    coords = pca_2d(Z)
    fields = ["pc1", "pc2"] + [f"q_{k + 1}" for k in range(q_star.shape[1])]
    rows = []
    for j in range(q_star.shape[0]):
        row = {"pc1": float(coords[j, 0]), "pc2": float(coords[j, 1])}
        for k in range(q_star.shape[1]):
            row[f"q_{k + 1}"] = float(q_star[j, k])
        rows.append(row)
    _write_rows(path, fields, rows, {"rows": q_star.shape[0]})


def _mean_row(rows, numeric_fields):
    out = {k: rows[0][k] for k in rows[0]}
    out["repeat"] = "mean"
    for f in numeric_fields:
        out[f] = float(np.mean([row[f] for row in rows]))
    for f in ("converged", "reverted"):
        out[f] = all(row[f] for row in rows)
    return out


def cmd_sample_bias(args):
    ds = _load(args.data, args, need_labels=True)
    spec = BiasSampleSpec(args.n_source, rng_seed=args.seed)
    idx = sample_biased(ds, spec)
    rows = [{"index": int(i)} for i in idx]
    _write_rows(args.out, ["index"],
                rows, {"seed": args.seed, "n_source": args.n_source,
                       "dataset": ds.name})
    return 0


def cmd_fit_source(args):
    ds = _load(args.data, args, need_labels=True)
    if args.fixed_lambda is not None:
        lam = args.fixed_lambda
    else:
        lam = crossval_lambda(ds.features, ds.labels, args.model, _grid(args),
                              args.folds, args.seed)
    params = _fit_source(ds.features, ds.labels, ds.K, args.model, lam)
    doc = params.to_json()
    doc["meta"] = {"seed": args.seed, "lambda": lam, "dataset": ds.name}
    _write_json(args.out, doc)
    return 0


def cmd_fit_tcp(args):
    source, kind = _load_params(args.source_params)
    ds = _load(args.data, args, need_labels=False)
    Z = ds.features
    m = Z.shape[0]
    opts = SolverOptions(
        alpha0=args.alpha0 if args.alpha0 is not None else float(m),
        schedule=args.schedule, epsilon=args.epsilon, max_iter=args.max_iter,
        trace=args.trace_out is not None)
    if kind == "ls":
        result = fit_tcp_ls(source, Z, opts, ridge=args.ridge)
    else:
        result = fit_tcp_da(source, Z, opts=opts)
    doc = {
        "params": result.params.to_json(),
        "objective": result.objective,
        "iterations": result.iterations,
        "converged": bool(result.converged),
        "reverted_to_source": bool(result.reverted_to_source),
        "meta": {"solver": {"alpha0": opts.alpha0, "schedule": opts.schedule,
                            "epsilon": opts.epsilon, "max_iter": opts.max_iter},
                 "target": ds.name, "m": m},
    }
    _write_json(args.out, doc)
    if args.trace_out is not None and result.trace is not None:
        write_trace_csv(args.trace_out, result.trace)
    if args.dump_q is not None:
        _dump_q_csv(args.dump_q, Z, result.q_star)
    return 0


def cmd_evaluate(args):
    ds = _load(args.data, args, need_labels=True)
    U = one_hot(ds.labels, ds.K)
    rows = []
    for path in args.params:
        params, kind = _load_params(path)
        if kind == "ls":
            risk = ls_risk(params, ds.features, U)
        else:
            risk = da_risk(params, ds.features, U)
        rows.append({
            "params": path,
            "model": kind,
            "risk": risk,
            "auc": _positive_class_auc(params, ds.features, ds.labels, kind),
        })
    if args.format == "json":
        _write_json(args.out, {"meta": {"dataset": ds.name}, "rows": rows})
    else:
        _write_rows(args.out, ["params", "model", "risk", "auc"], rows,
                    {"dataset": ds.name})
    return 0


SSB_FIELDS = ["dataset", "source", "target", "model", "repeat", "lambda",
              "source_risk", "tcp_risk", "oracle_risk", "auc", "objective",
              "iterations", "converged", "reverted"]


def cmd_experiment_ssb(args):
    ds = _load(args.data, args, need_labels=True)
    config = _config(args)
    rows = run_ssb_experiment(config, ds)
    numeric = ["lambda", "source_risk", "tcp_risk", "oracle_risk", "auc",
               "objective", "iterations"]
    all_rows = rows + [_mean_row(rows, numeric)]
    meta = {"seed": config.rng_seed, "model": config.model,
            "n_source": config.n_source, "repeats": config.repeats,
            "folds": config.cv_folds,
            "lambda": "cv" if config.fixed_lambda is None else config.fixed_lambda,
            "solver": _solver_meta(config, ds.n)}
    if args.format == "json":
        _write_json(args.out, {"meta": {k: str(v) for k, v in meta.items()},
                               "rows": all_rows})
    else:
        _write_rows(args.out, SSB_FIELDS, all_rows, meta)
    return 0


DA_FIELDS = ["dataset", "source", "target", "model", "lambda", "source_risk",
             "tcp_risk", "oracle_risk", "auc", "mmd", "objective",
             "iterations", "converged", "reverted"]


def cmd_experiment_da(args):
    src = _load(args.source_data, args, need_labels=True)
    tgt = _load(args.target_data, args, need_labels=True)
    config = _config(args)
    row = run_da_experiment(config, src, tgt)
    q_star = row.pop("q_star")
    meta = {"seed": config.rng_seed, "model": config.model,
            "folds": config.cv_folds,
            "lambda": "cv" if config.fixed_lambda is None else config.fixed_lambda,
            "solver": _solver_meta(config, tgt.n)}
    if args.format == "json":
        _write_json(args.out, {"meta": {k: str(v) for k, v in meta.items()},
                               "rows": [row]})
    else:
        _write_rows(args.out, DA_FIELDS, [row], meta)
    if args.dump_q is not None:
        _dump_q_csv(args.dump_q, tgt.features, q_star)
    return 0


def cmd_mmd(args):
    a = _load(args.data_a, args, need_labels=False)
    b = _load(args.data_b, args, need_labels=False)
    value = mmd_rbf(a.features, b.features, args.bandwidth)
    if args.out is None:
        sys.stdout.write(f"{value!r}\n")
    else:
        _write_rows(args.out, ["a", "b", "bandwidth", "mmd"],
                    [{"a": a.name, "b": b.name, "bandwidth": args.bandwidth,
                      "mmd": value}],
                    {"bandwidth": args.bandwidth})
    return 0


def build_parser() -> _Parser:
    parser = _Parser(prog="tcp-adapt",
                     description="Robust domain adaptation with a never-worse "
                                 "guarantee over all target labelings.")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("sample-bias", help="draw a biased source subset")
    p.add_argument("data")
    _add_data_flags(p, label_required=True)
    p.add_argument("--n-source", type=int, default=50)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", default=None)
    p.set_defaults(func=cmd_sample_bias)

    p = sub.add_parser("fit-source", help="fit the source model (with CV)")
    p.add_argument("data")
    _add_data_flags(p, label_required=True)
    p.add_argument("--model", choices=["ls", "lda", "qda"], required=True)
    _add_lambda_flags(p)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", default=None)
    p.set_defaults(func=cmd_fit_source)

    p = sub.add_parser("fit-tcp", help="adapt a source model to unlabeled data")
    p.add_argument("data")
    _add_data_flags(p)
    p.add_argument("--source-params", required=True)
    p.add_argument("--ridge", type=float, default=0.0,
                   help="ridge of the least-squares source fit")
    _add_solver_flags(p)
    p.add_argument("--trace-out", default=None)
    p.add_argument("--dump-q", default=None,
                   help="write the worst-case labeling with 2-d PCA coordinates")
    p.add_argument("--out", default=None)
    p.set_defaults(func=cmd_fit_tcp)

    p = sub.add_parser("evaluate", help="risk/AUC of saved parameters")
    p.add_argument("data")
    _add_data_flags(p, label_required=True)
    p.add_argument("--params", nargs="+", required=True)
    p.add_argument("--format", choices=["csv", "json"], default="csv")
    p.add_argument("--out", default=None)
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("experiment-ssb",
                       help="biased-subsampling experiment with repeats")
    p.add_argument("data")
    _add_data_flags(p, label_required=True)
    p.add_argument("--model", choices=["ls", "lda", "qda"], required=True)
    p.add_argument("--n-source", type=int, default=50)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--repeats", type=int, default=1)
    _add_lambda_flags(p)
    _add_solver_flags(p)
    p.add_argument("--format", choices=["csv", "json"], default="csv")
    p.add_argument("--out", default=None)
    p.set_defaults(func=cmd_experiment_ssb)

    p = sub.add_parser("experiment-da", help="pairwise domain transfer")
    p.add_argument("source_data")
    p.add_argument("target_data")
    _add_data_flags(p, label_required=True)
    p.add_argument("--model", choices=["ls", "lda", "qda"], required=True)
    p.add_argument("--seed", type=int, default=0)
    _add_lambda_flags(p)
    _add_solver_flags(p)
    p.add_argument("--dump-q", default=None)
    p.add_argument("--format", choices=["csv", "json"], default="csv")
    p.add_argument("--out", default=None)
    p.set_defaults(func=cmd_experiment_da)

    p = sub.add_parser("mmd", help="maximum mean discrepancy of two sample sets")
    p.add_argument("data_a")
    p.add_argument("data_b")
    _add_data_flags(p)
    p.add_argument("--bandwidth", type=float, default=1.0)
    p.add_argument("--out", default=None)
    p.set_defaults(func=cmd_mmd)

    return parser


def cli_main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        return args.func(args)
    except (ValueError, OSError, KeyError, json.JSONDecodeError,
            np.linalg.LinAlgError, NumericalBlowupError) as exc:
        sys.stderr.write(f"tcp-adapt: error: {exc}\n")
        return 2


def main():
    sys.exit(cli_main(sys.argv[1:]))


if __name__ == "__main__":
    main()
