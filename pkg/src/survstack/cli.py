"""``survstack`` command line.

Exit codes: 0 success, 1 internal error, 2 input/validation error,
3 non-convergence, 4 undefined metric.
"""
from __future__ import annotations

import argparse
import dataclasses
import json
import logging
import os
import sys
import warnings
from pathlib import Path

import numpy as np

from . import __version__
from .compare import compare_models
from .cox import fit_cox
from .data import COUNTING, SINGLE, SchemaError, ValidationError, read_csv, write_csv
from .glm import LOGISTIC, POISSON, SeparationWarning, SingularHessianError, fit_glm, wald_pvalues
from .metrics import METRICS, UndefinedMetricError, evaluate, resolve_horizon, write_report
from .persist import load_model, save_model
from .predict import read_curves, survival_curves, write_curves
from .sim import TvHazardConfig, simulate_tv
from .stacking import NoEventsError, TimeEncoding, export_stacked, read_stacked, stack

log = logging.getLogger("survstack")

EXIT_OK, EXIT_INTERNAL, EXIT_INPUT, EXIT_CONVERGENCE, EXIT_METRIC = 0, 1, 2, 3, 4


class UsageError(ValueError):
    pass


class ConvergenceError(RuntimeError):
    pass


def _threads(args) -> int:
    if args.threads is not None:
        return args.threads
    env = os.environ.get("SURVSTACK_THREADS")
    return int(env) if env else 1


def _echo_config(args, output) -> None:
    """Write the run configuration next to ``output``."""
    cfg = {k: (str(v) if isinstance(v, Path) else v) for k, v in vars(args).items() if k != "func"}
    cfg["threads"] = _threads(args)
    cfg["version"] = __version__
    Path(f"{output}.config.json").write_text(json.dumps(cfg, indent=2, sort_keys=True) + "\n")


def _encoding(args) -> TimeEncoding:
    try:
        return TimeEncoding.parse(args.encoding, args.interact or ())
    except ValueError as exc:
        raise UsageError(str(exc)) from None


def _read(args, path=None):
    return read_csv(path or args.input, args.format)


def cmd_stack(args) -> int:
    enc = _encoding(args)
    ds = _read(args)
    sd = stack(ds, enc)
    export_stacked(sd, args.out)
    _echo_config(args, args.out)
    print(f"stacked rows: {sd.n_rows}  event times: {len(sd.time_index)}  columns: {len(sd.columns)}")
    if sd.n_rows > args.warn_rows:
        print(f"warning: stacked data has {sd.n_rows} rows (grows as O(n^2) in the subject count)",
              file=sys.stderr)
    return EXIT_OK


def _coef_table(names, coef, se) -> str:
    p = wald_pvalues(coef, se)
    w = max([len(n) for n in names] + [4])
    lines = [f"{'term':{w}}  {'coef':>10} {'se':>10} {'z':>8} {'p':>8}"]
    for n, b, s, pv in zip(names, coef, se, p):
        lines.append(f"{n:{w}}  {b:10.4f} {s:10.4f} {b / s if s else np.nan:8.3f} {pv:8.4f}")
    return "\n".join(lines)


def cmd_fit(args) -> int:
    if args.stacked and args.model == "cox":
        raise UsageError("the cox model needs the survival CSV, not a stacked CSV")
    enc = _encoding(args) if not args.stacked else None
    if args.stacked:
        sd = read_stacked(args.input)
    elif args.model != "cox":
        sd = stack(_read(args), enc)
    # diagnostics reach stderr through model.messages below
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", SeparationWarning)
        if args.model == "cox":
            model = fit_cox(_read(args), max_iter=args.max_iter, tol=args.tol)
            table = _coef_table(model.covariate_names, model.beta, model.std_errors)
        else:
            model = fit_glm(sd, args.model, max_iter=args.max_iter, tol=args.tol, ridge=args.ridge)
            table = _coef_table(model.names, model.coefficients, model.std_errors)
    print(table)
    if not model.converged:
        for m in model.messages:
            print(m, file=sys.stderr)
        raise ConvergenceError(f"{args.model} fit did not converge after {model.iterations} iterations "
                               f"(gradient max-norm {model.final_gradient_norm:.3e})")
    save_model(model, args.out)
    _echo_config(args, args.out)
    return EXIT_OK


def cmd_predict(args) -> int:
    model = load_model(args.model)
    ds = _read(args).subjects()
    curves = survival_curves(model, ds.covariates)
    horizon = resolve_horizon(ds, args.horizon) if args.horizon is not None else None
    write_curves(args.out, ds.ids, curves, horizon)
    _echo_config(args, args.out)
    clipped = sum(c.n_clipped for c in curves)
    if clipped:
        print(f"note: {clipped} hazard value(s) clipped to 1", file=sys.stderr)
    print(f"wrote {len(curves)} curves to {args.out}")
    return EXIT_OK


def cmd_evaluate(args) -> int:
    metrics = METRICS if args.metrics == "all" else tuple(m.strip() for m in args.metrics.split(","))
    unknown = set(metrics) - set(METRICS)
    if unknown:
        raise UsageError(f"unknown metric(s): {', '.join(sorted(unknown))}")
    if (args.model is None) == (args.curves is None):
        raise UsageError("give exactly one of --model or --curves")
    ds = _read(args).subjects()
    horizon_ds = _read(args, args.horizon_data).subjects() if args.horizon_data else ds
    horizon = resolve_horizon(horizon_ds, args.horizon, distinct=args.distinct_quantile)
    if args.model is not None:
        curves = survival_curves(load_model(args.model), ds.covariates)
    else:
        ids, curves = read_curves(args.curves)
        if list(ids) != list(ds.ids):
            raise UsageError("curve subject ids do not match the evaluation data")
    reports = evaluate(curves, ds, horizon, metrics)
    for r in reports:
        print(f"{r.metric:8s} t={r.horizon:g}  {r.value:.6f}  (n={r.n_effective})")
    if args.out:
        write_report(reports, args.out)
        _echo_config(args, args.out)
    return EXIT_OK


def cmd_simulate(args) -> int:
    if not 0 < args.n_train < args.n:
        raise UsageError("--n-train must be positive and smaller than --n")
    cfg = TvHazardConfig(n=args.n, n_train=args.n_train, censor_rate=args.censor_rate,
                         truncate_fraction=args.truncate, seed=args.seed)
    train, test = simulate_tv(cfg)
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    write_csv(train, out / "train.csv")
    write_csv(test, out / "test.csv")
    (out / "simulate.config.json").write_text(
        json.dumps({**dataclasses.asdict(cfg), "threads": _threads(args), "version": __version__},
                   indent=2) + "\n")
    print(f"train: {train.n_rows} subjects, {train.n_events} events; "
          f"test: {test.n_rows} subjects, {test.n_events} events")
    return EXIT_OK


def cmd_compare(args) -> int:
    ds = _read(args)
    cmp = compare_models(ds, max_iter=args.max_iter, tol=args.tol)
    print(cmp.table())
    if args.out:
        doc = {
            "names": list(cmp.names),
            "cox": cmp.cox.beta.tolist(),
            "logistic": cmp.logistic.beta.tolist(),
            "poisson": cmp.poisson.beta.tolist(),
            "p_cox": cmp.pvalues("cox").tolist(),
            "p_logistic": cmp.pvalues("logistic").tolist(),
            "p_poisson": cmp.pvalues("poisson").tolist(),
            "delta_logistic": cmp.delta_logistic,
            "delta_poisson": cmp.delta_poisson,
        }
        Path(args.out).write_text(json.dumps(doc, indent=2) + "\n")
        _echo_config(args, args.out)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--seed", type=int, default=0, help="seed for all randomness")
    common.add_argument("--threads", type=int, default=None,
                        help="thread cap (default: $SURVSTACK_THREADS or 1)")
    common.add_argument("-v", "--verbose", action="count", default=0)

    data = argparse.ArgumentParser(add_help=False)
    data.add_argument("input", type=Path, help="survival CSV")
    data.add_argument("--format", choices=[SINGLE, COUNTING], default=SINGLE)

    enc = argparse.ArgumentParser(add_help=False)
    enc.add_argument("--encoding", default="indicators",
                     help="indicators | continuous | polynomial:DEGREE")
    enc.add_argument("--interact", action="append", metavar="COVARIATE",
                     help="add a COVARIATE x time column (continuous/polynomial only)")

    opt = argparse.ArgumentParser(add_help=False)
    opt.add_argument("--max-iter", type=int, default=100)
    opt.add_argument("--tol", type=float, default=1e-8)

    p = argparse.ArgumentParser(prog="survstack", description=__doc__.splitlines()[0])
    p.add_argument("--version", action="version", version=__version__)
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("stack", parents=[common, data, enc], help="write the stacked CSV")
    s.add_argument("--out", type=Path, required=True)
    s.add_argument("--warn-rows", type=int, default=10_000_000)
    s.set_defaults(func=cmd_stack)

    s = sub.add_parser("fit", parents=[common, data, enc, opt], help="fit and save a model")
    s.add_argument("--model", choices=[LOGISTIC, POISSON, "cox"], required=True)
    s.add_argument("--ridge", type=float, default=0.0)
    s.add_argument("--stacked", action="store_true", help="input is a stacked CSV from `stack`")
    s.add_argument("--out", type=Path, required=True)
    s.set_defaults(func=cmd_fit)

    s = sub.add_parser("predict", parents=[common, data], help="survival curves for each subject")
    s.add_argument("--model", type=Path, required=True)
    s.add_argument("--horizon", default=None, help="time or quantile (e.g. q0.75); adds a risk column")
    s.add_argument("--out", type=Path, required=True)
    s.set_defaults(func=cmd_predict)

    s = sub.add_parser("evaluate", parents=[common, data], help="AUC, Brier and c-index")
    s.add_argument("--model", type=Path)
    s.add_argument("--curves", type=Path, help="curves CSV from `predict` instead of a model")
    s.add_argument("--metrics", default="all", help=f"all or comma list of {', '.join(METRICS)}")
    s.add_argument("--horizon", default="q0.75")
    s.add_argument("--horizon-data", type=Path, default=None,
                   help="dataset whose event times define a quantile horizon (default: input)")
    s.add_argument("--distinct-quantile", action="store_true",
                   help="take the quantile over distinct event times")
    s.add_argument("--out", type=Path)
    s.set_defaults(func=cmd_evaluate)

    s = sub.add_parser("simulate", parents=[common], help="time-varying hazard train/test data")
    s.add_argument("--out-dir", type=Path, required=True)
    s.add_argument("--n", type=int, default=3000)
    s.add_argument("--n-train", type=int, default=2000)
    s.add_argument("--censor-rate", type=float, default=0.2)
    s.add_argument("--truncate", type=float, default=0.0, help="fraction of train subjects left-truncated")
    s.set_defaults(func=cmd_simulate)

    s = sub.add_parser("compare", parents=[common, data, opt], help="Cox vs stacked GLM coefficients")
    s.add_argument("--out", type=Path)
    s.set_defaults(func=cmd_compare)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    logging.basicConfig(level=logging.WARNING - 10 * min(args.verbose, 2),
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except NoEventsError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except (SchemaError, ValidationError, UsageError, FileNotFoundError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except UndefinedMetricError as exc:
        print(f"error: undefined metric: {exc}", file=sys.stderr)
        return EXIT_METRIC
    except (ConvergenceError, SingularHessianError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONVERGENCE
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except Exception as exc:  # noqa: BLE001
        log.exception("internal error")
        print(f"internal error: {exc}", file=sys.stderr)
        return EXIT_INTERNAL


if __name__ == "__main__":
    sys.exit(main())
