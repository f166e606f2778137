"""Command-line interface: ``dplr <command> [flags]``.

Exit codes: 0 success, 2 argument or configuration error, 3 I/O or parse
error, 4 numerical failure. Failures print one line to stderr of the form
``error: <io|parse|config|numeric>: <message>``.
"""

from __future__ import annotations

import argparse
import csv
import dataclasses
import json
import sys
import time

import numpy as np

from . import data as data_mod
from . import hilr, ilr, metrics
from .errors import ConfigError, DimensionError, NumericalError, ParseError
from .serialization import load_model, save_model

EXIT_OK, EXIT_CONFIG, EXIT_IO, EXIT_NUMERIC = 0, 2, 3, 4

RUN_KEYS = {"model", "fit_mode", "seed", "prediction_mode"}


class CLIError(Exception):
    def __init__(self, category, message, code):
        super().__init__(message)
        self.category, self.code = category, code


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise CLIError("config", message, EXIT_CONFIG)


# ---------------------------------------------------------------------------
# Run configuration
# ---------------------------------------------------------------------------


@dataclasses.dataclass
class RunConfig:
    model: str = "ilr"
    fit_mode: str = "batch"
    seed: int = 0
    prediction_mode: str = "mean"
    model_config: object = None

    @classmethod
    def default(cls, kind="ilr"):
        return cls(model=kind, model_config=ilr.ILRConfig() if kind == "ilr" else hilr.HILRConfig())

    def to_dict(self):
        d = {"model": self.model, "fit_mode": self.fit_mode, "seed": self.seed,
             "prediction_mode": self.prediction_mode}
        d.update(self.model_config.to_dict())
        return d

    @classmethod
    def from_dict(cls, d):
        if not isinstance(d, dict):
            raise ConfigError("configuration must be a JSON object")
        kind = d.get("model", "ilr")
        if kind not in ("ilr", "hilr"):
            raise ConfigError(f"model must be 'ilr' or 'hilr', got {kind!r}")
        rest = {k: v for k, v in d.items() if k not in RUN_KEYS}
        cfg_cls = ilr.ILRConfig if kind == "ilr" else hilr.HILRConfig
        try:
            model_config = cfg_cls.from_dict(rest)
        except (TypeError, ValueError) as exc:
            raise ConfigError(str(exc)) from exc
        try:
            seed = int(d.get("seed", 0))
        except (TypeError, ValueError):
            raise ConfigError("seed must be an integer") from None
        run = cls(kind, d.get("fit_mode", "batch"), seed, d.get("prediction_mode", "mean"), model_config)
        return run.validate()

    def validate(self):
        if self.fit_mode not in ("batch", "stochastic"):
            raise ConfigError("fit_mode must be 'batch' or 'stochastic'")
        if self.fit_mode == "stochastic" and self.model != "ilr":
            raise ConfigError("stochastic fitting is available for the ilr model only")
        if self.prediction_mode not in ("mode", "mean"):
            raise ConfigError("prediction_mode must be 'mode' or 'mean'")
        self.model_config.validate()
        return self


def _read_json(path):
    try:
        with open(path) as fh:
            return json.load(fh)
    except json.JSONDecodeError as exc:
        raise ParseError(f"{path}:{exc.lineno}: {exc.msg}") from exc


def _load_run_config(args):
    run = RunConfig.from_dict(_read_json(args.config)) if args.config else RunConfig.default(
        getattr(args, "kind", None) or "ilr"
    )
    cfg = run.model_config
    overrides = {
        "degree": args.degree, "tol": args.tol, "max_iters": args.max_iters,
        "alpha0": args.alpha0,
    }
    if run.model == "ilr":
        overrides.update(truncation=args.trunc_k, batch_size=args.batch_size)
        if args.batch_size is not None:
            run.fit_mode = "stochastic"
    else:
        overrides.update(lower_truncation=args.trunc_k, upper_truncation=args.trunc_m, beta0=args.beta0)
        if args.batch_size is not None:
            raise ConfigError("--batch-size applies to the ilr model only")
    for key, value in overrides.items():
        if value is not None:
            setattr(cfg, key, value)
    if run.model == "ilr" and args.beta0 is not None:
        raise ConfigError("--beta0 applies to the hilr model only")
    if run.model == "ilr" and args.trunc_m is not None:
        raise ConfigError("--trunc-m applies to the hilr model only")
    if args.seed is not None:
        run.seed = args.seed
    if getattr(args, "mode", None) is not None:
        run.prediction_mode = args.mode
    return run.validate()


# ---------------------------------------------------------------------------
# Commands
# ---------------------------------------------------------------------------


def _fit(run: RunConfig, dataset):
    rng = np.random.default_rng(run.seed)
    if run.model == "hilr":
        return hilr.h_fit(dataset, run.model_config, rng)
    if run.fit_mode == "stochastic":
        return ilr.fit_stochastic(dataset, run.model_config, rng)
    return ilr.fit(dataset, run.model_config, rng)


def _write_trace(trace, path):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["iteration", "elbo", "active_components"])
        for it, e, a in trace.to_rows():
            w.writerow([it, repr(e), a])


def _metrics(model, dataset, mode, iterations, elapsed_ms):
    out = metrics.evaluate(model, dataset, mode)
    out.update(iterations=iterations, elapsed_ms=elapsed_ms)
    return out


def _print_json(obj):
    print(json.dumps(obj, sort_keys=True))


def cmd_generate(args):
    if args.n is None or args.n < 1:
        raise ConfigError("--n must be a positive integer")
    ds = data_mod.generate(args.name, args.n, np.random.default_rng(args.seed or 0))
    data_mod.save_csv(ds, args.out)


def cmd_fit(args):
    run = _load_run_config(args)
    dataset = data_mod.load_csv(args.data)
    t0 = time.perf_counter()
    model, trace = _fit(run, dataset)
    elapsed = 1e3 * (time.perf_counter() - t0)
    save_model(model, args.out)
    _write_trace(trace, args.trace or f"{args.out}.trace.csv")
    _print_json(_metrics(model, dataset, run.prediction_mode, trace.iterations, elapsed))


def _load_inputs(path, d_x):
    with open(path, newline="") as fh:
        header = next(csv.reader(fh), None)
    if header is None:
        raise ParseError(f"{path}: empty file")
    n_y = len(header) - d_x
    if n_y < 0:
        raise DimensionError(f"{path}: expected at least {d_x} input columns, found {len(header)}")
    if n_y == 0:
        rows = []
        with open(path, newline="") as fh:
            reader = csv.reader(fh)
            next(reader)
            for lineno, row in enumerate(reader, start=2):
                if not row:
                    continue
                if len(row) != d_x:
                    raise ParseError(f"{path}:{lineno}: expected {d_x} fields, found {len(row)}")
                try:
                    rows.append([float(c) for c in row])
                except ValueError:
                    raise ParseError(f"{path}:{lineno}: non-numeric field") from None
        X = np.asarray(rows, dtype=float).reshape(-1, d_x)
        if not np.all(np.isfinite(X)):
            raise ParseError(f"{path}: non-finite input value")
        return X
    return data_mod.load_csv(path, d_x=d_x, d_y=n_y).X


def cmd_predict(args):
    model = load_model(args.model)
    X = _load_inputs(args.data, model.feature_spec.d_x)
    p = metrics.predict(model, X, args.mode or "mean")
    d_y = model.feature_spec.d_y
    with open(args.out, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow([f"mean{i + 1}" for i in range(d_y)] + [f"std{i + 1}" for i in range(d_y)]
                   + ["top_component", "top_weight"])
        for mu, sd, tc, tw in zip(p.mean, p.std, p.top_component, p.top_weight):
            w.writerow([f"{v:.17g}" for v in mu] + [f"{v:.17g}" for v in sd] + [int(tc), f"{tw:.17g}"])


def cmd_evaluate(args):
    model = load_model(args.model)
    dataset = data_mod.load_csv(args.data, d_x=model.feature_spec.d_x, d_y=model.feature_spec.d_y)
    t0 = time.perf_counter()
    out = metrics.evaluate(model, dataset, args.mode or "mean")
    out.update(iterations=None, elapsed_ms=1e3 * (time.perf_counter() - t0))
    _print_json(out)


def cmd_sequential(args):
    run = _load_run_config(args)
    batches = [data_mod.load_csv(p) for p in args.data]
    if not batches:
        raise ConfigError("sequential needs at least one --data batch")
    rng = np.random.default_rng(run.seed)
    t0 = time.perf_counter()
    rows = []
    if args.model:
        model = load_model(args.model)
        if (run.model == "hilr") != isinstance(model, hilr.HILRModel):
            raise ConfigError("the configured model kind differs from the loaded model")
        todo = batches
    else:
        model, trace = _fit(run, batches[0])
        rows.append(trace)
        todo = batches[1:]
    update = hilr.h_sequential_update if run.model == "hilr" else ilr.sequential_update
    for b in todo:
        model, trace = update(model, b, run.model_config, rng)
        rows.append(trace)
    elapsed = 1e3 * (time.perf_counter() - t0)
    save_model(model, args.out)
    merged = rows[0]
    for t in rows[1:]:
        for e, a in zip(t.elbo_per_iteration, t.active_components_per_iteration):
            merged.elbo_per_iteration.append(e)
            merged.active_components_per_iteration.append(a)
    merged.iterations = len(merged.elbo_per_iteration)
    _write_trace(merged, args.trace or f"{args.out}.trace.csv")
    union = data_mod.Dataset.concat(batches)
    _print_json(_metrics(model, union, run.prediction_mode, merged.iterations, elapsed))


def cmd_benchmark(args):
    from .benchmarks import run_invdyn, run_synthetic

    if args.suite == "synthetic":
        rows = run_synthetic(args.seed or 0)
    elif args.suite == "invdyn":
        if not args.data or not args.test:
            raise ConfigError("invdyn needs --data TRAIN.csv and --test TEST.csv")
        run = _load_run_config(args)
        rows = run_invdyn(args.data, args.test, run)
    else:
        raise ConfigError(f"unknown benchmark suite {args.suite!r}")
    keys = ["name", "model", "mode", "mse", "nmse", "experts", "iterations", "elapsed_ms"]
    out = open(args.out, "w", newline="") if args.out else sys.stdout
    try:
        w = csv.writer(out)
        w.writerow(keys)
        for r in rows:
            w.writerow([r[k] for k in keys])
    finally:
        if args.out:
            out.close()


def cmd_config_init(args):
    run = RunConfig.default(args.kind or "ilr")
    text = json.dumps(run.to_dict(), indent=2, sort_keys=True)
    if args.out:
        with open(args.out, "w") as fh:
            fh.write(text + "\n")
    else:
        print(text)


# ---------------------------------------------------------------------------
# Parser
# ---------------------------------------------------------------------------


def _common(p):
    p.add_argument("--config")
    p.add_argument("--seed", type=int)
    p.add_argument("--degree", type=int)
    p.add_argument("--trunc-k", type=int)
    p.add_argument("--trunc-m", type=int)
    p.add_argument("--alpha0", type=float)
    p.add_argument("--beta0", type=float)
    p.add_argument("--batch-size", type=int)
    p.add_argument("--tol", type=float)
    p.add_argument("--max-iters", type=int)
    p.add_argument("--mode", choices=["mode", "mean"])
    p.add_argument("--kind", choices=["ilr", "hilr"], help="model kind when no --config is given")


def build_parser():
    parser = _Parser(prog="dplr", description="Dirichlet-process mixtures of local linear regressors")
    sub = parser.add_subparsers(dest="command", parser_class=_Parser)
    sub.required = True

    p = sub.add_parser("generate", help="write a synthetic dataset")
    p.add_argument("name", choices=sorted(data_mod.GENERATORS))
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_generate)

    p = sub.add_parser("fit", help="fit a model to a CSV dataset")
    p.add_argument("--data", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--trace")
    _common(p)
    p.set_defaults(func=cmd_fit)

    p = sub.add_parser("predict", help="predict for the inputs of a CSV file")
    p.add_argument("--model", required=True)
    p.add_argument("--data", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--mode", choices=["mode", "mean"], default="mean")
    p.set_defaults(func=cmd_predict)

    p = sub.add_parser("evaluate", help="report MSE, NMSE and active experts on a test CSV")
    p.add_argument("--model", required=True)
    p.add_argument("--data", required=True)
    p.add_argument("--mode", choices=["mode", "mean"], default="mean")
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("sequential", help="learn over a sequence of batches")
    p.add_argument("--model")
    p.add_argument("--data", nargs="+", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--trace")
    _common(p)
    p.set_defaults(func=cmd_sequential)

    p = sub.add_parser("benchmark", help="run a benchmark suite")
    p.add_argument("suite", choices=["synthetic", "invdyn"])
    p.add_argument("--data")
    p.add_argument("--test")
    p.add_argument("--out")
    _common(p)
    p.set_defaults(func=cmd_benchmark)

    p = sub.add_parser("config", help="configuration helpers")
    csub = p.add_subparsers(dest="action", parser_class=_Parser)
    csub.required = True
    q = csub.add_parser("init", help="write a configuration with all defaults")
    q.add_argument("--kind", choices=["ilr", "hilr"], default="ilr")
    q.add_argument("--out")
    q.set_defaults(func=cmd_config_init)
    return parser


def main(argv=None) -> int:
    try:
        args = build_parser().parse_args(argv)
        args.func(args)
    except CLIError as exc:
        print(f"error: {exc.category}: {exc}", file=sys.stderr)
        return exc.code
    except ParseError as exc:
        print(f"error: parse: {exc}", file=sys.stderr)
        return EXIT_IO
    except (ConfigError, ValueError) as exc:
        print(f"error: config: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except OSError as exc:
        print(f"error: io: {exc}", file=sys.stderr)
        return EXIT_IO
    except NumericalError as exc:
        print(f"error: numeric: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
