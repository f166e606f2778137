"""Benchmark suites and synthetic models used by the command line and the tests."""

from __future__ import annotations

import time

import numpy as np

from . import data as data_mod
from . import features, hilr, ilr, metrics
from .data import Dataset
from .distributions import MatrixNormalWishartParams, NormalWishartParams, stick_prior, stick_update

# name, generator, model kind, prediction mode, training size, how it is fitted
SYNTHETIC_SUITE = (
    ("gap_sine", "gap-sine", "ilr", "mean", 1000, "batch"),
    ("sinc_hetero", "sinc-hetero", "ilr", "mean", 2000, "batch"),
    ("steps", "steps", "ilr", "mean", 1000, "batch"),
    ("cubics", "cubics", "ilr", "mean", 1000, "batch"),
    ("triangle", "triangle", "hilr", "mean", 1000, "batch"),
    ("inverse_mapping", "inverse-mapping", "ilr", "mode", 2000, "batch"),
    ("chirp", "chirp", "ilr", "mean", 3000, "sequential"),
)


def _row(name, kind, mode, model, test, iterations, elapsed):
    out = metrics.evaluate(model, test, mode)
    return {"name": name, "model": kind, "mode": mode, **out,
            "iterations": iterations, "elapsed_ms": elapsed}


def run_synthetic(seed=0, suite=SYNTHETIC_SUITE):
    """Fit every suite entry from ``seed`` and score it on a held-out sample of the same generator."""
    rows = []
    for i, (name, gen, kind, mode, n, how) in enumerate(suite):
        rng = np.random.default_rng([seed, i])
        train = data_mod.generate(gen, n, rng)
        test = data_mod.generate(gen, max(n // 4, 50), rng)
        t0 = time.perf_counter()
        if how == "sequential":
            cfg = ilr.ILRConfig(truncation=50)
            batches = data_mod.split(train, batch_count=3)
            model, trace = ilr.fit(batches[0], cfg, rng)
            iterations = trace.iterations
            for b in batches[1:]:
                model, trace = ilr.sequential_update(model, b, cfg, rng)
                iterations += trace.iterations
        elif kind == "hilr":
            model, trace = hilr.h_fit(train, hilr.HILRConfig(), rng)
            iterations = trace.iterations
        else:
            model, trace = ilr.fit(train, ilr.ILRConfig(), rng)
            iterations = trace.iterations
        elapsed = 1e3 * (time.perf_counter() - t0)
        rows.append(_row(name, kind, mode, model, test, iterations, elapsed))
    return rows


def run_invdyn(train_path, test_path, run):
    """Fit on a user-supplied inverse-dynamics CSV and report both prediction modes."""
    train = data_mod.load_csv(train_path)
    test = data_mod.load_csv(test_path, d_x=train.d_x, d_y=train.d_y)
    rng = np.random.default_rng(run.seed)
    t0 = time.perf_counter()
    if run.model == "hilr":
        model, trace = hilr.h_fit(train, run.model_config, rng)
    elif run.fit_mode == "stochastic":
        model, trace = ilr.fit_stochastic(train, run.model_config, rng)
    else:
        model, trace = ilr.fit(train, run.model_config, rng)
    elapsed = 1e3 * (time.perf_counter() - t0)
    return [_row("invdyn", run.model, mode, model, test, trace.iterations, elapsed) for mode in ("mode", "mean")]


def subsample(dataset: Dataset, n, rng) -> Dataset:
    """Random subset of ``min(n, len(dataset))`` rows, kept in file order."""
    n = min(int(n), len(dataset))
    return dataset.subset(np.sort(rng.choice(len(dataset), n, replace=False)))


def synthetic_latency_model(components=1700, d_x=21, d_y=7, rng=None) -> ilr.ILRModel:
    """A random ILR model with inverse-dynamics shapes and moderately overlapping receptive fields.

    Centers are standard normal in a standardized input space, gate precisions
    are isotropic with a radius of about half a unit, and the stick weights
    correspond to roughly 40000 training points spread over all components.
    """
    rng = np.random.default_rng(rng)
    C, du = int(components), d_x + 1
    spec = features.identity_spec(d_x, d_y)
    nu = np.full(C, d_x + 60.0)
    act = NormalWishartParams(
        rng.standard_normal((C, d_x)), np.full(C, 50.0),
        np.broadcast_to(np.eye(d_x) * 4.0 / (d_x + 60.0), (C, d_x, d_x)), nu,
    )
    reg = MatrixNormalWishartParams(
        rng.standard_normal((C, d_y, du)), np.broadcast_to(np.eye(du) * 100.0, (C, du, du)),
        np.broadcast_to(np.eye(d_y) / (d_y + 100.0), (C, d_y, d_y)), np.full(C, d_y + 100.0),
    )
    sticks = stick_update(1.0, rng.dirichlet(np.ones(C)) * 40000.0)
    return ilr.ILRModel(spec, 1.0, stick_prior(1.0, C), sticks, act, act, reg, reg)


def median_latency_ms(fn, queries) -> float:
    times = []
    for q in queries:
        t0 = time.perf_counter()
        fn(q)
        times.append(time.perf_counter() - t0)
    return 1e3 * float(np.median(times))
