"""Datasets: synthetic generators, CSV ingestion and batch splitting."""

from __future__ import annotations

import csv
import re
from dataclasses import dataclass

import numpy as np
from scipy.optimize import brentq

from .errors import DimensionError, ParseError


@dataclass(frozen=True, eq=False)
class Dataset:
    X: np.ndarray
    Y: np.ndarray
    name: str = ""

    def __post_init__(self):
        X = np.asarray(self.X, dtype=float)
        Y = np.asarray(self.Y, dtype=float)
        if X.ndim == 1:
            X = X[:, None]
        if Y.ndim == 1:
            Y = Y[:, None]
        if X.ndim != 2 or Y.ndim != 2 or X.shape[0] != Y.shape[0]:
            raise DimensionError(f"X {X.shape} and Y {Y.shape} must be matrices with equal row counts")
        if not (np.all(np.isfinite(X)) and np.all(np.isfinite(Y))):
            raise DimensionError("dataset contains non-finite entries")
        object.__setattr__(self, "X", X)
        object.__setattr__(self, "Y", Y)

    def __len__(self):
        return self.X.shape[0]

    @property
    def d_x(self) -> int:
        return self.X.shape[1]

    @property
    def d_y(self) -> int:
        return self.Y.shape[1]

    def subset(self, idx, name=None):
        return Dataset(self.X[idx], self.Y[idx], self.name if name is None else name)

    @staticmethod
    def concat(parts, name=None):
        parts = list(parts)
        return Dataset(
            np.concatenate([p.X for p in parts]),
            np.concatenate([p.Y for p in parts]),
            parts[0].name if name is None else name,
        )


# ---------------------------------------------------------------------------
# Synthetic generators
# ---------------------------------------------------------------------------


def sinc_noise_std(x):
    x = np.asarray(x, dtype=float)
    return 0.05 + 0.2 * (1.0 + np.sin(2.0 * x)) / (1.0 + np.exp(-0.2 * x))


def sinc(x):
    """sin(x) / x with sinc(0) = 1."""
    return np.sinc(np.asarray(x, dtype=float) / np.pi)


def triangle_wave(x):
    """Unit triangle wave with period 2, zero at even integers and one at odd ones."""
    return 1.0 - np.abs(np.mod(x, 2.0) - 1.0)


def steps_function(x):
    return np.select([x < -1.0, x < 1.0], [-1.0, 1.0], 0.0)


def cubics_function(x):
    return np.where(x < 0.0, 0.1 * (x + 1.5) ** 3 - 0.5, -0.1 * (x - 1.5) ** 3 + 0.5)


def chirp_function(t):
    return np.sin(2.0 * np.pi * (0.25 + 0.75 * t) * t)


def piecewise_linear_function(x):
    """Three linear pieces on [-3, 3] with alternating slopes and jumps at -1 and 1."""
    return np.select([x < -1.0, x < 1.0], [1.5 * (x + 2.0), -1.5 * x - 1.0], 1.5 * (x - 2.0) + 1.0)


def inverse_mapping_forward(y):
    return y + 0.3 * np.sin(2.0 * np.pi * y)


def inverse_mapping_branches(x, grid=2001):
    """All y in [0, 1] with y + 0.3 sin(2 pi y) = x."""
    ys = np.linspace(0.0, 1.0, grid)
    g = inverse_mapping_forward(ys) - x
    roots = [ys[i] for i in np.flatnonzero(np.abs(g) <= 1e-12)]
    for i in np.flatnonzero(g[:-1] * g[1:] < 0):
        roots.append(brentq(lambda y: inverse_mapping_forward(y) - x, ys[i], ys[i + 1], xtol=1e-14))
    return np.unique(np.round(np.asarray(roots), 12))


def _check_n(n):
    if int(n) < 1:
        raise DimensionError("n must be at least 1")
    return int(n)


def gen_sinc_hetero(n, rng):
    n = _check_n(n)
    x = rng.uniform(-10.0, 10.0, n)
    y = sinc(x) + sinc_noise_std(x) * rng.standard_normal(n)
    return Dataset(x, y, "sinc-hetero")


GAP_SUPPORT = ((0.0, 2.0), (4.0, 6.0), (8.0, 10.0))


def gen_gap_sine(n, rng):
    n = _check_n(n)
    seg = rng.integers(0, len(GAP_SUPPORT), n)
    lo = np.array([s[0] for s in GAP_SUPPORT])[seg]
    x = lo + 2.0 * rng.uniform(0.0, 1.0, n)
    y = np.sin(x) + 0.1 * rng.standard_normal(n)
    return Dataset(x, y, "gap-sine")


def gen_steps(n, rng):
    n = _check_n(n)
    x = rng.uniform(-3.0, 3.0, n)
    return Dataset(x, steps_function(x) + 0.05 * rng.standard_normal(n), "steps")


def gen_cubics(n, rng):
    n = _check_n(n)
    x = rng.uniform(-3.0, 3.0, n)
    return Dataset(x, cubics_function(x) + 0.1 * rng.standard_normal(n), "cubics")


def gen_chirp(n, rng):
    """Chirp samples sorted by time so contiguous splits give successive batches."""
    n = _check_n(n)
    t = np.sort(rng.uniform(0.0, 3.0, n))
    return Dataset(t, chirp_function(t) + 0.1 * rng.standard_normal(n), "chirp")


def gen_triangle(n, rng):
    n = _check_n(n)
    x = rng.uniform(0.0, 6.0, n)
    return Dataset(x, triangle_wave(x) + 0.05 * rng.standard_normal(n), "triangle")


def gen_inverse_mapping(n, rng):
    n = _check_n(n)
    y = rng.uniform(0.0, 1.0, n)
    x = inverse_mapping_forward(y) + 0.05 * rng.standard_normal(n)
    return Dataset(x, y, "inverse-mapping")


def gen_piecewise_linear(n, rng):
    n = _check_n(n)
    x = rng.uniform(-3.0, 3.0, n)
    return Dataset(x, piecewise_linear_function(x) + 0.05 * rng.standard_normal(n), "piecewise-linear")


def gen_linear(n, rng):
    n = _check_n(n)
    x = rng.uniform(-3.0, 3.0, n)
    return Dataset(x, 0.8 * x - 0.3 + 0.05 * rng.standard_normal(n), "linear")


GENERATORS = {
    "sinc-hetero": gen_sinc_hetero,
    "gap-sine": gen_gap_sine,
    "steps": gen_steps,
    "cubics": gen_cubics,
    "chirp": gen_chirp,
    "triangle": gen_triangle,
    "inverse-mapping": gen_inverse_mapping,
    "piecewise-linear": gen_piecewise_linear,
    "linear": gen_linear,
}

NOISELESS = {
    "sinc-hetero": sinc,
    "gap-sine": np.sin,
    "steps": steps_function,
    "cubics": cubics_function,
    "chirp": chirp_function,
    "triangle": triangle_wave,
    "piecewise-linear": piecewise_linear_function,
    "linear": lambda x: 0.8 * np.asarray(x) - 0.3,
}


def generate(name, n, rng):
    key = name.replace("_", "-")
    if key not in GENERATORS:
        raise DimensionError(f"unknown generator {name!r}; choose from {sorted(GENERATORS)}")
    return GENERATORS[key](n, rng)


# ---------------------------------------------------------------------------
# CSV
# ---------------------------------------------------------------------------

_HEADER = re.compile(r"^([xy])(\d+)$")


def save_csv(dataset: Dataset, path):
    header = [f"x{i + 1}" for i in range(dataset.d_x)] + [f"y{i + 1}" for i in range(dataset.d_y)]
    rows = np.hstack([dataset.X, dataset.Y])
    with open(path, "w", newline="") as fh:
        fh.write(",".join(header) + "\n")
        for row in rows:
            fh.write(",".join(f"{v:.17g}" for v in row) + "\n")


def _parse_header(fields):
    kinds = []
    for f in fields:
        m = _HEADER.match(f.strip().lower())
        kinds.append(m.group(1) if m else None)
    if None in kinds:
        return None
    d_x = kinds.count("x")
    if kinds != ["x"] * d_x + ["y"] * (len(kinds) - d_x):
        return None
    return d_x, len(kinds) - d_x


def load_csv(path, d_x=None, d_y=None, name=None) -> Dataset:
    """Read a comma-separated file with one header line.

    Column roles come from ``d_x``/``d_y`` when given, otherwise from an
    ``x1,...,y1,...`` header.
    """
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise ParseError(f"{path}: empty file") from None
        inferred = _parse_header(header)
        if d_x is None or d_y is None:
            if inferred is None:
                raise ParseError(f"{path}:1: header must be x1,...,y1,... when d_x/d_y are not given")
            d_x = inferred[0] if d_x is None else d_x
            d_y = len(header) - d_x if d_y is None else d_y
        if d_x < 1 or d_y < 1 or d_x + d_y != len(header):
            raise DimensionError(f"{path}: d_x + d_y = {d_x + d_y} but the file has {len(header)} columns")
        rows = []
        for lineno, row in enumerate(reader, start=2):
            if not row or all(not c.strip() for c in row):
                continue
            if len(row) != d_x + d_y:
                raise ParseError(f"{path}:{lineno}: expected {d_x + d_y} fields, found {len(row)}")
            try:
                vals = [float(c) for c in row]
            except ValueError:
                raise ParseError(f"{path}:{lineno}: non-numeric field") from None
            if not np.all(np.isfinite(vals)):
                raise ParseError(f"{path}:{lineno}: non-finite value")
            rows.append(vals)
    A = np.asarray(rows, dtype=float).reshape(-1, d_x + d_y)
    return Dataset(A[:, :d_x], A[:, d_x:], name if name is not None else str(path))


# ---------------------------------------------------------------------------
# Splitting
# ---------------------------------------------------------------------------


def split(dataset: Dataset, fractions=None, batch_count=None, rng=None):
    """Partition rows into consecutive parts (shuffled first when ``rng`` is given)."""
    n = len(dataset)
    if (fractions is None) == (batch_count is None):
        raise DimensionError("give exactly one of fractions or batch_count")
    if batch_count is not None:
        if int(batch_count) < 1:
            raise DimensionError("batch_count must be positive")
        fractions = np.full(int(batch_count), 1.0 / int(batch_count))
    fr = np.asarray(fractions, dtype=float)
    if fr.ndim != 1 or np.any(fr < 0) or abs(fr.sum() - 1.0) > 1e-9:
        raise DimensionError("fractions must be non-negative and sum to one")
    bounds = np.rint(np.cumsum(fr) * n).astype(int)
    bounds[-1] = n
    order = rng.permutation(n) if rng is not None else np.arange(n)
    starts = np.concatenate([[0], bounds[:-1]])
    return [dataset.subset(np.sort(order[a:b]) if rng is not None else order[a:b])
            for a, b in zip(starts, bounds)]
