"""Regression accuracy metrics and model-agnostic evaluation."""

from __future__ import annotations

import numpy as np

from .errors import DimensionError


def mse(pred, target) -> float:
    pred, target = np.atleast_2d(pred), np.atleast_2d(target)
    if pred.shape != target.shape:
        raise DimensionError(f"prediction shape {pred.shape} differs from target shape {target.shape}")
    return float(np.mean((pred - target) ** 2))


def nmse(pred, target) -> float:
    """Per-dimension MSE over the target variance, averaged over output dimensions."""
    pred = np.asarray(pred, dtype=float).reshape(len(pred), -1)
    target = np.asarray(target, dtype=float).reshape(len(target), -1)
    if pred.shape != target.shape:
        raise DimensionError(f"prediction shape {pred.shape} differs from target shape {target.shape}")
    var = target.var(axis=0)
    if np.any(var <= 0):
        raise DimensionError("target variance is zero in some dimension; NMSE is undefined")
    return float(np.mean(np.mean((pred - target) ** 2, axis=0) / var))


def predict(model, X, mode="mean"):
    from .hilr import HILRModel, h_predict
    from .ilr import predict as ilr_predict

    return h_predict(model, X, mode) if isinstance(model, HILRModel) else ilr_predict(model, X, mode)


def experts(model, data, threshold=0.01) -> int:
    from .hilr import HILRModel
    from .hilr import active_components as h_active
    from .ilr import active_components

    return h_active(model, data, threshold) if isinstance(model, HILRModel) else active_components(model, data, threshold)


def evaluate(model, data, mode="mean", threshold=0.01) -> dict:
    """MSE and NMSE of the point prediction plus the number of active experts on ``data``."""
    p = predict(model, data.X, mode)
    return {
        "mse": mse(p.mean, data.Y),
        "nmse": nmse(p.mean, data.Y),
        "experts": experts(model, data, threshold),
    }
