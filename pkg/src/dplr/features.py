"""Input and output transforms for the local models.

Raw inputs are standardized per dimension, expanded into per-dimension
monomials ``[z, z**2, ..., z**degree]`` (no cross terms), and the higher powers
are standardized again so every regression feature has unit scale. The gate
(activation) always sees only the degree-1 block, so the receptive fields live
in the standardized input space regardless of the polynomial degree.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DimensionError, ParseError


@dataclass(frozen=True, eq=False)
class FeatureSpec:
    degree: int
    x_shift: np.ndarray
    x_scale: np.ndarray
    y_shift: np.ndarray
    y_scale: np.ndarray
    poly_shift: np.ndarray  # for powers 2..degree, shape (d_x * (degree - 1),)
    poly_scale: np.ndarray
    bias_augmented: bool = True

    def __post_init__(self):
        if int(self.degree) < 1:
            raise DimensionError("degree must be at least 1")
        object.__setattr__(self, "degree", int(self.degree))
        for name in ("x_shift", "x_scale", "y_shift", "y_scale", "poly_shift", "poly_scale"):
            object.__setattr__(self, name, np.atleast_1d(np.asarray(getattr(self, name), dtype=float)))
        d = self.x_shift.shape[0]
        if self.x_scale.shape != (d,) or self.poly_shift.shape != (d * (self.degree - 1),):
            raise DimensionError("feature spec arrays have inconsistent lengths")
        if self.poly_scale.shape != self.poly_shift.shape or self.y_scale.shape != self.y_shift.shape:
            raise DimensionError("feature spec arrays have inconsistent lengths")
        if np.any(self.x_scale <= 0) or np.any(self.y_scale <= 0) or np.any(self.poly_scale <= 0):
            raise DimensionError("standardization scales must be positive")

    @property
    def d_x(self) -> int:
        return self.x_shift.shape[0]

    @property
    def d_y(self) -> int:
        return self.y_shift.shape[0]

    @property
    def n_features(self) -> int:
        """Regression input width, including the bias slot when present."""
        return self.d_x * self.degree + int(self.bias_augmented)

    def to_dict(self):
        return {
            "degree": self.degree,
            "x_shift": self.x_shift.tolist(),
            "x_scale": self.x_scale.tolist(),
            "y_shift": self.y_shift.tolist(),
            "y_scale": self.y_scale.tolist(),
            "poly_shift": self.poly_shift.tolist(),
            "poly_scale": self.poly_scale.tolist(),
            "bias_augmented": bool(self.bias_augmented),
        }

    @classmethod
    def from_dict(cls, d):
        try:
            return cls(**{k: d[k] for k in cls.__dataclass_fields__})
        except (KeyError, TypeError) as exc:
            raise ParseError(f"malformed feature_spec: {exc}") from exc

    def same_as(self, other: "FeatureSpec") -> bool:
        a, b = self.to_dict(), other.to_dict()
        return all(np.array_equal(np.asarray(a[k]), np.asarray(b[k])) for k in a)


def _monomials(Z, degree):
    return np.concatenate([Z**p for p in range(1, degree + 1)], axis=-1)


def identity_spec(d_x, d_y, degree=1, bias_augmented=True) -> FeatureSpec:
    if int(degree) < 1:
        raise DimensionError("degree must be at least 1")
    extra = d_x * (degree - 1)
    return FeatureSpec(
        degree, np.zeros(d_x), np.ones(d_x), np.zeros(d_y), np.ones(d_y),
        np.zeros(extra), np.ones(extra), bias_augmented,
    )


def _safe_std(A):
    s = A.std(axis=0)
    return np.where(s > 1e-12 * np.maximum(np.abs(A).max(axis=0), 1.0), s, 1.0)


def fit_spec(data, degree=1, bias_augmented=True, standardize=True) -> FeatureSpec:
    """Standardization constants estimated from ``data`` (a Dataset)."""
    if int(degree) < 1:
        raise DimensionError("degree must be at least 1")
    X, Y = np.asarray(data.X, float), np.asarray(data.Y, float)
    if not standardize or X.shape[0] < 2:
        spec = identity_spec(X.shape[1], Y.shape[1], degree, bias_augmented)
        if not standardize:
            return spec
        return FeatureSpec(degree, X.mean(0), spec.x_scale, Y.mean(0), spec.y_scale,
                           spec.poly_shift, spec.poly_scale, bias_augmented)
    x_shift, x_scale = X.mean(0), _safe_std(X)
    Z = (X - x_shift) / x_scale
    high = _monomials(Z, degree)[:, X.shape[1]:]
    if high.shape[1]:
        poly_shift, poly_scale = high.mean(0), _safe_std(high)
    else:
        poly_shift = poly_scale = np.zeros(0)
    return FeatureSpec(degree, x_shift, x_scale, Y.mean(0), _safe_std(Y),
                       poly_shift, poly_scale, bias_augmented)


def _check_x(spec, X):
    X = np.asarray(X, dtype=float)
    if X.shape[-1] != spec.d_x:
        raise DimensionError(f"inputs have {X.shape[-1]} columns, the feature spec expects {spec.d_x}")
    return X


def gate_inputs(spec: FeatureSpec, X):
    """Standardized degree-1 inputs seen by the activation densities."""
    X = _check_x(spec, X)
    return (X - spec.x_shift) / spec.x_scale


def apply(spec: FeatureSpec, X, bias=None):
    """Regression features for raw inputs ``X`` of shape (..., d_x)."""
    Z = gate_inputs(spec, X)
    F = _monomials(Z, spec.degree)
    if spec.degree > 1:
        F[..., spec.d_x:] = (F[..., spec.d_x:] - spec.poly_shift) / spec.poly_scale
    use_bias = spec.bias_augmented if bias is None else bias
    if use_bias:
        F = np.concatenate([F, np.ones(F.shape[:-1] + (1,))], axis=-1)
    return F


def transform_output(spec: FeatureSpec, Y):
    Y = np.asarray(Y, dtype=float)
    if Y.shape[-1] != spec.d_y:
        raise DimensionError(f"outputs have {Y.shape[-1]} columns, the feature spec expects {spec.d_y}")
    return (Y - spec.y_shift) / spec.y_scale


def invert_output(spec: FeatureSpec, Y_std):
    return np.asarray(Y_std, dtype=float) * spec.y_scale + spec.y_shift


def invert_output_covariance(spec: FeatureSpec, C_std):
    """Map a covariance (or scale) matrix from standardized to raw output units."""
    return np.asarray(C_std, dtype=float) * np.outer(spec.y_scale, spec.y_scale)
