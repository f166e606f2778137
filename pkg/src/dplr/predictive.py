"""Posterior predictive mixtures shared by the flat and hierarchical models.

Both models reduce, at prediction time, to a flat list of components, each
with a prior log-weight, a Student-t gate over standardized inputs, and a
Student-t regression whose location is ``M_eff @ u`` and whose scale is
``Phi^-1 / (c * a(u))`` with ``a(u) = 1 / (1 + u^T Kinv u)``. That list is a
:class:`ComponentTable`; :func:`predict_table` evaluates it generically and
:class:`Predictor` packs it for low-latency single queries.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.special import gammaln, logsumexp

from . import features
from ._linalg import spd_inv_logdet
from .distributions import StudentT, student_t_logpdf
from .errors import DimensionError

MODES = ("mode", "mean")


@dataclass(frozen=True, eq=False)
class ComponentTable:
    log_weight: np.ndarray  # (C,) log expected prior weight
    gate: StudentT  # batch (C,), in standardized input space
    M: np.ndarray  # (C, d_y, d_u)
    Kinv: np.ndarray  # (C, d_u, d_u)
    Phi_inv: np.ndarray  # (C, d_y, d_y)
    factor: np.ndarray  # (C,) precision multiplier (eta or eta - d_y + 1)
    dof: np.ndarray  # (C,)

    @property
    def size(self) -> int:
        return self.log_weight.shape[0]


@dataclass(frozen=True, eq=False)
class PredictiveMixture:
    """Activation weights and component Student-t predictives in raw output units.

    With a batch of queries, ``weights`` is (n, C) and ``components`` has batch (n, C).
    ``fallback`` marks queries whose activation densities all underflowed, in which
    case the weights are uniform.
    """

    weights: np.ndarray
    components: StudentT
    fallback: np.ndarray


@dataclass(frozen=True, eq=False)
class Prediction:
    mean: np.ndarray
    std: np.ndarray
    covariance: np.ndarray
    covariance_available: np.ndarray
    top_component: np.ndarray
    top_weight: np.ndarray
    mixture: PredictiveMixture
    mode: str


def activation_log_weights(table: ComponentTable, xg):
    """Normalized log activation weights for gate inputs ``xg`` of shape (n, d)."""
    log_act = table.log_weight + student_t_logpdf(table.gate, xg[:, None, :])
    norm = logsumexp(log_act, axis=1, keepdims=True)
    fallback = ~np.isfinite(norm[:, 0])
    out = log_act - np.where(fallback[:, None], 0.0, norm)
    if np.any(fallback):
        out[fallback] = -np.log(table.size)
    return out, fallback


def predict_table(table: ComponentTable, spec, X, mode="mean") -> Prediction:
    if mode not in MODES:
        raise DimensionError(f"mode must be one of {MODES}")
    X = np.asarray(X, dtype=float)
    single = X.ndim == 1
    X = np.atleast_2d(X)
    if not np.all(np.isfinite(X)):
        raise DimensionError("query inputs must be finite")
    xg = features.gate_inputs(spec, X)
    u = features.apply(spec, X, bias=True)
    log_w, fallback = activation_log_weights(table, xg)
    w = np.exp(log_w)

    loc = np.einsum("cij,nj->nci", table.M, u)
    a = 1.0 / (1.0 + np.einsum("ni,cij,nj->nc", u, table.Kinv, u))
    scale = table.Phi_inv[None] / (table.factor[None] * a)[..., None, None]
    loc = features.invert_output(spec, loc)
    scale = features.invert_output_covariance(spec, scale)
    dof = np.broadcast_to(table.dof, a.shape)
    comps = StudentT(loc, scale, dof)
    cov_k = comps.covariance

    top = np.argmax(w, axis=1)  # first maximal index wins ties
    rows = np.arange(len(X))
    top_w = w[rows, top]
    if mode == "mode":
        mean = loc[rows, top]
        cov = cov_k[rows, top]
        available = table.dof[top] > 2.0
    else:
        mean = np.einsum("nc,nci->ni", w, loc)
        active = w > 0
        available = ~np.any(active & (dof <= 2.0), axis=1)
        second = cov_k + loc[..., :, None] * loc[..., None, :]
        second = np.where(active[..., None, None], second, 0.0)
        cov = np.einsum("nc,ncij->nij", w, second) - mean[:, :, None] * mean[:, None, :]
        cov = np.where(available[:, None, None], cov, np.nan)
    std = np.sqrt(np.clip(np.diagonal(cov, axis1=-2, axis2=-1), 0.0, None))
    mix = PredictiveMixture(w, comps, fallback)
    if single:
        mix = PredictiveMixture(w[0], comps[0], fallback[0])
        return Prediction(mean[0], std[0], cov[0], available[0], top[0], top_w[0], mix, mode)
    return Prediction(mean, std, cov, available, top, top_w, mix, mode)


# ---------------------------------------------------------------------------
# Packed low-latency predictor
# ---------------------------------------------------------------------------


def _quad_pack(P, center=None):
    """Coefficients g with (v - center)^T P (v - center) = g @ [v_i v_j (i <= j), v, 1]."""
    C, d, _ = P.shape
    iu, ju = np.triu_indices(d)
    mult = np.where(iu == ju, 1.0, 2.0)
    parts = [P[:, iu, ju] * mult]
    if center is not None:
        Pc = np.einsum("cij,cj->ci", P, center)
        parts += [-2.0 * Pc, np.einsum("ci,ci->c", center, Pc)[:, None]]
    return np.concatenate(parts, axis=1)


class Predictor:
    """Mixture mean (and standard deviation) specialized for repeated single queries.

    Gate quadratic forms and the regression variance terms are evaluated as
    matrix-vector products against packed upper-triangular coefficients.
    Components whose activation is below ``eps / C`` of the strongest one for
    every query in the call are skipped in the regression stage; their
    contribution is below double-precision resolution of the result.
    """

    def __init__(self, table: ComponentTable, spec, dtype=np.float64):
        self.spec = spec
        self.dtype = np.dtype(dtype)
        C = table.size
        d = table.gate.dim
        P, logdet_S = spd_inv_logdet(table.gate.scale)
        nu = table.gate.dof
        self._d = d
        iu, ju = np.triu_indices(d)
        self._flat_iu = iu * d + ju
        self._G = _quad_pack(P, table.gate.loc).astype(self.dtype)
        self._gate_const = (
            table.log_weight + gammaln(0.5 * (nu + d)) - gammaln(0.5 * nu)
            - 0.5 * d * np.log(nu * np.pi) - 0.5 * logdet_S
        )
        self._gate_dof = nu
        self._gate_pow = 0.5 * (nu + d)
        dy, du = table.M.shape[1:]
        self._d_y, self._d_u = dy, du
        iu, ju = np.triu_indices(du)
        self._flat_iu_u = iu * du + ju
        self._M = np.ascontiguousarray(table.M.reshape(C * dy, du), dtype=self.dtype)
        self._Kq = _quad_pack(table.Kinv).astype(self.dtype)
        self._var = np.ascontiguousarray(
            np.diagonal(table.Phi_inv, axis1=1, axis2=2)
            / table.factor[:, None]
            * np.where(table.dof > 2.0, table.dof / np.maximum(table.dof - 2.0, 1e-300), np.nan)[:, None],
            dtype=self.dtype,
        )
        self._var_ok = bool(np.all(table.dof > 2.0))
        self._cutoff = np.log(np.finfo(float).eps) - np.log(C)
        self._C = C

    def _gate_phi(self, z):
        n = len(z)
        outer = (z[:, :, None] * z[:, None, :]).reshape(n, -1)
        return np.concatenate([outer[:, self._flat_iu], z, np.ones((n, 1))], axis=1)

    def _activations(self, X):
        X = np.asarray(X, dtype=float)
        single = X.ndim == 1
        X = np.atleast_2d(X)
        spec = self.spec
        z = (X - spec.x_shift) / spec.x_scale
        if spec.degree == 1:
            u = np.concatenate([z, np.ones((len(z), 1))], axis=1)
        else:
            u = features.apply(spec, X, bias=True)
        quad = self._gate_phi(z).astype(self.dtype, copy=False) @ self._G.T
        logit = self._gate_const - self._gate_pow * np.log1p(np.maximum(quad, 0.0) / self._gate_dof)
        logit -= logit.max(axis=1, keepdims=True)
        keep = np.flatnonzero(np.any(logit > self._cutoff, axis=0))
        if len(keep) > self._C // 4:
            # gathering only pays off when most components are negligible
            keep = None
        else:
            logit = logit[:, keep]
        w = np.exp(logit)
        w /= w.sum(axis=1, keepdims=True)
        return single, u.astype(self.dtype, copy=False), w, keep

    def _locations(self, u, keep):
        M2 = self._M if keep is None else self._M.reshape(self._C, -1)[keep].reshape(-1, self._d_u)
        return (u @ M2.T).reshape(len(u), -1, self._d_y)

    def mean(self, X):
        """Mixture mean in raw output units."""
        single, u, w, keep = self._activations(X)
        mean = np.matmul(w[:, None, :], self._locations(u, keep))[:, 0]
        mean = features.invert_output(self.spec, mean)
        return mean[0] if single else mean

    def __call__(self, X):
        """Return (mean, std) in raw output units for queries of shape (d_x,) or (n, d_x)."""
        single, u, w, keep = self._activations(X)
        loc = self._locations(u, keep)
        Kq = self._Kq if keep is None else self._Kq[keep]
        var = self._var if keep is None else self._var[keep]
        uu = (u[:, :, None] * u[:, None, :]).reshape(len(u), -1)[:, self._flat_iu_u]
        inv_a = 1.0 + uu @ Kq.T
        mean = np.matmul(w[:, None, :], loc)[:, 0]
        second = np.matmul(w[:, None, :], loc * loc)[:, 0] + (w * inv_a) @ var
        std = np.sqrt(np.maximum(second - mean * mean, 0.0)) * self.spec.y_scale
        if not self._var_ok:
            std = np.full_like(std, np.nan)
        mean = features.invert_output(self.spec, mean)
        return (mean[0], std[0]) if single else (mean, std)
