"""Hierarchical infinite mixture of local linear regressors.

An upper-level stick-breaking mixture selects a regression unit m, which owns a
slope ``A_m``, an output noise precision ``V_m`` and an input precision
``Lambda_m``. Each unit carries its own lower-level stick-breaking mixture of
activation centers ``mu_mk`` and biases ``c_mk``, so one slope can be reused at
several places of the input space.

Given ``Lambda_m`` the meta-center ``tau_m`` and all centers ``mu_mk`` are
jointly Gaussian, so ``[tau_m, mu_m1, ..., mu_mK]`` is matrix-normal with a
fixed column precision and together with ``Lambda_m`` forms a single
matrix-normal-Wishart block. Likewise ``[A_m, c_m1, ..., c_mK]`` given ``V_m``
is matrix-normal. The variational posterior keeps these two blocks per upper
component, which makes every M-step update an exact conjugate computation.
"""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np
from scipy.special import logsumexp

from . import features
from ._linalg import spd_inv
from ._vbem import FitTrace, run_vbem
from .data import Dataset
from .distributions import (
    CONVENTIONS,
    LOG_2PI,
    GaussianMeanParams,
    MatrixNormalWishartParams,
    MNWStats,
    NormalWishartParams,
    TruncatedStickBreaking,
    expected_log_weights,
    expected_weights,
    mnw_kl,
    mnw_posterior,
    nw_predictive,
    predictive_precision_factor,
    stick_kl,
    stick_prior,
    stick_update,
    wishart_expected_logdet,
)
from .errors import ConfigError, DimensionError, NumericalError, ParseError
from .ilr import Design, _kmeans_labels, _mnw_from_records, _mnw_records, make_design, soften
from .predictive import ComponentTable, Predictor, activation_log_weights, predict_table

FORMAT_VERSION = 1


@dataclass
class HILRConfig:
    upper_truncation: int = 5
    lower_truncation: int = 5
    alpha0: float = 1.0  # lower-level concentration
    beta0: float = 1.0  # upper-level concentration
    degree: int = 1
    lambda0: float = 0.01  # meta-center precision scale
    kappa0: float = 0.01  # center-around-meta-center precision scale
    nu0: float | None = None
    psi0_scale: float = 1.0
    K0_scale: float = 1e-2
    rho0: float = 1e-2
    Phi0_scale: float = 1.0
    eta0: float | None = None
    init: str = "kmeans"
    tol: float = 1e-6
    max_iters: int = 200
    n_init: int = 1
    check_monotone: bool = True
    standardize: bool = True
    convention: str = "plus-one"

    def validate(self):
        if int(self.upper_truncation) < 1 or int(self.lower_truncation) < 1:
            raise ConfigError("truncation levels must be at least 1")
        if int(self.degree) < 1:
            raise ConfigError("degree must be at least 1")
        for name in ("alpha0", "beta0", "lambda0", "kappa0", "psi0_scale", "K0_scale", "rho0", "Phi0_scale"):
            if not getattr(self, name) > 0:
                raise ConfigError(f"{name} must be positive")
        if self.init not in ("kmeans", "random"):
            raise ConfigError("init must be 'kmeans' or 'random'")
        if self.convention not in CONVENTIONS:
            raise ConfigError(f"convention must be one of {CONVENTIONS}")
        if not self.tol >= 0 or int(self.max_iters) < 1 or int(self.n_init) < 1:
            raise ConfigError("tol must be non-negative, max_iters and n_init positive")
        return self

    def to_dict(self):
        return dataclasses.asdict(self)

    @classmethod
    def from_dict(cls, d):
        unknown = set(d) - {f.name for f in dataclasses.fields(cls)}
        if unknown:
            raise ConfigError(f"unknown configuration keys: {sorted(unknown)}")
        return cls(**d).validate()


class HierResponsibilities(NamedTuple):
    g: np.ndarray  # (N, M) upper responsibilities
    r: np.ndarray  # (N, M, K) lower responsibilities given the upper component

    @property
    def joint(self):
        return self.g[:, :, None] * self.r


@dataclass(frozen=True, eq=False)
class HILRModel:
    feature_spec: features.FeatureSpec
    alpha0: float
    beta0: float
    upper_sticks_prior: TruncatedStickBreaking  # (M,)
    upper_sticks: TruncatedStickBreaking
    lower_sticks_prior: TruncatedStickBreaking  # (M, K)
    lower_sticks: TruncatedStickBreaking
    activation_prior: MatrixNormalWishartParams  # (M,), columns [tau, mu_1..mu_K]
    activation_post: MatrixNormalWishartParams
    regression_prior: MatrixNormalWishartParams  # (M,), columns [A, c_1..c_K]
    regression_post: MatrixNormalWishartParams
    convention: str = "plus-one"

    @property
    def upper_truncation(self) -> int:
        return self.upper_sticks.truncation

    @property
    def lower_truncation(self) -> int:
        return self.lower_sticks.truncation

    @property
    def d_f(self) -> int:
        return self.regression_post.d_in - self.lower_truncation

    def replace(self, **kw):
        return dataclasses.replace(self, **kw)

    # structured views ----------------------------------------------------

    @property
    def meta_activation(self) -> NormalWishartParams:
        """q(tau_m, Lambda_m) as a normal-Wishart per upper component."""
        a = self.activation_post
        Sinv = spd_inv(a.K)
        return NormalWishartParams(a.M[:, :, 0], 1.0 / Sinv[:, 0, 0], a.Phi, a.eta)

    @property
    def centers(self) -> GaussianMeanParams:
        """Marginal q(mu_mk | Lambda_m) = N(theta, (rho Lambda_m)^-1), theta of shape (M, K, d_x)."""
        a = self.activation_post
        Sinv = spd_inv(a.K)
        diag = np.diagonal(Sinv, axis1=1, axis2=2)[:, 1:]
        return GaussianMeanParams(np.swapaxes(a.M[:, :, 1:], 1, 2), 1.0 / diag)

    @property
    def slopes(self) -> MatrixNormalWishartParams:
        """Marginal q(A_m, V_m) with the biases integrated out."""
        r = self.regression_post
        d_f = self.d_f
        S_AA = spd_inv(r.K)[:, :d_f, :d_f]
        return MatrixNormalWishartParams(r.M[:, :, :d_f], spd_inv(S_AA), r.Phi, r.eta)

    @property
    def biases(self) -> GaussianMeanParams:
        """Marginal q(c_mk | V_m) = N(theta, (rho V_m)^-1), theta of shape (M, K, d_y)."""
        r = self.regression_post
        d_f = self.d_f
        diag = np.diagonal(spd_inv(r.K), axis1=1, axis2=2)[:, d_f:]
        return GaussianMeanParams(np.swapaxes(r.M[:, :, d_f:], 1, 2), 1.0 / diag)

    def component_table(self) -> ComponentTable:
        M, K, d_f = self.upper_truncation, self.lower_truncation, self.d_f
        act, reg = self.activation_post, self.regression_post
        Sa = spd_inv(act.K)
        kappa = 1.0 / np.diagonal(Sa, axis1=1, axis2=2)[:, 1:]  # (M, K)
        gate = nw_predictive(
            NormalWishartParams(
                np.swapaxes(act.M[:, :, 1:], 1, 2).reshape(M * K, -1),
                kappa.reshape(-1),
                np.repeat(act.Phi, K, axis=0),
                np.repeat(act.eta, K),
            ),
            self.convention,
        )
        Sr = spd_inv(reg.K)
        ks = d_f + np.arange(K)
        M_eff = np.concatenate(
            [np.repeat(reg.M[:, None, :, :d_f], K, axis=1), np.swapaxes(reg.M[:, :, d_f:], 1, 2)[..., None]],
            axis=3,
        )  # (M, K, d_y, d_f + 1)
        Kinv = np.empty((M, K, d_f + 1, d_f + 1))
        Kinv[:, :, :d_f, :d_f] = Sr[:, None, :d_f, :d_f]
        Kinv[:, :, :d_f, d_f] = np.swapaxes(Sr[:, :d_f, d_f:], 1, 2)
        Kinv[:, :, d_f, :d_f] = np.swapaxes(Sr[:, :d_f, d_f:], 1, 2)
        Kinv[:, :, d_f, d_f] = Sr[:, ks, ks]
        factor, dof = predictive_precision_factor(reg.eta, reg.d_out, self.convention)
        log_w = (np.log(expected_weights(self.upper_sticks))[:, None]
                 + np.log(expected_weights(self.lower_sticks)))
        d_y = reg.d_out
        return ComponentTable(
            log_w.reshape(-1),
            gate,
            M_eff.reshape(M * K, d_y, d_f + 1),
            Kinv.reshape(M * K, d_f + 1, d_f + 1),
            np.repeat(spd_inv(reg.Phi), K, axis=0),
            np.repeat(factor, K),
            np.repeat(dof, K),
        )

    # serialization -------------------------------------------------------

    def to_dict(self):
        def sticks(sb):
            return {"gamma": sb.gamma.tolist(), "alpha": sb.alpha.tolist()}

        return {
            "kind": "hilr",
            "format_version": FORMAT_VERSION,
            "upper_truncation": self.upper_truncation,
            "lower_truncation": self.lower_truncation,
            "convention": self.convention,
            "feature_spec": self.feature_spec.to_dict(),
            "upper_sticks": {**sticks(self.upper_sticks), "beta0": float(self.beta0)},
            "lower_sticks": {**sticks(self.lower_sticks), "alpha0": float(self.alpha0)},
            "activation": _mnw_records(self.activation_post),
            "regression": _mnw_records(self.regression_post),
            "priors": {
                "upper_sticks": sticks(self.upper_sticks_prior),
                "lower_sticks": sticks(self.lower_sticks_prior),
                "activation": _mnw_records(self.activation_prior),
                "regression": _mnw_records(self.regression_prior),
            },
        }

    @classmethod
    def from_dict(cls, d):
        def sticks(rec):
            return TruncatedStickBreaking(rec["gamma"], rec["alpha"])

        try:
            if d.get("kind") != "hilr":
                raise ParseError(f"expected a hilr model, found {d.get('kind')!r}")
            model = cls(
                features.FeatureSpec.from_dict(d["feature_spec"]),
                float(d["lower_sticks"]["alpha0"]),
                float(d["upper_sticks"]["beta0"]),
                sticks(d["priors"]["upper_sticks"]),
                sticks(d["upper_sticks"]),
                sticks(d["priors"]["lower_sticks"]),
                sticks(d["lower_sticks"]),
                _mnw_from_records(d["priors"]["activation"]),
                _mnw_from_records(d["activation"]),
                _mnw_from_records(d["priors"]["regression"]),
                _mnw_from_records(d["regression"]),
                d.get("convention", "plus-one"),
            )
        except (KeyError, TypeError, ValueError) as exc:
            if isinstance(exc, ParseError):
                raise
            raise ParseError(f"malformed hilr model: {exc!r}") from exc
        if (model.upper_truncation, model.lower_truncation) != (
            int(d["upper_truncation"]), int(d["lower_truncation"])
        ):
            raise ParseError("truncation levels do not match the stored blocks")
        return model


# ---------------------------------------------------------------------------
# Priors and initialization
# ---------------------------------------------------------------------------


def center_precision(K, lambda0, kappa0):
    """Column precision of [tau, mu_1..mu_K] given Lambda.

    tau ~ N(m0, (lambda0 Lambda)^-1) and mu_k | tau ~ N(tau, (kappa0 Lambda)^-1).
    """
    P = np.zeros((K + 1, K + 1))
    P[0, 0] = lambda0 + K * kappa0
    P[0, 1:] = P[1:, 0] = -kappa0
    P[1:, 1:] = kappa0 * np.eye(K)
    return P


def _priors(design: Design, config: HILRConfig):
    M, K = int(config.upper_truncation), int(config.lower_truncation)
    xg, F, Y = design.xg, design.F, design.Y
    d, d_f, d_y = xg.shape[1], F.shape[1], Y.shape[1]
    var = xg.var(axis=0) if len(xg) > 1 else np.ones(d)
    var = np.where(var > 0, var, 1.0)
    m0 = xg.mean(axis=0) if len(xg) else np.zeros(d)
    nu0 = d + 1.0 if config.nu0 is None else float(config.nu0)
    act = MatrixNormalWishartParams(
        np.repeat(m0[:, None], K + 1, axis=1),
        center_precision(K, config.lambda0, config.kappa0),
        np.diag(config.psi0_scale / var),
        nu0,
    ).broadcast_to((M,))
    eta0 = d_y + 1.0 if config.eta0 is None else float(config.eta0)
    diag = np.concatenate([np.full(d_f, config.K0_scale), np.full(K, config.rho0)])
    reg = MatrixNormalWishartParams(
        np.zeros((d_y, d_f + K)), np.diag(diag), config.Phi0_scale * np.eye(d_y), eta0
    ).broadcast_to((M,))
    upper = stick_prior(config.beta0, M)
    lower = TruncatedStickBreaking(np.ones((M, K)), np.full((M, K), float(config.alpha0)))
    return upper, lower, act, reg


def _local_slopes(design: Design, labels, n_clusters):
    """Ridge least-squares slopes of Y on F within each cluster, flattened."""
    F, Y = design.F, design.Y
    out = np.zeros((n_clusters, Y.shape[1] * F.shape[1]))
    for c in range(n_clusters):
        idx = labels == c
        if idx.sum() < 2:
            continue
        Fc = F[idx] - F[idx].mean(axis=0)
        Yc = Y[idx] - Y[idx].mean(axis=0)
        A = np.linalg.solve(Fc.T @ Fc + 1e-6 * np.eye(F.shape[1]), Fc.T @ Yc).T
        out[c] = A.reshape(-1)
    return out


def initial_responsibilities(design: Design, config: HILRConfig, rng) -> HierResponsibilities:
    """Group local slopes into upper components, then split each group spatially.

    The inputs are first cut into M*K k-means cells; a least-squares slope is
    fitted per cell, the slopes are clustered into M groups (ordered by size),
    and the points of each group are clustered into K lower-level sub-regions.
    """
    M, K = int(config.upper_truncation), int(config.lower_truncation)
    N = len(design)
    if config.init == "random":
        return HierResponsibilities(rng.dirichlet(np.ones(M), size=N), rng.dirichlet(np.ones(K), size=(N, M)))
    cells = _kmeans_labels(design.xg, M * K, rng)
    n_cells = int(cells.max()) + 1
    if M > 1 and n_cells > 1:
        slopes = _local_slopes(design, cells, n_cells)
        scale = slopes.std(axis=0)
        slopes = slopes / np.where(scale > 0, scale, 1.0)
        group_of_cell = _kmeans_labels(slopes, M, rng)
        upper = group_of_cell[cells]
        counts = np.bincount(upper, minlength=M)
        order = np.argsort(-counts, kind="stable")
        rank = np.empty(M, dtype=int)
        rank[order] = np.arange(M)
        upper = rank[upper]
    else:
        upper = np.zeros(N, dtype=int)
    g = soften(upper, M)
    r = np.full((N, M, K), 1.0 / K)
    for m in range(M):
        idx = np.flatnonzero(upper == m)
        if len(idx) == 0:
            continue
        r[idx, m] = soften(_kmeans_labels(design.xg[idx], K, rng), K)
    return HierResponsibilities(g, r)


def init(data: Dataset, config: HILRConfig, rng, feature_spec=None):
    config.validate()
    if len(data) < 1:
        raise DimensionError("cannot fit an empty dataset")
    spec = feature_spec or features.fit_spec(data, config.degree, False, config.standardize)
    if spec.bias_augmented:
        raise DimensionError("the hierarchical model handles biases itself; use a spec without bias slot")
    design = make_design(spec, data)
    upper, lower, act, reg = _priors(design, config)
    model = HILRModel(spec, float(config.alpha0), float(config.beta0), upper, upper, lower, lower,
                      act, act, reg, reg, config.convention)
    resp = initial_responsibilities(design, config, rng)
    return h_m_step(model, design, resp), resp


# ---------------------------------------------------------------------------
# Variational steps
# ---------------------------------------------------------------------------


def _as_design(model, data):
    return data if isinstance(data, Design) else make_design(model.feature_spec, data)


def _log_rho(model: HILRModel, design: Design):
    """log rho_nmk = E[log pi_mk] + E[log N(x|mu_mk, Lambda_m)] + E[log N(y|A_m f + c_mk, V_m)]."""
    act, reg = model.activation_post, model.regression_post
    xg, F, Y = design.xg, design.F, design.Y
    d, d_y, d_f = xg.shape[1], Y.shape[1], model.d_f

    Sa = spd_inv(act.K)
    centers = np.swapaxes(act.M[:, :, 1:], 1, 2)  # (M, K, d)
    diff = xg[:, None, None, :] - centers[None]
    quad = np.einsum("nmki,mij,nmkj->nmk", diff, act.Phi, diff, optimize=True)
    s_kk = np.diagonal(Sa, axis1=1, axis2=2)[:, 1:]
    ex = 0.5 * (wishart_expected_logdet(act.Phi, act.eta)[:, None]
                - d * LOG_2PI - d * s_kk - act.eta[:, None] * quad)

    Sr = spd_inv(reg.K)
    pred = np.einsum("mij,nj->nmi", reg.M[:, :, :d_f], F)[:, :, None, :] + np.swapaxes(reg.M[:, :, d_f:], 1, 2)[None]
    resid = Y[:, None, None, :] - pred
    quad_y = np.einsum("nmki,mij,nmkj->nmk", resid, reg.Phi, resid, optimize=True)
    S_AA, S_Ak = Sr[:, :d_f, :d_f], Sr[:, :d_f, d_f:]
    ks = d_f + np.arange(model.lower_truncation)
    u_term = (np.einsum("ni,mij,nj->nm", F, S_AA, F)[:, :, None]
              + 2.0 * np.einsum("ni,mik->nmk", F, S_Ak) + Sr[:, ks, ks][None])
    ey = 0.5 * (wishart_expected_logdet(reg.Phi, reg.eta)[:, None]
                - d_y * LOG_2PI - reg.eta[:, None] * quad_y - d_y * u_term)
    out = expected_log_weights(model.lower_sticks)[None] + ex + ey
    bad = ~np.isfinite(out)
    if np.any(bad):
        n, m, k = np.argwhere(bad)[0]
        raise NumericalError(f"non-finite responsibility term for datum {n}, component ({m}, {k})")
    return out


def h_e_step(model: HILRModel, data) -> HierResponsibilities:
    design = _as_design(model, data)
    log_rho = _log_rho(model, design)
    lse = logsumexp(log_rho, axis=2)
    r = np.exp(log_rho - lse[..., None])
    log_g = expected_log_weights(model.upper_sticks)[None] + lse
    g = np.exp(log_g - logsumexp(log_g, axis=1, keepdims=True))
    return HierResponsibilities(g, r)


def _check_resp(model, resp, n):
    g, r = np.asarray(resp.g, float), np.asarray(resp.r, float)
    M, K = model.upper_truncation, model.lower_truncation
    if g.shape != (n, M) or r.shape != (n, M, K):
        raise DimensionError(f"responsibilities must have shapes ({n}, {M}) and ({n}, {M}, {K})")
    return g, r


def h_m_step(model: HILRModel, data, resp: HierResponsibilities) -> HILRModel:
    design = _as_design(model, data)
    g, r = _check_resp(model, resp, len(design))
    W = g[:, :, None] * r
    xg, F, Y = design.xg, design.F, design.Y
    M, K = model.upper_truncation, model.lower_truncation
    d, d_f = xg.shape[1], F.shape[1]
    g_sum, W_sum = g.sum(axis=0), W.sum(axis=0)
    ein = lambda spec, *ops: np.einsum(spec, *ops, optimize=True)  # noqa: E731

    uu = np.zeros((M, K + 1, K + 1))
    uu[:, np.arange(1, K + 1), np.arange(1, K + 1)] = W_sum
    yu = np.zeros((M, d, K + 1))
    yu[:, :, 1:] = ein("nmk,ni->mik", W, xg)
    act_stats = MNWStats(g_sum, uu, yu, ein("nm,ni,nj->mij", g, xg, xg))

    uu = np.zeros((M, d_f + K, d_f + K))
    uu[:, :d_f, :d_f] = ein("nm,ni,nj->mij", g, F, F)
    cross = ein("nmk,ni->mik", W, F)
    uu[:, :d_f, d_f:] = cross
    uu[:, d_f:, :d_f] = np.swapaxes(cross, 1, 2)
    uu[:, np.arange(d_f, d_f + K), np.arange(d_f, d_f + K)] = W_sum
    yu = np.concatenate([ein("nm,ni,nj->mij", g, Y, F), ein("nmk,ni->mik", W, Y)], axis=2)
    reg_stats = MNWStats(g_sum, uu, yu, ein("nm,ni,nj->mij", g, Y, Y))

    return model.replace(
        upper_sticks=stick_update(model.upper_sticks_prior, g_sum),
        lower_sticks=stick_update(model.lower_sticks_prior, W_sum),
        activation_post=mnw_posterior(model.activation_prior, act_stats),
        regression_post=mnw_posterior(model.regression_prior, reg_stats),
    )


def kl_divergence(model: HILRModel) -> float:
    return float(
        stick_kl(model.upper_sticks, model.upper_sticks_prior)
        + np.sum(stick_kl(model.lower_sticks, model.lower_sticks_prior))
        + np.sum(mnw_kl(model.activation_post, model.activation_prior))
        + np.sum(mnw_kl(model.regression_post, model.regression_prior))
    )


def _xlogx(p):
    return np.sum(p * np.log(np.where(p > 0, p, 1.0)))


def h_elbo(model: HILRModel, data, resp: HierResponsibilities) -> float:
    design = _as_design(model, data)
    g, r = _check_resp(model, resp, len(design))
    kl = kl_divergence(model)
    if len(design) == 0:
        return -kl
    log_rho = _log_rho(model, design)
    W = g[:, :, None] * r
    upper = np.sum(g * expected_log_weights(model.upper_sticks)[None]) - _xlogx(g)
    lower = np.sum(W * log_rho) - np.sum(W * np.log(np.where(r > 0, r, 1.0)))
    return float(upper + lower - kl)


def _count_active(resp: HierResponsibilities, threshold=0.01):
    return int(np.sum(resp.g.sum(axis=0) > threshold * resp.g.shape[0]))


def h_fit(data: Dataset, config: HILRConfig | None = None, rng=None, feature_spec=None, callback=None):
    """Structured VBEM for the hierarchical model. Returns ``(model, trace)``."""
    config = (config or HILRConfig()).validate()
    rng = np.random.default_rng(rng)
    best = None
    for _ in range(int(config.n_init)):
        model, _ = init(data, config, rng, feature_spec)
        design = make_design(model.feature_spec, data)
        result = run_vbem(model, design, h_e_step, h_m_step, h_elbo, _count_active,
                          config.tol, int(config.max_iters), config.check_monotone, callback)
        if best is None or result[1].elbo_per_iteration[-1] > best[1].elbo_per_iteration[-1]:
            best = result
    return best


def h_sequential_update(model: HILRModel, new_data: Dataset, config: HILRConfig | None = None,
                        rng=None, feature_spec=None, callback=None):
    """Continue learning on ``new_data`` with the current posterior as the prior."""
    config = (config or HILRConfig()).validate()
    if feature_spec is not None and not feature_spec.same_as(model.feature_spec):
        raise DimensionError("feature_spec differs from the one the model was trained with")
    if new_data.d_x != model.feature_spec.d_x or new_data.d_y != model.feature_spec.d_y:
        raise DimensionError("new data dimensions do not match the model")
    if len(new_data) == 0:
        return model, FitTrace(converged=True)
    carried = model.replace(
        upper_sticks_prior=model.upper_sticks,
        lower_sticks_prior=model.lower_sticks,
        activation_prior=model.activation_post,
        regression_prior=model.regression_post,
    )
    design = make_design(model.feature_spec, new_data)
    return run_vbem(carried, design, h_e_step, h_m_step, h_elbo, _count_active,
                    config.tol, int(config.max_iters), config.check_monotone, callback)


# ---------------------------------------------------------------------------
# Prediction
# ---------------------------------------------------------------------------


def h_activation_weights(model: HILRModel, x, space="raw"):
    """Activation probabilities over the (M, K) grid for one query (or (n, M, K) for a batch)."""
    x = np.asarray(x, dtype=float)
    single = x.ndim == 1
    X = np.atleast_2d(x)
    xg = features.gate_inputs(model.feature_spec, X) if space == "raw" else X
    log_w, _ = activation_log_weights(model.component_table(), xg)
    w = np.exp(log_w).reshape(len(X), model.upper_truncation, model.lower_truncation)
    return w[0] if single else w


def h_predict(model: HILRModel, x, mode="mean"):
    """Prediction over the flattened (m, k) grid; component index c = m * K + k."""
    return predict_table(model.component_table(), model.feature_spec, x, mode)


def predictor(model: HILRModel, dtype=np.float64) -> Predictor:
    return Predictor(model.component_table(), model.feature_spec, dtype)


def upper_mass(model: HILRModel, data: Dataset) -> np.ndarray:
    return h_e_step(model, data).g.sum(axis=0) / len(data)


def lower_mass(model: HILRModel, data: Dataset) -> np.ndarray:
    """Joint responsibility mass per (m, k) cell as a fraction of N."""
    return h_e_step(model, data).joint.sum(axis=0) / len(data)


def active_components(model: HILRModel, data: Dataset, threshold=0.01) -> int:
    """Number of (m, k) cells holding more than ``threshold`` of the joint mass."""
    return int(np.sum(lower_mass(model, data) > threshold))
