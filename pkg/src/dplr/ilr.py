"""Infinite mixture of Bayesian local linear regressors.

Each component k couples a Gaussian receptive field over the standardized
inputs (normal-Wishart posterior) with a linear-Gaussian regression over the
polynomial features plus a bias slot (matrix-normal-Wishart posterior). Mixture
weights follow a stick-breaking prior truncated in the variational posterior.
Training is mean-field variational Bayes EM; stochastic (natural-gradient) and
sequential (posterior-becomes-prior) variants are provided.
"""

from __future__ import annotations

import dataclasses
import warnings
from dataclasses import dataclass

import numpy as np
from scipy.cluster.vq import kmeans2
from scipy.special import logsumexp

from . import features
from ._vbem import FitTrace, run_vbem
from .data import Dataset
from .distributions import (
    CONVENTIONS,
    MatrixNormalWishartParams,
    NormalWishartParams,
    TruncatedStickBreaking,
    expected_gaussian_loglik,
    expected_linear_gaussian_loglik,
    expected_log_weights,
    expected_weights,
    mnw_kl,
    mnw_natural,
    mnw_from_natural,
    mnw_posterior,
    mnw_stats,
    nw_from_natural,
    nw_kl,
    nw_natural,
    nw_posterior,
    nw_predictive,
    nw_stats,
    predictive_precision_factor,
    stick_kl,
    stick_prior,
    stick_update,
)
from ._linalg import spd_inv
from .errors import ConfigError, DimensionError, NumericalError, ParseError
from .predictive import ComponentTable, Predictor, activation_log_weights, predict_table

FORMAT_VERSION = 1


# ---------------------------------------------------------------------------
# Configuration
# ---------------------------------------------------------------------------


@dataclass
class ILRConfig:
    truncation: int = 25
    alpha0: float = 1.0
    degree: int = 1
    kappa0: float = 0.01
    nu0: float | None = None  # default d_x + 1
    psi0_scale: float = 1.0
    K0_scale: float = 1e-2
    rho0: float = 1e-2
    Phi0_scale: float = 1.0
    eta0: float | None = None  # default d_y + 1
    init: str = "kmeans"
    init_components: int | None = None  # k-means clusters; default truncation
    n_init: int = 1  # restarts; the run with the highest final ELBO is kept
    tol: float = 1e-6
    max_iters: int = 200
    check_monotone: bool = True
    standardize: bool = True
    convention: str = "plus-one"
    batch_size: int | None = None
    tau_delay: float = 1.0
    kappa_step: float = 0.75

    def validate(self):
        if int(self.truncation) < 1:
            raise ConfigError("truncation must be at least 1")
        if int(self.degree) < 1:
            raise ConfigError("degree must be at least 1")
        for name in ("alpha0", "kappa0", "psi0_scale", "K0_scale", "rho0", "Phi0_scale"):
            if not getattr(self, name) > 0:
                raise ConfigError(f"{name} must be positive")
        if self.init not in ("kmeans", "random"):
            raise ConfigError("init must be 'kmeans' or 'random'")
        if self.convention not in CONVENTIONS:
            raise ConfigError(f"convention must be one of {CONVENTIONS}")
        if not self.tol >= 0 or int(self.max_iters) < 1:
            raise ConfigError("tol must be non-negative and max_iters positive")
        if not 0.5 < self.kappa_step <= 1.0:
            raise ConfigError("kappa_step must lie in (0.5, 1]")
        if not self.tau_delay >= 0:
            raise ConfigError("tau_delay must be non-negative")
        if self.batch_size is not None and int(self.batch_size) < 1:
            raise ConfigError("batch_size must be positive")
        if int(self.n_init) < 1:
            raise ConfigError("n_init must be positive")
        return self

    def to_dict(self):
        return dataclasses.asdict(self)

    @classmethod
    def from_dict(cls, d):
        unknown = set(d) - {f.name for f in dataclasses.fields(cls)}
        if unknown:
            raise ConfigError(f"unknown configuration keys: {sorted(unknown)}")
        return cls(**d).validate()


# ---------------------------------------------------------------------------
# Model
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Design:
    """Training data mapped into model space."""

    xg: np.ndarray  # (N, d_x) gate inputs
    F: np.ndarray  # (N, d_u) regression features
    Y: np.ndarray  # (N, d_y) standardized outputs

    def __len__(self):
        return self.xg.shape[0]

    def subset(self, idx):
        return Design(self.xg[idx], self.F[idx], self.Y[idx])


def make_design(spec, data: Dataset, bias=None) -> Design:
    if data.d_x != spec.d_x or data.d_y != spec.d_y:
        raise DimensionError(
            f"data has d_x={data.d_x}, d_y={data.d_y}; model expects d_x={spec.d_x}, d_y={spec.d_y}"
        )
    return Design(
        features.gate_inputs(spec, data.X),
        features.apply(spec, data.X, bias=bias),
        features.transform_output(spec, data.Y),
    )


@dataclass(frozen=True, eq=False)
class ILRModel:
    feature_spec: features.FeatureSpec
    alpha0: float
    sticks_prior: TruncatedStickBreaking
    sticks_post: TruncatedStickBreaking
    activation_prior: NormalWishartParams  # batch (K,)
    activation_post: NormalWishartParams
    regression_prior: MatrixNormalWishartParams  # batch (K,), bias-augmented
    regression_post: MatrixNormalWishartParams
    convention: str = "plus-one"

    @property
    def truncation(self) -> int:
        return self.sticks_post.truncation

    def replace(self, **kw):
        return dataclasses.replace(self, **kw)

    def component_table(self) -> ComponentTable:
        gate = nw_predictive(self.activation_post, self.convention)
        reg = self.regression_post
        factor, dof = predictive_precision_factor(reg.eta, reg.d_out, self.convention)
        return ComponentTable(
            np.log(expected_weights(self.sticks_post)),
            gate,
            reg.M,
            spd_inv(reg.K),
            spd_inv(reg.Phi),
            factor,
            dof,
        )

    # serialization -------------------------------------------------------

    def to_dict(self):
        return {
            "kind": "ilr",
            "format_version": FORMAT_VERSION,
            "truncation": self.truncation,
            "convention": self.convention,
            "feature_spec": self.feature_spec.to_dict(),
            "sticks": {
                "gamma": self.sticks_post.gamma.tolist(),
                "alpha": self.sticks_post.alpha.tolist(),
                "alpha0": float(self.alpha0),
            },
            "activation": _nw_records(self.activation_post),
            "regression": _mnw_records(self.regression_post),
            "priors": {
                "sticks": {"gamma": self.sticks_prior.gamma.tolist(), "alpha": self.sticks_prior.alpha.tolist()},
                "activation": _nw_records(self.activation_prior),
                "regression": _mnw_records(self.regression_prior),
            },
        }

    @classmethod
    def from_dict(cls, d):
        try:
            if d.get("kind", "ilr") != "ilr":
                raise ParseError(f"expected an ilr model, found {d.get('kind')!r}")
            model = cls(
                features.FeatureSpec.from_dict(d["feature_spec"]),
                float(d["sticks"]["alpha0"]),
                TruncatedStickBreaking(d["priors"]["sticks"]["gamma"], d["priors"]["sticks"]["alpha"]),
                TruncatedStickBreaking(d["sticks"]["gamma"], d["sticks"]["alpha"]),
                _nw_from_records(d["priors"]["activation"]),
                _nw_from_records(d["activation"]),
                _mnw_from_records(d["priors"]["regression"]),
                _mnw_from_records(d["regression"]),
                d.get("convention", "plus-one"),
            )
        except (KeyError, TypeError, ValueError) as exc:
            if isinstance(exc, ParseError):
                raise
            raise ParseError(f"malformed ilr model: {exc!r}") from exc
        if model.truncation != int(d["truncation"]) or len(model.activation_post) != model.truncation:
            raise ParseError("truncation does not match the number of components")
        return model


def _nw_records(p: NormalWishartParams):
    return [
        {"m": p.m[k].tolist(), "kappa": float(p.kappa[k]), "Psi": p.Psi[k].tolist(), "nu": float(p.nu[k])}
        for k in range(len(p))
    ]


def _nw_from_records(recs):
    return NormalWishartParams(
        [r["m"] for r in recs], [r["kappa"] for r in recs], [r["Psi"] for r in recs], [r["nu"] for r in recs]
    )


def _mnw_records(p: MatrixNormalWishartParams):
    return [
        {"M": p.M[k].tolist(), "K": p.K[k].tolist(), "Phi": p.Phi[k].tolist(), "eta": float(p.eta[k])}
        for k in range(len(p))
    ]


def _mnw_from_records(recs):
    return MatrixNormalWishartParams(
        [r["M"] for r in recs], [r["K"] for r in recs], [r["Phi"] for r in recs], [r["eta"] for r in recs]
    )


# ---------------------------------------------------------------------------
# Priors and initialization
# ---------------------------------------------------------------------------


def gate_prior(xg, config, batch=()):
    """Data-scaled normal-Wishart prior over receptive fields."""
    d = xg.shape[1]
    var = xg.var(axis=0) if len(xg) > 1 else np.ones(d)
    var = np.where(var > 0, var, 1.0)
    nu0 = d + 1.0 if config.nu0 is None else float(config.nu0)
    m0 = xg.mean(axis=0) if len(xg) else np.zeros(d)
    return NormalWishartParams(m0, config.kappa0, np.diag(config.psi0_scale / var), nu0).broadcast_to(batch)


def regression_prior(d_f, d_y, config, bias=True, batch=()):
    d_u = d_f + int(bias)
    diag = np.full(d_u, config.K0_scale)
    if bias:
        diag[-1] = config.rho0
    eta0 = d_y + 1.0 if config.eta0 is None else float(config.eta0)
    return MatrixNormalWishartParams(
        np.zeros((d_y, d_u)), np.diag(diag), config.Phi0_scale * np.eye(d_y), eta0
    ).broadcast_to(batch)


def _kmeans_labels(points, k, rng):
    n = len(points)
    k = min(k, n)
    if k <= 1:
        return np.zeros(n, dtype=int)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        _, labels = kmeans2(points, k, minit="++", seed=rng)
    # relabel by decreasing cluster size so the largest clusters take the first sticks
    counts = np.bincount(labels, minlength=k)
    order = np.argsort(-counts, kind="stable")
    rank = np.empty(k, dtype=int)
    rank[order] = np.arange(k)
    return rank[labels]


def soften(labels, k, keep=0.99):
    """Hard labels mixed with the uniform distribution: keep * onehot + (1 - keep) / k."""
    if k == 1:
        return np.ones((len(labels), 1))
    r = np.full((len(labels), k), (1.0 - keep) / k)
    r[np.arange(len(labels)), labels] += keep
    return r


def initial_responsibilities(design: Design, config: ILRConfig, rng):
    K = int(config.truncation)
    N = len(design)
    if K == 1:
        return np.ones((N, 1))
    if config.init == "random":
        return rng.dirichlet(np.ones(K), size=N)
    k_init = K if config.init_components is None else min(int(config.init_components), K)
    return soften(_kmeans_labels(design.xg, k_init, rng), K)


def _empty_model(spec, design, config):
    K = int(config.truncation)
    act = gate_prior(design.xg, config, (K,))
    reg = regression_prior(design.F.shape[1] - int(spec.bias_augmented), design.Y.shape[1], config,
                           spec.bias_augmented, (K,))
    sticks = stick_prior(config.alpha0, K)
    return ILRModel(spec, float(config.alpha0), sticks, sticks, act, act, reg, reg, config.convention)


def init(data: Dataset, config: ILRConfig, rng, feature_spec=None):
    """Build priors from the data, pick initial responsibilities and apply one M-step.

    Returns ``(model, responsibilities)``.
    """
    config.validate()
    if len(data) < 1:
        raise DimensionError("cannot fit an empty dataset")
    spec = feature_spec or features.fit_spec(data, config.degree, True, config.standardize)
    design = make_design(spec, data)
    model = _empty_model(spec, design, config)
    r = initial_responsibilities(design, config, rng)
    return m_step(model, design, r), r


# ---------------------------------------------------------------------------
# Variational steps
# ---------------------------------------------------------------------------


def _as_design(model, data):
    return data if isinstance(data, Design) else make_design(model.feature_spec, data)


def _log_terms(model: ILRModel, design: Design):
    ex = expected_gaussian_loglik(model.activation_post, design.xg[:, None, :])
    ey = expected_linear_gaussian_loglik(model.regression_post, design.F[:, None, :], design.Y[:, None, :])
    return expected_log_weights(model.sticks_post) + ex + ey


def _check_finite(log_rho):
    bad = ~np.isfinite(log_rho)
    if np.any(bad):
        n, k = np.argwhere(bad)[0]
        raise NumericalError(f"non-finite responsibility term for datum {n}, component {k}")


def e_step(model: ILRModel, data) -> np.ndarray:
    """Responsibilities r (N, K) normalized in the log domain."""
    design = _as_design(model, data)
    log_rho = _log_terms(model, design)
    _check_finite(log_rho)
    return np.exp(log_rho - logsumexp(log_rho, axis=1, keepdims=True))


def _check_resp(r, n, k):
    r = np.asarray(r, dtype=float)
    if r.shape != (n, k):
        raise DimensionError(f"responsibilities must have shape ({n}, {k}), got {r.shape}")
    return r


def m_step(model: ILRModel, data, resp) -> ILRModel:
    design = _as_design(model, data)
    r = _check_resp(resp, len(design), model.truncation)
    return model.replace(
        sticks_post=stick_update(model.sticks_prior, r.sum(axis=0)),
        activation_post=nw_posterior(model.activation_prior, nw_stats(design.xg, r)),
        regression_post=mnw_posterior(model.regression_prior, mnw_stats(design.F, design.Y, r)),
    )


def _entropy(r):
    return -np.sum(r * np.log(np.where(r > 0, r, 1.0)))


def kl_divergence(model: ILRModel) -> float:
    """KL(q || p) summed over sticks, receptive fields and regressions."""
    return float(
        stick_kl(model.sticks_post, model.sticks_prior)
        + np.sum(nw_kl(model.activation_post, model.activation_prior))
        + np.sum(mnw_kl(model.regression_post, model.regression_prior))
    )


def elbo(model: ILRModel, data, resp) -> float:
    design = _as_design(model, data)
    r = _check_resp(resp, len(design), model.truncation)
    kl = kl_divergence(model)
    if len(design) == 0:
        return -kl
    log_rho = _log_terms(model, design)
    _check_finite(log_rho)
    return float(np.sum(r * log_rho) + _entropy(r) - kl)


def _count_active(r, threshold=0.01):
    return int(np.sum(r.sum(axis=0) > threshold * r.shape[0]))


def fit(data: Dataset, config: ILRConfig | None = None, rng=None, feature_spec=None, callback=None):
    """Batch VBEM. Returns ``(model, trace)``."""
    config = (config or ILRConfig()).validate()
    rng = np.random.default_rng(rng)
    best = None
    for _ in range(int(config.n_init)):
        model, _ = init(data, config, rng, feature_spec)
        design = make_design(model.feature_spec, data)
        result = run_vbem(model, design, e_step, m_step, elbo, _count_active,
                          config.tol, int(config.max_iters), config.check_monotone, callback)
        if best is None or result[1].elbo_per_iteration[-1] > best[1].elbo_per_iteration[-1]:
            best = result
    return best


def sequential_update(model: ILRModel, new_data: Dataset, config: ILRConfig | None = None,
                      rng=None, feature_spec=None, callback=None):
    """Continue learning on ``new_data`` with the current posterior as the prior."""
    config = (config or ILRConfig()).validate()
    if feature_spec is not None and not feature_spec.same_as(model.feature_spec):
        raise DimensionError("feature_spec differs from the one the model was trained with")
    if new_data.d_x != model.feature_spec.d_x or new_data.d_y != model.feature_spec.d_y:
        raise DimensionError("new data dimensions do not match the model")
    if len(new_data) == 0:
        return model, FitTrace(converged=True)
    carried = model.replace(
        sticks_prior=model.sticks_post,
        activation_prior=model.activation_post,
        regression_prior=model.regression_post,
    )
    design = make_design(model.feature_spec, new_data)
    carried = _seed_free_components(carried, design, config, rng)
    return run_vbem(carried, design, e_step, m_step, elbo, _count_active,
                    config.tol, int(config.max_iters), config.check_monotone, callback)


def free_components(sticks: TruncatedStickBreaking, min_mass=1.0):
    """Indices of components that have absorbed less than ``min_mass`` data points so far."""
    return np.flatnonzero(sticks.gamma - 1.0 < min_mass)


def _seed_free_components(model: ILRModel, design: Design, config: ILRConfig, rng):
    """Fit unused components to k-means clusters of the new batch.

    Used components keep their carried posteriors; the subsequent E-step decides
    which of the old or freshly seeded components explain each new point.
    """
    free = free_components(model.sticks_prior)
    if len(free) == 0 or len(design) == 0:
        return model
    k = len(free) if config.init_components is None else min(int(config.init_components), len(free))
    labels = _kmeans_labels(design.xg, k, np.random.default_rng(rng))
    r = np.zeros((len(design), model.truncation))
    r[:, free] = soften(labels, len(free))
    return m_step(model, design, r)


def fit_stochastic(data: Dataset, config: ILRConfig | None = None, rng=None, feature_spec=None,
                   callback=None):
    """Stochastic variational inference over minibatches of size ``config.batch_size``.

    Step t (counted from zero) blends the natural parameters of the current
    posterior with those implied by the minibatch statistics scaled up by N / L,
    using step size ``(t + tau_delay) ** -kappa_step``. ``max_iters`` counts
    epochs; the trace holds the full-data ELBO after each epoch.
    """
    config = (config or ILRConfig()).validate()
    rng = np.random.default_rng(rng)
    model, _ = init(data, config, rng, feature_spec)
    design = make_design(model.feature_spec, data)
    N = len(design)
    L = N if config.batch_size is None else int(config.batch_size)
    if L > N:
        raise DimensionError(f"batch size {L} exceeds the number of samples {N}")
    steps = -(-N // L)
    trace = FitTrace()
    t = 0
    prev = None
    for epoch in range(1, int(config.max_iters) + 1):
        order = rng.permutation(N)
        for b in range(steps):
            idx = np.sort(order[b * L:(b + 1) * L])
            rho = (t + config.tau_delay) ** (-config.kappa_step)
            model = svi_step(model, design.subset(idx), N / len(idx), rho)
            t += 1
        r = e_step(model, design)
        value = elbo(model, design, r)
        trace.append(value, _count_active(r))
        if callback is not None:
            callback(epoch, model, value)
        if prev is not None and abs(value - prev) <= config.tol * abs(prev):
            trace.converged = True
            break
        prev = value
    return model, trace


def _blend(old, new, rho):
    return tuple((1.0 - rho) * a + rho * b for a, b in zip(old, new))


def svi_step(model: ILRModel, batch: Design, scale: float, rho: float) -> ILRModel:
    """One natural-gradient step from a minibatch whose statistics are multiplied by ``scale``."""
    r = e_step(model, batch)
    target = m_step_scaled(model, batch, r, scale)
    if rho == 1.0:
        return target
    sticks = TruncatedStickBreaking(
        *_blend((model.sticks_post.gamma, model.sticks_post.alpha),
                (target.sticks_post.gamma, target.sticks_post.alpha), rho)
    )
    act = nw_from_natural(*_blend(nw_natural(model.activation_post), nw_natural(target.activation_post), rho))
    reg = mnw_from_natural(*_blend(mnw_natural(model.regression_post), mnw_natural(target.regression_post), rho))
    return model.replace(sticks_post=sticks, activation_post=act, regression_post=reg)


def m_step_scaled(model: ILRModel, design: Design, r, scale: float) -> ILRModel:
    return model.replace(
        sticks_post=stick_update(model.sticks_prior, scale * r.sum(axis=0)),
        activation_post=nw_posterior(model.activation_prior, nw_stats(design.xg, r), scale),
        regression_post=mnw_posterior(model.regression_prior, mnw_stats(design.F, design.Y, r), scale),
    )


# ---------------------------------------------------------------------------
# Prediction
# ---------------------------------------------------------------------------


def activation_weights(model: ILRModel, x, space="raw"):
    """Normalized activation probabilities for one query (or a batch).

    ``space="raw"`` takes raw inputs; ``space="feature"`` takes standardized gate inputs.
    """
    x = np.asarray(x, dtype=float)
    single = x.ndim == 1
    X = np.atleast_2d(x)
    xg = features.gate_inputs(model.feature_spec, X) if space == "raw" else X
    log_w, _ = activation_log_weights(model.component_table(), xg)
    w = np.exp(log_w)
    return w[0] if single else w


def predict(model: ILRModel, x, mode="mean"):
    """Predictive mixture and point summary in raw output units (see :class:`Prediction`)."""
    return predict_table(model.component_table(), model.feature_spec, x, mode)


def predictor(model: ILRModel, dtype=np.float64) -> Predictor:
    return Predictor(model.component_table(), model.feature_spec, dtype)


def active_components(model: ILRModel, data: Dataset | None = None, threshold=0.01) -> int:
    """Components carrying more than ``threshold`` of the responsibility mass.

    Without data the mass is read from the stick posteriors (gamma minus its prior).
    """
    if data is not None and len(data) > 0:
        mass = e_step(model, data).sum(axis=0)
    else:
        mass = model.sticks_post.gamma - model.sticks_prior.gamma
    total = mass.sum()
    if total <= 0:
        return 0
    return int(np.sum(mass > threshold * total))
