"""Conjugate exponential-family building blocks.

Four conjugate pairs are covered:

* Gaussian likelihood with a normal-Wishart prior over (mean, precision),
* linear-Gaussian likelihood with a matrix-normal-Wishart prior over
  (coefficients, noise precision),
* the truncated stick-breaking (GEM) prior over mixture weights,
* multivariate Student-t marginals arising from the first two.

Wishart densities are parameterized by a scale matrix ``Psi`` and degrees of
freedom ``nu`` so that ``E[Lambda] = nu * Psi``. A normal-Wishart draw has
``mu | Lambda ~ N(m, (kappa Lambda)^-1)``; a matrix-normal-Wishart draw has
``A | V`` with row precision ``V`` and column precision ``K``.

All parameter records carry optional leading batch dimensions, and every
function broadcasts over them. Updates go through natural parameters, so
posterior = prior + (weighted) sufficient statistics, which is what makes
zero-weight neutrality and integer-weight replication exact.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import NamedTuple

import numpy as np
from scipy.special import betaln, digamma, gammaln

from ._linalg import cholesky, logdet_from_chol, outer, spd_inv, spd_inv_logdet, symmetrize
from .errors import DimensionError, NumericalDegeneracyError

LOG_2PI = float(np.log(2.0 * np.pi))

CONVENTIONS = ("plus-one", "textbook")


def _f(a):
    return np.asarray(a, dtype=float)


# ---------------------------------------------------------------------------
# Parameter records
# ---------------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class NormalWishartParams:
    """N(mu | m, kappa Lambda) W(Lambda | Psi, nu)."""

    m: np.ndarray
    kappa: np.ndarray
    Psi: np.ndarray
    nu: np.ndarray

    def __post_init__(self):
        for name in ("m", "kappa", "Psi", "nu"):
            object.__setattr__(self, name, _f(getattr(self, name)))
        d = self.m.shape[-1]
        if self.Psi.shape[-2:] != (d, d):
            raise DimensionError(f"Psi has shape {self.Psi.shape}, expected (..., {d}, {d})")

    @property
    def dim(self) -> int:
        return self.m.shape[-1]

    @property
    def batch_shape(self):
        return self.kappa.shape

    def __len__(self):
        return self.batch_shape[0]

    def __getitem__(self, idx):
        return NormalWishartParams(self.m[idx], self.kappa[idx], self.Psi[idx], self.nu[idx])

    def broadcast_to(self, shape):
        shape = tuple(np.atleast_1d(shape)) if not isinstance(shape, tuple) else shape
        d = self.dim
        return NormalWishartParams(
            np.broadcast_to(self.m, shape + (d,)).copy(),
            np.broadcast_to(self.kappa, shape).copy(),
            np.broadcast_to(self.Psi, shape + (d, d)).copy(),
            np.broadcast_to(self.nu, shape).copy(),
        )

    def as_mnw(self) -> "MatrixNormalWishartParams":
        """The same distribution written as an MNW with a constant unit input."""
        return MatrixNormalWishartParams(
            self.m[..., :, None], self.kappa[..., None, None], self.Psi, self.nu
        )

    def validate(self):
        d = self.dim
        if np.any(self.kappa <= 0):
            raise DimensionError("kappa must be positive")
        if np.any(self.nu <= d - 1):
            raise DimensionError(f"nu must exceed d - 1 = {d - 1}")
        _check_spd(self.Psi, "Psi")
        return self


@dataclass(frozen=True, eq=False)
class MatrixNormalWishartParams:
    """MN(A | M, V, K) W(V | Phi, eta) with A of shape (d_y, d_u)."""

    M: np.ndarray
    K: np.ndarray
    Phi: np.ndarray
    eta: np.ndarray

    def __post_init__(self):
        for name in ("M", "K", "Phi", "eta"):
            object.__setattr__(self, name, _f(getattr(self, name)))
        dy, du = self.M.shape[-2:]
        if self.K.shape[-2:] != (du, du):
            raise DimensionError(f"K has shape {self.K.shape}, expected (..., {du}, {du})")
        if self.Phi.shape[-2:] != (dy, dy):
            raise DimensionError(f"Phi has shape {self.Phi.shape}, expected (..., {dy}, {dy})")

    @property
    def d_out(self) -> int:
        return self.M.shape[-2]

    @property
    def d_in(self) -> int:
        return self.M.shape[-1]

    @property
    def batch_shape(self):
        return self.eta.shape

    def __len__(self):
        return self.batch_shape[0]

    def __getitem__(self, idx):
        return MatrixNormalWishartParams(self.M[idx], self.K[idx], self.Phi[idx], self.eta[idx])

    def broadcast_to(self, shape):
        shape = tuple(np.atleast_1d(shape)) if not isinstance(shape, tuple) else shape
        dy, du = self.d_out, self.d_in
        return MatrixNormalWishartParams(
            np.broadcast_to(self.M, shape + (dy, du)).copy(),
            np.broadcast_to(self.K, shape + (du, du)).copy(),
            np.broadcast_to(self.Phi, shape + (dy, dy)).copy(),
            np.broadcast_to(self.eta, shape).copy(),
        )

    def validate(self):
        if np.any(self.eta <= self.d_out - 1):
            raise DimensionError(f"eta must exceed d_y - 1 = {self.d_out - 1}")
        _check_spd(self.K, "K")
        _check_spd(self.Phi, "Phi")
        return self


@dataclass(frozen=True, eq=False)
class GaussianMeanParams:
    """N(c | theta, rho * P) for a precision matrix P supplied by context."""

    theta: np.ndarray
    rho: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "theta", _f(self.theta))
        object.__setattr__(self, "rho", _f(self.rho))
        if np.any(self.rho <= 0):
            raise DimensionError("rho must be positive")


@dataclass(frozen=True, eq=False)
class TruncatedStickBreaking:
    """Independent Beta(gamma_k, alpha_k) sticks, last stick fixed at one."""

    gamma: np.ndarray
    alpha: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "gamma", _f(self.gamma))
        object.__setattr__(self, "alpha", _f(self.alpha))
        if self.gamma.shape != self.alpha.shape or self.gamma.ndim == 0:
            raise DimensionError("gamma and alpha must be arrays of equal shape (..., T)")

    @property
    def truncation(self) -> int:
        return self.gamma.shape[-1]

    def __getitem__(self, idx):
        return TruncatedStickBreaking(self.gamma[idx], self.alpha[idx])

    def validate(self):
        if np.any(self.gamma <= 0) or np.any(self.alpha <= 0):
            raise DimensionError("stick parameters must be positive")
        return self


@dataclass(frozen=True, eq=False)
class StudentT:
    """Multivariate Student-t with location, scale matrix and dof.

    The density is proportional to
    ``(1 + (x - loc)^T scale^-1 (x - loc) / dof) ** (-(dof + d) / 2)``.
    """

    loc: np.ndarray
    scale: np.ndarray
    dof: np.ndarray

    def __post_init__(self):
        for name in ("loc", "scale", "dof"):
            object.__setattr__(self, name, _f(getattr(self, name)))

    @property
    def dim(self) -> int:
        return self.loc.shape[-1]

    @property
    def precision(self):
        return spd_inv(self.scale)

    @property
    def covariance(self):
        """Covariance, NaN where dof <= 2."""
        dof = self.dof[..., None, None]
        with np.errstate(divide="ignore", invalid="ignore"):
            cov = self.scale * dof / (dof - 2.0)
        return np.where(dof > 2.0, cov, np.nan)

    def __getitem__(self, idx):
        return StudentT(self.loc[idx], self.scale[idx], self.dof[idx])

    def logpdf(self, x):
        return student_t_logpdf(self, x)


def _check_spd(S, name):
    S = np.asarray(S)
    asym = np.max(np.abs(S - np.swapaxes(S, -1, -2)), initial=0.0)
    if asym > 1e-10 * max(np.max(np.abs(S), initial=0.0), 1.0):
        raise DimensionError(f"{name} is not symmetric")
    try:
        np.linalg.cholesky(S)
    except np.linalg.LinAlgError as exc:
        raise NumericalDegeneracyError(f"{name} is not positive definite") from exc


# ---------------------------------------------------------------------------
# Sufficient statistics and natural-parameter updates
# ---------------------------------------------------------------------------


class NWStats(NamedTuple):
    s0: np.ndarray  # sum w
    s1: np.ndarray  # sum w x
    s2: np.ndarray  # sum w x x^T


class MNWStats(NamedTuple):
    s0: np.ndarray  # sum w
    uu: np.ndarray  # sum w u u^T
    yu: np.ndarray  # sum w y u^T
    yy: np.ndarray  # sum w y y^T


def _check_weights(weights, n):
    w = _f(weights)
    if w.ndim not in (1, 2) or w.shape[0] != n:
        raise DimensionError(f"weights must have shape ({n},) or ({n}, K), got {w.shape}")
    if not np.all(np.isfinite(w)):
        raise DimensionError("weights must be finite")
    if np.any(w < 0):
        raise DimensionError("weights must be non-negative")
    return w


def nw_stats(points, weights) -> NWStats:
    X = _f(points)
    if X.ndim != 2:
        raise DimensionError("points must be an (N, d) matrix")
    w = _check_weights(weights, X.shape[0])
    if w.ndim == 1:
        return NWStats(w.sum(), w @ X, (X.T * w) @ X)
    return NWStats(w.sum(0), w.T @ X, np.einsum("nk,ni,nj->kij", w, X, X, optimize=True))


def mnw_stats(inputs, outputs, weights) -> MNWStats:
    U, Y = _f(inputs), _f(outputs)
    if U.ndim != 2 or Y.ndim != 2 or U.shape[0] != Y.shape[0]:
        raise DimensionError("inputs and outputs must be matrices with equal row counts")
    w = _check_weights(weights, U.shape[0])
    if w.ndim == 1:
        return MNWStats(w.sum(), (U.T * w) @ U, (Y.T * w) @ U, (Y.T * w) @ Y)
    ein = lambda a, b: np.einsum("nk,ni,nj->kij", w, a, b, optimize=True)  # noqa: E731
    return MNWStats(w.sum(0), ein(U, U), ein(Y, U), ein(Y, Y))


def nw_natural(p: NormalWishartParams):
    """(kappa m, kappa, Psi^-1 + kappa m m^T, nu)."""
    km = p.kappa[..., None] * p.m
    return km, p.kappa, spd_inv(p.Psi) + outer(km, p.m), p.nu


def nw_from_natural(eta1, eta2, eta3, eta4) -> NormalWishartParams:
    m = eta1 / eta2[..., None]
    Psi_inv = symmetrize(eta3 - outer(eta1, m))
    return NormalWishartParams(m, eta2, spd_inv(Psi_inv), eta4)


def mnw_natural(p: MatrixNormalWishartParams):
    """(M K, K, Phi^-1 + M K M^T, eta)."""
    MK = p.M @ p.K
    return MK, p.K, spd_inv(p.Phi) + MK @ np.swapaxes(p.M, -1, -2), p.eta


def mnw_from_natural(eta1, eta2, eta3, eta4) -> MatrixNormalWishartParams:
    K = symmetrize(eta2)
    Kinv = spd_inv(K)
    M = eta1 @ Kinv
    Phi_inv = symmetrize(eta3 - M @ np.swapaxes(eta1, -1, -2))
    return MatrixNormalWishartParams(M, K, spd_inv(Phi_inv), eta4)


def _add(nat, stats, scale):
    return tuple(a + scale * b for a, b in zip(nat, stats))


def nw_posterior(prior: NormalWishartParams, stats: NWStats, scale=1.0) -> NormalWishartParams:
    """Posterior from precomputed statistics; zero-mass entries return the prior exactly."""
    s0 = _f(stats.s0)
    batch = np.broadcast_shapes(prior.batch_shape, s0.shape)
    prior = prior.broadcast_to(batch)
    post = nw_from_natural(*_add(nw_natural(prior), (stats.s1, s0, stats.s2, s0), scale))
    return _keep_prior_where(prior, post, s0 == 0)


def mnw_posterior(
    prior: MatrixNormalWishartParams, stats: MNWStats, scale=1.0
) -> MatrixNormalWishartParams:
    s0 = _f(stats.s0)
    batch = np.broadcast_shapes(prior.batch_shape, s0.shape)
    prior = prior.broadcast_to(batch)
    post = mnw_from_natural(*_add(mnw_natural(prior), (stats.yu, stats.uu, stats.yy, s0), scale))
    return _keep_prior_where(prior, post, s0 == 0)


def _keep_prior_where(prior, post, mask):
    mask = np.broadcast_to(mask, prior.batch_shape)
    if not np.any(mask):
        return post
    fields = {}
    for name in post.__dataclass_fields__:
        a, b = getattr(prior, name), getattr(post, name)
        mk = mask.reshape(mask.shape + (1,) * (a.ndim - mask.ndim))
        fields[name] = np.where(mk, a, b)
    return type(post)(**fields)


def nw_update(prior: NormalWishartParams, points, weights) -> NormalWishartParams:
    """Weighted normal-Wishart posterior.

    ``weights`` of shape (N,) gives one posterior; shape (N, K) gives a batch of
    K posteriors, one per weight column, all sharing (a broadcast of) ``prior``.
    """
    X = _f(points)
    if X.ndim != 2 or X.shape[1] != prior.dim:
        raise DimensionError(f"points must have shape (N, {prior.dim})")
    return nw_posterior(prior, nw_stats(X, weights))


def mnw_update(prior: MatrixNormalWishartParams, inputs, outputs, weights) -> MatrixNormalWishartParams:
    U, Y = _f(inputs), _f(outputs)
    if U.ndim != 2 or U.shape[1] != prior.d_in:
        raise DimensionError(f"inputs must have shape (N, {prior.d_in})")
    if Y.ndim != 2 or Y.shape[1] != prior.d_out:
        raise DimensionError(f"outputs must have shape (N, {prior.d_out})")
    return mnw_posterior(prior, mnw_stats(U, Y, weights))


# ---------------------------------------------------------------------------
# Stick breaking
# ---------------------------------------------------------------------------


def stick_prior(alpha0, truncation, gamma0=1.0) -> TruncatedStickBreaking:
    if truncation < 1:
        raise DimensionError("truncation must be at least 1")
    if alpha0 <= 0:
        raise DimensionError("alpha0 must be positive")
    return TruncatedStickBreaking(
        np.full(truncation, float(gamma0)), np.full(truncation, float(alpha0))
    )


def stick_update(prior, weight_sums) -> TruncatedStickBreaking:
    """Beta posteriors of the sticks given per-component responsibility mass.

    ``prior`` is either the scalar concentration (prior Beta(1, alpha0) on every
    stick) or a :class:`TruncatedStickBreaking` holding per-stick priors, as
    produced by a previous fit in sequential learning.
    """
    w = _f(weight_sums)
    if w.ndim == 0 or w.shape[-1] < 1:
        raise DimensionError("weight_sums must have at least one entry")
    if not np.all(np.isfinite(w)):
        raise DimensionError("weight_sums must be finite")
    if np.any(w < 0):
        raise DimensionError("weight_sums must be non-negative")
    if not isinstance(prior, TruncatedStickBreaking):
        prior = stick_prior(float(prior), w.shape[-1])
    tail = np.cumsum(w[..., ::-1], axis=-1)[..., ::-1] - w
    return TruncatedStickBreaking(prior.gamma + w, prior.alpha + tail)


def expected_log_sticks(sb: TruncatedStickBreaking):
    """(E[log s_k], E[log(1 - s_k)]) under the Beta posteriors."""
    total = digamma(sb.gamma + sb.alpha)
    return digamma(sb.gamma) - total, digamma(sb.alpha) - total


def expected_log_weights(sb: TruncatedStickBreaking):
    """E[log pi_k] with the final stick treated as one."""
    log_s, log_1ms = expected_log_sticks(sb)
    log_s = log_s.copy()
    log_s[..., -1] = 0.0
    carry = np.zeros_like(log_s)
    carry[..., 1:] = np.cumsum(log_1ms[..., :-1], axis=-1)
    return log_s + carry


def expected_weights(sb: TruncatedStickBreaking):
    """E[s_k] prod_{l<k} (1 - E[s_l]), summing to one over the truncation."""
    s = sb.gamma / (sb.gamma + sb.alpha)
    s[..., -1] = 1.0
    carry = np.ones_like(s)
    carry[..., 1:] = np.cumprod(1.0 - s[..., :-1], axis=-1)
    return s * carry


def beta_kl(a_q, b_q, a_p, b_p):
    a_q, b_q, a_p, b_p = map(_f, (a_q, b_q, a_p, b_p))
    return (
        betaln(a_p, b_p)
        - betaln(a_q, b_q)
        + (a_q - a_p) * digamma(a_q)
        + (b_q - b_p) * digamma(b_q)
        + (a_p - a_q + b_p - b_q) * digamma(a_q + b_q)
    )


def stick_kl(q: TruncatedStickBreaking, p: TruncatedStickBreaking):
    """KL over the T - 1 random sticks (summed over the last axis)."""
    kl = beta_kl(q.gamma[..., :-1], q.alpha[..., :-1], p.gamma[..., :-1], p.alpha[..., :-1])
    return kl.sum(-1)


# ---------------------------------------------------------------------------
# Expectations and divergences
# ---------------------------------------------------------------------------


def wishart_expected_logdet(Psi, nu, logdet_Psi=None):
    """E[log |Lambda|] for Lambda ~ W(Psi, nu)."""
    Psi, nu = _f(Psi), _f(nu)
    d = Psi.shape[-1]
    if logdet_Psi is None:
        logdet_Psi = logdet_from_chol(cholesky(Psi))
    i = np.arange(1, d + 1)
    return digamma((nu[..., None] + 1.0 - i) / 2.0).sum(-1) + d * np.log(2.0) + logdet_Psi


def _quad(a, S, b=None):
    b = a if b is None else b
    return np.einsum("...i,...ij,...j->...", a, S, b)


def expected_gaussian_loglik(nw: NormalWishartParams, x):
    """E[log N(x | mu, Lambda)] under the normal-Wishart; broadcasts x against the batch."""
    x = _f(x)
    d = nw.dim
    diff = x - nw.m
    return 0.5 * (
        wishart_expected_logdet(nw.Psi, nw.nu)
        - d * LOG_2PI
        - d / nw.kappa
        - nw.nu * _quad(diff, nw.Psi)
    )


def expected_linear_gaussian_loglik(mnw: MatrixNormalWishartParams, u, y):
    """E[log N(y | A u, V)] under the matrix-normal-Wishart."""
    u, y = _f(u), _f(y)
    dy = mnw.d_out
    Kinv = spd_inv(mnw.K)
    resid = y - np.einsum("...ij,...j->...i", mnw.M, u)
    return 0.5 * (
        wishart_expected_logdet(mnw.Phi, mnw.eta)
        - dy * LOG_2PI
        - mnw.eta * _quad(resid, mnw.Phi)
        - dy * _quad(u, Kinv)
    )


def wishart_kl(Psi_q, nu_q, Psi_p, nu_p):
    """KL(W(Psi_q, nu_q) || W(Psi_p, nu_p))."""
    d = Psi_q.shape[-1]
    Pp_inv, logdet_p = spd_inv_logdet(Psi_p)
    logdet_q = logdet_from_chol(cholesky(Psi_q))
    i = np.arange(1, d + 1)
    psi_d = digamma((nu_q[..., None] + 1.0 - i) / 2.0).sum(-1)
    tr = np.einsum("...ij,...ji->...", Pp_inv, Psi_q)
    return (
        0.5 * nu_p * (logdet_p - logdet_q)
        + 0.5 * nu_q * (tr - d)
        + multigammaln_arr(nu_p / 2.0, d)
        - multigammaln_arr(nu_q / 2.0, d)
        + 0.5 * (nu_q - nu_p) * psi_d
    )


def multigammaln_arr(a, d):
    a = _f(a)
    i = np.arange(1, d + 1)
    return d * (d - 1) / 4.0 * np.log(np.pi) + gammaln(a[..., None] + (1.0 - i) / 2.0).sum(-1)


def mnw_kl(q: MatrixNormalWishartParams, p: MatrixNormalWishartParams):
    """KL(q || p) between matrix-normal-Wishart distributions."""
    dy, du = q.d_out, q.d_in
    Kq_inv, logdet_Kq = spd_inv_logdet(q.K)
    logdet_Kp = logdet_from_chol(cholesky(p.K))
    delta = q.M - p.M
    mahal = np.einsum("...ij,...jk,...lk,...il->...", delta, p.K, delta, q.Phi)
    gauss = 0.5 * (
        dy * np.einsum("...ij,...ji->...", p.K, Kq_inv)
        - dy * du
        + dy * (logdet_Kq - logdet_Kp)
        + q.eta * mahal
    )
    return wishart_kl(q.Phi, q.eta, p.Phi, p.eta) + gauss


def nw_kl(q: NormalWishartParams, p: NormalWishartParams):
    return mnw_kl(q.as_mnw(), p.as_mnw())


# ---------------------------------------------------------------------------
# Predictive distributions
# ---------------------------------------------------------------------------


def _check_convention(convention):
    if convention not in CONVENTIONS:
        raise DimensionError(f"unknown dof convention {convention!r}; use one of {CONVENTIONS}")


def predictive_precision_factor(count, d, convention="plus-one"):
    """(precision multiplier, dof) for a Student-t marginal of a Wishart with dof ``count``.

    ``plus-one`` uses dof = count + 1 with the precision scaled by ``count``
    (so ``E[Lambda] = count * Psi`` is the plug-in precision); ``textbook`` uses the
    exact d-dimensional marginal, dof = count - d + 1.
    """
    _check_convention(convention)
    count = _f(count)
    if convention == "plus-one":
        return count, count + 1.0
    return count - d + 1.0, count - d + 1.0


def nw_predictive(nw: NormalWishartParams, convention="plus-one") -> StudentT:
    """Marginal of x under N(x | mu, Lambda) with (mu, Lambda) ~ NW."""
    c, dof = predictive_precision_factor(nw.nu, nw.dim, convention)
    shrink = nw.kappa / (1.0 + nw.kappa)
    scale = spd_inv(nw.Psi) / (c * shrink)[..., None, None]
    return StudentT(nw.m, scale, dof)


def regression_scale_factor(K, u):
    """a = 1 / (1 + u^T K^-1 u), equal to 1 - u^T (K + u u^T)^-1 u."""
    u = _f(u)
    return 1.0 / (1.0 + _quad(u, spd_inv(K)))


def mnw_predictive(mnw: MatrixNormalWishartParams, u, convention="plus-one") -> StudentT:
    """Marginal of y given input ``u`` (bias slot included by the caller)."""
    u = _f(u)
    a = regression_scale_factor(mnw.K, u)
    c, dof = predictive_precision_factor(mnw.eta, mnw.d_out, convention)
    loc = np.einsum("...ij,...j->...i", mnw.M, u)
    scale = spd_inv(mnw.Phi) / (c * a)[..., None, None]
    return StudentT(loc, scale, np.broadcast_to(dof, np.shape(a)))


def student_t_logpdf(t: StudentT, x):
    x = _f(x)
    d = t.dim
    L = cholesky(t.scale)
    diff = x - t.loc
    L_b = np.broadcast_to(L, diff.shape[:-1] + L.shape[-2:])
    z = np.linalg.solve(L_b, diff[..., None])[..., 0]
    maha = np.sum(z * z, axis=-1)
    dof = t.dof
    return (
        gammaln(0.5 * (dof + d))
        - gammaln(0.5 * dof)
        - 0.5 * d * np.log(dof * np.pi)
        - 0.5 * logdet_from_chol(L)
        - 0.5 * (dof + d) * np.log1p(maha / dof)
    )


# ---------------------------------------------------------------------------
# Samplers
# ---------------------------------------------------------------------------


def wishart_sample(rng: np.random.Generator, Psi, nu, size: int):
    """Bartlett-decomposition draws of shape (size, d, d)."""
    Psi = _f(Psi)
    d = Psi.shape[-1]
    L = cholesky(Psi)
    A = np.zeros((size, d, d))
    A[:, np.arange(d), np.arange(d)] = np.sqrt(rng.chisquare(float(nu) - np.arange(d), size=(size, d)))
    rows, cols = np.tril_indices(d, -1)
    A[:, rows, cols] = rng.standard_normal((size, len(rows)))
    LA = L @ A
    return LA @ np.swapaxes(LA, -1, -2)


def nw_sample(rng: np.random.Generator, nw: NormalWishartParams, size: int):
    """Draw (mu, Lambda) pairs; returns arrays of shape (size, d) and (size, d, d)."""
    Lam = wishart_sample(rng, nw.Psi, nw.nu, size)
    C = np.linalg.cholesky(Lam)
    z = rng.standard_normal((size, nw.dim, 1))
    mu = nw.m + np.linalg.solve(np.swapaxes(C, -1, -2), z)[..., 0] / np.sqrt(nw.kappa)
    return mu, Lam


def mnw_sample(rng: np.random.Generator, mnw: MatrixNormalWishartParams, size: int):
    """Draw (A, V) pairs; A has shape (size, d_y, d_u)."""
    V = wishart_sample(rng, mnw.Phi, mnw.eta, size)
    Lv = np.linalg.cholesky(V)
    Lk_inv = np.linalg.inv(cholesky(mnw.K))
    Z = rng.standard_normal((size, mnw.d_out, mnw.d_in))
    A = mnw.M + np.linalg.solve(np.swapaxes(Lv, -1, -2), Z) @ Lk_inv
    return A, V


def gem_sample(rng: np.random.Generator, alpha, truncation: int, size=None):
    """Truncated GEM(alpha) weights; the last stick is set to one so rows sum to one."""
    shape = (truncation,) if size is None else (size, truncation)
    s = rng.beta(1.0, float(alpha), size=shape)
    s = np.where(np.isnan(s), 1.0, s)
    s[..., -1] = 1.0
    carry = np.ones_like(s)
    carry[..., 1:] = np.cumprod(1.0 - s[..., :-1], axis=-1)
    return s * carry
