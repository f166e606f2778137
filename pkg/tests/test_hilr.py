import mpmath as mp
import numpy as np
import pytest

from dplr import data, features, hilr, ilr
from dplr import distributions as D
from dplr.data import Dataset
from dplr.errors import ConfigError, DimensionError
from dplr.serialization import model_from_json, model_to_json


def small(seed=0, M=2, K=2, n=80, iters=5):
    rng = np.random.default_rng(seed)
    ds = data.gen_triangle(n, rng)
    cfg = hilr.HILRConfig(upper_truncation=M, lower_truncation=K, max_iters=iters)
    model, _ = hilr.h_fit(ds, cfg, rng)
    return model, ds


def test_config_validation():
    cfg = hilr.HILRConfig(upper_truncation=3)
    assert hilr.HILRConfig.from_dict(cfg.to_dict()) == cfg
    with pytest.raises(ConfigError):
        hilr.HILRConfig.from_dict({"truncation": 3})
    with pytest.raises(ConfigError):
        hilr.HILRConfig(lambda0=0.0).validate()


def test_single_cell_responsibilities_are_one():
    model, ds = small(M=1, K=1)
    resp = hilr.h_e_step(model, ds)
    np.testing.assert_array_equal(resp.g, 1.0)
    np.testing.assert_array_equal(resp.r, 1.0)
    np.testing.assert_array_equal(hilr.h_activation_weights(model, np.array([1.0])), [[1.0]])


def test_mirror_components_split_evenly():
    model, ds = small(M=2, K=2)
    twin = model.replace(
        activation_post=model.activation_post[[0, 0]],
        regression_post=model.regression_post[[0, 0]],
        lower_sticks=model.lower_sticks[[0, 0]],
        upper_sticks=D.TruncatedStickBreaking([2.0, 1.0], [2.0, 1.0]),
    )
    np.testing.assert_allclose(hilr.h_e_step(twin, ds).g, 0.5, atol=1e-12)


def _mp_elogdet(phi, eta):
    return mp.digamma(eta / 2) + mp.log(2) + mp.log(phi)


def _mp_linear_term(mnw, m, u, y):
    """E log N(y | B u, V) for a 1-D output under the m-th MNW record, in arbitrary precision."""
    B = mp.matrix([mnw.M[m, 0].tolist()])
    Kinv = mp.inverse(mp.matrix(mnw.K[m].tolist()))
    eta, phi = mp.mpf(mnw.eta[m]), mp.mpf(mnw.Phi[m, 0, 0])
    resid = y - (B * u)[0]
    return _mp_elogdet(phi, eta) / 2 - mp.log(2 * mp.pi) / 2 - (eta * phi * resid**2 + (u.T * Kinv * u)[0]) / 2


def _mp_elog_weights(gamma, alpha):
    G, A = mp.mpf(gamma[0]), mp.mpf(alpha[0])
    return [mp.digamma(G) - mp.digamma(G + A), mp.digamma(A) - mp.digamma(G + A)]


def test_e_step_matches_arbitrary_precision_oracle():
    mp.mp.dps = 40
    model, ds = small(seed=3, M=2, K=2)
    sub = ds.subset([5, 17])
    design = hilr.make_design(model.feature_spec, sub)
    resp = hilr.h_e_step(model, sub)
    elog_omega = _mp_elog_weights(model.upper_sticks.gamma, model.upper_sticks.alpha)
    for n in range(2):
        x, f, y = mp.mpf(design.xg[n, 0]), mp.mpf(design.F[n, 0]), mp.mpf(design.Y[n, 0])
        log_g, r_rows = [], []
        for m in range(2):
            elog_pi = _mp_elog_weights(model.lower_sticks.gamma[m], model.lower_sticks.alpha[m])
            rho = []
            for k in range(2):
                e_act = mp.matrix([[0], [0], [0]])
                e_act[k + 1] = 1
                u_reg = mp.matrix([[f], [0], [0]])
                u_reg[k + 1] = 1
                rho.append(elog_pi[k] + _mp_linear_term(model.activation_post, m, e_act, x)
                           + _mp_linear_term(model.regression_post, m, u_reg, y))
            lse = mp.log(mp.fsum(mp.exp(v) for v in rho))
            r_rows.append([float(mp.exp(v - lse)) for v in rho])
            log_g.append(elog_omega[m] + lse)
        norm = mp.log(mp.fsum(mp.exp(v) for v in log_g))
        np.testing.assert_allclose(resp.g[n], [float(mp.exp(v - norm)) for v in log_g], rtol=1e-11, atol=1e-15)
        np.testing.assert_allclose(resp.r[n], r_rows, rtol=1e-11, atol=1e-15)


def test_responsibilities_normalized():
    model, ds = small(M=3, K=3)
    resp = hilr.h_e_step(model, ds)
    np.testing.assert_allclose(resp.g.sum(1), 1.0, atol=1e-10)
    np.testing.assert_allclose(resp.r.sum(2), 1.0, atol=1e-10)
    np.testing.assert_allclose(resp.joint.sum((1, 2)), 1.0, atol=1e-10)


def test_m_step_zero_upper_column_keeps_prior():
    model, ds = small(M=3, K=2)
    resp = hilr.h_e_step(model, ds)
    g = resp.g.copy()
    g[:, 1] = 0.0
    g /= g.sum(1, keepdims=True)
    post = hilr.h_m_step(model, ds, hilr.HierResponsibilities(g, resp.r))
    for rec_post, rec_prior in ((post.activation_post, model.activation_prior),
                                (post.regression_post, model.regression_prior)):
        for name in rec_post.__dataclass_fields__:
            np.testing.assert_array_equal(getattr(rec_post[1], name), getattr(rec_prior[1], name))
    np.testing.assert_array_equal(post.lower_sticks.gamma[1], model.lower_sticks_prior.gamma[1])


def test_m_step_single_cell_is_conjugate_regression():
    model, ds = small(M=2, K=3, n=50)
    design = hilr.make_design(model.feature_spec, ds)
    N = len(ds)
    g = np.zeros((N, 2))
    g[:, 0] = 1.0
    r = np.zeros((N, 2, 3))
    r[:, :, 1] = 1.0
    post = hilr.h_m_step(model, ds, hilr.HierResponsibilities(g, r))
    # inputs [f, e_1] against the joint prior over [A, c_1..c_K]
    U = np.column_stack([design.F, np.zeros(N), np.ones(N), np.zeros(N)])
    p = model.regression_prior[0]
    K = p.K + U.T @ U
    Mpost = (p.M @ p.K + design.Y.T @ U) @ np.linalg.inv(K)
    Phi_inv = np.linalg.inv(p.Phi) + design.Y.T @ design.Y + p.M @ p.K @ p.M.T - Mpost @ K @ Mpost.T
    q = post.regression_post[0]
    np.testing.assert_allclose(q.K, K, rtol=1e-12, atol=1e-12)
    np.testing.assert_allclose(q.M, Mpost, rtol=1e-9, atol=1e-12)
    np.testing.assert_allclose(q.Phi, np.linalg.inv(Phi_inv), rtol=1e-9)
    assert q.eta == pytest.approx(p.eta + N)
    # untouched lower cells keep their prior bias
    np.testing.assert_allclose(q.M[:, [1, 3]], 0.0, atol=1e-12)


def test_upper_stick_counts():
    model, ds = small(M=2, K=2, n=4)
    g = np.array([[1.0, 0.0], [1.0, 0.0], [1.0, 0.0], [0.0, 1.0]])
    r = np.full((4, 2, 2), 0.5)
    post = hilr.h_m_step(model, ds, hilr.HierResponsibilities(g, r))
    np.testing.assert_array_equal(post.upper_sticks.gamma, [4, 2])
    np.testing.assert_array_equal(post.upper_sticks.alpha, [2, 1])


def test_single_cell_hierarchy_equals_flat_model():
    rng = np.random.default_rng(4)
    ds = data.gen_linear(200, rng)
    kappa0, lambda0 = 0.05, 0.2
    flat, ft = ilr.fit(ds, ilr.ILRConfig(truncation=1, kappa0=kappa0 * lambda0 / (kappa0 + lambda0)), rng)
    hier, ht = hilr.h_fit(ds, hilr.HILRConfig(upper_truncation=1, lower_truncation=1, kappa0=kappa0,
                                              lambda0=lambda0), rng)
    assert ht.elbo_per_iteration[-1] == pytest.approx(ft.elbo_per_iteration[-1], rel=1e-10)
    X = np.linspace(-4, 4, 9)[:, None]
    a, b = ilr.predict(flat, X), hilr.h_predict(hier, X)
    np.testing.assert_allclose(b.mean, a.mean, rtol=1e-10)
    np.testing.assert_allclose(b.std, a.std, rtol=1e-10)


def test_linear_data_uses_one_upper_component():
    rng = np.random.default_rng(5)
    ds = data.gen_linear(500, rng)
    model, _ = hilr.h_fit(ds, hilr.HILRConfig(), rng)
    assert hilr.upper_mass(model, ds).max() > 0.95


def test_parameter_sharing_structure():
    model, ds = small(M=2, K=3, n=300, iters=30)
    table = model.component_table()
    K, d_f = 3, model.d_f
    for m in range(2):
        cells = slice(m * K, (m + 1) * K)
        slopes = table.M[cells, :, :d_f]
        np.testing.assert_array_equal(slopes, np.broadcast_to(slopes[0], slopes.shape))
        np.testing.assert_array_equal(table.Phi_inv[cells], np.broadcast_to(table.Phi_inv[m * K], (K, 1, 1)))
        # gate scales differ only through the scalar center precision
        ratio = table.gate.scale[cells, 0, 0] / table.gate.scale[m * K, 0, 0]
        assert np.all(np.isfinite(ratio))
    X = np.array([[2.3]])
    u = features.apply(model.feature_spec, X, bias=True)[0]
    locs = table.M @ u
    np.testing.assert_allclose(locs[1] - locs[0], table.M[1, :, -1] - table.M[0, :, -1], rtol=1e-12, atol=1e-14)
    w = hilr.h_activation_weights(model, np.linspace(0, 6, 20)[:, None])
    np.testing.assert_allclose(w.sum((1, 2)), 1.0, atol=1e-12)


def test_sequential_single_cell_is_conjugate():
    rng = np.random.default_rng(6)
    ds = data.gen_linear(300, rng)
    b1, b2 = data.split(ds, fractions=(0.4, 0.6))
    cfg = hilr.HILRConfig(upper_truncation=1, lower_truncation=1)
    spec = features.fit_spec(ds, bias_augmented=False)
    m1, _ = hilr.h_fit(b1, cfg, rng, feature_spec=spec)
    m2, _ = hilr.h_sequential_update(m1, b2, cfg, rng)
    ones = hilr.HierResponsibilities(np.ones((len(ds), 1)), np.ones((len(ds), 1, 1)))
    ref = hilr.h_m_step(m1, ds, ones)
    for name in ("M", "K", "Phi", "eta"):
        np.testing.assert_allclose(getattr(m2.regression_post, name), getattr(ref.regression_post, name),
                                   rtol=1e-10, atol=1e-12)
        np.testing.assert_allclose(getattr(m2.activation_post, name), getattr(ref.activation_post, name),
                                   rtol=1e-10, atol=1e-12)
    same, trace = hilr.h_sequential_update(m2, ds.subset(np.arange(0)), cfg)
    assert same is m2 and trace.iterations == 0


def test_biased_spec_rejected():
    ds = data.gen_linear(30, np.random.default_rng(0))
    with pytest.raises(DimensionError):
        hilr.h_fit(ds, hilr.HILRConfig(), np.random.default_rng(0), feature_spec=features.fit_spec(ds))


def test_serialization_and_fast_predictor():
    model, _ = small(M=3, K=3, n=300, iters=20)
    back = model_from_json(model_to_json(model))
    X = np.linspace(-0.5, 6.5, 33)[:, None]
    a, b = hilr.h_predict(model, X), hilr.h_predict(back, X)
    np.testing.assert_allclose(b.mean, a.mean, rtol=1e-12, atol=1e-14)
    np.testing.assert_allclose(b.std, a.std, rtol=1e-12, atol=1e-14)
    mean, std = hilr.predictor(model)(X)
    np.testing.assert_allclose(mean, a.mean, rtol=1e-10, atol=1e-12)
    np.testing.assert_allclose(std, a.std, rtol=1e-10, atol=1e-12)
    mean32 = hilr.predictor(model, np.float32).mean(X)
    np.testing.assert_allclose(mean32, a.mean, atol=1e-4)


def test_elbo_monotone_on_random_init():
    rng = np.random.default_rng(7)
    ds = data.gen_triangle(300, rng)
    _, trace = hilr.h_fit(ds, hilr.HILRConfig(init="random", max_iters=60), rng)
    assert trace.is_monotone()


def test_prior_elbo_is_zero_without_data():
    model, ds = small()
    prior = model.replace(upper_sticks=model.upper_sticks_prior, lower_sticks=model.lower_sticks_prior,
                          activation_post=model.activation_prior, regression_post=model.regression_prior)
    empty = hilr.HierResponsibilities(np.zeros((0, 2)), np.zeros((0, 2, 2)))
    assert hilr.h_elbo(prior, ds.subset(np.arange(0)), empty) == pytest.approx(0.0, abs=1e-10)


def test_dataset_dimension_mismatch():
    model, _ = small()
    with pytest.raises(DimensionError):
        hilr.h_sequential_update(model, Dataset(np.ones((4, 2)), np.ones(4)))
