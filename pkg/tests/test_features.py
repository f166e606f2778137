import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from dplr import features, ilr, metrics
from dplr.data import Dataset
from dplr.errors import DimensionError, ParseError


def test_degree_one_identity_is_identity_plus_bias():
    spec = features.identity_spec(3, 1)
    X = np.arange(6.0).reshape(2, 3)
    np.testing.assert_array_equal(features.apply(spec, X), np.hstack([X, np.ones((2, 1))]))
    np.testing.assert_array_equal(features.apply(spec, X, bias=False), X)


def test_cubic_monomials():
    spec = features.identity_spec(1, 1, degree=3, bias_augmented=False)
    np.testing.assert_array_equal(features.apply(spec, np.array([2.0])), [2.0, 4.0, 8.0])


def test_fitted_spec_standardizes_every_feature():
    rng = np.random.default_rng(0)
    ds = Dataset(rng.normal(3.0, 2.0, (500, 2)), rng.normal(-1.0, 5.0, (500, 2)))
    spec = features.fit_spec(ds, degree=3)
    F = features.apply(spec, ds.X)
    assert F.shape == (500, spec.n_features) == (500, 7)
    np.testing.assert_allclose(F[:, :-1].mean(0), 0.0, atol=1e-12)
    np.testing.assert_allclose(F[:, :-1].std(0), 1.0, atol=1e-12)
    np.testing.assert_array_equal(F[:, -1], 1.0)
    # gate only sees the degree-one block
    np.testing.assert_allclose(features.gate_inputs(spec, ds.X), F[:, :2])


@settings(max_examples=50, deadline=None)
@given(arrays(np.float64, (7, 3), elements=st.floats(-1e6, 1e6)), st.integers(0, 2**31 - 1))
def test_output_round_trip(Y, seed):
    rng = np.random.default_rng(seed)
    ds = Dataset(rng.standard_normal((7, 1)), Y)
    spec = features.fit_spec(ds)
    back = features.invert_output(spec, features.transform_output(spec, Y))
    np.testing.assert_allclose(back, Y, rtol=1e-12, atol=1e-12 * max(1.0, np.abs(Y).max()))


def test_transform_is_deterministic_and_serializes():
    rng = np.random.default_rng(1)
    ds = Dataset(rng.standard_normal((50, 2)), rng.standard_normal((50, 1)))
    spec = features.fit_spec(ds, degree=2)
    again = features.FeatureSpec.from_dict(spec.to_dict())
    assert again.same_as(spec)
    np.testing.assert_array_equal(features.apply(again, ds.X), features.apply(spec, ds.X))


def test_constant_columns_do_not_divide_by_zero():
    ds = Dataset(np.column_stack([np.ones(10), np.arange(10.0)]), np.arange(10.0))
    spec = features.fit_spec(ds)
    assert spec.x_scale[0] == 1.0
    assert np.all(np.isfinite(features.apply(spec, ds.X)))


def test_errors():
    with pytest.raises(DimensionError):
        features.identity_spec(1, 1, degree=0)
    with pytest.raises(DimensionError):
        features.apply(features.identity_spec(2, 1), np.ones((3, 3)))
    with pytest.raises(ParseError):
        features.FeatureSpec.from_dict({"degree": 1})


def test_quality_invariant_under_input_rescaling():
    # one conjugate component: standardization absorbs any affine change of input units
    rng = np.random.default_rng(2)
    X = rng.uniform(-2, 2, (300, 2))
    Y = X @ np.array([[1.0], [-0.5]]) + 0.3 + 0.1 * rng.standard_normal((300, 1))
    cfg = ilr.ILRConfig(truncation=1)
    a, _ = ilr.fit(Dataset(X, Y), cfg, np.random.default_rng(0))
    scale, shift = np.array([1e3, 0.01]), np.array([-50.0, 7.0])
    b, _ = ilr.fit(Dataset(X * scale + shift, Y), cfg, np.random.default_rng(0))
    nmse_a = metrics.nmse(ilr.predict(a, X).mean, Y)
    nmse_b = metrics.nmse(ilr.predict(b, X * scale + shift).mean, Y)
    assert nmse_a < 0.1
    assert abs(nmse_a - nmse_b) < 1e-6
