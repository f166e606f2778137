import json

import numpy as np
import pytest

from dplr import benchmarks, features, ilr, metrics
from dplr import distributions as D
from dplr.data import Dataset
from dplr.errors import DimensionError, ParseError
from dplr.predictive import ComponentTable, predict_table
from dplr.serialization import model_from_json, model_to_json


def two_component_table(dof=(5.0, 5.0)):
    gate = D.StudentT(np.array([[-1.0], [1.0]]), np.full((2, 1, 1), 0.25), np.array([4.0, 4.0]))
    return ComponentTable(
        np.log([0.5, 0.5]), gate,
        M=np.array([[[1.0, 0.0]], [[-1.0, 2.0]]]),
        Kinv=np.tile(np.eye(2) * 0.01, (2, 1, 1)),
        Phi_inv=np.full((2, 1, 1), 0.04),
        factor=np.array([1.0, 1.0]),
        dof=np.array(dof),
    )


def test_mean_prediction_obeys_total_variance():
    table = two_component_table()
    spec = features.identity_spec(1, 1)
    p = predict_table(table, spec, np.array([0.2]))
    w = p.mixture.weights
    loc = p.mixture.components.loc[:, 0]
    var = p.mixture.components.covariance[:, 0, 0]
    assert p.mean[0] == pytest.approx(w @ loc)
    assert p.std[0] ** 2 == pytest.approx(w @ (var + loc**2) - (w @ loc) ** 2)
    q = predict_table(table, spec, np.array([0.2]), "mode")
    assert q.top_component == np.argmax(w)
    assert q.mean[0] == pytest.approx(loc[q.top_component])


def test_heavy_tails_report_missing_covariance():
    table = two_component_table(dof=(2.0, 5.0))
    spec = features.identity_spec(1, 1)
    p = predict_table(table, spec, np.array([[0.0]]))
    assert not p.covariance_available[0]
    assert np.isnan(p.std[0, 0])
    far = predict_table(table, spec, np.array([[1.0]]), "mode")
    assert far.top_component[0] == 1 and far.covariance_available[0]


def test_tie_breaks_to_lowest_index():
    table = two_component_table()
    p = predict_table(table, features.identity_spec(1, 1), np.array([[0.0]]), "mode")
    assert p.top_component[0] == 0


def test_underflow_falls_back_to_uniform_weights():
    table = two_component_table()
    table = ComponentTable(np.array([-np.inf, -np.inf]), table.gate, table.M, table.Kinv, table.Phi_inv,
                           table.factor, table.dof)
    p = predict_table(table, features.identity_spec(1, 1), np.array([[0.0]]))
    assert p.mixture.fallback[0]
    np.testing.assert_allclose(p.mixture.weights, 0.5)


def test_fast_predictor_on_synthetic_inverse_dynamics_model():
    model = benchmarks.synthetic_latency_model(components=200, rng=0)
    X = np.random.default_rng(1).standard_normal((5, 21))
    ref = ilr.predict(model, X)
    mean, std = ilr.predictor(model)(X)
    np.testing.assert_allclose(mean, ref.mean, rtol=1e-9, atol=1e-10)
    np.testing.assert_allclose(std, ref.std, rtol=1e-9, atol=1e-10)
    np.testing.assert_allclose(ilr.predictor(model, np.float32).mean(X), ref.mean, rtol=1e-3, atol=1e-3)


def test_metrics():
    y = np.array([[1.0], [2.0], [3.0]])
    assert metrics.mse(y, y) == 0.0
    assert metrics.nmse(np.full_like(y, 2.0), y) == pytest.approx(1.0)
    two = np.column_stack([y[:, 0], 10 * y[:, 0]])
    pred = two + np.array([[1.0, 10.0]])
    assert metrics.nmse(pred, two) == pytest.approx(1.5)
    with pytest.raises(DimensionError):
        metrics.nmse(y, np.ones_like(y))
    with pytest.raises(DimensionError):
        metrics.mse(y, y[:2])


def test_malformed_model_json():
    with pytest.raises(ParseError):
        model_from_json("{not json")
    with pytest.raises(ParseError):
        model_from_json('{"kind": "other"}')
    rng = np.random.default_rng(0)
    model, _ = ilr.fit(Dataset(rng.standard_normal(40), rng.standard_normal(40)), ilr.ILRConfig(truncation=3), rng)
    d = model.to_dict()
    d["truncation"] = 4
    with pytest.raises(ParseError):
        model_from_json(json.dumps(d))
    del d["activation"]
    with pytest.raises(ParseError):
        model_from_json(json.dumps(d))
    assert model_from_json(model_to_json(model)).to_dict() == model.to_dict()
