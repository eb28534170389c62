import json

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from windcast import metrics
from windcast.errors import (ConfigError, DimensionError, IntegrityError,
                             UnsupportedVersionError)
from windcast.forecaster import (ForecasterConfig, evaluate, load, persistence_rmse, predict,
                                 save, train)
from windcast.ingest import ModelVariant, NormStats, SupervisedSet, build_supervised, split_indices
from windcast.nn import LstmNetwork

FAST = dict(hidden1=8, max_epochs=8, batch_size=128, learning_rate=1e-2)


@pytest.fixture(scope="module")
def m1_data(synth_small):
    s, _ = synth_small
    return build_supervised(s, "M1", lookback=6, horizon=1, seed=0)


@pytest.fixture(scope="module")
def m1_model(m1_data):
    return train(ForecasterConfig(variant="M1", **FAST), m1_data)


def _constant_set(n=400, value=0.5, noise=False):
    rng = np.random.default_rng(0)
    X = rng.random((n, 6, 1))
    y = rng.random(n) if noise else np.full(n, value)
    tr, va, te = split_indices(n, 0)
    stats = NormStats.from_dict({"wind_speed": [0.0, 25.0], "power": [0.0, 2000.0]})
    return SupervisedSet(X, y, ModelVariant.M1, 6, 1, tr, va, te, stats,
                         last_power=np.full(n, value))


def test_constant_target_learned():
    cfg = ForecasterConfig(variant="M1", hidden1=4, max_epochs=50, batch_size=128,
                           learning_rate=1e-2, early_stop_patience=50)
    model = train(cfg, _constant_set())
    assert model.best_val_rmse < 0.02


def test_training_is_deterministic(m1_data):
    cfg = ForecasterConfig(variant="M1", **FAST)
    a, b = train(cfg, m1_data), train(cfg, m1_data)
    assert a.history == b.history
    for k in a.network.params:
        assert a.network.params[k].tobytes() == b.network.params[k].tobytes()


def test_beats_persistence(m1_data):
    model = train(ForecasterConfig(variant="M1", hidden1=16, max_epochs=30, batch_size=128,
                                   learning_rate=1e-2), m1_data)
    assert model.best_val_rmse < persistence_rmse(m1_data)


def test_best_epoch_is_minimum(m1_model):
    vals = [h["val_rmse"] for h in m1_model.history]
    assert all(m1_model.best_val_rmse <= v for v in vals)
    assert m1_model.best_epoch == int(np.argmin(vals))


def test_fitness_equals_validation_rmse(m1_model, m1_data):
    rep = evaluate(m1_model, m1_data)
    assert rep.splits["validation"]["rmse"] == pytest.approx(m1_model.best_val_rmse, abs=1e-12)


def test_early_stopping_halts():
    # targets unrelated to inputs: validation error stops improving quickly
    cfg = ForecasterConfig(variant="M1", hidden1=4, max_epochs=200, batch_size=128,
                           learning_rate=1e-1, early_stop_patience=2)
    model = train(cfg, _constant_set(noise=True))
    assert len(model.history) < 200


def test_predict_deterministic_and_shape(m1_model, m1_data):
    X, _ = m1_data.split("test")
    a, b = predict(m1_model, X), predict(m1_model, X)
    np.testing.assert_array_equal(a, b)
    assert np.all(np.isfinite(a))
    with pytest.raises(DimensionError):
        predict(m1_model, X[:, :5, :])
    with pytest.raises(DimensionError):
        predict(m1_model, np.concatenate([X, X], axis=2))


def test_batch_equals_loop(m1_model, m1_data):
    X, _ = m1_data.split("test")
    batch = predict(m1_model, X)
    loop = np.array([predict(m1_model, X[i:i + 1])[0] for i in range(len(X))])
    np.testing.assert_allclose(batch, loop, atol=1e-12, rtol=0)


def test_zero_network_outputs_bias():
    net = LstmNetwork.init(3, [5], np.random.default_rng(0))
    for v in net.params.values():
        v[...] = 0.0
    net.params["head.b"][0] = 0.37
    out = net.predict(np.random.default_rng(1).random((4, 6, 3)))
    np.testing.assert_array_equal(out, 0.37)


def test_metric_examples():
    a = np.array([1.0, 2.0, 3.0])
    assert metrics.mae(a, a) == 0 and metrics.rmse(a, a) == 0 and metrics.pearson_r(a, a) == 1
    b = np.array([2.0, 4.0, 6.0])
    assert metrics.mae(a, b) == 2.0
    assert metrics.rmse(a, b) == pytest.approx(2.160246899469287, abs=1e-15)
    assert metrics.pearson_r(a, a[::-1]) == pytest.approx(-1.0, abs=1e-15)


def test_r_undefined_for_constant():
    r = metrics.pearson_r(np.ones(5), np.arange(5.0))
    assert r is None or np.isnan(r)


@given(st.lists(st.floats(-100, 100), min_size=3, max_size=40), st.integers(0, 1000))
def test_metric_properties(values, seed):
    p = np.array(values)
    o = p + np.random.default_rng(seed).normal(size=len(p))
    s = metrics.score(p, o)
    assert s["rmse"] == pytest.approx(np.sqrt(s["mse"]), abs=1e-12)
    r1, r2 = metrics.pearson_r(p, o), metrics.pearson_r(o, p)
    if r1 is None or np.isnan(r1):
        assert r2 is None or np.isnan(r2)
    else:
        assert -1 <= r1 <= 1 and r1 == pytest.approx(r2, abs=1e-12)


def test_denormalized_rmse(m1_model, m1_data):
    rep = evaluate(m1_model, m1_data)
    span = m1_data.norm_stats.span("power")
    for split in ("train", "test"):
        assert rep.splits[split]["rmse_kw"] == pytest.approx(rep.splits[split]["rmse"] * span,
                                                             rel=1e-9)
    rows = list(rep.rows())
    assert ("test", "rmse", rep.test["rmse"]) in rows


def test_config_bounds():
    for bad in (dict(batch_size=64), dict(batch_size=4096), dict(learning_rate=1.0),
                dict(num_layers=3), dict(optimizer="sgd"), dict(dropout_rate=1.0)):
        with pytest.raises(ConfigError):
            ForecasterConfig(**bad)
    assert ForecasterConfig(num_layers=1, hidden2=0).hidden_sizes == [100]
    with pytest.raises(ConfigError):
        ForecasterConfig.from_dict({"layers": 2})


def test_variant_mismatch(m1_data):
    with pytest.raises(ConfigError):
        train(ForecasterConfig(variant="M3", **FAST), m1_data)


def test_checkpoint_round_trip(m1_model, m1_data, tmp_path):
    path = save(m1_model, tmp_path / "m.json")
    back = load(path)
    X, _ = m1_data.split("test")
    np.testing.assert_array_equal(predict(m1_model, X), predict(back, X))
    assert back.config == m1_model.config and back.best_epoch == m1_model.best_epoch


def test_checkpoint_version_error(m1_model, tmp_path):
    path = save(m1_model, tmp_path / "m.json")
    payload = json.loads(path.read_text())
    payload["format_version"] = 2
    path.write_text(json.dumps(payload))
    with pytest.raises(UnsupportedVersionError):
        load(path)


def test_checkpoint_checksum_error(m1_model, tmp_path):
    path = save(m1_model, tmp_path / "m.json")
    payload = json.loads(path.read_text())
    payload["weights"]["head.b"]["data"][0] += 1.0
    path.write_text(json.dumps(payload))
    with pytest.raises(IntegrityError):
        load(path)
    path.write_text("{not json")
    with pytest.raises(IntegrityError):
        load(path)


def test_two_layer_checkpoint_shapes(synth_small, tmp_path):
    s, _ = synth_small
    data = build_supervised(s, "M2", seed=0)
    cfg = ForecasterConfig(variant="M2", num_layers=2, hidden1=6, hidden2=3, max_epochs=2,
                           batch_size=256)
    back = load(save(train(cfg, data), tmp_path / "two.json"))
    assert back.network.hidden_sizes == [6, 3]
    assert back.network.params["l0.U"].shape == (24, 2)
    assert back.network.params["l1.W"].shape == (12, 3)
    assert back.network.params["head.W"].shape == (1, 3)
