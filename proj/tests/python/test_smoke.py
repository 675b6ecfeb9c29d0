"""Smoke tests for the python bindings."""

import json
import math

import numpy as np
import pytest

import ecrank


def test_primes():
    assert ecrank.primes_up_to(10) == [2, 3, 5, 7]
    assert len(ecrank.primes_up_to(10000)) == 1229


def test_legendre():
    assert ecrank.legendre(0, 7) == 0
    assert ecrank.legendre(1, 7) == 1
    assert ecrank.legendre(3, 7) == -1
    with pytest.raises(ValueError):
        ecrank.legendre(3, 15)


def test_ap_11a1():
    curve = [0, -1, 1, -10, -20]
    assert ecrank.ap(curve, 11, 2) == -2
    assert ecrank.ap(curve, 11, 3) == -1
    assert ecrank.ap(curve, 11, 5) == 1
    assert ecrank.ap(curve, 11, 11) == 1  # split multiplicative


def test_trace_vector():
    tv = ecrank.trace_vector([0, -1, 1, -10, -20], 11, 100)
    assert len(tv["primes"]) == 25
    assert tv["ap"][:5] == [-2, -1, 1, -2, 1]
    np.testing.assert_allclose(tv["normalized"][0], -2 / (2 * math.sqrt(2)), rtol=1e-14)
    assert np.all(np.abs(tv["normalized"]) <= 1.0)


def test_sato_tate():
    batch = ecrank.sample_sato_tate(20000, 30, seed=5)
    assert batch.shape == (20000, 10)
    assert np.all(batch >= -1) and np.all(batch <= 1)
    assert abs(batch.mean()) < 0.01
    assert abs((batch**2).mean() - 0.25) < 0.01
    again = ecrank.sample_sato_tate(20000, 30, seed=5)
    np.testing.assert_array_equal(batch, again)


def test_param_count():
    pc = ecrank.param_count(num_classes=4)
    assert pc["total"] == 1294756
    assert [row["params"] for row in pc["layers"]] == [
        64, 0, 1568, 0, 6208, 0, 0, 1269888, 16512, 516,
    ]
    assert ecrank.param_count(num_classes=5)["total"] == 1294885


def test_mn_sum():
    value = ecrank.mn_sum([1, 0], 3)
    assert value == pytest.approx((math.log(2) / 2) / math.log(3), rel=1e-12)


@pytest.fixture(scope="module")
def toy_model():
    rng = np.random.default_rng(7)
    pattern = rng.choice([-1.0, 1.0], size=25)
    n = 400
    labels = rng.integers(0, 2, size=n)
    signs = np.where(labels == 0, 1.0, -1.0)
    features = signs[:, None] * pattern[None, :] * 0.5
    features += rng.uniform(-0.1, 0.1, size=features.shape)
    model = ecrank.Model.train(
        features, labels.astype(np.int64), epochs=10, seed=3, batch_size=64
    )
    return model, features, labels


def test_training_learns_separable_toy(toy_model):
    model, features, labels = toy_model
    manifest = json.loads(model.manifest_json)
    assert manifest["epochs"][-1]["test_accuracy"] == 1.0
    correct = sum(model.predict(features[i]) == labels[i] for i in range(60))
    assert correct == 60


def test_saliency_shapes_and_probabilities(toy_model):
    model, features, _ = toy_model
    x = features[0]
    probs = model.probabilities(x)
    assert probs.shape == (5,)
    assert probs.sum() == pytest.approx(1.0, abs=1e-12)
    grad = model.input_gradient(x, model.predict(x))
    assert grad.shape == (25,)
    assert np.any(grad != 0)


def test_save_load_round_trip(tmp_path, toy_model):
    model, features, _ = toy_model
    path = str(tmp_path / "model.eckp")
    model.save(path)
    loaded = ecrank.Model.load(path)
    x = features[3]
    np.testing.assert_array_equal(loaded.scores(x), model.scores(x))
    assert loaded.predict(x) == model.predict(x)
