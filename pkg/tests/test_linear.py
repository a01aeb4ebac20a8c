"""Logistic regression: gradients, optimizer behaviour, serialization."""

from __future__ import annotations

import json

import numpy as np
import pytest
import scipy.optimize
import scipy.sparse as sp

from bankbench.linear import (
    LogisticModel,
    logreg_gradient,
    logreg_loss,
    train_logreg,
)

from oracles import numerical_gradient


def dense_objective(Xd, y, C):
    """Independent dense formulation of the same objective."""

    def f(theta):
        w, b = theta[:-1], theta[-1]
        z = Xd @ w + b
        bce = np.log1p(np.exp(-np.abs(z))) + np.maximum(z, 0.0) - y * z
        return bce.mean() + (w @ w) / (2.0 * C * len(y))

    return f


def random_problem(rng, n, d):
    Xd = rng.normal(size=(n, d)) * (rng.random(size=(n, d)) < 0.5)
    y = rng.integers(0, 2, size=n).astype(float)
    y[0], y[1] = 0.0, 1.0
    return sp.csr_matrix(Xd), Xd, y


class TestGradients:
    def test_matches_finite_differences(self):
        rng = np.random.default_rng(5)
        for _ in range(20):
            n, d = int(rng.integers(3, 12)), int(rng.integers(1, 6))
            X, Xd, y = random_problem(rng, n, d)
            C = float(rng.uniform(0.1, 5.0))
            theta = rng.normal(size=d + 1)
            grad_w, grad_b = logreg_gradient(X, y, theta[:-1], theta[-1], C)
            want = numerical_gradient(dense_objective(Xd, y, C), theta)
            np.testing.assert_allclose(
                np.concatenate([grad_w, [grad_b]]), want, atol=1e-6
            )

    def test_loss_at_zero_is_log_two(self):
        X = sp.csr_matrix(np.ones((4, 2)))
        y = np.array([0.0, 1.0, 0.0, 1.0])
        assert logreg_loss(X, y, np.zeros(2), 0.0, 1.0) == pytest.approx(
            np.log(2.0)
        )

    def test_loss_stable_at_extreme_scores(self):
        X = sp.csr_matrix(np.array([[1000.0], [-1000.0]]))
        y = np.array([1.0, 0.0])
        loss = logreg_loss(X, y, np.ones(1), 0.0, 1.0)
        # BCE vanishes at huge margins; only the penalty 1/(2*C*n) remains
        assert np.isfinite(loss) and loss == pytest.approx(0.25, abs=1e-12)


class TestTraining:
    def test_reaches_scipy_optimum(self):
        rng = np.random.default_rng(17)
        for _ in range(5):
            X, Xd, y = random_problem(rng, 40, 5)
            C = float(rng.uniform(0.2, 3.0))
            model = train_logreg(X, y, C, tol=1e-9)
            result = scipy.optimize.minimize(
                dense_objective(Xd, y, C), np.zeros(6), method="BFGS",
                options={"gtol": 1e-10},
            )
            got = logreg_loss(
                X, y, np.asarray(model.weights), model.bias, C
            )
            assert got == pytest.approx(result.fun, abs=1e-8)
            np.testing.assert_allclose(
                np.asarray(model.weights), result.x[:-1], atol=1e-4
            )

    def test_loss_history_strictly_decreases(self):
        rng = np.random.default_rng(2)
        X, _, y = random_problem(rng, 60, 8)
        model = train_logreg(X, y, 1.0)
        hist = np.asarray(model.loss_history)
        assert hist[0] == pytest.approx(np.log(2.0))
        assert (np.diff(hist) < 0).all()

    def test_separable_data_gets_high_accuracy(self):
        rng = np.random.default_rng(9)
        n = 100
        y = np.repeat([0.0, 1.0], n // 2)
        Xd = rng.normal(size=(n, 3))
        Xd[:, 0] = np.where(y == 1, 2.0, -2.0) + 0.1 * rng.normal(size=n)
        model = train_logreg(sp.csr_matrix(Xd), y, 1.0)
        proba = model.predict_proba(sp.csr_matrix(Xd))
        assert ((proba > 0.5) == (y == 1)).mean() > 0.97

    def test_weaker_penalty_grows_weights(self):
        rng = np.random.default_rng(4)
        n = 50
        y = np.repeat([0.0, 1.0], n // 2)
        Xd = np.where(y[:, None] == 1, 1.0, -1.0) + 0.01 * rng.normal(size=(n, 1))
        small = train_logreg(sp.csr_matrix(Xd), y, 0.01)
        large = train_logreg(sp.csr_matrix(Xd), y, 100.0)
        assert abs(large.weights[0]) > abs(small.weights[0])

    def test_badly_scaled_features_still_converge(self):
        rng = np.random.default_rng(8)
        X, _, y = random_problem(rng, 30, 3)
        X = X.multiply(1e4).tocsr()
        model = train_logreg(X, y, 1.0)
        assert np.isfinite(model.loss_history).all()
        assert model.loss_history[-1] < model.loss_history[0]

    def test_deterministic(self):
        rng = np.random.default_rng(21)
        X, _, y = random_problem(rng, 30, 4)
        a = train_logreg(X, y, 2.0)
        b = train_logreg(X, y, 2.0)
        assert a.weights == b.weights and a.bias == b.bias

    def test_single_class_is_error(self):
        X = sp.csr_matrix(np.ones((3, 1)))
        with pytest.raises(ValueError, match="class"):
            train_logreg(X, np.ones(3), 1.0)

    def test_nonpositive_C_is_error(self):
        X = sp.csr_matrix(np.ones((2, 1)))
        with pytest.raises(ValueError, match="C"):
            train_logreg(X, np.array([0.0, 1.0]), 0.0)


class TestModelIO:
    def test_roundtrip(self, tmp_path):
        model = LogisticModel(
            weights=(0.5, -1.25), bias=0.75, C=2.0,
            feature_space_ref="feature_space.tsv",
        )
        path = tmp_path / "model.json"
        model.save(path)
        assert LogisticModel.load(path) == model

    def test_file_keys(self, tmp_path):
        model = LogisticModel(weights=(1.0,), bias=0.0, C=1.0)
        path = tmp_path / "model.json"
        model.save(path)
        payload = json.loads(path.read_text())
        assert set(payload) == {"weights", "bias", "C", "feature_space_ref"}

    def test_loss_history_not_serialized(self, tmp_path):
        model = LogisticModel(
            weights=(1.0,), bias=0.0, C=1.0, loss_history=(0.7, 0.2)
        )
        path = tmp_path / "model.json"
        model.save(path)
        assert LogisticModel.load(path).loss_history == ()

    def test_predict_dim_check(self):
        model = LogisticModel(weights=(1.0, 2.0), bias=0.0, C=1.0)
        with pytest.raises(ValueError, match="columns"):
            model.predict_proba(sp.csr_matrix(np.ones((2, 3))))

    def test_decision_linear(self):
        model = LogisticModel(weights=(2.0, -1.0), bias=0.5, C=1.0)
        X = sp.csr_matrix(np.array([[1.0, 1.0], [0.0, 3.0]]))
        np.testing.assert_allclose(model.decision(X), [1.5, -2.5])
