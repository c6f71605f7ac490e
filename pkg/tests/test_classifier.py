"""Gradient-descent logistic regression and metrics tests."""

import numpy as np
import pytest
from sklearn.base import clone

from poisonlab import (
    LogisticRegressionGD,
    Metrics,
    ModelConfig,
    evaluate,
    feature_importance,
    from_arrays,
    model_from_dict,
    model_to_dict,
    predict,
    predict_proba,
    roc_auc,
    standardize,
    train,
)

from oracles import oracle_auc, oracle_confusion, oracle_train
from synth import two_gaussians


def fixed_model(weights, bias, config=None):
    """Model with hand-set parameters, bypassing training."""
    payload = {
        "weights": list(map(float, weights)),
        "bias": float(bias),
        "config": (config or ModelConfig()).to_dict(),
        "trained_on": None,
    }
    return model_from_dict(payload)


class TestTraining:
    def test_matches_independent_oracle(self):
        ds = standardize(two_gaussians(n=120, seed=8))
        model = train(ds, ModelConfig())
        w, b = oracle_train(ds.X, ds.y)
        assert np.array_equal(model.weights_, w)
        assert model.bias_ == b

    def test_loss_curve_starts_at_log2_and_decreases(self):
        ds = standardize(two_gaussians(n=80, seed=1))
        model = train(ds, ModelConfig())
        curve = model.loss_curve_
        assert curve[0] == pytest.approx(np.log(2.0), abs=1e-12)
        assert len(curve) == model.n_epochs_ + 1
        diffs = np.diff(curve)
        assert np.all(diffs <= 1e-12)

    def test_single_class_rejected(self):
        X = np.random.default_rng(0).normal(size=(10, 2))
        with pytest.raises(ValueError):
            LogisticRegressionGD().fit(X, np.ones(10))

    def test_label_domain_rejected(self):
        X = np.zeros((4, 2))
        with pytest.raises(ValueError):
            LogisticRegressionGD().fit(X, np.array([0, 1, 0, 1]))

    def test_deterministic(self):
        ds = standardize(two_gaussians(n=60, seed=3))
        a = train(ds, ModelConfig())
        b = train(ds, ModelConfig())
        assert np.array_equal(a.weights_, b.weights_)
        assert a.bias_ == b.bias_

    def test_separable_data_high_accuracy(self):
        ds = standardize(two_gaussians(n=200, center=3.0, seed=4))
        model = train(ds, ModelConfig())
        assert evaluate(model, ds).accuracy >= 0.99

    def test_convergence_tol_stops_early(self):
        ds = standardize(two_gaussians(n=60, seed=3))
        model = train(ds, ModelConfig(convergence_tol=1e-2))
        assert model.n_epochs_ < 2000

    def test_trained_on_fingerprint(self):
        ds = standardize(two_gaussians(n=60, seed=3))
        model = train(ds, ModelConfig())
        assert model.trained_on_ == ds.fingerprint()

    def test_sklearn_clone_compatible(self):
        est = LogisticRegressionGD(learning_rate=0.2, max_epochs=10)
        cloned = clone(est)
        assert cloned.get_params() == est.get_params()


class TestMirrorSymmetry:
    """Sign symmetries of the zero-initialized gradient-descent trainer."""

    def setup_method(self):
        self.ds = standardize(two_gaussians(n=100, seed=13))
        self.base = train(self.ds, ModelConfig())

    def retrain(self, X, y):
        return LogisticRegressionGD().fit(X, y)

    def test_labels_flipped_negates_weights_and_bias(self):
        m = self.retrain(self.ds.X, -self.ds.y)
        assert np.allclose(m.weights_, -self.base.weights_, atol=1e-12)
        assert m.bias_ == pytest.approx(-self.base.bias_, abs=1e-12)

    def test_features_negated_negates_weights_keeps_bias(self):
        m = self.retrain(-self.ds.X, self.ds.y)
        assert np.allclose(m.weights_, -self.base.weights_, atol=1e-12)
        assert m.bias_ == pytest.approx(self.base.bias_, abs=1e-12)

    def test_both_transforms_keep_weights_negate_bias(self):
        m = self.retrain(-self.ds.X, -self.ds.y)
        assert np.allclose(m.weights_, self.base.weights_, atol=1e-12)
        assert m.bias_ == pytest.approx(-self.base.bias_, abs=1e-12)
        # in every case the magnitudes agree
        assert np.allclose(np.abs(m.weights_), np.abs(self.base.weights_))
        assert abs(m.bias_) == pytest.approx(abs(self.base.bias_))


class TestPrediction:
    def test_tie_predicts_positive(self):
        model = fixed_model([1.0, 0.0], 0.0)
        assert predict(model, np.array([0.0, 5.0])) == 1
        assert predict(model, np.array([-0.1, 0.0])) == -1

    def test_probability_halves_at_boundary(self):
        model = fixed_model([1.0, 0.0], 0.0)
        assert predict_proba(model, np.array([0.0, 0.0])) == pytest.approx(0.5)

    def test_proba_columns_sum_to_one(self):
        ds = standardize(two_gaussians(n=40, seed=2))
        model = train(ds, ModelConfig())
        proba = model.predict_proba(ds.X)
        assert np.allclose(proba.sum(axis=1), 1.0)
        assert np.array_equal(model.positive_proba(ds.X), proba[:, 1])

    def test_extreme_scores_clip_not_overflow(self):
        model = fixed_model([1000.0], 0.0)
        p = predict_proba(model, np.array([[1000.0], [-1000.0]]))
        assert p[0] == pytest.approx(1.0)
        assert p[1] == pytest.approx(0.0)
        assert 0.0 < p[1] and p[0] < 1.0

    def test_scalar_and_batch_forms(self):
        model = fixed_model([2.0, -1.0], 0.5)
        single = predict_proba(model, np.array([0.3, 0.4]))
        batch = predict_proba(model, np.array([[0.3, 0.4]]))
        assert isinstance(single, float)
        assert single == batch[0]
        assert predict(model, np.array([[0.3, 0.4]]))[0] == predict(
            model, np.array([0.3, 0.4])
        )

    def test_dimension_mismatch(self):
        model = fixed_model([1.0, 2.0], 0.0)
        with pytest.raises(ValueError):
            model.decision_function(np.zeros((3, 5)))


class TestMetrics:
    def test_hand_computed_confusion(self):
        model = fixed_model([1.0], 0.0)
        X = np.array([[-2.0], [-1.0], [1.0], [-0.5], [2.0], [0.5]])
        y = np.array([-1, -1, -1, 1, 1, 1])
        ds = from_arrays(X, y)
        m = evaluate(model, ds)
        # predictions: -1, -1, +1, -1, +1, +1
        assert (m.tn, m.fn, m.tp, m.fp) == (2, 1, 2, 1)
        assert m.accuracy == pytest.approx(4 / 6)
        assert m.recall == pytest.approx(2 / 3)
        assert m.f1 == pytest.approx(2 / 3)

    def test_against_longhand_oracle(self):
        rng = np.random.default_rng(5)
        ds = standardize(two_gaussians(n=100, center=1.0, seed=5))
        model = train(ds, ModelConfig())
        m = evaluate(model, ds)
        expected = oracle_confusion(ds.y, model.predict(ds.X))
        for key, val in expected.items():
            assert getattr(m, key) == pytest.approx(val)
        scores = model.decision_function(ds.X)
        assert m.roc_auc == pytest.approx(oracle_auc(ds.y, scores))

    def test_auc_with_ties(self):
        y = np.array([-1, -1, 1, 1, -1, 1])
        scores = np.array([0.1, 0.4, 0.4, 0.8, 0.4, 0.4])
        assert roc_auc(y, scores) == pytest.approx(oracle_auc(y, scores))

    def test_auc_single_class_none(self):
        assert roc_auc(np.array([1, 1]), np.array([0.2, 0.4])) is None

    def test_f1_zero_when_no_true_positives(self):
        model = fixed_model([0.0], -1.0)  # predicts everything negative
        ds = from_arrays(np.array([[1.0], [2.0]]), np.array([-1, 1]))
        m = evaluate(model, ds)
        assert m.tp == 0
        assert m.f1 == 0.0
        assert m.recall == 0.0

    def test_round_trip(self):
        m = Metrics(tn=1, fn=2, tp=3, fp=4, accuracy=0.4, recall=0.6, f1=0.5, roc_auc=0.7)
        assert Metrics.from_dict(m.to_dict()) == m


class TestFeatureImportance:
    def test_descending_with_index_ties(self):
        model = fixed_model([0.5, -0.5, 1.0], 0.0)
        ranking = feature_importance(model)
        assert ranking == [(2, 1.0), (0, 0.5), (1, 0.5)]

    def test_covers_all_features(self):
        ds = standardize(two_gaussians(n=40, d=6, seed=9))
        model = train(ds, ModelConfig())
        ranking = feature_importance(model)
        assert sorted(i for i, _ in ranking) == list(range(6))
        mags = [v for _, v in ranking]
        assert mags == sorted(mags, reverse=True)


class TestSerialization:
    def test_model_round_trip_exact(self):
        ds = standardize(two_gaussians(n=50, seed=6))
        model = train(ds, ModelConfig())
        back = model_from_dict(model_to_dict(model))
        assert np.array_equal(back.weights_, model.weights_)
        assert back.bias_ == model.bias_
        assert back.config() == model.config()
        assert back.trained_on_ == model.trained_on_
        assert np.array_equal(back.predict(ds.X), model.predict(ds.X))

    def test_model_config_round_trip(self):
        cfg = ModelConfig(learning_rate=0.05, l2_lambda=0.01, max_epochs=5, convergence_tol=1e-3)
        assert ModelConfig.from_dict(cfg.to_dict()) == cfg
