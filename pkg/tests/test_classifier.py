"""Ridge classifier, metrics, and masked prediction tests."""

import numpy as np
import pytest

from srocket.classifier import (
    DegenerateLabelsError,
    LengthMismatchError,
    WidthMismatchError,
    accuracy,
    compute_metrics,
    confusion_matrix,
    default_alpha_grid,
    fit,
    mcc,
    model_from_dict,
    model_to_dict,
    predict,
    predict_masked,
)
from oracles import normal_equation_ridge, naive_mcc


def random_problem(rng, n, d, classes=2):
    X = rng.standard_normal((n, d))
    y = rng.integers(0, classes, size=n)
    y[:classes] = np.arange(classes)  # every class present
    return X, y


def test_default_alpha_grid_frozen_values():
    grid = default_alpha_grid()
    assert grid.size == 10
    assert grid[0] == pytest.approx(1e-3, rel=1e-12)
    assert grid[1] == pytest.approx(0.004641588833612777, rel=1e-12)
    assert grid[-1] == pytest.approx(1e3, rel=1e-12)
    # log-spacing: constant ratio
    ratios = grid[1:] / grid[:-1]
    np.testing.assert_allclose(ratios, ratios[0], rtol=1e-10)


def test_separable_problem_reaches_full_train_accuracy():
    rng = np.random.default_rng(0)
    y = np.array([0, 0, 0, 0, 0, 1, 1, 1, 1, 1])
    X = rng.standard_normal((10, 4)) * 0.1
    X[:, 0] += np.where(y == 1, 5.0, -5.0)
    model = fit(X, y)
    assert accuracy(predict(model, X), y) == 1.0
    assert model.alpha in default_alpha_grid()


def test_fit_matches_normal_equation_oracle_primal():
    rng = np.random.default_rng(1)
    X, y = random_problem(rng, 20, 5, classes=3)
    alpha = 0.37
    model = fit(X, y, alpha_grid=np.array([alpha]))
    W, b = normal_equation_ridge(X, y, alpha)
    np.testing.assert_allclose(model.weights, W, atol=1e-8)
    np.testing.assert_allclose(model.intercepts, b, atol=1e-12)


def test_fit_matches_normal_equation_oracle_dual():
    rng = np.random.default_rng(2)
    X, y = random_problem(rng, 5, 20)
    alpha = 12.5
    model = fit(X, y, alpha_grid=np.array([alpha]))
    W, b = normal_equation_ridge(X, y, alpha)
    np.testing.assert_allclose(model.weights, W, atol=1e-8)
    np.testing.assert_allclose(model.intercepts, b, atol=1e-12)


def test_alpha_selection_is_deterministic_and_from_grid():
    rng = np.random.default_rng(3)
    X, y = random_problem(rng, 30, 50)
    m1, m2 = fit(X, y), fit(X, y)
    assert m1.alpha == m2.alpha
    assert m1.alpha in default_alpha_grid()
    np.testing.assert_array_equal(m1.weights, m2.weights)
    assert m1.loo_errors.size == 10


def test_alpha_tie_prefers_first_grid_entry():
    rng = np.random.default_rng(4)
    X, y = random_problem(rng, 12, 6)
    grid = np.array([0.5, 0.5, 0.5])
    model = fit(X, y, alpha_grid=grid)
    assert model.alpha == 0.5
    assert model.loo_errors[0] == model.loo_errors[1]


def test_increasing_alpha_weakly_shrinks_weights():
    rng = np.random.default_rng(5)
    for n, d in ((25, 10), (10, 25)):
        X, y = random_problem(rng, n, d)
        norms = [np.linalg.norm(fit(X, y, alpha_grid=np.array([a])).weights)
                 for a in default_alpha_grid()]
        assert all(norms[i] >= norms[i + 1] - 1e-12 for i in range(len(norms) - 1))


def test_degenerate_labels_rejected():
    X = np.random.default_rng(0).standard_normal((6, 3))
    with pytest.raises(DegenerateLabelsError):
        fit(X, np.zeros(6, dtype=int))


def test_prediction_tie_breaks_to_lowest_class():
    # duplicate weight columns make class scores exactly equal
    rng = np.random.default_rng(6)
    X, y = random_problem(rng, 12, 4, classes=2)
    model = fit(X, y, alpha_grid=np.array([1.0]))
    model.weights[:, 1] = model.weights[:, 0]
    model.intercepts[1] = model.intercepts[0]
    preds = predict(model, rng.standard_normal((20, 4)))
    assert np.all(preds == 0)


def test_predict_width_mismatch():
    rng = np.random.default_rng(7)
    X, y = random_problem(rng, 10, 4)
    model = fit(X, y)
    with pytest.raises(WidthMismatchError):
        predict(model, rng.standard_normal((3, 5)))
    with pytest.raises(WidthMismatchError):
        predict_masked(model, rng.standard_normal((3, 4)), np.ones(5))


def test_masked_all_ones_is_bitwise_identical_to_predict():
    rng = np.random.default_rng(8)
    X, y = random_problem(rng, 40, 30, classes=3)
    model = fit(X, y)
    F = rng.standard_normal((100, 30))
    np.testing.assert_array_equal(predict_masked(model, F, np.ones(30)), predict(model, F))


def test_masked_all_zeros_predicts_constant_intercept_argmax():
    rng = np.random.default_rng(9)
    X = rng.standard_normal((30, 8))
    y = np.array([0] * 20 + [1] * 10)  # class 0 has the larger intercept
    model = fit(X, y)
    preds = predict_masked(model, rng.standard_normal((15, 8)), np.zeros(8))
    assert np.all(preds == np.argmax(model.intercepts))


def test_masked_columns_contribute_exactly_zero():
    rng = np.random.default_rng(10)
    X, y = random_problem(rng, 25, 12)
    model = fit(X, y)
    F = rng.standard_normal((9, 12))
    state = np.ones(12)
    state[[3, 7]] = 0
    base = predict_masked(model, F, state)
    F2 = F.copy()
    F2[:, [3, 7]] = 1e9  # arbitrary junk in masked columns
    np.testing.assert_array_equal(predict_masked(model, F2, state), base)


def test_accuracy_values_and_errors():
    assert accuracy(np.array([1, 0, 1, 1]), np.array([1, 1, 1, 0])) == 0.5
    assert accuracy(np.array([2, 2]), np.array([2, 2])) == 1.0
    assert accuracy(np.array([0, 1, 2, 1]), np.array([0, 1, 2, 2])) == 0.75
    with pytest.raises(LengthMismatchError):
        accuracy(np.array([1, 2]), np.array([1]))
    with pytest.raises(LengthMismatchError):
        accuracy(np.array([]), np.array([]))


def test_confusion_matrix_row_sums_are_true_counts():
    truth = np.array([0, 0, 1, 2, 2, 2])
    preds = np.array([0, 1, 1, 2, 0, 2])
    cm = confusion_matrix(preds, truth, 3)
    np.testing.assert_array_equal(cm.sum(axis=1), [2, 1, 3])
    assert cm.trace() == 4


def test_mcc_frozen_binary_value():
    # TP=2, TN=1, FP=0, FN=1 -> 2/sqrt(12)
    preds = np.array([1, 1, 0, 0])
    truth = np.array([1, 1, 0, 1])
    assert mcc(preds, truth, 2) == pytest.approx(2.0 / np.sqrt(12.0), abs=1e-12)


def test_mcc_perfect_and_degenerate():
    y = np.array([0, 1, 2, 0, 1, 2])
    assert mcc(y, y, 3) == 1.0
    assert mcc(np.zeros(6, dtype=int), y, 3) == 0.0  # constant prediction


def test_mcc_matches_naive_oracle_on_random_cases():
    rng = np.random.default_rng(11)
    for _ in range(200):
        c = int(rng.integers(2, 5))
        n = int(rng.integers(2, 40))
        preds = rng.integers(0, c, n)
        truth = rng.integers(0, c, n)
        got = mcc(preds, truth, c)
        assert got == pytest.approx(naive_mcc(preds, truth, c), abs=1e-12)
        assert -1.0 <= got <= 1.0


def test_compute_metrics_bundle():
    preds = np.array([0, 1, 1])
    truth = np.array([0, 1, 0])
    m = compute_metrics(preds, truth, 2)
    assert m.accuracy == pytest.approx(2.0 / 3.0)
    assert m.confusion.shape == (2, 2)


def test_model_json_roundtrip_is_exact(tmp_path):
    import json

    rng = np.random.default_rng(12)
    X, y = random_problem(rng, 20, 6, classes=3)
    model = fit(X, y)
    payload = json.loads(json.dumps(model_to_dict(model)))
    back = model_from_dict(payload)
    np.testing.assert_array_equal(back.weights, model.weights)
    np.testing.assert_array_equal(back.intercepts, model.intercepts)
    np.testing.assert_array_equal(back.scaler_mean, model.scaler_mean)
    np.testing.assert_array_equal(back.scaler_std, model.scaler_std)
    assert back.alpha == model.alpha
    F = rng.standard_normal((10, 6))
    np.testing.assert_array_equal(predict(back, F), predict(model, F))


def test_constant_feature_columns_survive_standardization():
    rng = np.random.default_rng(13)
    X = rng.standard_normal((15, 5))
    X[:, 2] = 4.2  # constant column: std floored, z-scores become 0
    y = rng.integers(0, 2, 15)
    y[:2] = [0, 1]
    model = fit(X, y)
    assert np.all(np.isfinite(model.weights))
    preds = predict(model, X)
    assert preds.shape == (15,)
