import numpy as np
import pytest
from sklearn.metrics import f1_score, label_ranking_average_precision_score, r2_score

from obliqua.error_handler import InvalidArgumentError
from obliqua.metrics import evaluate, f1_binary, f1_macro, lrap_weighted, mean_r2, r2
from obliqua.preprocess import HierarchyGraph
from obliqua.tree import Task


def test_r2_examples():
    assert r2([1.0, 2.0, 3.0], [1.0, 2.0, 3.0]) == 1.0
    assert r2([1.0, 2.0, 3.0], [2.0, 2.0, 2.0]) == 0.0
    assert r2([4.0, 4.0], [4.0, 4.0]) == 1.0
    assert r2([4.0, 4.0], [4.0, 5.0]) == float("-inf")
    with pytest.raises(InvalidArgumentError):
        r2([1.0], [1.0])


def test_r2_matches_sklearn(rng):
    y = rng.standard_normal(50)
    yhat = y + 0.5 * rng.standard_normal(50)
    assert r2(y, yhat) == pytest.approx(r2_score(y, yhat), rel=1e-12)


def test_mean_r2_skips_undefined_columns():
    Y = np.array([[1.0, 1.0, 5.0], [2.0, 2.0, 5.0], [3.0, 3.0, 5.0]])
    Yhat = np.array([[1.0, 2.0, 5.0], [2.0, 2.0, 6.0], [3.0, 2.0, 5.0]])
    valor, indefinidos = mean_r2(Y, Yhat)
    assert valor == pytest.approx(0.5)
    assert indefinidos == 1
    valor, indefinidos = mean_r2(Y[:, [2]], Yhat[:, [2]])
    assert np.isnan(valor)
    assert indefinidos == 1


def test_f1_binary_examples():
    assert f1_binary([1, 0, 1], [1, 0, 1]) == 1.0
    assert f1_binary([1, 1, 0], [1, 0, 1]) == pytest.approx(0.5)
    assert f1_binary([0, 0, 0], [0, 0, 0]) == 0.0


def test_f1_macro_examples():
    assert f1_macro([0, 1, 2], [0, 1, 2], 3) == 1.0
    assert f1_macro([0, 1, 2], [0, 1, 1], 3) == pytest.approx(5 / 9)
    # classe ausente conta como 0
    assert f1_macro([0, 1], [0, 1], 3) == pytest.approx(2 / 3)


def test_f1_macro_matches_sklearn(rng):
    y = rng.integers(0, 4, size=60)
    yhat = np.where(rng.random(60) < 0.7, y, rng.integers(0, 4, size=60))
    assert f1_macro(y, yhat, 4) == pytest.approx(f1_score(y, yhat, average="macro"))


def test_lrap_examples():
    assert lrap_weighted(np.array([[1, 0, 1]]), np.array([[0.9, 0.8, 0.7]])) == pytest.approx(5 / 6)
    assert lrap_weighted(np.array([[1, 0]]), np.array([[0.5, 0.5]])) == pytest.approx(0.5)
    assert lrap_weighted(np.array([[0, 1, 1]]), np.array([[0.1, 0.9, 0.8]])) == 1.0


def test_lrap_skips_examples_without_labels():
    Y = np.array([[1, 0], [0, 0]])
    S = np.array([[0.9, 0.1], [0.3, 0.2]])
    valor, ignorados = lrap_weighted(Y, S, return_skipped=True)
    assert valor == 1.0
    assert ignorados == 1
    assert lrap_weighted(np.zeros((2, 2)), S, return_skipped=True) == (0.0, 2)


def test_lrap_matches_sklearn_with_unit_weights(rng):
    Y = (rng.random((40, 6)) < 0.4).astype(float)
    Y[:, 0] = 1.0
    Y[:, 1] = 0.0
    S = rng.standard_normal((40, 6))
    assert lrap_weighted(Y, S) == pytest.approx(label_ranking_average_precision_score(Y, S), rel=1e-12)


def test_lrap_is_invariant_to_monotone_transforms(rng):
    Y = (rng.random((20, 5)) < 0.5).astype(float)
    Y[:, 2] = 1.0
    S = rng.standard_normal((20, 5))
    w = rng.uniform(0.1, 1.0, size=5)
    assert lrap_weighted(Y, np.exp(S), w) == pytest.approx(lrap_weighted(Y, S, w), rel=1e-12)


def test_weighted_lrap_uses_label_weights():
    Y = np.array([[1, 0, 1]])
    S = np.array([[0.9, 0.8, 0.7]])
    # L/R = 1 para o primeiro rótulo e 2/3 para o terceiro
    valor = lrap_weighted(Y, S, np.array([3.0, 1.0, 1.0]))
    assert valor == pytest.approx(0.75 * 1.0 + 0.25 * 2 / 3)


def test_evaluate_picks_metric_per_task():
    y = np.array([[0.0], [1.0], [1.0]])
    assert evaluate(Task.BIN, y, np.array([[0.1], [0.9], [0.5]])).value == 1.0
    assert evaluate(Task.BIN, y, y).name == "f1"
    assert evaluate(Task.STR, np.array([[1.0], [2.0], [3.0]]), np.array([[2.0], [2.0], [2.0]])).value == 0.0
    mcc = np.eye(3)
    resultado = evaluate(Task.MCC, mcc, mcc * 0.6 + 0.1)
    assert (resultado.name, resultado.value) == ("macro_f1", 1.0)
    resultado = evaluate(Task.MLC, np.array([[1, 0], [0, 0]]), np.array([[0.8, 0.2], [0.5, 0.5]]))
    assert (resultado.name, resultado.value, resultado.skipped) == ("lrap", 1.0, 1)
    with pytest.raises(InvalidArgumentError):
        evaluate(Task.MTR, np.ones((2, 2)), np.ones((2, 3)))


def test_evaluate_hmlc_weights_by_depth():
    H = HierarchyGraph.from_edges(["a", "b", "c"], [(0, 1), (1, 2)])
    Y = np.array([[1, 1, 0]])
    S = np.array([[0.2, 0.9, 0.5]])
    resultado = evaluate(Task.HMLC, Y, S, hierarchy=H)
    assert resultado.name == "weighted_lrap"
    # pesos 1 e 0.75: "b" tem L/R = 1, "a" tem L/R = 2/3
    assert resultado.value == pytest.approx((0.75 * 1.0 + 1.0 * 2 / 3) / 1.75)
