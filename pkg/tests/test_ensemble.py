from dataclasses import replace

import numpy as np
import pytest

from obliqua.data import Dataset
from obliqua.ensemble import (
    EnsembleConfig,
    EnsembleModel,
    decode_predictions,
    deserialize_model,
    fit_ensemble,
    load_model,
    predict,
    save_model,
    serialize_model,
    summarize_model,
    tree_seed,
)
from obliqua.error_handler import InvalidArgumentError, ModelFormatError
from obliqua.metrics import evaluate
from obliqua.tree import GrowConfig, Leaf, Task, Tree, grow, serialize


def _constant_tree(valor, d=2):
    return Tree(Leaf(np.array([valor]), 1), Task.STR, d, 1, 1)


@pytest.fixture
def dataset(regression_data):
    X, Y = regression_data
    return Dataset(X, Y, Task.MTR, feature_names=("a", "b", "c", "d"), label_names=("y1", "y2"))


def test_tree_seeds_are_deterministic_and_distinct():
    sementes = [tree_seed(42, t) for t in range(100)]
    assert sementes == [tree_seed(42, t) for t in range(100)]
    assert len(set(sementes)) == 100
    assert tree_seed(42, 0) != tree_seed(43, 0)
    assert all(0 <= s < 2 ** 64 for s in sementes)


def test_config_validation():
    with pytest.raises(InvalidArgumentError):
        EnsembleConfig(mode="boosting")
    with pytest.raises(InvalidArgumentError):
        EnsembleConfig(n_trees=0)
    with pytest.raises(InvalidArgumentError):
        EnsembleConfig(grow=GrowConfig(variant="oc1"))
    assert EnsembleConfig(mode="single", n_trees=30).tree_count == 1


def test_random_forest_uses_square_root_of_features():
    cfg = EnsembleConfig(mode="random_forest")
    assert cfg.grow_config_for(16).feature_subset_fraction == pytest.approx(0.25)
    assert EnsembleConfig(mode="bagging").grow_config_for(16).feature_subset_fraction == 1.0


def test_single_mode_equals_grow_with_first_tree_seed(dataset):
    cfg = EnsembleConfig(mode="single", grow=GrowConfig(max_depth=3), master_seed=5)
    modelo = fit_ensemble(dataset, cfg)
    assert len(modelo.trees) == 1
    esperado = grow(
        dataset.X, dataset.Y, dataset.Z, dataset.p,
        replace(cfg.grow, seed=tree_seed(5, 0)), Task.MTR,
    )
    assert serialize(modelo.trees[0]) == serialize(esperado)


def test_same_seed_gives_identical_model_bytes(dataset):
    cfg = EnsembleConfig(n_trees=4, grow=GrowConfig(max_depth=3), master_seed=9)
    assert serialize_model(fit_ensemble(dataset, cfg)) == serialize_model(fit_ensemble(dataset, cfg))


@pytest.mark.parametrize("variante", ["svm", "grad", "axis"])
@pytest.mark.parametrize("modo", ["single", "bagging", "random_forest"])
def test_result_does_not_depend_on_worker_count(dataset, variante, modo):
    cfg = EnsembleConfig(n_trees=6, mode=modo, grow=GrowConfig(variant=variante, max_depth=3), master_seed=1)
    sequencial = fit_ensemble(dataset, cfg)
    paralelo = fit_ensemble(dataset, replace(cfg, workers=3))
    assert serialize_model(sequencial) == serialize_model(paralelo)


def test_prediction_is_mean_of_trees(dataset):
    modelo = fit_ensemble(dataset, EnsembleConfig(n_trees=3, grow=GrowConfig(max_depth=2)))
    esperado = np.mean([arvore.predict(dataset.X) for arvore in modelo.trees], axis=0)
    np.testing.assert_allclose(predict(modelo, dataset.X), esperado)
    assert modelo.metadata["feature_names"] == ["a", "b", "c", "d"]


def test_two_constant_trees_average():
    modelo = EnsembleModel([_constant_tree(0.0), _constant_tree(1.0)], Task.STR)
    np.testing.assert_allclose(predict(modelo, np.zeros((1, 2))), [[0.5]])
    with pytest.raises(InvalidArgumentError):
        predict(modelo, np.zeros((1, 3)))


def test_decode_predictions():
    np.testing.assert_array_equal(decode_predictions(np.array([[0.5], [0.49]]), Task.BIN), [[1], [0]])
    np.testing.assert_array_equal(decode_predictions(np.array([[0.2, 0.5, 0.3]]), Task.MCC), [1])
    np.testing.assert_array_equal(decode_predictions(np.array([[0.5, 0.5]]), Task.MCC), [0])
    np.testing.assert_array_equal(decode_predictions(np.array([[0.7, 0.2]]), Task.MLC), [[1, 0]])
    escores = np.array([[1.5, -2.0]])
    np.testing.assert_array_equal(decode_predictions(escores, Task.MTR), escores)


def test_model_round_trip(tmp_path, dataset):
    modelo = fit_ensemble(dataset, EnsembleConfig(n_trees=3, grow=GrowConfig(max_depth=3), master_seed=2))
    caminho = tmp_path / "modelo.opce"
    save_model(caminho, modelo)
    copia = load_model(caminho)
    assert copia.task is Task.MTR
    assert copia.metadata == modelo.metadata
    assert copia.config == modelo.config
    assert serialize_model(copia) == caminho.read_bytes()
    np.testing.assert_array_equal(predict(copia, dataset.X), predict(modelo, dataset.X))


def test_bare_tree_file_is_accepted():
    arvore = _constant_tree(3.0)
    modelo = deserialize_model(serialize(arvore))
    assert len(modelo.trees) == 1
    np.testing.assert_allclose(predict(modelo, np.zeros((2, 2))), [[3.0], [3.0]])


def test_corrupted_model_files():
    dados = serialize_model(EnsembleModel([_constant_tree(0.0), _constant_tree(1.0)], Task.STR))
    with pytest.raises(ModelFormatError) as erro:
        deserialize_model(b"ABCD" + dados[4:])
    assert erro.value.offset == 0
    with pytest.raises(ModelFormatError):
        deserialize_model(dados[:-5])
    with pytest.raises(ModelFormatError):
        deserialize_model(dados + b"\x01")


def test_summarize_model(dataset):
    modelo = EnsembleModel([_constant_tree(0.0), _constant_tree(1.0)], Task.STR)
    resumo = summarize_model(modelo)
    assert resumo["trees"] == 2
    assert resumo["nodes"] == resumo["leaves"] == 2
    assert resumo["mean_nonzero_weights"] == 0.0
    treinado = summarize_model(fit_ensemble(dataset, EnsembleConfig(n_trees=2, grow=GrowConfig(max_depth=2))))
    assert treinado["nodes"] == treinado["leaves"] + treinado["splits"]
    assert treinado["max_depth"] <= 2


def test_axis_variant_in_ensemble(dataset):
    modelo = fit_ensemble(dataset, EnsembleConfig(n_trees=2, grow=GrowConfig(variant="axis", max_depth=2)))
    for arvore in modelo.trees:
        for no in arvore.split_nodes():
            assert no.plane.nonzero == 1


@pytest.mark.slow
def test_bagging_learns_oblique_toy(toy):
    X, y = toy
    dados = Dataset(X, y[:, None], Task.BIN)
    modelo = fit_ensemble(dados, EnsembleConfig(n_trees=50, mode="bagging", master_seed=0))
    previsto = decode_predictions(predict(modelo, X), Task.BIN).ravel()
    assert np.mean(previsto == y) >= 0.98


def _nonlinear_regression(indice, semente, n=160, d=6):
    gerador = np.random.default_rng([indice, semente])
    X = gerador.standard_normal((n, d))
    W = gerador.standard_normal((d, 2))
    Y = X @ W + np.sin(2.0 * X[:, :2]) + 0.5 * gerador.standard_normal((n, 2))
    return X, Y


@pytest.mark.slow
@pytest.mark.parametrize("variante", ["svm", "grad"])
def test_bagging_is_not_worse_than_a_single_tree(variante):
    crescimento = GrowConfig(variant=variante, max_depth=5)
    unica, conjunto = [], []
    for indice in range(10):
        for semente in range(5):
            X, Y = _nonlinear_regression(indice, semente)
            treino = Dataset(X[:110], Y[:110], Task.MTR)
            for modo, medidas in (("single", unica), ("bagging", conjunto)):
                cfg = EnsembleConfig(n_trees=25, mode=modo, grow=crescimento, master_seed=semente)
                modelo = fit_ensemble(treino, cfg)
                medidas.append(evaluate(Task.MTR, Y[110:], predict(modelo, X[110:])).value)
    assert np.median(conjunto) >= np.median(unica)
