import numpy as np
import pytest
from sklearn.metrics import f1_score

from obliqua import matrix
from obliqua.ensemble import grow_tree
from obliqua.error_handler import InvalidArgumentError, ModelFormatError
from obliqua.split import Hyperplane
from obliqua.tree import (
    GrowConfig,
    Leaf,
    Split,
    Task,
    Tree,
    deserialize,
    grow,
    node_count,
    node_rng,
    predict_one,
    serialize,
)

from conftest import oblique_toy, random_sparse


def _manual_tree():
    raiz = Split(
        Hyperplane(np.array([1.0, 1.0]), -1.0),
        Leaf(np.array([0.0, 10.0]), 3),
        Split(
            Hyperplane(np.array([0.0, 1.0]), -2.0),
            Leaf(np.array([1.0, 20.0]), 2),
            Leaf(np.array([2.0, 30.0]), 1),
            3,
        ),
        6,
    )
    return Tree(raiz, Task.MTR, 2, 2, 6)


def _memberships(arvore, X):
    """Linhas de X que chegam a cada nó, refazendo o roteamento da indução."""
    resultado = []
    pilha = [(arvore.root, np.arange(X.shape[0]))]
    while pilha:
        no, linhas = pilha.pop()
        resultado.append((no, linhas))
        if isinstance(no, Split):
            positivos = no.plane.margins(matrix.take_rows(X, linhas)) >= 0.0
            pilha.append((no.positive, linhas[positivos]))
            pilha.append((no.negative, linhas[~positivos]))
    return resultado


def test_task_codes_round_trip():
    for tarefa in Task:
        assert Task.from_code(tarefa.code) is tarefa
    assert Task.BIN.is_classification
    assert not Task.MTR.is_classification
    with pytest.raises(KeyError):
        Task.from_code(9)


def test_predict_one_routes_boundary_to_positive_side():
    arvore = _manual_tree()
    np.testing.assert_array_equal(predict_one(arvore, [0.0, 0.0]), [0.0, 10.0])
    np.testing.assert_array_equal(predict_one(arvore, [0.5, 0.5]), [1.0, 20.0])
    np.testing.assert_array_equal(predict_one(arvore, [0.0, 3.0]), [2.0, 30.0])
    with pytest.raises(InvalidArgumentError):
        predict_one(arvore, [1.0])


def test_batch_predict_matches_predict_one(rng):
    arvore = _manual_tree()
    X = rng.uniform(-1.0, 4.0, size=(50, 2))
    esperado = np.array([predict_one(arvore, x) for x in X])
    np.testing.assert_array_equal(arvore.predict(X), esperado)
    np.testing.assert_array_equal(arvore.predict(matrix.to_sparse(X)), esperado)


def test_node_count_and_depth():
    arvore = _manual_tree()
    assert node_count(arvore) == 5
    assert arvore.depth() == 2
    assert len(arvore.split_nodes()) == 2
    folha = Tree(Leaf(np.zeros(1), 4), Task.STR, 3, 1, 4)
    assert node_count(folha) == 1
    assert folha.depth() == 0


def test_identical_targets_give_single_leaf(rng):
    X = rng.standard_normal((20, 3))
    Y = np.tile([3.0, 4.0], (20, 1))
    arvore = grow(X, Y, Y, np.ones(2), GrowConfig())
    assert isinstance(arvore.root, Leaf)
    np.testing.assert_allclose(arvore.root.prototype, [3.0, 4.0])
    assert arvore.root.n_examples == 20


def test_full_reduction_threshold_blocks_impure_children(rng):
    # grupos de 5 linhas com o mesmo x e alvos diferentes: nenhum filho fica puro
    X = np.repeat(rng.standard_normal((8, 3)), 5, axis=0)
    Y = rng.standard_normal((40, 2))
    for variante in ("svm", "grad"):
        cfg = GrowConfig(variant=variante, impurity_reduction_threshold=1.0)
        arvore = grow(X, Y, Y, np.ones(2), cfg)
        assert node_count(arvore) == 1


def test_max_depth_and_min_examples(regression_data):
    X, Y = regression_data
    assert node_count(grow(X, Y, Y, np.ones(2), GrowConfig(max_depth=0))) == 1
    assert grow(X, Y, Y, np.ones(2), GrowConfig(max_depth=2)).depth() <= 2
    assert node_count(grow(X, Y, Y, np.ones(2), GrowConfig(min_examples_to_split=100))) == 1


@pytest.mark.parametrize("variante", ["svm", "grad"])
def test_nodes_partition_rows_and_leaves_hold_means(regression_data, variante):
    X, Y = regression_data
    arvore = grow(X, Y, Y, np.ones(2), GrowConfig(variant=variante, max_depth=4))
    for no, linhas in _memberships(arvore, X):
        assert no.n_examples == linhas.size
        if isinstance(no, Split):
            assert 0 < no.negative.n_examples < no.n_examples
            assert no.negative.n_examples + no.positive.n_examples == no.n_examples
        else:
            np.testing.assert_allclose(no.prototype, Y[linhas].mean(axis=0), atol=1e-12)
    folhas = [linhas for no, linhas in _memberships(arvore, X) if isinstance(no, Leaf)]
    assert sorted(np.concatenate(folhas).tolist()) == list(range(len(X)))


@pytest.mark.parametrize("variante", ["svm", "grad"])
def test_oblique_toy_is_learned(toy, variante):
    X, y = toy
    Y = y[:, None]
    arvore = grow(X, Y, Y, np.ones(1), GrowConfig(variant=variante), task=Task.BIN)
    previsto = (arvore.predict(X)[:, 0] >= 0.5).astype(float)
    assert f1_score(y, previsto) >= 0.99
    assert arvore.task is Task.BIN


@pytest.mark.parametrize("variante", ["svm", "grad"])
@pytest.mark.parametrize("semente", range(10))
def test_oblique_toy_is_separated_by_one_split(variante, semente):
    X, y = oblique_toy(semente)
    Y = y[:, None]
    arvore = grow(X, Y, Y, np.ones(1), GrowConfig(variant=variante, max_depth=1, seed=semente), task=Task.BIN)
    previsto = (arvore.predict(X)[:, 0] >= 0.5).astype(float)
    assert f1_score(y, previsto) >= 0.99


def test_growth_is_deterministic(regression_data):
    X, Y = regression_data
    cfg = GrowConfig(variant="grad", seed=7, max_depth=3)
    assert serialize(grow(X, Y, Y, np.ones(2), cfg)) == serialize(grow(X, Y, Y, np.ones(2), cfg))


def test_feature_subsets_are_reproducible(regression_data):
    X, Y = regression_data
    cfg = GrowConfig(feature_subset_fraction=0.5, seed=3, max_depth=3)
    primeira = grow(X, Y, Y, np.ones(2), cfg)
    assert serialize(primeira) == serialize(grow(X, Y, Y, np.ones(2), cfg))
    for no in primeira.split_nodes():
        assert no.plane.nonzero <= 2


@pytest.mark.parametrize("variante", ["svm", "grad", "axis"])
@pytest.mark.parametrize("semente", [0, 1, 2])
def test_sparse_and_dense_inputs_grow_identical_trees(variante, semente):
    gerador = np.random.default_rng(semente)
    X = random_sparse(gerador, 300, 40, 0.05)
    pesos = np.zeros(40)
    pesos[:5] = gerador.standard_normal(5)
    Y = (matrix.matvec(X, pesos) + 0.05 * gerador.standard_normal(300))[:, None]
    cfg = GrowConfig(variant=variante, seed=semente, max_depth=4)
    esparsa = grow_tree(X, Y, Y, np.ones(1), cfg)
    densa = grow_tree(matrix.to_dense(X), Y, Y, np.ones(1), cfg)
    assert serialize(esparsa) == serialize(densa)
    np.testing.assert_array_equal(esparsa.predict(X), densa.predict(X))


def test_node_rng_depends_on_seed_and_node():
    a = node_rng(1, 0).random()
    assert a == node_rng(1, 0).random()
    assert a != node_rng(1, 1).random()
    assert a != node_rng(2, 0).random()


def test_grow_rejects_mismatched_inputs(rng):
    X = rng.standard_normal((5, 2))
    with pytest.raises(InvalidArgumentError):
        grow(X, np.ones((4, 1)), np.ones((4, 1)), np.ones(1), GrowConfig())
    with pytest.raises(InvalidArgumentError):
        grow(X, np.ones((5, 1)), np.ones((5, 1)), np.ones(2), GrowConfig())


def test_serialize_round_trip_and_size():
    arvore = _manual_tree()
    dados = serialize(arvore)
    # cabeçalho 23 bytes, folhas 9 + 8T, divisões 21 + 12·nnz
    assert len(dados) == 23 + 3 * (9 + 16) + (21 + 24) + (21 + 12)
    copia = deserialize(dados)
    assert serialize(copia) == dados
    assert copia.task is Task.MTR
    X = np.array([[0.0, 0.0], [0.5, 0.5], [0.0, 3.0]])
    np.testing.assert_array_equal(copia.predict(X), arvore.predict(X))


def test_deserialize_rejects_bad_magic():
    dados = bytearray(serialize(_manual_tree()))
    dados[0:4] = b"XPCT"
    with pytest.raises(ModelFormatError) as erro:
        deserialize(bytes(dados))
    assert erro.value.offset == 0


def test_deserialize_rejects_truncation_and_trailing_bytes():
    dados = serialize(_manual_tree())
    for corte in (3, 10, len(dados) - 1):
        with pytest.raises(ModelFormatError):
            deserialize(dados[:corte])
    with pytest.raises(ModelFormatError):
        deserialize(dados + b"\x00")


def test_deserialize_rejects_unknown_version():
    dados = bytearray(serialize(_manual_tree()))
    dados[4] = 9
    with pytest.raises(ModelFormatError) as erro:
        deserialize(bytes(dados))
    assert erro.value.offset == 4
