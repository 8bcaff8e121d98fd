import numpy as np
import pytest

from obliqua.cli import main
from obliqua.data import read_scores, write_dense_csv
from obliqua.ensemble import load_model, predict
from obliqua.metrics import evaluate
from obliqua.tree import Task

from conftest import oblique_toy


def _run(capsys, *argv):
    codigo = main([str(a) for a in argv])
    capturado = capsys.readouterr()
    return codigo, capturado.out, capturado.err


def _report(saida):
    return dict(linha.split("=", 1) for linha in saida.splitlines() if "=" in linha and not linha.startswith("#"))


@pytest.fixture
def toy_files(tmp_path):
    X, y = oblique_toy(1, n=80)
    treino = tmp_path / "toy.csv"
    write_dense_csv(treino, ["x1", "x2", "y"], np.column_stack([X, y]))
    atributos = tmp_path / "toy_features.csv"
    write_dense_csv(atributos, ["x1", "x2"], X)
    return treino, atributos, X, y


def test_train_predict_evaluate_round_trip(tmp_path, capsys, toy_files):
    treino, atributos, X, y = toy_files
    modelo = tmp_path / "toy.opce"
    escores = tmp_path / "scores.txt"

    codigo, saida, _ = _run(capsys, "train", "--task", "bin", "--data", treino, "--target-columns", "y",
                            "--variant", "grad", "--out", modelo)
    assert codigo == 0
    relatorio = _report(saida)
    assert relatorio["task"] == "bin"
    assert relatorio["mode"] == "single"
    assert relatorio["trees"] == "1"
    assert relatorio["examples"] == "80"

    codigo, _, _ = _run(capsys, "predict", "--model", modelo, "--features", atributos, "--out", escores)
    assert codigo == 0
    np.testing.assert_array_equal(read_scores(escores), predict(load_model(modelo), X))

    codigo, saida, _ = _run(capsys, "evaluate", "--task", "bin", "--data", treino, "--target-columns", "y",
                            "--scores", escores)
    assert codigo == 0
    relatorio = _report(saida)
    esperado = evaluate(Task.BIN, y[:, None], predict(load_model(modelo), X))
    assert relatorio["metric"] == "f1"
    assert float(relatorio["value"]) == esperado.value


def test_same_seed_gives_identical_model_files(tmp_path, capsys, toy_files):
    treino = toy_files[0]
    arquivos = []
    for nome in ("a.opce", "b.opce"):
        arquivos.append(tmp_path / nome)
        codigo, _, _ = _run(capsys, "train", "--task", "bin", "--data", treino, "--target-columns", "y",
                            "--mode", "bagging", "--trees", 3, "--seed", 7, "--out", arquivos[-1])
        assert codigo == 0
    assert arquivos[0].read_bytes() == arquivos[1].read_bytes()


def test_config_file_is_overridden_by_flags(tmp_path, capsys, toy_files):
    treino = toy_files[0]
    config = tmp_path / "treino.conf"
    config.write_text("mode = rf\ntrees = 2\nmax_depth = 1\n", encoding="utf-8")
    codigo, saida, _ = _run(capsys, "train", "--config", config, "--trees", 3, "--task", "bin",
                            "--data", treino, "--target-columns", "y", "--out", tmp_path / "m.opce")
    assert codigo == 0
    relatorio = _report(saida)
    assert relatorio["mode"] == "random_forest"
    assert relatorio["trees"] == "3"
    assert int(relatorio["max_depth"]) <= 1


def test_malformed_features_exit_with_location(tmp_path, capsys):
    atributos = tmp_path / "x.txt"
    atributos.write_text("0:1\n3:1 1:1\n", encoding="utf-8")
    alvos = tmp_path / "y.csv"
    alvos.write_text("y\n1.0\n2.0\n", encoding="utf-8")
    codigo, _, erro = _run(capsys, "train", "--task", "str", "--features", atributos, "--targets", alvos,
                           "--out", tmp_path / "m.opce")
    assert codigo == 1
    assert "linha 2" in erro
    assert len(erro.strip().splitlines()) == 1


def test_usage_errors_exit_with_code_two(tmp_path, capsys, toy_files):
    treino = toy_files[0]
    hierarquia = tmp_path / "h.txt"
    hierarquia.write_text("a\tb\n", encoding="utf-8")
    codigo, _, erro = _run(capsys, "train", "--task", "bin", "--data", treino, "--target-columns", "y",
                           "--hierarchy", hierarquia, "--out", tmp_path / "m.opce")
    assert codigo == 2
    assert "hmlc" in erro
    codigo, _, _ = _run(capsys, "train", "--task", "bin", "--data", treino, "--target-columns", "y",
                        "--variant", "oc1", "--out", tmp_path / "m.opce")
    assert codigo == 2


def test_corrupted_model_is_reported(tmp_path, capsys):
    modelo = tmp_path / "ruim.opce"
    modelo.write_bytes(b"NOPE1234")
    atributos = tmp_path / "x.txt"
    atributos.write_text("0:1\n", encoding="utf-8")
    codigo, _, erro = _run(capsys, "predict", "--model", modelo, "--features", atributos, "--out", tmp_path / "s")
    assert codigo == 1
    assert "byte 0" in erro


def test_empty_feature_file_gives_empty_output(tmp_path, capsys, toy_files):
    treino = toy_files[0]
    modelo = tmp_path / "m.opce"
    _run(capsys, "train", "--task", "bin", "--data", treino, "--target-columns", "y", "--out", modelo)
    vazio = tmp_path / "vazio.txt"
    vazio.write_text("", encoding="utf-8")
    escores = tmp_path / "s.txt"
    codigo, _, _ = _run(capsys, "predict", "--model", modelo, "--features", vazio, "--out", escores)
    assert codigo == 0
    assert escores.read_text(encoding="utf-8") == ""


def test_decoded_binary_predictions(tmp_path, capsys, toy_files):
    treino, atributos, X, _ = toy_files
    modelo = tmp_path / "m.opce"
    _run(capsys, "train", "--task", "bin", "--data", treino, "--target-columns", "y", "--out", modelo)
    saida = tmp_path / "rotulos.txt"
    codigo, _, _ = _run(capsys, "predict", "--model", modelo, "--features", atributos, "--out", saida, "--decode")
    assert codigo == 0
    esperado = (predict(load_model(modelo), X)[:, 0] >= 0.5).astype(int)
    assert saida.read_text(encoding="utf-8").split() == [str(v) for v in esperado]


def test_info_and_importance_from_model(tmp_path, capsys, toy_files):
    treino = toy_files[0]
    modelo = tmp_path / "m.opce"
    _run(capsys, "train", "--task", "bin", "--data", treino, "--target-columns", "y", "--out", modelo)
    codigo, saida, _ = _run(capsys, "info", "--model", modelo)
    assert codigo == 0
    assert "mean_nonzero_weights" in saida
    codigo, saida, _ = _run(capsys, "importance", "--model", modelo)
    assert codigo == 0
    linhas = saida.splitlines()
    assert linhas[0] == "feature_id,group,importance"
    assert linhas[1].startswith("0,real,")
    assert any(linha.startswith("# real_mean=") for linha in linhas)


def test_mlc_with_label_sets(tmp_path, capsys, rng):
    X = rng.uniform(size=(30, 2))
    atributos = tmp_path / "x.csv"
    write_dense_csv(atributos, ["a", "b"], X)
    nomes = tmp_path / "nomes.txt"
    nomes.write_text("alto\nlargo\n", encoding="utf-8")
    conjuntos = tmp_path / "y.txt"
    conjuntos.write_text(
        "".join(",".join(n for n, v in zip(("alto", "largo"), linha >= 0.5) if v) + "\n" for linha in X),
        encoding="utf-8",
    )
    modelo = tmp_path / "m.opce"
    codigo, saida, _ = _run(capsys, "train", "--task", "mlc", "--features", atributos, "--targets", conjuntos,
                            "--label-names", nomes, "--out", modelo)
    assert codigo == 0
    assert _report(saida)["targets"] == "2"
    saida_rotulos = tmp_path / "rotulos.txt"
    codigo, _, _ = _run(capsys, "predict", "--model", modelo, "--features", atributos, "--out", saida_rotulos,
                        "--decode")
    assert codigo == 0
    for linha in saida_rotulos.read_text(encoding="utf-8").splitlines():
        assert set(filter(None, linha.split(","))) <= {"alto", "largo"}


@pytest.mark.slow
def test_cross_validation_is_reproducible(capsys, toy_files):
    treino = toy_files[0]
    argumentos = ["cv", "--task", "bin", "--data", treino, "--target-columns", "y", "--folds", 5,
                  "--variant", "svm", "--seed", 3]
    codigo, primeira, _ = _run(capsys, *argumentos)
    assert codigo == 0
    _, segunda, _ = _run(capsys, *argumentos)
    assert primeira == segunda
    relatorio = _report(primeira)
    assert relatorio["folds"] == "5"
    assert float(relatorio["mean"]) >= 0.9
