"""
Medidas de avaliação: R², F1 (binário e macro) e LRAP ponderado.
"""

import logging
from dataclasses import dataclass

import numpy as np
from scipy.stats import rankdata
from sklearn.metrics import f1_score

from obliqua import matrix
from obliqua.error_handler import InvalidArgumentError
from obliqua.preprocess import hierarchy_label_weights
from obliqua.tree import Task

logger = logging.getLogger("obliqua.metrics")

# Decisão para F1 binário sobre os escores do conjunto
BIN_THRESHOLD = 0.5


def _vector(v):
    return np.asarray(matrix.to_dense(v), dtype=np.float64).ravel()


def r2(y, yhat):
    """
    Coeficiente de determinação 1 − Σ(y−ŷ)²/Σ(y−ȳ)².

    Com variância zero do alvo devolve 1.0 se as predições forem exatas e
    -inf (indefinido) caso contrário.
    """
    y = _vector(y)
    yhat = _vector(yhat)
    if y.shape != yhat.shape:
        raise InvalidArgumentError(f"tamanhos diferentes: {y.shape[0]} e {yhat.shape[0]}")
    if y.shape[0] < 2:
        raise InvalidArgumentError("R² precisa de pelo menos 2 exemplos")
    residuo = float(((y - yhat) ** 2).sum())
    total = float(((y - y.mean()) ** 2).sum())
    if total == 0.0:
        return 1.0 if residuo == 0.0 else float("-inf")
    return 1.0 - residuo / total


def mean_r2(Y, Yhat):
    """
    Média do R² por alvo, ignorando alvos indefinidos.

    Returns:
        tuple[float, int]: (média, número de alvos indefinidos). A média é nan
        quando todos os alvos são indefinidos.
    """
    Y = matrix.to_dense(Y)
    Yhat = matrix.to_dense(Yhat)
    if Y.shape != Yhat.shape:
        raise InvalidArgumentError(f"formas diferentes: {Y.shape} e {Yhat.shape}")
    valores = [r2(Y[:, j], Yhat[:, j]) for j in range(Y.shape[1])]
    definidos = [v for v in valores if np.isfinite(v)]
    indefinidos = len(valores) - len(definidos)
    if indefinidos:
        logger.warning(f"{indefinidos} alvo(s) com variância zero ignorados no R² médio")
    media = float(np.mean(definidos)) if definidos else float("nan")
    return media, indefinidos


def f1_binary(y, yhat):
    """2·tp/(2·tp+fp+fn), 0 quando o denominador é zero."""
    y = _vector(y).astype(np.int64)
    yhat = _vector(yhat).astype(np.int64)
    if y.shape != yhat.shape:
        raise InvalidArgumentError(f"tamanhos diferentes: {y.shape[0]} e {yhat.shape[0]}")
    return float(f1_score(y, yhat, pos_label=1, average="binary", zero_division=0))


def f1_macro(y, yhat, k):
    """Média simples do F1 um-contra-todos sobre as k classes."""
    y = _vector(y).astype(np.int64)
    yhat = _vector(yhat).astype(np.int64)
    if y.shape != yhat.shape:
        raise InvalidArgumentError(f"tamanhos diferentes: {y.shape[0]} e {yhat.shape[0]}")
    return float(f1_score(y, yhat, labels=list(range(int(k))), average="macro", zero_division=0))


def lrap_weighted(Y, S, w=None, return_skipped=False):
    """
    LRAP ponderado por rótulo.

    Para cada exemplo i e rótulo verdadeiro j, L = #{k verdadeiro: s_ik ≥ s_ij}
    e R = #{k: s_ik ≥ s_ij}; o exemplo vale Σⱼ (wⱼ/Wᵢ)·(L/R), com Wᵢ a soma
    dos pesos dos seus rótulos verdadeiros. Exemplos sem rótulo verdadeiro
    são ignorados e contados.

    Returns:
        float | tuple[float, int]: valor médio (e ignorados com return_skipped).
    """
    Y = matrix.to_sparse(matrix.as_matrix(Y))
    S = np.asarray(matrix.to_dense(S), dtype=np.float64)
    if Y.shape != S.shape:
        raise InvalidArgumentError(f"formas diferentes: {Y.shape} e {S.shape}")
    w = np.ones(Y.shape[1]) if w is None else np.asarray(w, dtype=np.float64)
    if w.shape != (Y.shape[1],):
        raise InvalidArgumentError(f"dimensão incompatível: {w.shape[0]} pesos para {Y.shape[1]} rótulos")

    soma = 0.0
    contados = 0
    ignorados = 0
    for i, (inicio, fim) in enumerate(zip(Y.indptr, Y.indptr[1:])):
        relevantes = Y.indices[inicio:fim]
        pesos = w[relevantes]
        total = float(pesos.sum())
        if relevantes.size == 0 or total <= 0.0:
            ignorados += 1
            continue
        negados = -S[i]
        # posto "max" de -s conta os rótulos com escore ≥ (empates inclusivos)
        R = rankdata(negados, "max")[relevantes]
        L = rankdata(negados[relevantes], "max")
        soma += float((pesos / total) @ (L / R))
        contados += 1

    if ignorados:
        logger.warning(f"{ignorados} exemplo(s) sem rótulos ignorados no LRAP")
    valor = soma / contados if contados else 0.0
    if return_skipped:
        return valor, ignorados
    return valor


@dataclass(frozen=True)
class MetricResult:
    name: str
    value: float
    skipped: int = 0


def evaluate(task, truth, scores, hierarchy=None):
    """
    Medida padrão da tarefa.

    STR: r2; MTR: mean_r2; BIN: F1 com escores ≥ 0.5; MCC: F1 macro do argmax;
    MLC: LRAP com pesos 1; HMLC: LRAP com pesos 0.75^profundidade.
    """
    task = Task(task)
    verdade = matrix.to_dense(truth)
    escores = matrix.to_dense(scores)
    if verdade.shape != escores.shape:
        raise InvalidArgumentError(f"formas diferentes: {verdade.shape} e {escores.shape}")

    if task is Task.STR:
        return MetricResult("r2", r2(verdade[:, 0], escores[:, 0]))
    if task is Task.MTR:
        valor, indefinidos = mean_r2(verdade, escores)
        return MetricResult("mean_r2", valor, indefinidos)
    if task is Task.BIN:
        return MetricResult("f1", f1_binary(verdade[:, 0], escores[:, 0] >= BIN_THRESHOLD))
    if task is Task.MCC:
        k = verdade.shape[1]
        return MetricResult("macro_f1", f1_macro(verdade.argmax(axis=1), escores.argmax(axis=1), k))
    if task is Task.MLC:
        valor, ignorados = lrap_weighted(verdade, escores, return_skipped=True)
        return MetricResult("lrap", valor, ignorados)
    pesos = hierarchy_label_weights(hierarchy) if hierarchy is not None else None
    valor, ignorados = lrap_weighted(verdade, escores, pesos, return_skipped=True)
    return MetricResult("weighted_lrap", valor, ignorados)
