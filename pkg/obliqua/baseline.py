"""
Árvore de agrupamento preditivo paralela aos eixos (busca exaustiva de um
atributo e um limiar por nó), usada como comparação e como oráculo.

As divisões são guardadas como hiperplanos degenerados w = e_f, b = −limiar,
de modo que predição, serialização e importância são as mesmas das árvores
oblíquas.
"""

import logging
from dataclasses import dataclass

import numpy as np

from obliqua import matrix
from obliqua.error_handler import InvalidArgumentError
from obliqua.split import Hyperplane
from obliqua.tree import induce, node_count

logger = logging.getLogger("obliqua.baseline")


@dataclass(frozen=True)
class AxisTest:
    feature: int
    threshold: float
    score: float

    def hyperplane(self, n_features):
        w = np.zeros(n_features)
        w[self.feature] = 1.0
        return Hyperplane(w, -float(self.threshold))


def _column(X, f):
    if matrix.is_sparse(X):
        return np.asarray(X[:, [f]].toarray(), dtype=np.float64).ravel()
    return np.asarray(X[:, f], dtype=np.float64)


def best_axis_test(X, Z, p, features=None):
    """
    Busca exaustiva do melhor teste x_f ≥ limiar.

    Os limiares candidatos são os pontos médios entre valores distintos
    consecutivos de cada atributo. O escore é
    n·imp(Z) − n1·imp(Z esq.) − n2·imp(Z dir.), com imp = Σⱼ pⱼ·var(Z.ⱼ).
    Empates ficam com o menor índice de atributo e depois o menor limiar.

    Args:
        X: matriz N × D (densa ou CSR).
        Z: atributos de agrupamento N × K.
        p (numpy.ndarray): pesos dos atributos de agrupamento.
        features (Iterable[int] | None): restringe a busca a estes atributos.

    Returns:
        AxisTest | None: None quando nenhum atributo separa os exemplos.
    """
    n, d = X.shape
    if n < 2:
        return None
    if Z.shape[0] != n:
        raise InvalidArgumentError(f"dimensão incompatível: X com {n} linhas, Z com {Z.shape[0]}")
    p = np.asarray(p, dtype=np.float64)
    if p.shape != (Z.shape[1],):
        raise InvalidArgumentError(f"dimensão incompatível: {p.shape[0]} pesos para {Z.shape[1]} colunas")

    Z_densa = matrix.to_dense(Z)
    total = Z_densa.sum(axis=0)
    constante = float((total * total) @ p) / n
    X_col = X.tocsc() if matrix.is_sparse(X) else X
    candidatos = range(d) if features is None else sorted(int(f) for f in features)

    melhor = None
    tamanhos = np.arange(1, n, dtype=np.float64)
    for f in candidatos:
        valores = _column(X_col, f)
        ordem = np.argsort(valores, kind="stable")
        ordenados = valores[ordem]
        validos = ordenados[1:] > ordenados[:-1]
        if not validos.any():
            continue
        # somas acumuladas do lado esquerdo para cada posição de corte
        acumulada = np.cumsum(Z_densa[ordem], axis=0)[:-1]
        direita = total - acumulada
        escores = (
            (acumulada * acumulada) @ p / tamanhos
            + (direita * direita) @ p / (n - tamanhos)
            - constante
        )
        escores = np.where(validos, escores, -np.inf)
        m = int(np.argmax(escores))
        if melhor is None or escores[m] > melhor.score:
            baixo, alto = ordenados[m], ordenados[m + 1]
            limiar = baixo + (alto - baixo) / 2.0
            if limiar <= baixo:
                limiar = alto
            melhor = AxisTest(f, float(limiar), float(escores[m]))
    return melhor


def grow_axis_parallel(X, Y, Z, p, cfg, task=None):
    """Cresce uma árvore paralela aos eixos com o mesmo laço de indução das oblíquas."""
    d = X.shape[1]

    def _finder(X_no, Z_no, pesos, rng, features):
        teste = best_axis_test(X_no, Z_no, pesos, features=features)
        return None if teste is None else teste.hyperplane(d)

    arvore = induce(X, Y, Z, p, cfg, _finder, task)
    logger.info(f"Árvore paralela aos eixos com {node_count(arvore)} nós e profundidade {arvore.depth()}")
    return arvore
