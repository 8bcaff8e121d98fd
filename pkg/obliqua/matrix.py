"""
Armazenamento de matrizes densas e esparsas (CSR) e os kernels numéricos
usados pelos demais módulos.

Uma "matriz" é um numpy.ndarray 2-D (row-major, float64) ou uma
scipy.sparse.csr_matrix canônica (índices ordenados, sem zeros explícitos).
Os kernels aceitam as duas representações, e também um
scipy.sparse.linalg.LinearOperator onde só produtos com vetores são
necessários, devolvendo os mesmos valores independentemente da forma.
"""

import logging

import numpy as np
import scipy.sparse as sp
from scipy.sparse.linalg import LinearOperator

from obliqua.error_handler import DegenerateWeightsError, InvalidArgumentError

logger = logging.getLogger("obliqua.matrix")

# Densidade abaixo da qual os dados são guardados em CSR
SPARSE_DENSITY_THRESHOLD = 0.1


def as_matrix(data, sparse=None):
    """
    Converte dados para a representação canônica.

    Args:
        data: array-like 2-D ou matriz esparsa do scipy.
        sparse (bool | None): força CSR (True), denso (False) ou mantém a
            representação de entrada (None).

    Returns:
        numpy.ndarray | scipy.sparse.csr_matrix
    """
    if sp.issparse(data):
        matriz = sp.csr_matrix(data, dtype=np.float64, copy=True)
        matriz.sum_duplicates()
        matriz.eliminate_zeros()
        matriz.sort_indices()
        if not np.all(np.isfinite(matriz.data)):
            raise InvalidArgumentError("a matriz contém valores não finitos")
        if sparse is False:
            return np.ascontiguousarray(matriz.toarray())
        return matriz

    matriz = np.array(data, dtype=np.float64, copy=True)
    if matriz.ndim != 2:
        raise InvalidArgumentError(f"esperada matriz 2-D, recebido ndim={matriz.ndim}")
    if not np.all(np.isfinite(matriz)):
        raise InvalidArgumentError("a matriz contém valores não finitos")
    if sparse:
        return as_matrix(sp.csr_matrix(matriz))
    return np.ascontiguousarray(matriz)


def is_sparse(matriz):
    return sp.issparse(matriz)


def to_dense(matriz):
    if sp.issparse(matriz):
        return np.ascontiguousarray(matriz.toarray())
    return matriz


def to_sparse(matriz):
    if sp.issparse(matriz):
        return matriz
    return as_matrix(sp.csr_matrix(matriz))


def nnz(matriz):
    if sp.issparse(matriz):
        return int(matriz.nnz)
    return int(np.count_nonzero(matriz))


def density(matriz):
    """Fração de valores não nulos (0 para matrizes vazias)."""
    linhas, colunas = matriz.shape
    if linhas * colunas == 0:
        return 0.0
    return nnz(matriz) / (linhas * colunas)


def choose_representation(matriz, threshold=SPARSE_DENSITY_THRESHOLD):
    """
    CSR canônica quando a densidade é menor que o limiar, densa contígua
    caso contrário. Cópias densa e esparsa dos mesmos valores dão o mesmo
    resultado, byte a byte.
    """
    if density(matriz) < threshold and min(matriz.shape) > 0:
        return as_matrix(matriz, sparse=True)
    return np.ascontiguousarray(to_dense(matriz), dtype=np.float64)


def _as_vector(v, length, name="v"):
    vetor = np.asarray(v, dtype=np.float64)
    if vetor.ndim != 1 or vetor.shape[0] != length:
        raise InvalidArgumentError(
            f"dimensão incompatível: {name} tem forma {vetor.shape}, esperado ({length},)"
        )
    return vetor


def matvec(matriz, v):
    """Produto M·v (M pode ser densa, CSR ou LinearOperator)."""
    v = _as_vector(v, matriz.shape[1])
    if isinstance(matriz, LinearOperator):
        return np.asarray(matriz.matvec(v), dtype=np.float64).ravel()
    return np.asarray(matriz @ v, dtype=np.float64).ravel()


def rmatvec(matriz, r):
    """Produto Mᵀ·r."""
    r = _as_vector(r, matriz.shape[0], name="r")
    if isinstance(matriz, LinearOperator):
        return np.asarray(matriz.rmatvec(r), dtype=np.float64).ravel()
    return np.asarray(matriz.T @ r, dtype=np.float64).ravel()


def square(matriz):
    """Quadrado elemento a elemento, preservando a representação."""
    if sp.issparse(matriz):
        return matriz.multiply(matriz).tocsr()
    return matriz * matriz


def _weight_total(matriz, a):
    a = _as_vector(a, matriz.shape[0], name="a")
    if np.any(a < 0):
        raise InvalidArgumentError("os pesos devem ser não negativos")
    total = float(a.sum())
    if total <= 0.0:
        raise DegenerateWeightsError("a soma dos pesos é zero")
    return a, total


def weighted_colmean(matriz, a):
    """Média ponderada de cada coluna: (1/A)·Σ aᵢ·M[i, j]."""
    a, total = _weight_total(matriz, a)
    return rmatvec(matriz, a) / total


def weighted_colvar(matriz, a, squared=None):
    """
    Variância ponderada de cada coluna, mean(v², a) − mean(v, a)², limitada a 0.

    `squared` permite reaproveitar square(matriz) já calculado.
    """
    if squared is None:
        squared = square(matriz)
    media = weighted_colmean(matriz, a)
    media_quadrados = weighted_colmean(squared, a)
    return np.maximum(media_quadrados - media * media, 0.0)


def colmean(matriz):
    linhas = matriz.shape[0]
    if linhas < 1:
        raise InvalidArgumentError("matriz sem linhas")
    return np.asarray(matriz.sum(axis=0), dtype=np.float64).ravel() / linhas


def colvar(matriz):
    """
    Variância populacional de cada coluna, em duas passadas com correção
    pela média dos desvios.

    Colunas constantes dão variância da ordem do erro de arredondamento ao
    quadrado do desvio da média, mesmo com valores grandes.
    """
    linhas = matriz.shape[0]
    if linhas < 1:
        raise InvalidArgumentError("matriz sem linhas")
    media = colmean(matriz)
    if sp.issparse(matriz):
        colunas = matriz.shape[1]
        desvios = matriz.data - media[matriz.indices]
        ausentes = linhas - np.bincount(matriz.indices, minlength=colunas)
        soma = np.asarray(np.bincount(matriz.indices, weights=desvios * desvios, minlength=colunas), dtype=np.float64)
        soma += ausentes * media * media
        residuo = np.bincount(matriz.indices, weights=desvios, minlength=colunas) - ausentes * media
    else:
        desvios = matriz - media
        soma = np.asarray((desvios * desvios).sum(axis=0), dtype=np.float64)
        residuo = np.asarray(desvios.sum(axis=0), dtype=np.float64)
    return np.maximum(soma / linhas - (residuo / linhas) ** 2, 0.0)


def row_sq_norms(matriz):
    return np.asarray(square(matriz).sum(axis=1), dtype=np.float64).ravel()


def take_rows(matriz, indices):
    indices = np.asarray(indices, dtype=np.intp)
    return matriz[indices]


def take_cols(matriz, indices):
    indices = np.asarray(indices, dtype=np.intp)
    if sp.issparse(matriz):
        return matriz[:, indices].tocsr()
    return np.ascontiguousarray(matriz[:, indices])


def scale_columns(matriz, fatores):
    """Multiplica cada coluna j por fatores[j]."""
    fatores = _as_vector(fatores, matriz.shape[1], name="fatores")
    if sp.issparse(matriz):
        escalada = (matriz @ sp.diags(fatores, format="csr")).tocsr()
        escalada.eliminate_zeros()
        escalada.sort_indices()
        return escalada
    return matriz * fatores


def hstack(blocos):
    """Concatena blocos lado a lado; o resultado é CSR se algum bloco for esparso."""
    if any(sp.issparse(bloco) for bloco in blocos):
        return as_matrix(sp.hstack([sp.csr_matrix(bloco) for bloco in blocos], format="csr"))
    return np.ascontiguousarray(np.hstack(blocos))
