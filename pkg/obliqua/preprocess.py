"""
Codificação de atributos e alvos, padronização por nó, fechamento da
hierarquia de rótulos e pesos dos atributos de agrupamento.
"""

import logging
from collections import deque
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
from scipy.sparse.linalg import LinearOperator

from obliqua import matrix
from obliqua.error_handler import HierarchyError, InvalidArgumentError, ParseError

logger = logging.getLogger("obliqua.preprocess")

# Desvios abaixo deste valor são tratados como coluna constante
STD_EPSILON = 1e-12


@dataclass(frozen=True)
class ColumnSpec:
    name: str
    kind: str  # "numeric" ou "onehot"
    categories: tuple = ()

    @property
    def width(self):
        return 1 if self.kind == "numeric" else len(self.categories)


def _is_number(texto):
    try:
        valor = float(texto)
    except ValueError:
        return False
    return np.isfinite(valor)


@dataclass(frozen=True)
class FeatureEncoder:
    """
    Converte colunas de texto em atributos numéricos.

    Colunas inteiramente numéricas passam direto; as demais viram blocos
    one-hot com as categorias na ordem da primeira ocorrência. Categorias
    não vistas no ajuste geram um bloco todo zero.
    """

    columns: tuple

    @classmethod
    def fit(cls, names, rows):
        colunas = []
        for j, nome in enumerate(names):
            celulas = [linha[j].strip() for linha in rows]
            if all(_is_number(celula) for celula in celulas):
                colunas.append(ColumnSpec(nome, "numeric"))
            else:
                categorias = list(dict.fromkeys(celulas))
                colunas.append(ColumnSpec(nome, "onehot", tuple(categorias)))
        return cls(tuple(colunas))

    @property
    def n_outputs(self):
        return sum(coluna.width for coluna in self.columns)

    def output_names(self):
        nomes = []
        for coluna in self.columns:
            if coluna.kind == "numeric":
                nomes.append(coluna.name)
            else:
                nomes.extend(f"{coluna.name}={categoria}" for categoria in coluna.categories)
        return nomes

    def transform(self, rows, path=None, first_line=2):
        """
        Codifica linhas de texto já separadas em células.

        Args:
            rows (list[list[str]]): uma lista de células por exemplo.
            path: arquivo de origem, usado nas mensagens de erro.
            first_line (int): número da linha do primeiro exemplo no arquivo.

        Returns:
            numpy.ndarray: matriz densa N × n_outputs.
        """
        saida = np.zeros((len(rows), self.n_outputs), dtype=np.float64)
        for i, linha in enumerate(rows):
            if len(linha) != len(self.columns):
                raise ParseError(
                    f"esperadas {len(self.columns)} colunas, encontradas {len(linha)}",
                    path=path, line=first_line + i,
                )
            inicio = 0
            for j, coluna in enumerate(self.columns):
                celula = linha[j].strip()
                if coluna.kind == "numeric":
                    if not _is_number(celula):
                        raise ParseError(
                            f"valor não numérico {celula!r} na coluna {coluna.name!r}",
                            path=path, line=first_line + i, column=j + 1,
                        )
                    saida[i, inicio] = float(celula)
                elif celula in coluna.categories:
                    saida[i, inicio + coluna.categories.index(celula)] = 1.0
                inicio += coluna.width
        return saida

    def to_dict(self):
        return {
            "columns": [
                {"name": c.name, "kind": c.kind, "categories": list(c.categories)}
                for c in self.columns
            ]
        }

    @classmethod
    def from_dict(cls, dados):
        return cls(tuple(
            ColumnSpec(c["name"], c["kind"], tuple(c.get("categories", ())))
            for c in dados["columns"]
        ))


@dataclass(frozen=True)
class Standardizer:
    """Médias e desvios por coluna; no modo esparso as médias não são aplicadas."""

    means: np.ndarray
    stds: np.ndarray
    sparse_mode: bool
    constant: np.ndarray = field(default=None)

    @property
    def n_columns(self):
        return self.means.shape[0]


def fit_standardizer(matriz):
    if matriz.shape[0] < 1:
        raise InvalidArgumentError("não é possível padronizar uma matriz sem linhas")
    medias = matrix.colmean(matriz)
    desvios = np.sqrt(matrix.colvar(matriz))
    constantes = desvios < STD_EPSILON
    desvios = np.where(constantes, 1.0, desvios)
    return Standardizer(medias, desvios, matrix.is_sparse(matriz), constantes)


def apply_standardizer(padronizador, matriz):
    if matriz.shape[1] != padronizador.n_columns:
        raise InvalidArgumentError(
            f"dimensão incompatível: {matriz.shape[1]} colunas, padronizador com {padronizador.n_columns}"
        )
    if matrix.is_sparse(matriz):
        return matrix.scale_columns(matriz, 1.0 / padronizador.stds)
    return (matriz - padronizador.means) / padronizador.stds


def centered_view(padronizador, matriz):
    """
    Operador linear igual a (M − 1μᵀ)/σ sem materializar a centralização.

    Para matrizes densas devolve a própria matriz padronizada. Para CSR, os
    produtos custam O(nnz) e coincidem com os da versão densa centralizada.
    """
    if not matrix.is_sparse(matriz):
        return apply_standardizer(padronizador, matriz)
    escalada = matrix.scale_columns(matriz, 1.0 / padronizador.stds)
    deslocamento = padronizador.means / padronizador.stds

    def _matvec(v):
        v = np.ravel(v)
        return escalada @ v - float(deslocamento @ v)

    def _rmatvec(r):
        r = np.ravel(r)
        return escalada.T @ r - deslocamento * float(r.sum())

    return LinearOperator(matriz.shape, matvec=_matvec, rmatvec=_rmatvec, dtype=np.float64)


def one_hot_targets(labels, k):
    """Codifica índices de classe em uma matriz N × k binária."""
    rotulos = np.asarray(labels)
    if rotulos.ndim != 1:
        raise InvalidArgumentError("os rótulos devem formar um vetor")
    if rotulos.size and (rotulos.min() < 0 or rotulos.max() >= k):
        raise InvalidArgumentError(f"índice de classe fora de [0, {k})")
    n = rotulos.shape[0]
    codificada = sp.csr_matrix(
        (np.ones(n), (np.arange(n), rotulos.astype(np.intp))), shape=(n, k)
    )
    return matrix.choose_representation(matrix.as_matrix(codificada))


@dataclass(frozen=True)
class HierarchyGraph:
    """DAG de rótulos: pais por rótulo, raízes e profundidade mínima até uma raiz."""

    labels: tuple
    parents: tuple
    roots: tuple
    depths: np.ndarray
    order: tuple = ()  # ordem topológica (pais antes dos filhos)

    @property
    def label_count(self):
        return len(self.labels)

    @classmethod
    def from_edges(cls, labels, edges):
        """
        Valida as arestas (pai, filho) e calcula raízes e profundidades.

        Raises:
            HierarchyError: se existir ciclo (com uma testemunha) ou índice inválido.
        """
        labels = tuple(labels)
        t = len(labels)
        pais = [[] for _ in range(t)]
        filhos = [[] for _ in range(t)]
        for pai, filho in edges:
            if not (0 <= pai < t and 0 <= filho < t):
                raise HierarchyError(f"aresta com rótulo desconhecido: ({pai}, {filho})")
            if pai not in pais[filho]:
                pais[filho].append(pai)
                filhos[pai].append(filho)

        # Kahn: o que sobrar pertence a um ciclo
        grau = [len(p) for p in pais]
        fila = deque(j for j in range(t) if grau[j] == 0)
        ordem = []
        while fila:
            j = fila.popleft()
            ordem.append(j)
            for filho in filhos[j]:
                grau[filho] -= 1
                if grau[filho] == 0:
                    fila.append(filho)
        if len(ordem) < t:
            restantes = {j for j in range(t) if grau[j] > 0}
            atual = min(restantes)
            vistos = []
            while atual not in vistos:
                vistos.append(atual)
                atual = next(p for p in pais[atual] if p in restantes)
            ciclo = vistos[vistos.index(atual):] + [atual]
            nomes = " <- ".join(labels[j] for j in ciclo)
            raise HierarchyError(f"ciclo na hierarquia: {nomes}", cycle=[labels[j] for j in ciclo])

        raizes = tuple(j for j in range(t) if not pais[j])
        profundidades = np.full(t, -1, dtype=np.int64)
        fila = deque(raizes)
        for r in raizes:
            profundidades[r] = 0
        while fila:
            j = fila.popleft()
            for filho in filhos[j]:
                if profundidades[filho] < 0:
                    profundidades[filho] = profundidades[j] + 1
                    fila.append(filho)

        return cls(labels, tuple(tuple(p) for p in pais), raizes, profundidades, tuple(ordem))

    def ancestor_sets(self):
        """Conjunto de ancestrais (sem o próprio rótulo) de cada rótulo."""
        ancestrais = [set() for _ in range(self.label_count)]
        for j in self.order:
            for pai in self.parents[j]:
                ancestrais[j].add(pai)
                ancestrais[j] |= ancestrais[pai]
        return ancestrais

    def closure_matrix(self):
        """Matriz T × T com A[j, a] = 1 para a = j ou a ancestral de j."""
        linhas, colunas = [], []
        for j, ancestrais in enumerate(self.ancestor_sets()):
            for a in sorted(ancestrais | {j}):
                linhas.append(j)
                colunas.append(a)
        t = self.label_count
        return sp.csr_matrix((np.ones(len(linhas)), (linhas, colunas)), shape=(t, t))


def expand_hierarchy(alvos, hierarquia):
    """Fecha os conjuntos de rótulos sobre os ancestrais (operação idempotente)."""
    if alvos.shape[1] != hierarquia.label_count:
        raise InvalidArgumentError(
            f"dimensão incompatível: {alvos.shape[1]} rótulos, hierarquia com {hierarquia.label_count}"
        )
    fechamento = hierarquia.closure_matrix()
    if matrix.is_sparse(alvos):
        presentes = alvos.copy()
        presentes.data = (presentes.data != 0).astype(np.float64)
        fechada = (presentes @ fechamento).tocsr()
        fechada.data = (fechada.data > 0).astype(np.float64)
        return matrix.as_matrix(fechada)
    fechada = (alvos != 0).astype(np.float64) @ fechamento.toarray()
    return matrix.as_matrix((fechada > 0).astype(np.float64))


def hierarchy_label_weights(hierarquia, base=0.75):
    return np.power(float(base), hierarquia.depths.astype(np.float64))
