"""
Indução top-down de uma árvore de agrupamento preditivo oblíqua, predição e
formato binário do modelo.
"""

import logging
import struct
from dataclasses import dataclass, field
from enum import Enum

import numpy as np

from obliqua import matrix
from obliqua.error_handler import InvalidArgumentError, ModelFormatError
from obliqua.preprocess import fit_standardizer
from obliqua.split import GradSplitConfig, Hyperplane, SvmSplitConfig, learn_split

logger = logging.getLogger("obliqua.tree")

TREE_MAGIC = b"OPCT"
TREE_FORMAT_VERSION = 1


class Task(str, Enum):
    STR = "str"
    MTR = "mtr"
    BIN = "bin"
    MCC = "mcc"
    MLC = "mlc"
    HMLC = "hmlc"

    @property
    def code(self):
        return _TASK_CODES[self]

    @classmethod
    def from_code(cls, code):
        for tarefa, valor in _TASK_CODES.items():
            if valor == code:
                return tarefa
        raise KeyError(code)

    @property
    def is_classification(self):
        return self in (Task.BIN, Task.MCC, Task.MLC, Task.HMLC)


_TASK_CODES = {Task.STR: 1, Task.MTR: 2, Task.BIN: 3, Task.MCC: 4, Task.MLC: 5, Task.HMLC: 6}


@dataclass(eq=False)
class Leaf:
    prototype: np.ndarray
    n_examples: int


@dataclass(eq=False)
class Split:
    plane: Hyperplane
    negative: object
    positive: object
    n_examples: int


@dataclass(eq=False)
class Tree:
    root: object
    task: Task
    n_features: int
    n_targets: int
    total_training_examples: int

    def nodes(self):
        """Percorre os nós em pré-ordem (negativo antes do positivo)."""
        pilha = [self.root]
        while pilha:
            no = pilha.pop()
            yield no
            if isinstance(no, Split):
                pilha.append(no.positive)
                pilha.append(no.negative)

    def split_nodes(self):
        return [no for no in self.nodes() if isinstance(no, Split)]

    def depth(self):
        maior = 0
        pilha = [(self.root, 0)]
        while pilha:
            no, profundidade = pilha.pop()
            maior = max(maior, profundidade)
            if isinstance(no, Split):
                pilha.append((no.negative, profundidade + 1))
                pilha.append((no.positive, profundidade + 1))
        return maior

    def predict(self, X):
        """Protótipo da folha alcançada por cada linha de X (matriz N × T)."""
        if X.shape[1] != self.n_features:
            raise InvalidArgumentError(
                f"dimensão incompatível: {X.shape[1]} atributos, modelo com {self.n_features}"
            )
        saida = np.empty((X.shape[0], self.n_targets), dtype=np.float64)
        pilha = [(self.root, np.arange(X.shape[0]))]
        while pilha:
            no, linhas = pilha.pop()
            if linhas.size == 0:
                continue
            if isinstance(no, Leaf):
                saida[linhas] = no.prototype
                continue
            positivos = no.plane.margins(matrix.take_rows(X, linhas)) >= 0.0
            pilha.append((no.positive, linhas[positivos]))
            pilha.append((no.negative, linhas[~positivos]))
        return saida


@dataclass(frozen=True)
class GrowConfig:
    variant: str = "grad"
    split: object = None
    max_depth: int = None
    min_examples_to_split: int = 2
    impurity_reduction_threshold: float = 0.05
    feature_subset_fraction: float = 1.0
    seed: int = 0
    sparse_centering: str = "lazy"

    @property
    def split_config(self):
        if self.split is not None:
            return self.split
        return SvmSplitConfig() if self.variant == "svm" else GradSplitConfig()


def node_rng(seed, node_id):
    """Gerador local de um nó, derivado de (semente da árvore, índice do nó)."""
    return np.random.default_rng([int(seed) & 0xFFFFFFFFFFFFFFFF, 1, int(node_id)])


def _check_inputs(X, Y, Z, p):
    n = X.shape[0]
    if n < 1:
        raise InvalidArgumentError("não é possível crescer uma árvore sem exemplos")
    if Y.shape[0] != n or Z.shape[0] != n:
        raise InvalidArgumentError(
            f"dimensão incompatível: X, Y e Z com {n}, {Y.shape[0]} e {Z.shape[0]} linhas"
        )
    p = np.asarray(p, dtype=np.float64)
    if p.shape != (Z.shape[1],):
        raise InvalidArgumentError(f"dimensão incompatível: {p.shape[0]} pesos para {Z.shape[1]} colunas")
    return p


def _subset_size(fracao, d):
    if fracao is None or fracao >= 1.0:
        return d
    return min(d, max(1, int(round(fracao * d))))


def induce(X, Y, Z, p, cfg, split_finder, task=None):
    """
    Laço de indução comum às árvores oblíquas e paralelas aos eixos.

    `split_finder(X_no, Z_no, p, rng, features)` devolve um Hyperplane ou
    None. Um nó vira folha quando: tem menos de min_examples_to_split
    exemplos, atinge max_depth, tem impureza zero, não há hiperplano, um dos
    lados fica vazio ou nenhum filho reduz a impureza relativa em pelo menos
    impurity_reduction_threshold.
    """
    p = _check_inputs(X, Y, Z, p)
    n, d = X.shape
    t = Y.shape[1]
    if task is None:
        task = Task.STR if t == 1 else Task.MTR
    tamanho_subconjunto = _subset_size(cfg.feature_subset_fraction, d)
    minimo = max(2, int(cfg.min_examples_to_split))

    raiz = None
    contador = 0
    pilha = [(np.arange(n), 0, None, None)]
    while pilha:
        linhas, profundidade, pai, lado = pilha.pop()
        no_id = contador
        contador += 1

        Y_no = matrix.take_rows(Y, linhas)
        folha = Leaf(matrix.colmean(Y_no), int(linhas.size))
        no, filhos = folha, None
        motivo = "folha"

        if linhas.size < minimo:
            motivo = "poucos exemplos"
        elif cfg.max_depth is not None and profundidade >= cfg.max_depth:
            motivo = "profundidade máxima"
        else:
            no, filhos, motivo = _try_split(X, Z, p, cfg, split_finder, linhas, no_id, tamanho_subconjunto, folha)

        logger.debug(f"Nó {no_id}: {linhas.size} exemplos, profundidade {profundidade}, {motivo}")
        if pai is None:
            raiz = no
        else:
            setattr(pai, lado, no)
        if filhos is not None:
            negativos, positivos = filhos
            pilha.append((positivos, profundidade + 1, no, "positive"))
            pilha.append((negativos, profundidade + 1, no, "negative"))

    return Tree(raiz, Task(task), d, t, n)


def _try_split(X, Z, p, cfg, split_finder, linhas, no_id, tamanho_subconjunto, folha):
    Z_no = matrix.take_rows(Z, linhas)
    padrao = fit_standardizer(Z_no)
    ativos = ~padrao.constant & (p > 0)
    if not ativos.any():
        return folha, None, "impureza zero"

    rng = node_rng(cfg.seed, no_id)
    d = X.shape[1]
    features = None
    if tamanho_subconjunto < d:
        features = np.sort(rng.choice(d, size=tamanho_subconjunto, replace=False))

    X_no = matrix.choose_representation(matrix.take_rows(X, linhas))
    plano = split_finder(X_no, Z_no, p, rng, features)
    if plano is None:
        return folha, None, "sem hiperplano"

    positivos = plano.margins(X_no) >= 0.0
    if positivos.all() or not positivos.any():
        return folha, None, "subconjunto vazio"

    # impureza sobre Z escalado pelos desvios do nó pai
    pesos = p[ativos] / padrao.stds[ativos] ** 2
    impureza_pai = float(p[ativos].sum())
    reducoes = []
    for mascara in (~positivos, positivos):
        variancia = matrix.colvar(matrix.take_rows(Z_no, np.flatnonzero(mascara)))
        reducoes.append(1.0 - float(pesos @ variancia[ativos]) / impureza_pai)
    limite = cfg.impurity_reduction_threshold
    if limite > 0.0 and max(reducoes) < limite:
        return folha, None, f"redução insuficiente ({max(reducoes):.4f})"

    no = Split(plano, None, None, folha.n_examples)
    return no, (linhas[~positivos], linhas[positivos]), "dividido"


def grow(X, Y, Z, p, cfg, task=None):
    """Cresce uma árvore oblíqua com a variante cfg.variant ("svm" ou "grad")."""

    def _finder(X_no, Z_no, pesos, rng, features):
        return learn_split(
            cfg.variant, X_no, Z_no, pesos, cfg.split_config, rng,
            features=features, sparse_centering=cfg.sparse_centering,
        )

    arvore = induce(X, Y, Z, p, cfg, _finder, task)
    logger.info(f"Árvore {cfg.variant} com {node_count(arvore)} nós e profundidade {arvore.depth()}")
    return arvore


def predict_one(arvore, x):
    x = np.asarray(x, dtype=np.float64).ravel()
    if x.shape[0] != arvore.n_features:
        raise InvalidArgumentError(
            f"dimensão incompatível: {x.shape[0]} atributos, modelo com {arvore.n_features}"
        )
    no = arvore.root
    while isinstance(no, Split):
        no = no.positive if float(x @ no.plane.w) + no.plane.b >= 0.0 else no.negative
    return no.prototype


def node_count(arvore):
    return sum(1 for _ in arvore.nodes())


# ---------------------------------------------------------------------------
# Formato binário
#
#   "OPCT" | versão u16 | tarefa u8 | D u32 | T u32 | N u64 | nós em pré-ordem
#   folha:  0 u8 | n u64 | T × f64
#   divisão: 1 u8 | n u64 | b f64 | nnz u32 | nnz × u32 (índices) | nnz × f64
# Tudo little-endian.
# ---------------------------------------------------------------------------

_HEADER = struct.Struct("<HBIIQ")
_LEAF = struct.Struct("<BQ")
_SPLIT = struct.Struct("<BQdI")


def serialize(arvore):
    partes = [TREE_MAGIC, _HEADER.pack(
        TREE_FORMAT_VERSION, Task(arvore.task).code, arvore.n_features,
        arvore.n_targets, arvore.total_training_examples,
    )]
    for no in arvore.nodes():
        if isinstance(no, Leaf):
            partes.append(_LEAF.pack(0, no.n_examples))
            partes.append(np.asarray(no.prototype, dtype="<f8").tobytes())
        else:
            indices = np.flatnonzero(no.plane.w)
            partes.append(_SPLIT.pack(1, no.n_examples, float(no.plane.b), indices.size))
            partes.append(indices.astype("<u4").tobytes())
            partes.append(np.asarray(no.plane.w[indices], dtype="<f8").tobytes())
    return b"".join(partes)


@dataclass
class _Reader:
    data: bytes
    offset: int = 0
    base: int = field(default=0)

    def unpack(self, estrutura):
        if self.offset + estrutura.size > len(self.data):
            raise ModelFormatError("arquivo truncado", self.base + self.offset)
        valores = estrutura.unpack_from(self.data, self.offset)
        self.offset += estrutura.size
        return valores

    def array(self, dtype, count):
        tamanho = np.dtype(dtype).itemsize * count
        if self.offset + tamanho > len(self.data):
            raise ModelFormatError("arquivo truncado", self.base + self.offset)
        valores = np.frombuffer(self.data, dtype=dtype, count=count, offset=self.offset)
        self.offset += tamanho
        return valores

    def raw(self, count):
        if self.offset + count > len(self.data):
            raise ModelFormatError("arquivo truncado", self.base + self.offset)
        valor = self.data[self.offset:self.offset + count]
        self.offset += count
        return valor


def deserialize(data, base_offset=0):
    """
    Reconstrói uma árvore a partir de serialize().

    Raises:
        ModelFormatError: assinatura errada, versão não suportada ou truncamento.
    """
    leitor = _Reader(bytes(data), base=base_offset)
    if leitor.raw(len(TREE_MAGIC)) != TREE_MAGIC:
        raise ModelFormatError("assinatura inválida (esperado 'OPCT')", base_offset)
    inicio_cabecalho = leitor.offset
    versao, codigo, d, t, n = leitor.unpack(_HEADER)
    if versao != TREE_FORMAT_VERSION:
        raise ModelFormatError(f"versão {versao} não suportada", base_offset + inicio_cabecalho)
    try:
        tarefa = Task.from_code(codigo)
    except KeyError:
        raise ModelFormatError(f"código de tarefa desconhecido {codigo}", base_offset + inicio_cabecalho + 2)

    def _read_node():
        inicio = leitor.offset
        tipo = leitor.data[inicio] if inicio < len(leitor.data) else None
        if tipo == 0:
            _, exemplos = leitor.unpack(_LEAF)
            return Leaf(leitor.array("<f8", t).astype(np.float64), int(exemplos))
        if tipo == 1:
            _, exemplos, b, quantos = leitor.unpack(_SPLIT)
            indices = leitor.array("<u4", quantos).astype(np.intp)
            valores = leitor.array("<f8", quantos).astype(np.float64)
            if quantos and (indices.max() >= d or np.any(np.diff(indices) <= 0)):
                raise ModelFormatError("índices de peso inválidos", base_offset + inicio)
            w = np.zeros(d)
            w[indices] = valores
            return Split(Hyperplane(w, float(b)), None, None, int(exemplos))
        if tipo is None:
            raise ModelFormatError("arquivo truncado", base_offset + inicio)
        raise ModelFormatError(f"tipo de nó desconhecido {tipo}", base_offset + inicio)

    raiz = _read_node()
    pendentes = []
    if isinstance(raiz, Split):
        pendentes.extend([(raiz, "positive"), (raiz, "negative")])
    while pendentes:
        pai, lado = pendentes.pop()
        filho = _read_node()
        setattr(pai, lado, filho)
        if isinstance(filho, Split):
            pendentes.extend([(filho, "positive"), (filho, "negative")])

    if leitor.offset != len(leitor.data):
        raise ModelFormatError("bytes extras após a árvore", base_offset + leitor.offset)
    return Tree(raiz, tarefa, int(d), int(t), int(n))
