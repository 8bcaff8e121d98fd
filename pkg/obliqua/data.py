"""
Conjuntos de dados: leitura e escrita dos formatos de texto, ligação com as
tarefas e reamostragem (validação cruzada e bootstrap).
"""

import csv
import logging
from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np
import scipy.sparse as sp
from sklearn.model_selection import KFold

from obliqua import matrix
from obliqua.error_handler import HierarchyError, InvalidArgumentError, ParseError
from obliqua.preprocess import (
    FeatureEncoder,
    HierarchyGraph,
    expand_hierarchy,
    hierarchy_label_weights,
    one_hot_targets,
)
from obliqua.tree import Task

logger = logging.getLogger("obliqua.data")


def _is_binary(M):
    valores = M.data if matrix.is_sparse(M) else np.ravel(M)
    return bool(np.all((valores == 0.0) | (valores == 1.0)))


@dataclass(frozen=True, eq=False)
class Dataset:
    """
    Atributos X, alvos Y, atributos de agrupamento Z (Y por padrão) e pesos p.

    Para HMLC os pesos padrão são 0.75^profundidade de cada rótulo.
    """

    X: object
    Y: object
    task: Task = Task.MTR
    Z: object = None
    p: np.ndarray = None
    feature_names: tuple = ()
    label_names: tuple = ()
    hierarchy: HierarchyGraph = None
    encoder: FeatureEncoder = None

    def __post_init__(self):
        object.__setattr__(self, "task", Task(self.task))
        if self.Z is None:
            object.__setattr__(self, "Z", self.Y)
        if self.p is None:
            if self.task is Task.HMLC and self.hierarchy is not None and self.Z is self.Y:
                pesos = hierarchy_label_weights(self.hierarchy)
            else:
                pesos = np.ones(self.Z.shape[1])
            object.__setattr__(self, "p", pesos)
        object.__setattr__(self, "p", np.asarray(self.p, dtype=np.float64))
        self._validate()

    def _validate(self):
        n = self.X.shape[0]
        if self.Y.shape[0] != n or self.Z.shape[0] != n:
            raise InvalidArgumentError(
                f"dimensão incompatível: X, Y e Z com {n}, {self.Y.shape[0]} e {self.Z.shape[0]} linhas"
            )
        if self.p.shape != (self.Z.shape[1],):
            raise InvalidArgumentError(
                f"dimensão incompatível: {self.p.shape[0]} pesos para {self.Z.shape[1]} atributos de agrupamento"
            )
        if np.any(self.p < 0) or not np.any(self.p > 0):
            raise InvalidArgumentError("os pesos de agrupamento devem ser não negativos e não todos nulos")

        t = self.Y.shape[1]
        if self.task in (Task.STR, Task.BIN) and t != 1:
            raise InvalidArgumentError(f"a tarefa {self.task.value} exige um único alvo, recebidos {t}")
        if self.task.is_classification and not _is_binary(self.Y):
            raise InvalidArgumentError(f"a tarefa {self.task.value} exige alvos binários")
        if self.task is Task.MCC and n and not np.allclose(np.asarray(self.Y.sum(axis=1)).ravel(), 1.0):
            raise InvalidArgumentError("na tarefa mcc cada linha de Y deve ter exatamente uma classe")
        if self.task is Task.HMLC and self.hierarchy is not None and self.hierarchy.label_count != t:
            raise InvalidArgumentError(
                f"dimensão incompatível: {t} rótulos, hierarquia com {self.hierarchy.label_count}"
            )

    @property
    def n_examples(self):
        return self.X.shape[0]

    @property
    def n_features(self):
        return self.X.shape[1]

    @property
    def n_targets(self):
        return self.Y.shape[1]

    def subset(self, indices):
        indices = np.asarray(indices, dtype=np.intp)
        mesmo_z = self.Z is self.Y
        Y = matrix.take_rows(self.Y, indices)
        return replace(
            self,
            X=matrix.take_rows(self.X, indices),
            Y=Y,
            Z=Y if mesmo_z else matrix.take_rows(self.Z, indices),
        )

    def with_feature_clustering(self, weight):
        """Inclui os atributos entre os de agrupamento: Z = [Z | X], p = [p | weight]."""
        if weight < 0:
            raise InvalidArgumentError("o peso dos atributos no agrupamento deve ser não negativo")
        Z = matrix.hstack([self.Z, self.X])
        p = np.concatenate([self.p, np.full(self.n_features, float(weight))])
        return replace(self, Z=Z, p=p)


@dataclass(frozen=True)
class TargetSpec:
    columns: tuple
    task: Task

    def __post_init__(self):
        object.__setattr__(self, "task", Task(self.task))
        object.__setattr__(self, "columns", tuple(self.columns))
        if not self.columns:
            raise InvalidArgumentError("nenhuma coluna alvo informada")
        if self.task in (Task.STR, Task.BIN, Task.MCC) and len(self.columns) != 1:
            raise InvalidArgumentError(f"a tarefa {self.task.value} exige exatamente uma coluna alvo")


# ---------------------------------------------------------------------------
# Leitura
# ---------------------------------------------------------------------------

def _read_lines(path):
    try:
        return Path(path).read_text(encoding="utf-8").splitlines()
    except UnicodeDecodeError as erro:
        raise ParseError(f"arquivo não está em UTF-8 ({erro.reason})", path=path)


def _read_table(path):
    linhas = _read_lines(path)
    tabela = list(csv.reader(linhas))
    if not tabela or not any(celula.strip() for celula in tabela[0]):
        raise ParseError("arquivo vazio (cabeçalho ausente)", path=path, line=1)
    cabecalho = [nome.strip() for nome in tabela[0]]
    corpo = tabela[1:]
    # linha final vazia não conta como exemplo
    while corpo and not corpo[-1]:
        corpo.pop()
    for i, linha in enumerate(corpo):
        if len(linha) != len(cabecalho):
            raise ParseError(
                f"esperadas {len(cabecalho)} colunas, encontradas {len(linha)}",
                path=path, line=i + 2,
            )
    return cabecalho, corpo


def _parse_float(celula, path, linha, coluna):
    try:
        valor = float(celula)
    except ValueError:
        raise ParseError(f"valor não numérico {celula.strip()!r}", path=path, line=linha, column=coluna)
    if not np.isfinite(valor):
        raise ParseError(f"valor não finito {celula.strip()!r}", path=path, line=linha, column=coluna)
    return valor


def _class_order(valores):
    """Classes em ordem numérica se todas forem inteiras, senão na ordem da primeira ocorrência."""
    distintos = list(dict.fromkeys(valores))
    try:
        numeros = [float(v) for v in distintos]
    except ValueError:
        return distintos
    if all(np.isfinite(x) and float(x).is_integer() for x in numeros):
        return [v for _, v in sorted(zip(numeros, distintos))]
    return distintos


def _encode_targets(nomes, linhas, task, path, indices_colunas):
    """Converte as colunas alvo de uma tabela em Y; devolve (Y, nomes dos rótulos)."""
    n = len(linhas)
    if task is Task.MCC:
        j = indices_colunas[0]
        valores = [linha[j].strip() for linha in linhas]
        classes = _class_order(valores)
        posicao = {c: k for k, c in enumerate(classes)}
        rotulos = np.array([posicao[v] for v in valores], dtype=np.intp)
        return one_hot_targets(rotulos, len(classes)), tuple(classes)

    Y = np.zeros((n, len(indices_colunas)))
    for i, linha in enumerate(linhas):
        for k, j in enumerate(indices_colunas):
            Y[i, k] = _parse_float(linha[j], path, i + 2, j + 1)
    if task.is_classification:
        ruins = np.argwhere((Y != 0.0) & (Y != 1.0))
        if ruins.size:
            i, k = ruins[0]
            raise ParseError(
                f"alvo binário esperado, encontrado {Y[i, k]!r}",
                path=path, line=int(i) + 2, column=indices_colunas[k] + 1,
            )
    nomes_alvo = tuple(nomes[j] for j in indices_colunas)
    if task in (Task.MLC, Task.HMLC):
        return matrix.choose_representation(matrix.as_matrix(Y)), nomes_alvo
    return matrix.as_matrix(Y), nomes_alvo


def _attach_hierarchy(Y, label_names, hierarchy):
    if hierarchy is None:
        return Y
    if tuple(hierarchy.labels) != tuple(label_names):
        raise HierarchyError("os rótulos da hierarquia não coincidem com os rótulos dos alvos")
    return expand_hierarchy(Y, hierarchy)


def load_dense_csv(path, target_spec, hierarchy=None):
    """
    Lê uma tabela CSV com cabeçalho em que as colunas alvo são nomeadas por target_spec.

    Colunas de atributos categóricas viram blocos one-hot; X é guardada em CSR
    quando a densidade após a codificação fica abaixo de 10%.

    Raises:
        ParseError: arquivo vazio, linhas com número errado de colunas, coluna
            alvo ausente ou valor inválido, sempre com a localização.
    """
    cabecalho, linhas = _read_table(path)
    faltando = [c for c in target_spec.columns if c not in cabecalho]
    if faltando:
        raise ParseError(f"coluna alvo ausente: {faltando[0]!r}", path=path, line=1)
    indices_alvo = [cabecalho.index(c) for c in target_spec.columns]
    indices_atributos = [j for j in range(len(cabecalho)) if j not in indices_alvo]

    nomes_atributos = [cabecalho[j] for j in indices_atributos]
    celulas = [[linha[j] for j in indices_atributos] for linha in linhas]
    encoder = FeatureEncoder.fit(nomes_atributos, celulas)
    try:
        X = encoder.transform(celulas, path=path)
    except ParseError as erro:
        # devolve a coluna na numeração do arquivo
        coluna = indices_atributos[erro.column - 1] + 1 if erro.column else None
        raise ParseError(str(erro.args[0]), path=path, line=erro.line, column=coluna)
    X = matrix.choose_representation(matrix.as_matrix(X))

    Y, nomes_rotulos = _encode_targets(cabecalho, linhas, target_spec.task, path, indices_alvo)
    Y = _attach_hierarchy(Y, nomes_rotulos, hierarchy)
    logger.info(
        f"{path}: {X.shape[0]} exemplos, {X.shape[1]} atributos "
        f"({'CSR' if matrix.is_sparse(X) else 'densa'}), {Y.shape[1]} alvos"
    )
    return Dataset(
        X, Y, target_spec.task,
        feature_names=tuple(encoder.output_names()),
        label_names=nomes_rotulos,
        hierarchy=hierarchy,
        encoder=encoder,
    )


def load_feature_table(path, encoder=None):
    """Tabela CSV só de atributos; devolve (X, encoder). Com encoder dado, apenas aplica."""
    cabecalho, linhas = _read_table(path)
    if encoder is None:
        encoder = FeatureEncoder.fit(cabecalho, linhas)
    elif [c.name for c in encoder.columns] != cabecalho:
        raise ParseError("cabeçalho diferente das colunas usadas no treino", path=path, line=1)
    X = encoder.transform(linhas, path=path)
    return matrix.choose_representation(matrix.as_matrix(X)), encoder


def load_target_table(path, task, hierarchy=None):
    """Tabela CSV em que todas as colunas são alvos; devolve (Y, nomes dos rótulos)."""
    task = Task(task)
    cabecalho, linhas = _read_table(path)
    spec = TargetSpec(tuple(cabecalho), task)
    Y, nomes = _encode_targets(cabecalho, linhas, spec.task, path, list(range(len(cabecalho))))
    return _attach_hierarchy(Y, nomes, hierarchy), nomes


def load_sparse_features(path, n_features=None):
    """
    Lê o formato esparso `indice:valor` (índices a partir de 0, crescentes por linha).

    Uma primeira linha opcional `#dims N D` fixa as dimensões. Sem ela, D é
    n_features quando informado, senão o maior índice + 1.
    """
    linhas = _read_lines(path)
    inicio = 0
    esperado_n = None
    d = n_features
    if linhas and linhas[0].startswith("#dims"):
        partes = linhas[0].split()
        if len(partes) != 3 or not all(x.isdigit() for x in partes[1:]):
            raise ParseError("cabeçalho inválido, esperado '#dims N D'", path=path, line=1)
        esperado_n, d_arquivo = int(partes[1]), int(partes[2])
        if d is not None and d != d_arquivo:
            raise InvalidArgumentError(f"dimensão incompatível: arquivo com {d_arquivo} atributos, esperado {d}")
        d = d_arquivo
        inicio = 1

    indptr = [0]
    indices, valores = [], []
    for numero, linha in enumerate(linhas[inicio:], start=inicio + 1):
        anterior = -1
        for coluna, par in enumerate(linha.split(), start=1):
            indice, separador, texto = par.partition(":")
            if not separador or not indice.isdigit():
                raise ParseError(f"par malformado {par!r}", path=path, line=numero, column=coluna)
            j = int(indice)
            if j <= anterior:
                raise ParseError(f"índice {j} não crescente", path=path, line=numero, column=coluna)
            if d is not None and j >= d:
                raise ParseError(f"índice {j} fora de [0, {d})", path=path, line=numero, column=coluna)
            valor = _parse_float(texto, path, numero, coluna)
            anterior = j
            indices.append(j)
            valores.append(valor)
        indptr.append(len(indices))

    n = len(indptr) - 1
    if esperado_n is not None and n != esperado_n:
        raise ParseError(f"esperados {esperado_n} exemplos, encontrados {n}", path=path, line=len(linhas))
    if d is None:
        d = (max(indices) + 1) if indices else 0
    M = sp.csr_matrix(
        (np.asarray(valores, dtype=np.float64), np.asarray(indices, dtype=np.int64), np.asarray(indptr)),
        shape=(n, d),
    )
    logger.info(f"{path}: {n} × {d} esparsa com {M.nnz} não nulos")
    return matrix.as_matrix(M)


def load_label_names(path):
    nomes = []
    for numero, linha in enumerate(_read_lines(path), start=1):
        nome = linha.strip()
        if not nome:
            continue
        if nome in nomes:
            raise ParseError(f"rótulo repetido {nome!r}", path=path, line=numero)
        nomes.append(nome)
    if not nomes:
        raise ParseError("nenhum nome de rótulo", path=path, line=1)
    return tuple(nomes)


def load_label_sets(path, label_names):
    """Uma linha por exemplo com rótulos separados por vírgula; devolve matriz binária CSR."""
    posicao = {nome: j for j, nome in enumerate(label_names)}
    linhas_m, colunas_m = [], []
    linhas = _read_lines(path)
    for i, linha in enumerate(linhas):
        for nome in linha.split(","):
            nome = nome.strip()
            if not nome:
                continue
            if nome not in posicao:
                raise ParseError(f"rótulo desconhecido {nome!r}", path=path, line=i + 1)
            linhas_m.append(i)
            colunas_m.append(posicao[nome])
    M = sp.csr_matrix(
        (np.ones(len(linhas_m)), (linhas_m, colunas_m)), shape=(len(linhas), len(label_names))
    )
    # rótulos repetidos na mesma linha somam; volta a 0/1
    M.sum_duplicates()
    M.data[:] = 1.0
    return matrix.as_matrix(M)


def load_hierarchy(path, label_names=None):
    """
    Lê arestas `pai<TAB>filho` (qualquer espaço em branco separa os nomes).

    Com label_names, a ordem dos rótulos é a desse arquivo e nomes
    desconhecidos são erro; sem ele, os rótulos seguem a primeira ocorrência.

    Raises:
        HierarchyError: ciclo (com testemunha) ou rótulo desconhecido.
    """
    rotulos = list(label_names) if label_names is not None else []
    posicao = {nome: j for j, nome in enumerate(rotulos)}
    arestas = []
    for numero, linha in enumerate(_read_lines(path), start=1):
        if not linha.strip() or linha.lstrip().startswith("#"):
            continue
        partes = linha.split()
        if len(partes) != 2:
            raise ParseError("esperado 'pai<TAB>filho'", path=path, line=numero)
        for nome in partes:
            if nome not in posicao:
                if label_names is not None:
                    raise HierarchyError(f"rótulo desconhecido na hierarquia: {nome!r} (linha {numero})")
                posicao[nome] = len(rotulos)
                rotulos.append(nome)
        arestas.append((posicao[partes[0]], posicao[partes[1]]))
    return HierarchyGraph.from_edges(rotulos, arestas)


def _is_csv(path):
    return Path(path).suffix.lower() == ".csv"


def load_features(path, encoder=None, n_features=None):
    """Atributos de um CSV com cabeçalho (.csv) ou do formato esparso; devolve (X, encoder)."""
    if _is_csv(path):
        return load_feature_table(path, encoder)
    return load_sparse_features(path, n_features), None


def load_targets(path, task, label_names=None, hierarchy=None):
    """
    Alvos de um CSV com cabeçalho (.csv) ou de conjuntos de rótulos (MLC/HMLC).

    Para conjuntos de rótulos sem lista de nomes, usa os rótulos da hierarquia.

    Returns:
        tuple: (Y, nomes dos rótulos)
    """
    task = Task(task)
    if _is_csv(path):
        return load_target_table(path, task, hierarchy)
    if task not in (Task.MLC, Task.HMLC):
        raise InvalidArgumentError(f"conjuntos de rótulos só valem para mlc/hmlc, tarefa {task.value}")
    if label_names is None:
        if hierarchy is None:
            raise InvalidArgumentError("conjuntos de rótulos exigem a lista de nomes dos rótulos")
        label_names = hierarchy.labels
    label_names = tuple(label_names)
    Y = load_label_sets(path, label_names)
    return _attach_hierarchy(Y, label_names, hierarchy), label_names


# ---------------------------------------------------------------------------
# Reamostragem
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class FoldPlan:
    assignments: np.ndarray
    k: int
    seed: int
    stratified: bool = False

    def split(self, fold):
        teste = np.flatnonzero(self.assignments == fold)
        treino = np.flatnonzero(self.assignments != fold)
        return treino, teste

    def __iter__(self):
        for fold in range(self.k):
            yield self.split(fold)


def kfold(n, k, seed, stratify_on=None):
    """
    Divide [0, n) em k partes após um embaralhamento semeado.

    Com stratify_on (rótulo de classe por exemplo) os exemplos de cada classe
    são embaralhados e as classes, em ordem, são distribuídas em rodízio
    pelas partes: cada parte fica com ±1 exemplo de cada classe e os
    tamanhos diferem em no máximo 1, mesmo com classes menores que k.
    """
    if not 2 <= k <= n:
        raise InvalidArgumentError(f"número de partes inválido: k={k} para n={n}")
    estado = int(seed) % (2 ** 32)
    atribuicao = np.full(n, -1, dtype=np.int64)
    if stratify_on is not None:
        classes = np.asarray(stratify_on)
        if classes.shape != (n,):
            raise InvalidArgumentError("o vetor de estratificação deve ter um valor por exemplo")
        gerador = np.random.default_rng(estado)
        ordem = np.concatenate([
            gerador.permutation(np.flatnonzero(classes == classe)) for classe in np.unique(classes)
        ])
        atribuicao[ordem] = np.arange(n) % k
    else:
        divisor = KFold(n_splits=k, shuffle=True, random_state=estado)
        for fold, (_, teste) in enumerate(divisor.split(np.zeros(n))):
            atribuicao[teste] = fold
    return FoldPlan(atribuicao, int(k), int(seed), stratify_on is not None)


def stratification_labels(dataset):
    """Rótulo de classe por exemplo para BIN/MCC; None nas demais tarefas."""
    if dataset.task is Task.BIN:
        return matrix.to_dense(dataset.Y).ravel().astype(np.int64)
    if dataset.task is Task.MCC:
        return np.asarray(matrix.to_dense(dataset.Y).argmax(axis=1)).ravel()
    return None


def bootstrap_indices(n, rng):
    if n < 1:
        raise InvalidArgumentError("bootstrap de um conjunto vazio")
    return rng.integers(0, n, size=n)


# ---------------------------------------------------------------------------
# Escrita (números com repr)
# ---------------------------------------------------------------------------

def _fmt(valor):
    return repr(float(valor))


def write_sparse_features(path, M, dims=True):
    M = matrix.to_sparse(matrix.as_matrix(M))
    linhas = [f"#dims {M.shape[0]} {M.shape[1]}"] if dims else []
    for i in range(M.shape[0]):
        inicio, fim = M.indptr[i], M.indptr[i + 1]
        linhas.append(" ".join(f"{j}:{_fmt(v)}" for j, v in zip(M.indices[inicio:fim], M.data[inicio:fim])))
    Path(path).write_text("".join(f"{linha}\n" for linha in linhas), encoding="utf-8")


def write_label_names(path, label_names):
    Path(path).write_text("".join(f"{nome}\n" for nome in label_names), encoding="utf-8")


def write_label_sets(path, Y, label_names):
    Y = matrix.to_sparse(matrix.as_matrix(Y))
    linhas = []
    for i in range(Y.shape[0]):
        colunas = Y.indices[Y.indptr[i]:Y.indptr[i + 1]]
        linhas.append(",".join(label_names[j] for j in colunas))
    Path(path).write_text("".join(f"{linha}\n" for linha in linhas), encoding="utf-8")


def write_dense_csv(path, names, M):
    M = matrix.to_dense(matrix.as_matrix(M))
    with open(path, "w", newline="", encoding="utf-8") as arquivo:
        escritor = csv.writer(arquivo, lineterminator="\n")
        escritor.writerow(names)
        for linha in M:
            escritor.writerow([_fmt(v) for v in linha])


def write_hierarchy(path, hierarchy):
    linhas = [
        f"{hierarchy.labels[pai]}\t{hierarchy.labels[filho]}"
        for filho in range(hierarchy.label_count)
        for pai in hierarchy.parents[filho]
    ]
    Path(path).write_text("".join(f"{linha}\n" for linha in linhas), encoding="utf-8")


def write_scores(path, S):
    """Uma linha por exemplo com os escores separados por vírgula."""
    S = matrix.to_dense(S)
    Path(path).write_text("".join(",".join(_fmt(v) for v in linha) + "\n" for linha in S), encoding="utf-8")


def read_scores(path):
    valores = []
    for numero, linha in enumerate(_read_lines(path), start=1):
        if not linha.strip():
            continue
        valores.append([_parse_float(c, path, numero, j) for j, c in enumerate(linha.split(","), start=1)])
    larguras = {len(v) for v in valores}
    if len(larguras) > 1:
        raise ParseError("linhas de escores com larguras diferentes", path=path)
    if not valores:
        return np.zeros((0, 0))
    return np.asarray(valores, dtype=np.float64)
