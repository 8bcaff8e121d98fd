"""
Conjuntos (bagging e florestas aleatórias) de árvores oblíquas com
treinamento paralelo determinístico, predição por média e formato de arquivo.
"""

import json
import logging
import struct
import time
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path

import numpy as np
from joblib import Parallel, delayed

from obliqua import matrix
from obliqua.baseline import grow_axis_parallel
from obliqua.data import bootstrap_indices
from obliqua.error_handler import InvalidArgumentError, ModelFormatError
from obliqua.tree import TREE_MAGIC, GrowConfig, Task, deserialize, grow, serialize

logger = logging.getLogger("obliqua.ensemble")

ENSEMBLE_MAGIC = b"OPCE"
ENSEMBLE_FORMAT_VERSION = 1

MODES = ("single", "bagging", "random_forest")
TREE_VARIANTS = ("svm", "grad", "axis")

_MASK64 = 0xFFFFFFFFFFFFFFFF


def tree_seed(master_seed, index):
    """Semente de 64 bits da árvore `index` (mistura splitmix64)."""
    z = (int(master_seed) + (int(index) + 1) * 0x9E3779B97F4A7C15) & _MASK64
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK64
    return z ^ (z >> 31)


@dataclass(frozen=True)
class EnsembleConfig:
    n_trees: int = 50
    mode: str = "bagging"
    grow: object = None
    master_seed: int = 0
    workers: int = 1

    def __post_init__(self):
        if self.grow is None:
            object.__setattr__(self, "grow", GrowConfig())
        if self.mode not in MODES:
            raise InvalidArgumentError(f"modo desconhecido: {self.mode!r}")
        if self.grow.variant not in TREE_VARIANTS:
            raise InvalidArgumentError(f"variante desconhecida: {self.grow.variant!r}")
        if int(self.n_trees) < 1:
            raise InvalidArgumentError("o conjunto precisa de pelo menos uma árvore")

    @property
    def tree_count(self):
        return 1 if self.mode == "single" else int(self.n_trees)

    def grow_config_for(self, n_features):
        """Configuração de crescimento efetiva; florestas usam √D de D atributos por divisão."""
        if self.mode == "random_forest" and (
            self.grow.feature_subset_fraction is None or self.grow.feature_subset_fraction >= 1.0
        ):
            fracao = np.sqrt(n_features) / n_features if n_features else 1.0
            return replace(self.grow, feature_subset_fraction=float(fracao))
        return self.grow

    def to_dict(self):
        """Eco da configuração guardado no modelo (sem `workers`, que não altera o resultado)."""
        crescimento = asdict(self.grow)
        crescimento["split"] = asdict(self.grow.split_config)
        crescimento.pop("seed", None)
        return {
            "mode": self.mode,
            "n_trees": self.tree_count,
            "master_seed": int(self.master_seed),
            "grow": crescimento,
        }


def grow_tree(X, Y, Z, p, cfg, task=None):
    """Cresce uma árvore oblíqua ou, com variant="axis", paralela aos eixos."""
    if cfg.variant == "axis":
        return grow_axis_parallel(X, Y, Z, p, cfg, task)
    return grow(X, Y, Z, p, cfg, task)


@dataclass(eq=False)
class EnsembleModel:
    trees: list
    task: Task
    metadata: dict = field(default_factory=dict)
    config: dict = field(default_factory=dict)

    def __post_init__(self):
        self.task = Task(self.task)
        if not self.trees:
            raise InvalidArgumentError("modelo sem árvores")
        formas = {(t.n_features, t.n_targets) for t in self.trees}
        if len(formas) != 1:
            raise InvalidArgumentError("as árvores do conjunto têm dimensões diferentes")

    @property
    def n_features(self):
        return self.trees[0].n_features

    @property
    def n_targets(self):
        return self.trees[0].n_targets


def _fit_one(dataset, cfg_grow, seed, index, bootstrap):
    inicio = time.perf_counter()
    X, Y, Z = dataset.X, dataset.Y, dataset.Z
    if bootstrap:
        linhas = bootstrap_indices(dataset.n_examples, np.random.default_rng([seed, 0]))
        X = matrix.take_rows(X, linhas)
        Y = matrix.take_rows(Y, linhas)
        Z = Y if dataset.Z is dataset.Y else matrix.take_rows(Z, linhas)
    arvore = grow_tree(X, Y, Z, dataset.p, replace(cfg_grow, seed=seed), dataset.task)
    logger.info(f"Árvore {index + 1} concluída em {time.perf_counter() - inicio:.3f}s")
    return arvore


def fit_ensemble(dataset, cfg):
    """
    Treina cfg.tree_count árvores; a árvore t usa a semente tree_seed(master_seed, t).

    No modo "single" é treinada uma única árvore sem bootstrap. O resultado
    não depende de cfg.workers.
    """
    if dataset.n_examples < 1:
        raise InvalidArgumentError("não é possível treinar com um conjunto de dados vazio")
    cfg_grow = cfg.grow_config_for(dataset.n_features)
    bootstrap = cfg.mode != "single"
    sementes = [tree_seed(cfg.master_seed, t) for t in range(cfg.tree_count)]
    logger.info(
        f"Treinando {cfg.tree_count} árvore(s) {cfg_grow.variant} no modo {cfg.mode} "
        f"com {max(1, int(cfg.workers))} trabalhador(es)"
    )
    arvores = Parallel(n_jobs=max(1, int(cfg.workers)), prefer="threads")(
        delayed(_fit_one)(dataset, cfg_grow, semente, t, bootstrap)
        for t, semente in enumerate(sementes)
    )
    metadados = {
        "feature_names": list(dataset.feature_names),
        "label_names": list(dataset.label_names),
        "encoder": dataset.encoder.to_dict() if dataset.encoder is not None else None,
    }
    return EnsembleModel(list(arvores), dataset.task, metadados, cfg.to_dict())


def predict(model, X):
    """Média, linha a linha, dos protótipos previstos por cada árvore (matriz N × T)."""
    if X.shape[1] != model.n_features:
        raise InvalidArgumentError(
            f"dimensão incompatível: {X.shape[1]} atributos, modelo com {model.n_features}"
        )
    soma = np.zeros((X.shape[0], model.n_targets))
    for arvore in model.trees:
        soma += arvore.predict(X)
    return soma / len(model.trees)


def decode_predictions(scores, task, threshold=0.5):
    """
    Converte escores em rótulos da tarefa.

    BIN e MLC: rótulo presente quando escore ≥ threshold (matriz 0/1).
    MCC: índice da maior classe, empates para o menor índice.
    STR, MTR e HMLC: escores inalterados.
    """
    task = Task(task)
    scores = matrix.to_dense(scores)
    if task in (Task.BIN, Task.MLC):
        return (scores >= threshold).astype(np.int64)
    if task is Task.MCC:
        return np.argmax(scores, axis=1).astype(np.int64)
    return scores


def summarize_model(model):
    """Estatísticas de tamanho do modelo (nós, profundidade e pesos não nulos por divisão)."""
    nos = folhas = divisoes = 0
    profundidade = 0
    medias_por_arvore = []
    for arvore in model.trees:
        planos = arvore.split_nodes()
        total = sum(1 for _ in arvore.nodes())
        nos += total
        divisoes += len(planos)
        folhas += total - len(planos)
        profundidade = max(profundidade, arvore.depth())
        if planos:
            medias_por_arvore.append(float(np.mean([no.plane.nonzero for no in planos])))
    return {
        "trees": len(model.trees),
        "nodes": nos,
        "leaves": folhas,
        "splits": divisoes,
        "max_depth": profundidade,
        "features": model.n_features,
        "targets": model.n_targets,
        "mean_nonzero_weights": float(np.mean(medias_por_arvore)) if medias_por_arvore else 0.0,
    }


# ---------------------------------------------------------------------------
# Formato do conjunto
#
#   "OPCE" | versão u16 | n_árvores u32 | tamanho u32 | JSON (tarefa, metadados, config)
#   e, para cada árvore, tamanho u64 | bloco "OPCT"
# ---------------------------------------------------------------------------

_HEADER = struct.Struct("<HII")
_BLOCK = struct.Struct("<Q")


def serialize_model(model):
    cabecalho = json.dumps(
        {"task": model.task.value, "metadata": model.metadata, "config": model.config},
        sort_keys=True, separators=(",", ":"),
    ).encode("utf-8")
    partes = [ENSEMBLE_MAGIC, _HEADER.pack(ENSEMBLE_FORMAT_VERSION, len(model.trees), len(cabecalho)), cabecalho]
    for arvore in model.trees:
        bloco = serialize(arvore)
        partes.append(_BLOCK.pack(len(bloco)))
        partes.append(bloco)
    return b"".join(partes)


def deserialize_model(data):
    """
    Lê um conjunto "OPCE" ou uma árvore isolada "OPCT".

    Raises:
        ModelFormatError: assinatura, versão ou tamanho inválidos, com a posição em bytes.
    """
    data = bytes(data)
    if data[:4] == TREE_MAGIC:
        arvore = deserialize(data)
        return EnsembleModel([arvore], arvore.task)
    if data[:4] != ENSEMBLE_MAGIC:
        raise ModelFormatError("assinatura inválida (esperado 'OPCE' ou 'OPCT')", 0)
    posicao = 4
    if len(data) < posicao + _HEADER.size:
        raise ModelFormatError("arquivo truncado", len(data))
    versao, n_arvores, tamanho = _HEADER.unpack_from(data, posicao)
    if versao != ENSEMBLE_FORMAT_VERSION:
        raise ModelFormatError(f"versão {versao} não suportada", posicao)
    posicao += _HEADER.size
    if len(data) < posicao + tamanho:
        raise ModelFormatError("arquivo truncado", len(data))
    try:
        cabecalho = json.loads(data[posicao:posicao + tamanho].decode("utf-8"))
        tarefa = Task(cabecalho["task"])
    except (UnicodeDecodeError, ValueError, KeyError) as erro:
        raise ModelFormatError(f"cabeçalho JSON inválido ({erro})", posicao)
    posicao += tamanho

    arvores = []
    for _ in range(n_arvores):
        if len(data) < posicao + _BLOCK.size:
            raise ModelFormatError("arquivo truncado", len(data))
        (tamanho_bloco,) = _BLOCK.unpack_from(data, posicao)
        posicao += _BLOCK.size
        if len(data) < posicao + tamanho_bloco:
            raise ModelFormatError("arquivo truncado", len(data))
        arvores.append(deserialize(data[posicao:posicao + tamanho_bloco], base_offset=posicao))
        posicao += tamanho_bloco
    if posicao != len(data):
        raise ModelFormatError("bytes extras após o conjunto", posicao)
    if not arvores:
        raise ModelFormatError("conjunto sem árvores", posicao)
    return EnsembleModel(arvores, tarefa, cabecalho.get("metadata", {}), cabecalho.get("config", {}))


def save_model(path, model):
    Path(path).write_bytes(serialize_model(model))
    logger.info(f"Modelo salvo em {path}")


def load_model(path):
    return deserialize_model(Path(path).read_bytes())
