"""
Importância de atributos a partir dos pesos das divisões e auditoria com
atributos de ruído.
"""

import logging
from dataclasses import dataclass, replace

import numpy as np
import scipy.sparse as sp

from obliqua import matrix
from obliqua.ensemble import fit_ensemble
from obliqua.error_handler import InvalidArgumentError

logger = logging.getLogger("obliqua.importance")


def tree_importance(tree):
    """Σ sobre as divisões de (n_nó/N)·|w|/‖w‖₁."""
    importancia = np.zeros(tree.n_features)
    if tree.total_training_examples <= 0:
        return importancia
    for no in tree.split_nodes():
        absolutos = np.abs(no.plane.w)
        norma = float(absolutos.sum())
        if norma > 0.0:
            importancia += (no.n_examples / tree.total_training_examples) * absolutos / norma
    return importancia


def ensemble_importance(model):
    return np.mean([tree_importance(arvore) for arvore in model.trees], axis=0)


@dataclass(frozen=True)
class NoiseAuditReport:
    importances: np.ndarray
    groups: tuple  # "real" ou "noise" por atributo
    real_mean: float
    real_max: float
    noise_mean: float
    noise_max: float

    def rows(self):
        """Linhas da tabela feature_id, group, importance."""
        return [(j, grupo, float(valor)) for j, (grupo, valor) in enumerate(zip(self.groups, self.importances))]

    def to_csv(self):
        linhas = ["feature_id,group,importance"]
        linhas.extend(f"{j},{grupo},{valor!r}" for j, grupo, valor in self.rows())
        return "\n".join(linhas) + "\n"

    def summary(self):
        return {
            "real_mean": self.real_mean,
            "real_max": self.real_max,
            "noise_mean": self.noise_mean,
            "noise_max": self.noise_max,
        }


def noise_columns(X, rng):
    """
    D colunas de ruído com a mesma fração de não nulos de X.

    Densa: valores uniformes em [0, 1). Esparsa: cada coluna recebe
    round(densidade·N) posições sorteadas com valores uniformes em (0, 1].
    """
    n, d = X.shape
    if not matrix.is_sparse(X):
        return rng.uniform(0.0, 1.0, size=(n, d))
    densidades = np.diff(X.tocsc().indptr) / max(n, 1)
    linhas, colunas, valores = [], [], []
    for j, densidade in enumerate(densidades):
        quantos = min(n, int(round(densidade * n)))
        if quantos == 0:
            continue
        posicoes = rng.choice(n, size=quantos, replace=False)
        linhas.append(posicoes)
        colunas.append(np.full(quantos, j))
        # valores em (0, 1] para não criar zeros explícitos
        valores.append(1.0 - rng.uniform(0.0, 1.0, size=quantos))
    if not linhas:
        return matrix.as_matrix(sp.csr_matrix((n, d)))
    ruido = sp.csr_matrix(
        (np.concatenate(valores), (np.concatenate(linhas), np.concatenate(colunas))), shape=(n, d)
    )
    return matrix.as_matrix(ruido)


def noise_audit(dataset, cfg, rng):
    """
    Acrescenta D atributos de ruído, treina o conjunto configurado e separa
    as importâncias entre atributos reais e de ruído.

    Returns:
        NoiseAuditReport
    """
    d = dataset.n_features
    if d < 1:
        raise InvalidArgumentError("a auditoria precisa de pelo menos um atributo")
    ruido = noise_columns(dataset.X, rng)
    X = matrix.hstack([dataset.X, ruido])
    nomes = tuple(dataset.feature_names) or tuple(f"x{j}" for j in range(d))
    aumentado = replace(
        dataset, X=X, feature_names=nomes + tuple(f"noise{j}" for j in range(d)), encoder=None
    )
    logger.info(f"Auditoria de ruído: {d} atributos reais + {d} de ruído")
    modelo = fit_ensemble(aumentado, cfg)
    importancias = ensemble_importance(modelo)
    reais, ruidosos = importancias[:d], importancias[d:]
    return NoiseAuditReport(
        importancias,
        ("real",) * d + ("noise",) * d,
        float(reais.mean()),
        float(reais.max()),
        float(ruidosos.mean()),
        float(ruidosos.max()),
    )
