"""
Bateria de escalabilidade: mede o tempo de aprender uma divisão e de crescer
uma árvore para as variantes svm, grad e axis em dados sintéticos, variando
K (atributos de agrupamento), D (atributos) e a representação (densa/CSR).
"""

import csv
import json
import logging
import time
from dataclasses import dataclass
from datetime import datetime

import numpy as np
import scipy.sparse as sp

from obliqua import matrix
from obliqua.baseline import best_axis_test
from obliqua.ensemble import grow_tree
from obliqua.error_handler import InvalidArgumentError
from obliqua.split import learn_split
from obliqua.tree import GrowConfig, node_count

logger = logging.getLogger("obliqua.benchmark")

CSV_COLUMNS = ("variant", "stage", "N", "D", "K", "sparse", "seconds", "nodes")
VARIANTS = ("svm", "grad", "axis")


@dataclass(frozen=True)
class BenchmarkSuite:
    n: int
    d: int
    k_values: tuple
    d_values: tuple
    sparse_density: float
    tree_max_depth: int
    repeats: int


SUITES = {
    "scaling": BenchmarkSuite(2000, 50, (10, 100, 1000), (10, 100, 1000), 0.05, 3, 3),
    "quick": BenchmarkSuite(200, 10, (5, 50), (5, 50), 0.05, 2, 1),
}


def synthetic_mtr(n, d, k, rng, density=1.0):
    """
    Regressão multialvo sintética: Z = X·W + ruído, com W esparsa (5 atributos por alvo).

    Com density < 1, X é CSR com aproximadamente essa fração de não nulos.
    """
    if density < 1.0:
        X = sp.random(n, d, density=density, format="csr", random_state=rng, data_rvs=rng.standard_normal)
        X = matrix.as_matrix(X)
    else:
        X = rng.standard_normal((n, d))
    W = np.zeros((d, k))
    for j in range(k):
        W[rng.choice(d, size=min(5, d), replace=False), j] = rng.standard_normal(min(5, d))
    Z = np.asarray(X @ W) + 0.1 * rng.standard_normal((n, k))
    return X, matrix.as_matrix(Z)


class ScalingBenchmark:
    def __init__(self, suite="scaling", seed=0):
        if isinstance(suite, BenchmarkSuite):
            self.suite_name, self.suite = "custom", suite
        elif suite in SUITES:
            self.suite_name, self.suite = suite, SUITES[suite]
        else:
            raise InvalidArgumentError(f"bateria desconhecida: {suite!r}")
        self.seed = int(seed)
        self.rows = []
        self.statistics = {
            "start_time": datetime.now().isoformat(),
            "suite": self.suite_name,
            "seed": self.seed,
            "cells": self.rows,
            "growth_ratios": {},
        }

    def _rng(self, *chave):
        return np.random.default_rng([self.seed, *chave])

    def _record(self, variant, stage, X, Z, seconds, nodes):
        linha = {
            "variant": variant,
            "stage": stage,
            "N": int(X.shape[0]),
            "D": int(X.shape[1]),
            "K": int(Z.shape[1]),
            "sparse": bool(matrix.is_sparse(X)),
            "seconds": float(seconds),
            "nodes": int(nodes),
        }
        self.rows.append(linha)
        logger.info(
            f"{variant:>4} {stage:<5} N={linha['N']} D={linha['D']} K={linha['K']} "
            f"{'CSR' if linha['sparse'] else 'densa'}: {seconds:.4f}s ({nodes} nós)"
        )
        return linha

    def time_split(self, variant, X, Z):
        """Menor tempo (entre as repetições) para aprender a divisão da raiz."""
        p = np.ones(Z.shape[1])
        cfg = GrowConfig(variant=variant).split_config
        melhor = np.inf
        for r in range(self.suite.repeats):
            rng = self._rng(1, r)
            inicio = time.perf_counter()
            if variant == "axis":
                best_axis_test(X, Z, p)
            else:
                learn_split(variant, X, Z, p, cfg, rng)
            melhor = min(melhor, time.perf_counter() - inicio)
        return self._record(variant, "split", X, Z, melhor, 1)

    def time_tree(self, variant, X, Z):
        cfg = GrowConfig(variant=variant, max_depth=self.suite.tree_max_depth, seed=self.seed)
        p = np.ones(Z.shape[1])
        inicio = time.perf_counter()
        arvore = grow_tree(X, Z, Z, p, cfg)
        segundos = time.perf_counter() - inicio
        return self._record(variant, "tree", X, Z, segundos, node_count(arvore))

    def run_k_sweep(self, trees=True):
        """Tempos por K com D = suite.d; com trees=False mede só a divisão da raiz."""
        logger.info(f"Variando K em {self.suite.k_values}")
        for k in self.suite.k_values:
            X, Z = synthetic_mtr(self.suite.n, self.suite.d, k, self._rng(2, k))
            for variante in VARIANTS:
                self.time_split(variante, X, Z)
                if trees:
                    self.time_tree(variante, X, Z)

    def run_d_sweep(self):
        k = self.suite.k_values[0]
        logger.info(f"Variando D em {self.suite.d_values}")
        for d in self.suite.d_values:
            X, Z = synthetic_mtr(self.suite.n, d, k, self._rng(3, d))
            for variante in VARIANTS:
                self.time_split(variante, X, Z)

    def run_sparse_comparison(self):
        """Mesmos dados em CSR e densos, com 1 − sparse_density de zeros."""
        d = max(self.suite.d_values)
        k = self.suite.k_values[0]
        X, Z = synthetic_mtr(self.suite.n, d, k, self._rng(4), density=self.suite.sparse_density)
        for variante in ("svm", "grad"):
            for representacao in (X, matrix.to_dense(X)):
                self.time_split(variante, representacao, Z)
                self.time_tree(variante, representacao, Z)

    def growth_ratios(self):
        """Razão entre os tempos de divisão no maior e no menor K, por variante (dados densos)."""
        k_min, k_max = min(self.suite.k_values), max(self.suite.k_values)
        razoes = {}
        for variante in VARIANTS:
            tempos = {
                linha["K"]: linha["seconds"]
                for linha in self.rows
                if linha["variant"] == variante and linha["stage"] == "split"
                and not linha["sparse"] and linha["D"] == self.suite.d
            }
            if k_min in tempos and k_max in tempos and tempos[k_min] > 0:
                razoes[variante] = tempos[k_max] / tempos[k_min]
        self.statistics["growth_ratios"] = razoes
        return razoes

    def run(self):
        self.run_k_sweep()
        self.run_d_sweep()
        self.run_sparse_comparison()
        self.growth_ratios()
        self.statistics["end_time"] = datetime.now().isoformat()
        return self.rows

    def write_csv(self, path):
        with open(path, "w", newline="", encoding="utf-8") as arquivo:
            escritor = csv.DictWriter(arquivo, fieldnames=CSV_COLUMNS, lineterminator="\n")
            escritor.writeheader()
            for linha in self.rows:
                escritor.writerow({**linha, "seconds": repr(linha["seconds"]), "sparse": int(linha["sparse"])})
        logger.info(f"Tabela de tempos salva em {path}")

    def save_statistics(self, path):
        """Salva as estatísticas atuais em um arquivo JSON"""
        with open(path, "w", encoding="utf-8") as f:
            json.dump(self.statistics, f, ensure_ascii=False, indent=2)
        logger.info(f"Estatísticas salvas em {path}")

