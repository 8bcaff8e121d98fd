"""
obliqua: árvores de agrupamento preditivo oblíquas (PCTs) e seus conjuntos.

Regressão de um ou vários alvos e classificação binária, multiclasse,
multirrótulo e hierárquica multirrótulo, com dados densos ou esparsos.
"""

from obliqua.data import Dataset
from obliqua.ensemble import EnsembleConfig, EnsembleModel, fit_ensemble, predict
from obliqua.split import GradSplitConfig, Hyperplane, SvmSplitConfig
from obliqua.tree import GrowConfig, Task, Tree, grow

__version__ = "0.1.0"

__all__ = [
    "Dataset",
    "EnsembleConfig",
    "EnsembleModel",
    "GradSplitConfig",
    "GrowConfig",
    "Hyperplane",
    "SvmSplitConfig",
    "Task",
    "Tree",
    "fit_ensemble",
    "grow",
    "predict",
]
