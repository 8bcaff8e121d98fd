import numpy as np
import pytest
import scipy.sparse as sp

from obliqua import matrix


def oblique_toy(seed, n=200, margin=0.1):
    """Duas classes em [0, 1]² separadas por x1 + x2 = 1 com margem geométrica `margin`."""
    rng = np.random.default_rng(seed)
    pontos = []
    while len(pontos) < n:
        x = rng.uniform(0.0, 1.0, size=2)
        if abs(x.sum() - 1.0) / np.sqrt(2.0) >= margin:
            pontos.append(x)
    X = np.asarray(pontos)
    y = (X.sum(axis=1) >= 1.0).astype(np.float64)
    return X, y


def staircase(seed, thresholds, n=200, d=3, margin=0.05):
    """
    Pontos em [0, 1]^d afastados (distância geométrica `margin`) dos planos
    soma(x) = t. Devolve X, o número de limiares ultrapassados e a matriz
    0/1 com uma coluna por limiar.
    """
    rng = np.random.default_rng(seed)
    limiares = np.asarray(thresholds, dtype=np.float64)
    pontos = []
    while len(pontos) < n:
        x = rng.uniform(0.0, 1.0, size=d)
        if np.min(np.abs(x.sum() - limiares)) / np.sqrt(d) >= margin:
            pontos.append(x)
    X = np.asarray(pontos)
    acima = (X.sum(axis=1)[:, None] >= limiares).astype(np.float64)
    return X, acima.sum(axis=1), acima


def random_sparse(rng, n, d, density):
    M = sp.random(n, d, density=density, format="csr", random_state=rng, data_rvs=rng.standard_normal)
    return matrix.as_matrix(M)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture
def toy():
    return oblique_toy(0)


@pytest.fixture
def regression_data(rng):
    X = rng.standard_normal((60, 4))
    Y = np.column_stack([X[:, 0] + 0.1 * rng.standard_normal(60), X[:, 1] - X[:, 2]])
    return X, Y
