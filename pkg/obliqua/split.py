"""
Aprendizado de divisões oblíquas.

Duas variantes:
  - "svm": agrupa as linhas de Z em dois grupos (k-means) e aproxima essa
    partição com um classificador linear L1 + perda hinge quadrática;
  - "grad": minimiza diretamente a impureza difusa dos dois lados do
    hiperplano com Adam, regularizada pela norma L½ suavizada.

As duas trabalham sobre X e Z padronizados no nó e devolvem o hiperplano já
convertido para o espaço original dos atributos.
"""

import logging
from dataclasses import dataclass

import numpy as np
from scipy.special import expit

from obliqua import matrix
from obliqua.error_handler import (
    DegenerateSplitError,
    DegenerateWeightsError,
    InvalidArgumentError,
)
from obliqua.preprocess import apply_standardizer, centered_view, fit_standardizer

logger = logging.getLogger("obliqua.split")

# Pesos com |w_i| < TRUNCATION_RATIO·max|w| viram zero exato
TRUNCATION_RATIO = 1e-4

VARIANTS = ("svm", "grad")


@dataclass(frozen=True, eq=False)
class Hyperplane:
    """Teste x·w + b ≥ 0 (lado positivo) no espaço original dos atributos."""

    w: np.ndarray
    b: float

    def margins(self, X):
        return matrix.matvec(X, self.w) + self.b

    @property
    def nonzero(self):
        return int(np.count_nonzero(self.w))


@dataclass(frozen=True)
class SvmSplitConfig:
    C: float = 10.0
    max_cluster_iter: int = 10
    max_opt_iter: int = 100
    tol: float = 1e-4


@dataclass(frozen=True)
class GradSplitConfig:
    C: float = 10.0
    lr: float = 0.1
    max_opt_iter: int = 100
    tol: float = 1e-4
    adam_beta1: float = 0.9
    adam_beta2: float = 0.999
    adam_eps: float = 1e-8
    reg_smooth_eps: float = 1e-8


def _converged(anterior, atual, tol):
    return abs(anterior - atual) <= tol * max(abs(anterior), np.finfo(float).tiny)


# ---------------------------------------------------------------------------
# Agrupamento em dois grupos
# ---------------------------------------------------------------------------

def kmeans2(Z, max_iter, rng, history=None):
    """
    Iterações de Lloyd com k=2 e distância euclidiana.

    Os centróides começam em duas linhas distintas sorteadas. Para quando a
    atribuição não muda ou ao atingir max_iter.

    Args:
        Z: matriz N × K (densa ou CSR).
        max_iter (int): máximo de iterações.
        rng (numpy.random.Generator): gerador semeado.
        history (list | None): recebe a soma de quadrados intra-grupo de cada iteração.

    Returns:
        numpy.ndarray: vetor de ±1.

    Raises:
        DegenerateSplitError: se todas as linhas forem idênticas.
    """
    n = Z.shape[0]
    if n < 2:
        raise InvalidArgumentError("k-means precisa de pelo menos 2 linhas")

    normas = matrix.row_sq_norms(Z)
    i = int(rng.integers(n))
    zi = matrix.to_dense(matrix.take_rows(Z, [i])).ravel()
    distancias = np.maximum(normas - 2.0 * matrix.matvec(Z, zi) + zi @ zi, 0.0)
    limite = 1e-12 * max(1.0, float(normas.max()))
    candidatos = np.flatnonzero(distancias > limite)
    if candidatos.size == 0:
        raise DegenerateSplitError("todas as linhas de Z são idênticas")
    j = int(candidatos[rng.integers(candidatos.size)])
    centro_pos = zi
    centro_neg = matrix.to_dense(matrix.take_rows(Z, [j])).ravel()

    atribuicao = None
    soma_total = matrix.rmatvec(Z, np.ones(n))
    for iteracao in range(max(1, int(max_iter))):
        # d_pos − d_neg com um único produto por Z
        diferenca = (
            2.0 * matrix.matvec(Z, centro_neg - centro_pos)
            + centro_pos @ centro_pos - centro_neg @ centro_neg
        )
        nova = np.where(diferenca <= 0.0, 1, -1).astype(np.int8)
        if history is not None:
            d_neg = normas - 2.0 * matrix.matvec(Z, centro_neg) + centro_neg @ centro_neg
            history.append(float(np.maximum(d_neg + np.minimum(diferenca, 0.0), 0.0).sum()))
        if atribuicao is not None and np.array_equal(nova, atribuicao):
            logger.debug(f"k-means convergiu em {iteracao + 1} iterações")
            break
        if np.all(nova == nova[0]):
            # grupo vazio: mantém a última atribuição válida
            if atribuicao is None:
                atribuicao = nova
            break
        atribuicao = nova
        positivos = (atribuicao == 1).astype(np.float64)
        n_pos = float(positivos.sum())
        soma_pos = matrix.rmatvec(Z, positivos)
        centro_pos = soma_pos / n_pos
        centro_neg = (soma_total - soma_pos) / (n - n_pos)

    return atribuicao


# ---------------------------------------------------------------------------
# Classificador linear L1 + hinge quadrática
# ---------------------------------------------------------------------------

def svc_objective(X, c, w, b, C):
    """||w||₁ + C·Σ max(0, 1 − cᵢ(Xᵢ·w + b))²"""
    folga = np.maximum(0.0, 1.0 - c * (matrix.matvec(X, w) + b))
    return float(np.abs(w).sum() + C * (folga @ folga))


def _lipschitz_bound(X, iteracoes=30):
    """Estimativa de λmax([X 1]ᵀ[X 1]) por iteração de potência."""
    n, d = X.shape
    v = np.full(d + 1, 1.0 / np.sqrt(d + 1))
    autovalor = float(n)
    for _ in range(iteracoes):
        u = matrix.matvec(X, v[:d]) + v[d]
        novo = np.concatenate([matrix.rmatvec(X, u), [u.sum()]])
        norma = float(np.linalg.norm(novo))
        if norma == 0.0:
            break
        autovalor = norma
        v = novo / norma
    # o autovalor nunca é menor que ||1||² = n
    return max(autovalor, float(n)) * 1.01


def fit_svc(X, c, cfg, history=None):
    """
    Ajusta (w, b) minimizando ||w||₁ + C·Σ max(0, 1 − cᵢ(Xᵢ·w + b))².

    Gradiente proximal acelerado (FISTA) com reinício quando o objetivo
    sobe; o viés não é regularizado. Devolve a melhor iteração.

    Args:
        X: matriz padronizada N × D (densa, CSR ou LinearOperator).
        c (numpy.ndarray): rótulos ±1 dos grupos.
        cfg (SvmSplitConfig): configuração.
        history (list | None): recebe o melhor objetivo após cada iteração.

    Returns:
        Hyperplane: no espaço padronizado recebido.
    """
    n, d = X.shape
    c = np.asarray(c, dtype=np.float64)
    if c.shape != (n,):
        raise InvalidArgumentError(f"dimensão incompatível: {c.shape[0]} rótulos para {n} linhas")
    C = float(cfg.C)

    lipschitz = 2.0 * C * _lipschitz_bound(X)
    w, b = np.zeros(d), 0.0
    objetivo = svc_objective(X, c, w, b, C)
    melhor = (objetivo, w.copy(), b)
    if history is not None:
        history.append(objetivo)

    y_w, y_b, t = w.copy(), b, 1.0
    reinicios = 0
    for iteracao in range(int(cfg.max_opt_iter)):
        passo = 1.0 / lipschitz
        folga = np.maximum(0.0, 1.0 - c * (matrix.matvec(X, y_w) + y_b))
        g = -2.0 * C * c * folga
        grad_w = matrix.rmatvec(X, g)
        grad_b = float(g.sum())

        z = y_w - passo * grad_w
        novo_w = np.sign(z) * np.maximum(np.abs(z) - passo, 0.0)
        novo_b = y_b - passo * grad_b
        novo_objetivo = svc_objective(X, c, novo_w, novo_b, C)

        if novo_objetivo > objetivo:
            # reinicia o momento a partir do último ponto aceito
            reinicios += 1
            if reinicios >= 2:
                lipschitz *= 2.0
            y_w, y_b, t = w.copy(), b, 1.0
            if history is not None:
                history.append(melhor[0])
            continue
        reinicios = 0

        t_novo = (1.0 + np.sqrt(1.0 + 4.0 * t * t)) / 2.0
        momento = (t - 1.0) / t_novo
        y_w = novo_w + momento * (novo_w - w)
        y_b = novo_b + momento * (novo_b - b)
        anterior = objetivo
        w, b, t, objetivo = novo_w, novo_b, t_novo, novo_objetivo

        if objetivo < melhor[0]:
            melhor = (objetivo, w.copy(), b)
        if history is not None:
            history.append(melhor[0])
        if _converged(anterior, objetivo, cfg.tol):
            logger.debug(f"SVM convergiu em {iteracao + 1} iterações")
            break

    return Hyperplane(melhor[1], float(melhor[2]))


# ---------------------------------------------------------------------------
# Impureza difusa e aptidão da divisão
# ---------------------------------------------------------------------------

def fuzzy_impurity(Z, p, s):
    """Σⱼ pⱼ·var(Z.ⱼ, s)"""
    p = np.asarray(p, dtype=np.float64)
    if p.shape != (Z.shape[1],):
        raise InvalidArgumentError(f"dimensão incompatível: {p.shape[0]} pesos para {Z.shape[1]} colunas")
    return float(p @ matrix.weighted_colvar(Z, s))


class _FitnessKernel:
    """
    Avalia f(w, b) = S·imp(Z,p,s) + (N−S)·imp(Z,p,1−s) e seu gradiente.

    Usa a identidade A·imp(a) = a·q − Σⱼ pⱼ (Zᵀa)ⱼ² / A com qᵢ = Σⱼ pⱼ zᵢⱼ²,
    o que deixa cada avaliação em quatro produtos matriz-vetor.
    """

    def __init__(self, X, Z, p):
        n = X.shape[0]
        if Z.shape[0] != n:
            raise InvalidArgumentError(f"dimensão incompatível: X com {n} linhas, Z com {Z.shape[0]}")
        p = np.asarray(p, dtype=np.float64)
        if p.shape != (Z.shape[1],):
            raise InvalidArgumentError(f"dimensão incompatível: {p.shape[0]} pesos para {Z.shape[1]} colunas")
        self.X = X
        self.Z = Z
        self.p = p
        self.n = n
        self.q_total = float(matrix.matvec(matrix.square(Z), p).sum())
        self.z_sum = matrix.rmatvec(Z, np.ones(n))

    def __call__(self, w, b, gradient=True):
        s = expit(matrix.matvec(self.X, w) + b)
        total_pos = float(s.sum())
        total_neg = self.n - total_pos
        m_pos = matrix.rmatvec(self.Z, s)
        m_neg = self.z_sum - m_pos
        u = self.p * m_pos
        v = self.p * m_neg
        P_pos = float(u @ m_pos)
        P_neg = float(v @ m_neg)

        # termos com peso total nulo contribuem 0
        tiny = np.finfo(float).tiny
        ativo_pos = total_pos > tiny
        ativo_neg = total_neg > tiny
        valor = self.q_total
        if ativo_pos:
            valor -= P_pos / total_pos
        if ativo_neg:
            valor -= P_neg / total_neg
        if not gradient:
            return valor, None, None

        direcao = np.zeros_like(u)
        constante = 0.0
        if ativo_pos:
            direcao += 2.0 * u / total_pos
            constante += P_pos / total_pos ** 2
        if ativo_neg:
            direcao -= 2.0 * v / total_neg
            constante -= P_neg / total_neg ** 2
        g_s = constante - matrix.matvec(self.Z, direcao)
        r = g_s * s * (1.0 - s)
        return valor, matrix.rmatvec(self.X, r), float(r.sum())


def split_fitness(h, X, Z, p):
    valor, _, _ = _FitnessKernel(X, Z, p)(h.w, h.b, gradient=False)
    return valor


def grad_split_fitness(h, X, Z, p):
    """Gradiente analítico de split_fitness em relação a (w, b)."""
    _, dw, db = _FitnessKernel(X, Z, p)(h.w, h.b)
    return dw, db


def smoothed_l_half(w, eps):
    """(Σ √(|wᵢ| + ε))² e seu gradiente."""
    raizes = np.sqrt(np.abs(w) + eps)
    soma = float(raizes.sum())
    return soma * soma, soma * np.sign(w) / raizes


class Adam:
    """Adam com correção de viés, atualizando o vetor de parâmetros no lugar."""

    def __init__(self, lr=0.1, beta1=0.9, beta2=0.999, eps=1e-8):
        self.lr = lr
        self.beta1 = beta1
        self.beta2 = beta2
        self.eps = eps
        self.m = None
        self.v = None
        self.t = 0

    def step(self, params, grads):
        if self.m is None:
            self.m = np.zeros_like(params)
            self.v = np.zeros_like(params)
        self.t += 1
        self.m *= self.beta1
        self.m += (1.0 - self.beta1) * grads
        self.v *= self.beta2
        self.v += (1.0 - self.beta2) * (grads * grads)
        m_hat = self.m / (1.0 - self.beta1 ** self.t)
        v_hat = self.v / (1.0 - self.beta2 ** self.t)
        params -= self.lr * m_hat / (np.sqrt(v_hat) + self.eps)


def fit_grad_split(X, Z, p, cfg, rng, history=None):
    """
    Minimiza (Σ√(|wᵢ|+ε))² + C·f(w, b) com Adam.

    w começa com distribuição normal padrão escalada por 1/√D e b divide os
    exemplos ao meio (−mediana de X·w). Devolve a melhor iteração, já com os
    pesos pequenos truncados para zero.

    Args:
        X, Z: matrizes padronizadas do nó.
        p (numpy.ndarray): pesos dos atributos de agrupamento.
        cfg (GradSplitConfig): configuração.
        rng (numpy.random.Generator): gerador semeado.
        history (list | None): recebe o melhor objetivo após cada avaliação.

    Returns:
        Hyperplane: no espaço padronizado recebido.
    """
    n, d = X.shape
    kernel = _FitnessKernel(X, Z, p)
    w = rng.standard_normal(d) / np.sqrt(max(d, 1))
    b = -float(np.median(matrix.matvec(X, w)))
    parametros = np.concatenate([w, [b]])
    adam = Adam(cfg.lr, cfg.adam_beta1, cfg.adam_beta2, cfg.adam_eps)

    melhor_objetivo = np.inf
    melhor = parametros.copy()
    anterior = None
    for iteracao in range(int(cfg.max_opt_iter) + 1):
        w, b = parametros[:d], float(parametros[d])
        f, dw, db = kernel(w, b)
        reg, dreg = smoothed_l_half(w, cfg.reg_smooth_eps)
        objetivo = reg + cfg.C * f
        if objetivo < melhor_objetivo:
            melhor_objetivo = objetivo
            melhor = parametros.copy()
        if history is not None:
            history.append(melhor_objetivo)
        if anterior is not None and _converged(anterior, objetivo, cfg.tol):
            logger.debug(f"Adam convergiu em {iteracao} iterações")
            break
        if iteracao == cfg.max_opt_iter:
            break
        anterior = objetivo
        dados = cfg.C * dw
        gradiente = np.concatenate([dados + dreg, [cfg.C * db]])
        antes = parametros[:d].copy()
        # pesos em zero só saem se um passo cheio compensa o aumento da regularização
        presos = (antes == 0.0) & (np.abs(dados) <= 2.0 * np.sqrt(reg) / np.sqrt(cfg.lr) + 1.0)
        gradiente[:d][presos] = 0.0
        adam.step(parametros, gradiente)
        # cruzar o zero puxado pela regularização para em zero
        cruzou = (np.sign(parametros[:d]) * np.sign(antes) < 0.0) & (np.abs(dados) < np.abs(dreg))
        zerar = presos | cruzou
        parametros[:d][zerar] = 0.0
        adam.m[:d][zerar] = 0.0

    return Hyperplane(truncate_weights(melhor[:d]), float(melhor[d]))


def truncate_weights(w, ratio=TRUNCATION_RATIO):
    w = np.array(w, dtype=np.float64, copy=True)
    maior = float(np.abs(w).max()) if w.size else 0.0
    if maior > 0.0:
        w[np.abs(w) < ratio * maior] = 0.0
    return w


# ---------------------------------------------------------------------------
# Divisão de um nó
# ---------------------------------------------------------------------------

def learn_split(variant, X, Z, p, cfg, rng, features=None, sparse_centering="lazy"):
    """
    Aprende o hiperplano de um nó (a função BEST_TEST oblíqua).

    Padroniza X e Z com as estatísticas do nó, chama a variante escolhida e
    devolve o hiperplano no espaço original. Quando `features` é dado, o
    plano é aprendido só nessas colunas e os demais pesos ficam em zero.

    Returns:
        Hyperplane | None: None quando não há divisão possível.
    """
    if variant not in VARIANTS:
        raise InvalidArgumentError(f"variante desconhecida: {variant!r}")
    n, d = X.shape
    if n < 2:
        return None
    p = np.asarray(p, dtype=np.float64)

    X_sub = X if features is None else matrix.take_cols(X, features)
    X_sub = matrix.choose_representation(X_sub)
    Z = matrix.choose_representation(Z)
    padrao_x = fit_standardizer(X_sub)
    centralizado = not matrix.is_sparse(X_sub) or sparse_centering == "lazy"
    if matrix.is_sparse(X_sub) and centralizado:
        X_pad = centered_view(padrao_x, X_sub)
    else:
        X_pad = apply_standardizer(padrao_x, X_sub)

    padrao_z = fit_standardizer(Z)
    if np.all(padrao_z.constant | (p <= 0)):
        return None
    Z_pad = apply_standardizer(padrao_z, Z)

    try:
        if variant == "svm":
            Z_agrup = matrix.scale_columns(Z_pad, np.sqrt(np.maximum(p, 0.0)))
            grupos = kmeans2(Z_agrup, cfg.max_cluster_iter, rng)
            plano = fit_svc(X_pad, grupos, cfg)
        else:
            plano = fit_grad_split(X_pad, Z_pad, p, cfg, rng)
    except (DegenerateSplitError, DegenerateWeightsError) as erro:
        logger.debug(f"Sem divisão neste nó: {erro}")
        return None

    w = np.array(plano.w, dtype=np.float64, copy=True)
    # colunas nulas após a padronização não influenciam a divisão
    nulas = padrao_x.constant & (centralizado | (padrao_x.means == 0.0))
    w[nulas] = 0.0
    w = truncate_weights(w)

    w_orig = w / padrao_x.stds
    b_orig = float(plano.b)
    if centralizado:
        b_orig -= float(w @ (padrao_x.means / padrao_x.stds))

    if features is not None:
        completo = np.zeros(d)
        completo[np.asarray(features, dtype=np.intp)] = w_orig
        w_orig = completo
    return Hyperplane(w_orig, b_orig)
