"""
Arquivo de configuração `chave = valor` e número de trabalhadores.

Precedência: opção na linha de comando > arquivo de configuração > padrão.
"""

import logging
import os
from pathlib import Path

from obliqua.error_handler import UsageError

logger = logging.getLogger("obliqua.config")

WORKERS_ENV = "OPCT_WORKERS"


def _normalize(chave):
    return chave.strip().lstrip("-").replace("-", "_")


def load_config_file(path, allowed=None):
    """
    Lê linhas `chave = valor`; `#` inicia comentário e linhas vazias são ignoradas.

    Args:
        path: caminho do arquivo.
        allowed (Iterable[str] | None): chaves aceitas (grafia com '_').

    Returns:
        dict: chave normalizada -> valor em texto.

    Raises:
        UsageError: linha malformada ou chave desconhecida, com o número da linha.
    """
    permitidas = {_normalize(c) for c in allowed} if allowed is not None else None
    valores = {}
    for numero, linha in enumerate(Path(path).read_text(encoding="utf-8").splitlines(), start=1):
        linha = linha.split("#", 1)[0].strip()
        if not linha:
            continue
        chave, separador, valor = linha.partition("=")
        if not separador or not chave.strip():
            raise UsageError(f"{path}, linha {numero}: esperado 'chave = valor'")
        chave = _normalize(chave)
        if permitidas is not None and chave not in permitidas:
            raise UsageError(f"{path}, linha {numero}: chave desconhecida {chave!r}")
        valores[chave] = valor.strip()
    logger.debug(f"Configuração lida de {path}: {sorted(valores)}")
    return valores


def resolve_workers(value=None):
    """--workers, senão a variável OPCT_WORKERS, senão 1."""
    origem = "opção"
    if value is None:
        value = os.environ.get(WORKERS_ENV)
        origem = WORKERS_ENV
    if value is None or value == "":
        return 1
    try:
        trabalhadores = int(value)
    except (TypeError, ValueError):
        raise UsageError(f"número de trabalhadores inválido em {origem}: {value!r}")
    if trabalhadores < 1:
        raise UsageError(f"número de trabalhadores deve ser ≥ 1 em {origem}: {value!r}")
    return trabalhadores
