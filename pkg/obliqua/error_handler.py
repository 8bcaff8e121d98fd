"""
Erros da biblioteca e tratamento centralizado para a linha de comando.

Todas as falhas previstas derivam de ObliquaError; a CLI converte qualquer
exceção em uma mensagem de uma linha e um código de saída com tratar_erro.
"""

import logging
import sys


class ObliquaError(Exception):
    """Erro base de todas as falhas previstas da biblioteca."""


class InvalidArgumentError(ObliquaError, ValueError):
    """Argumento inválido: dimensões incompatíveis, índices fora do intervalo etc."""


class DegenerateWeightsError(ObliquaError, ValueError):
    """Pesos de exemplo cuja soma é zero (média ou variância indefinida)."""


class DegenerateSplitError(ObliquaError):
    """Sinal interno: não existe divisão possível neste nó."""


class UsageError(ObliquaError):
    """Combinação de opções inválida na linha de comando."""


class HierarchyError(ObliquaError):
    """Hierarquia de rótulos inválida (ciclo ou rótulo desconhecido)."""

    def __init__(self, message, cycle=None):
        super().__init__(message)
        self.cycle = list(cycle) if cycle else []


class ParseError(ObliquaError):
    """Erro de leitura de arquivo, com a localização do problema."""

    def __init__(self, message, path=None, line=None, column=None):
        self.path = path
        self.line = line
        self.column = column
        super().__init__(message)

    def __str__(self):
        local = []
        if self.path is not None:
            local.append(str(self.path))
        if self.line is not None:
            local.append(f"linha {self.line}")
        if self.column is not None:
            local.append(f"coluna {self.column}")
        base = super().__str__()
        return f"{', '.join(local)}: {base}" if local else base


class ModelFormatError(ObliquaError):
    """Arquivo de modelo corrompido ou de versão não suportada."""

    def __init__(self, message, offset):
        self.offset = offset
        super().__init__(f"{message} (byte {offset})")


def tratar_erro(erro, logger=None):
    """
    Converte uma exceção em diagnóstico de uma linha e código de saída.

    Args:
        erro (BaseException): Exceção capturada pela CLI.
        logger (logging.Logger): Logger usado para o traceback em nível DEBUG.

    Returns:
        int: 2 para erro de uso, 1 para erros previstos, 3 para os demais.
    """
    logger = logger or logging.getLogger("obliqua")

    if isinstance(erro, UsageError):
        codigo = 2
        tipo = "erro de uso"
    elif isinstance(erro, ObliquaError):
        codigo = 1
        tipo = "erro"
    elif isinstance(erro, (OSError, ValueError)):
        codigo = 1
        tipo = "erro"
    else:
        codigo = 3
        tipo = "erro inesperado"

    mensagem = " ".join(str(erro).split()) or erro.__class__.__name__
    print(f"obliqua: {tipo}: {mensagem}", file=sys.stderr)
    logger.debug("Detalhes do erro", exc_info=erro)
    return codigo
