"""
Executa a linha de comando do obliqua sem instalar o pacote.

Exemplo:
    python main.py train --task bin --data dados.csv --target-columns y --out modelo.opc
"""

import sys

from obliqua.cli import main

if __name__ == "__main__":
    sys.exit(main())
