#!/usr/bin/env python3
# -*- coding: utf-8 -*-

import argparse
import csv
import datetime
import json
import sys

from tabulate import tabulate


def formatar_hora(tempo_str):
    """Formata uma string de data/hora ISO para exibição mais legível."""
    try:
        dt = datetime.datetime.fromisoformat(tempo_str)
        return dt.strftime("%d/%m/%Y %H:%M:%S")
    except (TypeError, ValueError):
        return tempo_str


def carregar_estatisticas(arquivo):
    """Carrega o JSON salvo por `obliqua benchmark --report-json`."""
    try:
        with open(arquivo, "r", encoding="utf-8") as f:
            return json.load(f)
    except (OSError, ValueError) as e:
        print(f"Erro ao carregar {arquivo}: {e}")
        return None


def carregar_tempos(arquivo):
    """Carrega a tabela CSV de tempos da bateria."""
    try:
        with open(arquivo, newline="", encoding="utf-8") as f:
            return list(csv.DictReader(f))
    except OSError as e:
        print(f"Erro ao carregar {arquivo}: {e}")
        return []


def exibir_tempos(linhas):
    if not linhas:
        print("Nenhum tempo disponível.")
        return

    for etapa, titulo in (("split", "DIVISÃO DA RAIZ"), ("tree", "ÁRVORE COMPLETA")):
        tabela = [
            [l["variant"], l["N"], l["D"], l["K"], "CSR" if l["sparse"] == "1" else "densa",
             f"{float(l['seconds']):.4f}", l["nodes"]]
            for l in linhas if l["stage"] == etapa
        ]
        if not tabela:
            continue
        print(f"\n========== {titulo} ==========")
        print(tabulate(tabela, headers=["Variante", "N", "D", "K", "Repr.", "Segundos", "Nós"]))


def exibir_crescimento(estatisticas):
    if not estatisticas:
        return
    print("\n========== ESTATÍSTICAS DA BATERIA ==========")
    print(f"Bateria: {estatisticas.get('suite', 'N/A')} (semente {estatisticas.get('seed', 'N/A')})")
    print(f"Início: {formatar_hora(estatisticas.get('start_time', 'N/A'))}")
    print(f"Fim: {formatar_hora(estatisticas.get('end_time', 'N/A'))}")

    razoes = estatisticas.get("growth_ratios", {})
    if razoes:
        print("\nCrescimento do tempo de divisão entre o menor e o maior K:")
        print(tabulate([[v, f"{r:.2f}x"] for v, r in sorted(razoes.items())], headers=["Variante", "Razão"]))
    else:
        print("\nRazões de crescimento não disponíveis.")


def main():
    parser = argparse.ArgumentParser(description="Visualizador dos resultados da bateria de escalabilidade")
    parser.add_argument("--csv", help="Tabela de tempos (obliqua benchmark --out)")
    parser.add_argument("--json", help="Estatísticas (obliqua benchmark --report-json)")
    args = parser.parse_args()

    if not (args.csv or args.json):
        parser.error("informe --csv e/ou --json")

    print("=" * 60)
    print("          RESULTADOS DA BATERIA DE ESCALABILIDADE")
    print("=" * 60)

    if args.csv:
        exibir_tempos(carregar_tempos(args.csv))
    if args.json:
        exibir_crescimento(carregar_estatisticas(args.json))

    print("\n" + "=" * 60)
    return 0


if __name__ == "__main__":
    sys.exit(main())
