"""
Linha de comando: treino, predição, avaliação, validação cruzada,
importância de atributos, bateria de escalabilidade e resumo de modelos.

Os relatórios vão para a saída padrão como linhas `chave=valor`; o log vai
para a saída de erro (e para --log-file, se informado).
"""

import argparse
import json
import logging
import sys
import time
from pathlib import Path

import numpy as np
from tabulate import tabulate

from obliqua import matrix
from obliqua.benchmark import ScalingBenchmark, SUITES
from obliqua.config import load_config_file, resolve_workers
from obliqua.data import (
    Dataset,
    TargetSpec,
    kfold,
    load_dense_csv,
    load_features,
    load_hierarchy,
    load_label_names,
    load_targets,
    read_scores,
    stratification_labels,
    write_scores,
)
from obliqua.ensemble import (
    EnsembleConfig,
    decode_predictions,
    fit_ensemble,
    load_model,
    predict,
    save_model,
    summarize_model,
)
from obliqua.error_handler import UsageError, tratar_erro
from obliqua.importance import NoiseAuditReport, ensemble_importance, noise_audit
from obliqua.metrics import evaluate
from obliqua.preprocess import FeatureEncoder
from obliqua.split import GradSplitConfig, SvmSplitConfig
from obliqua.tree import GrowConfig, Task

logger = logging.getLogger("obliqua.cli")

TASKS = [t.value for t in Task]
MODE_ALIASES = {"single": "single", "bagging": "bagging", "rf": "random_forest", "random_forest": "random_forest"}


def _optional_int(texto):
    if str(texto).strip().lower() in ("", "none", "unlimited"):
        return None
    return int(texto)


def _optional_float(texto):
    if str(texto).strip().lower() in ("", "none"):
        return None
    return float(texto)


# nome -> (conversão, padrão, escolhas)
TRAIN_OPTIONS = {
    "variant": (str, "grad", ("svm", "grad", "axis")),
    "mode": (str, "single", tuple(MODE_ALIASES)),
    "trees": (int, 50, None),
    "C": (float, 10.0, None),
    "lr": (float, 0.1, None),
    "max_iter": (int, 100, None),
    "cluster_iter": (int, 10, None),
    "tol": (float, 1e-4, None),
    "min_examples": (int, 2, None),
    "impurity_threshold": (float, 0.05, None),
    "max_depth": (_optional_int, None, None),
    "feature_fraction": (_optional_float, None, None),
    "sparse_centering": (str, "lazy", ("lazy", "none")),
    "cluster_features": (_optional_float, None, None),
    "seed": (int, 0, None),
    "workers": (_optional_int, None, None),
}

DATA_OPTIONS = ("task", "data", "target_columns", "features", "targets", "label_names", "hierarchy")


def configurar_logging(verbosity=0, log_file=None):
    """Configura o logging no formato do projeto; -v para INFO, -vv para DEBUG."""
    nivel = logging.WARNING
    if verbosity == 1:
        nivel = logging.INFO
    elif verbosity >= 2:
        nivel = logging.DEBUG
    handlers = [logging.StreamHandler(sys.stderr)]
    if log_file:
        handlers.append(logging.FileHandler(log_file))
    logging.basicConfig(
        level=nivel,
        format='%(asctime)s [%(levelname)s] %(message)s',
        handlers=handlers,
        force=True,
    )


# ---------------------------------------------------------------------------
# Argumentos
# ---------------------------------------------------------------------------

def _add_data_arguments(parser, required_task=True):
    grupo = parser.add_argument_group("dados")
    grupo.add_argument("--task", choices=TASKS, required=required_task, help="Tarefa preditiva")
    grupo.add_argument("--data", help="Tabela CSV com atributos e alvos (use com --target-columns)")
    grupo.add_argument("--target-columns", help="Colunas alvo de --data, separadas por vírgula")
    grupo.add_argument("--features", help="Atributos: CSV com cabeçalho (.csv) ou formato esparso 'indice:valor'")
    grupo.add_argument("--targets", help="Alvos: CSV com cabeçalho (.csv) ou conjuntos de rótulos")
    grupo.add_argument("--label-names", help="Arquivo com um nome de rótulo por linha")
    grupo.add_argument("--hierarchy", help="Hierarquia de rótulos (pai<TAB>filho), só para hmlc")


def _add_train_arguments(parser):
    grupo = parser.add_argument_group("treino")
    grupo.add_argument("--config", help="Arquivo 'chave = valor' com padrões para estas opções")
    grupo.add_argument("--variant", help="Aprendizado das divisões: svm, grad ou axis (padrão: grad)")
    grupo.add_argument("--mode", help="single, bagging ou rf (padrão: single)")
    grupo.add_argument("--trees", help="Número de árvores do conjunto (padrão: 50)")
    grupo.add_argument("--C", dest="C", help="Peso da perda contra a regularização (padrão: 10)")
    grupo.add_argument("--lr", help="Taxa de aprendizado do Adam (padrão: 0.1)")
    grupo.add_argument("--max-iter", help="Máximo de iterações de otimização (padrão: 100)")
    grupo.add_argument("--cluster-iter", help="Máximo de iterações do k-means (padrão: 10)")
    grupo.add_argument("--tol", help="Variação relativa mínima do objetivo (padrão: 1e-4)")
    grupo.add_argument("--min-examples", help="Mínimo de exemplos para tentar dividir (padrão: 2)")
    grupo.add_argument("--impurity-threshold", help="Redução relativa mínima da impureza (padrão: 0.05)")
    grupo.add_argument("--max-depth", help="Profundidade máxima (padrão: ilimitada)")
    grupo.add_argument("--feature-fraction", help="Fração de atributos por divisão (padrão: 1; rf usa √D/D)")
    grupo.add_argument("--sparse-centering", help="lazy ou none (padrão: lazy)")
    grupo.add_argument("--cluster-features", help="Inclui os atributos no agrupamento com este peso")
    grupo.add_argument("--seed", help="Semente de todo comportamento aleatório (padrão: 0)")
    grupo.add_argument("--workers", help="Trabalhadores para treinar árvores (padrão: $OPCT_WORKERS ou 1)")
    grupo.add_argument("--report-json", help="Salva o relatório também em JSON")


def build_parser():
    parser = argparse.ArgumentParser(
        prog="obliqua",
        description="Árvores de agrupamento preditivo oblíquas e seus conjuntos",
    )
    parser.add_argument("-v", "--verbose", action="count", default=0, help="Mais log (-v INFO, -vv DEBUG)")
    parser.add_argument("--log-file", help="Também grava o log neste arquivo")
    comandos = parser.add_subparsers(dest="command", required=True)

    treino = comandos.add_parser("train", help="Treina um modelo")
    _add_data_arguments(treino)
    _add_train_arguments(treino)
    treino.add_argument("--out", required=True, help="Arquivo do modelo")

    predicao = comandos.add_parser("predict", help="Gera escores para novos exemplos")
    predicao.add_argument("--model", required=True)
    predicao.add_argument("--features", required=True)
    predicao.add_argument("--out", required=True, help="Arquivo de escores (uma linha por exemplo)")
    predicao.add_argument("--decode", action="store_true", help="Escreve rótulos da tarefa em vez de escores")
    predicao.add_argument("--threshold", type=float, default=0.5, help="Limiar de decisão para bin/mlc")

    avaliacao = comandos.add_parser("evaluate", help="Avalia escores contra os alvos verdadeiros")
    _add_data_arguments(avaliacao)
    avaliacao.add_argument("--scores", required=True)
    avaliacao.add_argument("--report-json")

    validacao = comandos.add_parser("cv", help="Validação cruzada em k partes")
    _add_data_arguments(validacao)
    _add_train_arguments(validacao)
    validacao.add_argument("--folds", type=int, default=10)

    importancia = comandos.add_parser("importance", help="Importância de atributos")
    _add_data_arguments(importancia, required_task=False)
    _add_train_arguments(importancia)
    importancia.add_argument("--model", help="Usa um modelo salvo em vez de treinar")
    importancia.add_argument("--noise-audit", action="store_true", help="Acrescenta atributos de ruído e compara")
    importancia.add_argument("--out", help="Também salva a tabela CSV neste arquivo")

    bateria = comandos.add_parser("benchmark", help="Bateria de escalabilidade")
    bateria.add_argument("--suite", choices=sorted(SUITES), default="scaling")
    bateria.add_argument("--out", required=True, help="Tabela CSV de tempos")
    bateria.add_argument("--seed", type=int, default=0)
    bateria.add_argument("--report-json")

    resumo = comandos.add_parser("info", help="Resumo de um modelo salvo")
    resumo.add_argument("--model", required=True)
    return parser


# ---------------------------------------------------------------------------
# Opções de treino e dados
# ---------------------------------------------------------------------------

def resolve_train_options(args):
    """Opção da linha de comando > arquivo de configuração > padrão."""
    permitidas = list(TRAIN_OPTIONS) + list(DATA_OPTIONS)
    arquivo = load_config_file(args.config, allowed=permitidas) if getattr(args, "config", None) else {}
    for nome in DATA_OPTIONS:
        if getattr(args, nome, None) is None and nome in arquivo:
            setattr(args, nome, arquivo[nome])

    opcoes = {}
    for nome, (conversao, padrao, escolhas) in TRAIN_OPTIONS.items():
        bruto = getattr(args, nome, None)
        if bruto is None:
            bruto = arquivo.get(nome)
        if bruto is None:
            opcoes[nome] = padrao
            continue
        try:
            valor = conversao(bruto)
        except (TypeError, ValueError):
            raise UsageError(f"valor inválido para --{nome.replace('_', '-')}: {bruto!r}")
        if escolhas is not None and valor not in escolhas:
            raise UsageError(f"--{nome.replace('_', '-')} deve ser um de {', '.join(escolhas)}, recebido {valor!r}")
        opcoes[nome] = valor

    if opcoes["trees"] < 1:
        raise UsageError("--trees deve ser ≥ 1")
    if opcoes["min_examples"] < 1:
        raise UsageError("--min-examples deve ser ≥ 1")
    if not 0.0 <= opcoes["impurity_threshold"] <= 1.0:
        raise UsageError("--impurity-threshold deve estar em [0, 1]")
    if opcoes["max_depth"] is not None and opcoes["max_depth"] < 0:
        raise UsageError("--max-depth deve ser ≥ 0")
    fracao = opcoes["feature_fraction"]
    if fracao is not None and not 0.0 < fracao <= 1.0:
        raise UsageError("--feature-fraction deve estar em (0, 1]")
    if opcoes["C"] <= 0 or opcoes["lr"] <= 0:
        raise UsageError("--C e --lr devem ser positivos")
    opcoes["mode"] = MODE_ALIASES[opcoes["mode"]]
    opcoes["workers"] = resolve_workers(opcoes["workers"])
    return opcoes


def ensemble_config(opcoes):
    if opcoes["variant"] == "svm":
        divisao = SvmSplitConfig(
            C=opcoes["C"], max_cluster_iter=opcoes["cluster_iter"],
            max_opt_iter=opcoes["max_iter"], tol=opcoes["tol"],
        )
    else:
        divisao = GradSplitConfig(C=opcoes["C"], lr=opcoes["lr"], max_opt_iter=opcoes["max_iter"], tol=opcoes["tol"])
    crescimento = GrowConfig(
        variant=opcoes["variant"],
        split=divisao,
        max_depth=opcoes["max_depth"],
        min_examples_to_split=opcoes["min_examples"],
        impurity_reduction_threshold=opcoes["impurity_threshold"],
        feature_subset_fraction=opcoes["feature_fraction"] if opcoes["feature_fraction"] is not None else 1.0,
        sparse_centering=opcoes["sparse_centering"],
    )
    return EnsembleConfig(
        n_trees=opcoes["trees"],
        mode=opcoes["mode"],
        grow=crescimento,
        master_seed=opcoes["seed"],
        workers=opcoes["workers"],
    )


def _check_data_arguments(args):
    if args.task is None:
        raise UsageError("--task é obrigatório")
    tarefa = Task(args.task)
    if args.hierarchy and tarefa is not Task.HMLC:
        raise UsageError("--hierarchy só pode ser usado com --task hmlc")
    if args.data:
        if args.features or args.targets:
            raise UsageError("use --data ou --features/--targets, não ambos")
        if not args.target_columns:
            raise UsageError("--data exige --target-columns")
    elif not (args.features or args.targets) and getattr(args, "scores", None) is None:
        raise UsageError("informe --data ou --features e --targets")
    if args.target_columns and not args.data:
        raise UsageError("--target-columns só vale com --data")
    if args.label_names and tarefa not in (Task.MLC, Task.HMLC):
        raise UsageError("--label-names só vale para mlc/hmlc")
    return tarefa


def _load_hierarchy(args):
    if not args.hierarchy:
        return None
    nomes = load_label_names(args.label_names) if args.label_names else None
    return load_hierarchy(args.hierarchy, nomes)


def load_truth(args):
    """Alvos verdadeiros (e hierarquia) a partir de --data ou --targets."""
    tarefa = _check_data_arguments(args)
    hierarquia = _load_hierarchy(args)
    if args.data:
        colunas = tuple(c.strip() for c in args.target_columns.split(","))
        conjunto = load_dense_csv(args.data, TargetSpec(colunas, tarefa), hierarquia)
        return conjunto.Y, hierarquia
    if not args.targets:
        raise UsageError("--targets é obrigatório")
    nomes = load_label_names(args.label_names) if args.label_names else None
    Y, _ = load_targets(args.targets, tarefa, nomes, hierarquia)
    return Y, hierarquia


def load_dataset(args, opcoes):
    tarefa = _check_data_arguments(args)
    hierarquia = _load_hierarchy(args)
    if args.data:
        colunas = tuple(c.strip() for c in args.target_columns.split(","))
        conjunto = load_dense_csv(args.data, TargetSpec(colunas, tarefa), hierarquia)
    else:
        if not (args.features and args.targets):
            raise UsageError("--features e --targets devem ser usados juntos")
        X, encoder = load_features(args.features)
        nomes = load_label_names(args.label_names) if args.label_names else None
        Y, nomes_rotulos = load_targets(args.targets, tarefa, nomes, hierarquia)
        conjunto = Dataset(
            X, Y, tarefa,
            feature_names=tuple(encoder.output_names()) if encoder else (),
            label_names=nomes_rotulos,
            hierarchy=hierarquia,
            encoder=encoder,
        )
    if opcoes.get("cluster_features") is not None:
        conjunto = conjunto.with_feature_clustering(opcoes["cluster_features"])
    logger.info(
        f"Dados: {conjunto.n_examples} exemplos, {conjunto.n_features} atributos, "
        f"{conjunto.n_targets} alvos, tarefa {conjunto.task.value}"
    )
    return conjunto


# ---------------------------------------------------------------------------
# Relatórios
# ---------------------------------------------------------------------------

def _format_value(valor):
    if isinstance(valor, bool):
        return str(int(valor))
    if isinstance(valor, (float, np.floating)):
        return repr(float(valor))
    return str(valor)


def print_report(relatorio, stream=None):
    stream = stream or sys.stdout
    for chave, valor in relatorio.items():
        print(f"{chave}={_format_value(valor)}", file=stream)


def save_report(relatorio, path):
    """Salva o relatório em JSON"""
    with open(path, "w", encoding="utf-8") as f:
        json.dump(relatorio, f, ensure_ascii=False, indent=2, default=float)
    logger.info(f"Relatório salvo em {path}")


def _finish(relatorio, args):
    print_report(relatorio)
    if getattr(args, "report_json", None):
        save_report(relatorio, args.report_json)
    return 0


# ---------------------------------------------------------------------------
# Comandos
# ---------------------------------------------------------------------------

def cmd_train(args):
    opcoes = resolve_train_options(args)
    conjunto = load_dataset(args, opcoes)
    cfg = ensemble_config(opcoes)
    inicio = time.perf_counter()
    modelo = fit_ensemble(conjunto, cfg)
    segundos = time.perf_counter() - inicio
    save_model(args.out, modelo)

    resumo = summarize_model(modelo)
    relatorio = {
        "model": str(args.out),
        "task": conjunto.task.value,
        "variant": cfg.grow.variant,
        "mode": cfg.mode,
        "trees": resumo["trees"],
        "examples": conjunto.n_examples,
        "features": conjunto.n_features,
        "targets": conjunto.n_targets,
        "train_seconds": segundos,
        "nodes": resumo["nodes"],
        "max_depth": resumo["max_depth"],
        "mean_nonzero_weights": resumo["mean_nonzero_weights"],
    }
    return _finish(relatorio, args)


def _load_prediction_features(args, modelo):
    codificacao = modelo.metadata.get("encoder") if modelo.metadata else None
    if Path(args.features).suffix.lower() == ".csv":
        if not codificacao:
            raise UsageError("o modelo não guarda a codificação de um CSV; use o formato esparso")
        X, _ = load_features(args.features, encoder=FeatureEncoder.from_dict(codificacao))
        return X
    X, _ = load_features(args.features, n_features=modelo.n_features)
    return X


def _decoded_lines(modelo, escores, threshold):
    rotulos = decode_predictions(escores, modelo.task, threshold)
    nomes = (modelo.metadata or {}).get("label_names") or []
    if modelo.task is Task.MCC:
        return [nomes[c] if c < len(nomes) else str(c) for c in rotulos]
    if modelo.task is Task.MLC:
        linhas = []
        for linha in rotulos:
            indices = np.flatnonzero(linha)
            linhas.append(",".join(nomes[j] if j < len(nomes) else str(j) for j in indices))
        return linhas
    if modelo.task is Task.BIN:
        return [str(int(v)) for v in rotulos[:, 0]]
    return None


def cmd_predict(args):
    modelo = load_model(args.model)
    X = _load_prediction_features(args, modelo)
    escores = predict(modelo, X)
    linhas = _decoded_lines(modelo, escores, args.threshold) if args.decode else None
    if linhas is None:
        write_scores(args.out, escores)
    else:
        Path(args.out).write_text("".join(f"{linha}\n" for linha in linhas), encoding="utf-8")
    print_report({"predictions": str(args.out), "examples": X.shape[0], "targets": escores.shape[1]})
    return 0


def cmd_evaluate(args):
    Y, hierarquia = load_truth(args)
    escores = read_scores(args.scores)
    if escores.shape[0] == 0 and Y.shape[0] == 0:
        escores = np.zeros(Y.shape)
    resultado = evaluate(args.task, Y, escores, hierarquia)
    relatorio = {
        "task": args.task,
        "metric": resultado.name,
        "value": resultado.value,
        "skipped": resultado.skipped,
        "examples": Y.shape[0],
    }
    return _finish(relatorio, args)


def cmd_cv(args):
    opcoes = resolve_train_options(args)
    conjunto = load_dataset(args, opcoes)
    cfg = ensemble_config(opcoes)
    if not 2 <= args.folds <= conjunto.n_examples:
        raise UsageError(f"--folds deve estar em [2, {conjunto.n_examples}]")
    plano = kfold(conjunto.n_examples, args.folds, opcoes["seed"], stratification_labels(conjunto))

    valores = []
    nome = None
    for fold, (treino, teste) in enumerate(plano, start=1):
        modelo = fit_ensemble(conjunto.subset(treino), cfg)
        escores = predict(modelo, matrix.take_rows(conjunto.X, teste))
        resultado = evaluate(conjunto.task, matrix.take_rows(conjunto.Y, teste), escores, conjunto.hierarchy)
        nome = resultado.name
        valores.append(resultado.value)
        logger.info(f"Parte {fold}/{args.folds}: {resultado.name}={resultado.value:.6f}")

    finitos = np.asarray([v for v in valores if np.isfinite(v)])
    relatorio = {"task": conjunto.task.value, "metric": nome, "folds": args.folds}
    relatorio.update({f"fold_{i}": v for i, v in enumerate(valores, start=1)})
    relatorio["mean"] = float(finitos.mean()) if finitos.size else float("nan")
    relatorio["std"] = float(finitos.std()) if finitos.size else float("nan")
    return _finish(relatorio, args)


def cmd_importance(args):
    opcoes = resolve_train_options(args)
    if args.model:
        if args.noise_audit:
            raise UsageError("--noise-audit treina um novo conjunto; não use com --model")
        modelo = load_model(args.model)
        importancias = ensemble_importance(modelo)
        relatorio = NoiseAuditReport(
            importancias, ("real",) * importancias.size,
            float(importancias.mean()), float(importancias.max()), float("nan"), float("nan"),
        )
    else:
        conjunto = load_dataset(args, opcoes)
        cfg = ensemble_config(opcoes)
        if args.noise_audit:
            relatorio = noise_audit(conjunto, cfg, np.random.default_rng([opcoes["seed"], 6]))
        else:
            modelo = fit_ensemble(conjunto, cfg)
            importancias = ensemble_importance(modelo)
            relatorio = NoiseAuditReport(
                importancias, ("real",) * importancias.size,
                float(importancias.mean()), float(importancias.max()), float("nan"), float("nan"),
            )

    tabela = relatorio.to_csv()
    sys.stdout.write(tabela)
    resumo = relatorio.summary()
    if not args.noise_audit:
        resumo = {"real_mean": resumo["real_mean"], "real_max": resumo["real_max"]}
    for chave, valor in resumo.items():
        print(f"# {chave}={_format_value(valor)}")
    if args.out:
        Path(args.out).write_text(tabela, encoding="utf-8")
    if args.report_json:
        save_report({"rows": [list(r) for r in relatorio.rows()], **resumo}, args.report_json)
    return 0


def cmd_benchmark(args):
    bateria = ScalingBenchmark(args.suite, seed=args.seed)
    bateria.run()
    bateria.write_csv(args.out)
    if args.report_json:
        bateria.save_statistics(args.report_json)
    relatorio = {"suite": args.suite, "rows": len(bateria.rows), "csv": str(args.out)}
    relatorio.update({f"growth_{v}": r for v, r in bateria.statistics["growth_ratios"].items()})
    print_report(relatorio)
    return 0


def cmd_info(args):
    modelo = load_model(args.model)
    resumo = summarize_model(modelo)
    print(tabulate(
        [[chave, _format_value(valor)] for chave, valor in resumo.items()],
        headers=["Estatística", "Valor"],
        tablefmt="grid",
    ))
    if modelo.config:
        print(f"Configuração: {json.dumps(modelo.config, sort_keys=True)}")
    return 0


COMMANDS = {
    "train": cmd_train,
    "predict": cmd_predict,
    "evaluate": cmd_evaluate,
    "cv": cmd_cv,
    "importance": cmd_importance,
    "benchmark": cmd_benchmark,
    "info": cmd_info,
}


def main(argv=None):
    """Ponto de entrada; devolve o código de saída."""
    parser = build_parser()
    args = parser.parse_args(argv)
    configurar_logging(args.verbose, args.log_file)
    try:
        return COMMANDS[args.command](args)
    except KeyboardInterrupt:
        logger.warning("Interrompido pelo usuário")
        return 130
    except Exception as erro:
        return tratar_erro(erro, logger)


if __name__ == "__main__":
    sys.exit(main())
