#!/usr/bin/env python3
"""
Linha de comando do amoe-sim.

    amoe-sim simulate config.yaml -o out/
    amoe-sim sweep config.yaml --rates 50,100,200 -o out/ [--workers N]
    amoe-sim compare config.yaml -o out/
    amoe-sim audit out/

Códigos de saída: 0 sucesso, 1 auditoria com violações ou falha de simulação,
2 configuração inválida.
"""

import argparse
import logging
import sys
from pathlib import Path
from typing import List, Optional

from config.settings import Settings, configure_logging, load_settings

from .core.exceptions import ConfigurationError, SimulationError
from .core.validation_system import ValidationReport
from .metrics.csv_export import emit_csv, load_trace
from .metrics.summary import summarize
from .metrics.sweep import run_compare, run_sweep
from .simulation.audit import drain_check
from .simulation.builder import build_components, run_components

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_FAILURE = 1
EXIT_CONFIG = 2


def _parse_rates(value: str) -> List[float]:
    try:
        rates = [float(part) for part in value.split(",") if part.strip()]
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"taxas inválidas: {value!r}") from exc
    if not rates or any(rate <= 0 for rate in rates):
        raise argparse.ArgumentTypeError("informe ao menos uma taxa > 0")
    return rates


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="amoe-sim",
        description="Simulador de eventos discretos para decode MoE com Expert Parallelism assíncrono",
    )
    parser.add_argument(
        "--log-level", "-l",
        choices=["debug", "info", "warning", "error"],
        help="Sobrescreve logging.level da configuração",
    )
    commands = parser.add_subparsers(dest="command", required=True)

    simulate = commands.add_parser("simulate", help="Executa uma simulação e grava os CSVs")
    simulate.add_argument("config", help="Arquivo YAML de configuração")
    simulate.add_argument("--output", "-o", required=True, help="Diretório de saída")

    sweep = commands.add_parser("sweep", help="Varre taxas de chegada")
    sweep.add_argument("config", help="Arquivo YAML de configuração")
    sweep.add_argument("--rates", "-r", required=True, type=_parse_rates,
                       help="Taxas separadas por vírgula (ex: '50,100,200')")
    sweep.add_argument("--output", "-o", required=True, help="Diretório de saída")
    sweep.add_argument("--workers", "-w", type=int, default=None,
                       help="Processos paralelos (padrão: núcleos físicos)")

    compare = commands.add_parser("compare", help="Compara políticas AEP e o baseline síncrono")
    compare.add_argument("config", help="Arquivo YAML de configuração")
    compare.add_argument("--output", "-o", required=True, help="Diretório de saída")
    compare.add_argument("--workers", "-w", type=int, default=None,
                         help="Processos paralelos (padrão: núcleos físicos)")

    audit = commands.add_parser("audit", help="Audita um diretório de trace")
    audit.add_argument("trace_dir", help="Diretório escrito por 'simulate'")
    return parser


def _print_report(report: ValidationReport) -> None:
    if report.is_valid:
        print(f"✅ Auditoria OK: {report.total_checks} verificações")
        return
    print(f"❌ Auditoria falhou: {len(report.issues)} violação(ões) "
          f"em {report.total_checks} verificações")
    for issue in report.issues:
        where = f" [{issue.location}]" if issue.location else ""
        print(f"  - {issue.rule_name}{where}: {issue.message}")


def _cmd_simulate(settings: Settings, args: argparse.Namespace) -> int:
    parts = build_components(settings)
    trace = run_components(parts)
    emit_csv(trace, args.output, perf=parts.perf, window_fractions=parts.steady_window,
             rate_bucket_ns=parts.rate_bucket_ns)
    stats = summarize(trace, parts.steady_window)
    itl = "n/d" if stats.itl_mean_ms is None else f"{stats.itl_mean_ms:.3f} ms"
    print(f"📊 {stats.mode}/{stats.policy}: {stats.throughput_tokens_per_s:.1f} tokens/s, "
          f"ITL médio {itl}, {stats.requests_completed} requisições concluídas na janela")
    print(f"📁 Artefatos em {Path(args.output)}")
    return EXIT_OK


def _cmd_sweep(settings: Settings, args: argparse.Namespace) -> int:
    frame = run_sweep(settings, args.rates, args.output, workers=args.workers)
    print(frame.to_string(index=False))
    return EXIT_OK


def _cmd_compare(settings: Settings, args: argparse.Namespace) -> int:
    frame = run_compare(settings, args.output, workers=args.workers)
    print(frame[["variant", "throughput_tokens_per_s", "itl_mean_ms", "mean_expert_stall"]]
          .to_string(index=False))
    return EXIT_OK


def _cmd_audit(args: argparse.Namespace) -> int:
    trace = load_trace(args.trace_dir)
    report = drain_check(trace)
    _print_report(report)
    return EXIT_OK if report.is_valid else EXIT_FAILURE


def main(argv: Optional[List[str]] = None) -> int:
    args = build_parser().parse_args(argv)

    try:
        if args.command == "audit":
            settings = Settings()
        else:
            settings = load_settings(args.config)
        if args.log_level:
            settings = settings.with_overrides(logging={"level": args.log_level})
        configure_logging(settings.logging)

        if args.command == "audit":
            return _cmd_audit(args)
        handlers = {"simulate": _cmd_simulate, "sweep": _cmd_sweep, "compare": _cmd_compare}
        return handlers[args.command](settings, args)

    except ConfigurationError as exc:
        print(f"❌ Configuração inválida ({exc.key}): {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (SimulationError, FileNotFoundError, OSError) as exc:
        logger.error(f"Falha: {exc}")
        print(f"❌ {exc}", file=sys.stderr)
        return EXIT_FAILURE


if __name__ == "__main__":
    sys.exit(main())
