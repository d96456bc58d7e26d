"""
Main Entry Point - banco Monte Carlo de T-SBL / T-MSBL / MSBL

Punto de entrada de la CLI. Subcomandos:
- run: ejecuta un barrido (--config JSON o --protocol A..G) y escribe CSV y SVG
- print-defaults: imprime la configuración por defecto (o escribe la plantilla)
- verify: ejecuta la suite de oráculos algebraicos y muestra pass/fail
- lambda-search: elige un λ fijo por búsqueda en rejilla sobre ensayos piloto

Código de salida 0 si todo fue bien, 1 ante cualquier error del barrido.
"""

import argparse
import json
import logging
import sys
from dataclasses import replace
from typing import List, Optional


def build_parser() -> argparse.ArgumentParser:
    from . import __version__

    parser = argparse.ArgumentParser(
        prog="mmvsbl",
        description="Recuperación MMV con aprendizaje bayesiano disperso temporal (T-SBL, T-MSBL, MSBL)",
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    parser.add_argument("--verbose", action="store_true", help="Log a nivel DEBUG")
    parser.add_argument("--quiet", action="store_true", help="Log solo a partir de WARNING")
    parser.add_argument("--env-file", type=str, default=None, help="Fichero .env alternativo")
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="Ejecutar un barrido Monte Carlo")
    source = run.add_mutually_exclusive_group()
    source.add_argument("--config", type=str, help="Configuración de experimento JSON")
    source.add_argument("--protocol", type=str, help="Preset de protocolo (A, A-noisy, B, C, D, D-ma, E, F, G)")
    run.add_argument("--trials", type=int, help="Ensayos por celda")
    run.add_argument("--seed", type=int, help="Semilla maestra")
    run.add_argument("--jobs", type=int, help="Procesos en paralelo (-1 = todos)")
    run.add_argument("--out", type=str, help="Directorio de salida")
    run.add_argument("--no-timestamp", action="store_true",
                     help="Sin línea generated_at ni tiempos (salida reproducible byte a byte)")

    defaults = sub.add_parser("print-defaults", help="Imprimir la configuración por defecto")
    defaults.add_argument("--protocol", type=str, help="Imprimir un preset de protocolo")
    defaults.add_argument("--template", type=str, help="Escribir la plantilla comentada en esta ruta")

    verify = sub.add_parser("verify", help="Ejecutar la suite de verificación")
    verify.add_argument("--seed", type=int, default=0, help="Semilla de la suite")
    verify.add_argument("--scale", type=float, default=1.0, help="Factor sobre el número de instancias")

    search = sub.add_parser("lambda-search", help="Buscar λ fijo en rejilla")
    search_source = search.add_mutually_exclusive_group()
    search_source.add_argument("--config", type=str, help="Configuración de experimento JSON")
    search_source.add_argument("--protocol", type=str, help="Preset de protocolo")
    search.add_argument("--algorithm", type=str, required=True, choices=["tsbl", "tmsbl", "msbl"])
    search.add_argument("--pilot-trials", type=int, default=None, help="Ensayos piloto por candidato")
    search.add_argument("--seed", type=int, help="Semilla maestra")
    search.add_argument("--jobs", type=int, help="Procesos en paralelo")
    return parser


def main(argv: Optional[List[str]] = None) -> None:
    """Punto de entrada principal."""
    parser = build_parser()
    args = parser.parse_args(argv)

    # Importaciones diferidas para mejorar velocidad de arranque
    from .cli_helpers import print_error, print_info
    from .config import load_environment

    load_environment(args.env_file)
    if args.verbose:
        logging.getLogger().setLevel(logging.DEBUG)
    elif args.quiet:
        logging.getLogger().setLevel(logging.WARNING)

    try:
        if args.command == "run":
            ok = _command_run(args)
        elif args.command == "print-defaults":
            ok = _command_print_defaults(args)
        elif args.command == "verify":
            ok = _command_verify(args)
        else:
            ok = _command_lambda_search(args)
        if not ok:
            sys.exit(1)

    except KeyboardInterrupt:
        print_info("\n\nEjecución interrumpida por el usuario. Adiós.")
        sys.exit(0)
    except Exception as e:
        print_error(f"Error fatal: {type(e).__name__}: {e}")
        logging.getLogger(__name__).debug("Traza completa", exc_info=True)
        sys.exit(1)


def _resolve_config(config_path: Optional[str], protocol: Optional[str]):
    """Configuración desde --config, --protocol o la de por defecto; None si no se pudo cargar."""
    from .cli_helpers import print_error
    from .config import default_experiment_config, get_default_jobs, get_output_dir, protocol_config
    from .persistence import load_config

    if config_path:
        config = load_config(config_path)
        if config is None:
            print_error(f"No se pudo cargar la configuración desde {config_path}")
            return None
        return config

    config = protocol_config(protocol) if protocol else default_experiment_config()
    return replace(config, jobs=get_default_jobs(), output_dir=get_output_dir())


def _apply_overrides(config, args):
    updates = {}
    if getattr(args, "trials", None) is not None:
        updates["trials"] = args.trials
    if getattr(args, "seed", None) is not None:
        updates["master_seed"] = args.seed
    if getattr(args, "jobs", None) is not None:
        updates["jobs"] = args.jobs
    if getattr(args, "out", None):
        updates["output_dir"] = args.out
    if getattr(args, "no_timestamp", False):
        updates["timestamp"] = False
    return replace(config, **updates) if updates else config


def _command_run(args) -> bool:
    from .cli_helpers import (
        display_aggregate_table, display_progress_bar, display_validation_errors,
        print_info, print_subtitle, print_success, print_title, print_warning,
    )
    from .config import validate_config
    from .outputgen import aggregate_records, emit_report, records_frame
    from .runner import build_grid, describe_cell, run_experiment, support_bound_audit

    config = _resolve_config(args.config, args.protocol)
    if config is None:
        return False
    config = _apply_overrides(config, args)

    errors = validate_config(config)
    if errors:
        display_validation_errors(errors)
        return False

    cells = build_grid(config)
    print_title(f"Experimento {config.experiment_id}")
    print_info(f"{len(cells)} celdas × {config.trials} ensayos × {', '.join(config.algorithms)}")
    if not args.quiet:
        for cell in cells:
            print_info(f"  celda {cell.index}: {describe_cell(cell)}")

    records = run_experiment(
        config, progress=lambda done, total: display_progress_bar(done, total, "ensayos"))
    paths = emit_report(records, config, cells=cells)

    print_subtitle("Resultados agregados")
    display_aggregate_table(aggregate_records(records_frame(records, config.experiment_id)))

    peak, bound_ok = support_bound_audit(records)
    if bound_ok:
        print_success(f"‖γ̂‖₀ ≤ NL en todos los resultados convergidos (máximo {peak})")
    else:
        print_warning(f"Algún resultado convergido supera ‖γ̂‖₀ ≤ NL (máximo {peak})")

    errored = sum(1 for r in records if r.error_tag)
    if errored:
        print_warning(f"{errored} ejecuciones terminaron con error (ver columna error_tag)")
    for path in paths.all():
        print_success(f"Generado: {path}")
    return True


def _command_print_defaults(args) -> bool:
    from .cli_helpers import print_error, print_plain, print_success
    from .config import default_experiment_config, protocol_config
    from .persistence import create_config_template

    if args.template:
        if not create_config_template(args.template):
            print_error(f"No se pudo escribir la plantilla en {args.template}")
            return False
        print_success(f"Plantilla creada: {args.template}")
        return True

    config = protocol_config(args.protocol) if args.protocol else default_experiment_config()
    print_plain(json.dumps(config.to_dict(), indent=4, ensure_ascii=False))
    return True


def _command_verify(args) -> bool:
    from .cli_helpers import display_verification_results, print_error, print_success, print_title
    from .verification import run_verification

    print_title("Verificación")
    results = run_verification(seed=args.seed, scale=args.scale)
    display_verification_results(results)
    failed = [r.name for r in results if not r.passed]
    if failed:
        print_error(f"{len(failed)} comprobaciones fallaron: {', '.join(failed)}")
        return False
    print_success(f"Las {len(results)} comprobaciones pasaron")
    return True


def _command_lambda_search(args) -> bool:
    from .cli_helpers import display_lambda_table, display_progress_bar, print_success, print_title
    from .config import DEFAULT_PILOT_TRIALS
    from .runner import lambda_grid_search

    config = _resolve_config(args.config, args.protocol)
    if config is None:
        return False
    config = _apply_overrides(config, args)

    print_title(f"Búsqueda de λ para {args.algorithm}")
    pilot = args.pilot_trials if args.pilot_trials is not None else DEFAULT_PILOT_TRIALS
    result = lambda_grid_search(
        config, args.algorithm, pilot_trials=pilot,
        progress=lambda done, total: display_progress_bar(done, total, "candidatos"),
    )
    display_lambda_table(result.table, result.best_lambda)
    print_success(f"λ elegido: {result.best_lambda:.3e}")
    return True


if __name__ == "__main__":
    main()
