"""
Utilidades y Helpers para CLI

Funciones de formato para la salida de consola con prompt_toolkit: títulos,
mensajes de estado, tablas de resultados agregados y del comando verify.
Mantienen una presentación coherente entre los subcomandos.
"""

from typing import Dict, List, Sequence

import pandas as pd
from prompt_toolkit.formatted_text import FormattedText
from prompt_toolkit.shortcuts import print_formatted_text
from prompt_toolkit.styles import Style

# Clases de estilo de la consola del banco
APP_STYLE = Style.from_dict({
    'title': '#00aa00 bold',
    'subtitle': '#0066cc bold',
    'text': '#ffffff',
    'hint': '#666666 italic',      # tolerancias y notas
    'error': '#ff0066 bold',       # FALLO, celdas con error
    'success': '#00aa00',          # OK
    'warning': '#ffaa00',
    'value': '#00aaaa',            # filas de tablas numéricas
    'separator': '#333333',
})


def print_title(title: str) -> None:
    """Título de subcomando enmarcado."""
    rule = '═' * 64
    print_formatted_text(
        FormattedText([('class:title', f"\n{rule}\n{title.center(64)}\n{rule}\n")]),
        style=APP_STYLE
    )


def print_subtitle(subtitle: str) -> None:
    """Subtítulo de sección (p. ej. antes de la tabla agregada)."""
    print_formatted_text(
        FormattedText([('class:subtitle', f"\n{subtitle.upper()}\n{'─' * len(subtitle)}")]),
        style=APP_STYLE
    )


def _status(kind: str, icon: str, message: str) -> None:
    print_formatted_text(FormattedText([(f'class:{kind}', f"{icon} {message}")]), style=APP_STYLE)


def print_success(message: str) -> None:
    _status('success', "✅", message)


def print_warning(message: str) -> None:
    _status('warning', "⚠️", message)


def print_error(message: str) -> None:
    _status('error', "❌", message)


def print_info(message: str) -> None:
    _status('text', "ℹ️", message)


def print_plain(text: str) -> None:
    """Texto sin decoración (p. ej. JSON de print-defaults)."""
    print_formatted_text(FormattedText([('class:text', text)]), style=APP_STYLE)


def display_validation_errors(errors: List[str]) -> None:
    """Muestra errores de validación con formato."""
    if not errors:
        return

    print_error("Se encontraron los siguientes problemas:")
    for error in errors:
        print_formatted_text(FormattedText([('class:error', f"  • {error}")]), style=APP_STYLE)


def _fmt(value: float, spec: str) -> str:
    if pd.isna(value):
        return "-"
    return format(value, spec)


def display_aggregate_table(agg: pd.DataFrame) -> None:
    """Tabla celda × algoritmo con tasa de fallo, MSE, iteraciones y ‖γ̂‖₀ máximo."""
    header = f"{'celda':>5} {'N':>4} {'M':>4} {'L':>3} {'K':>3} {'SNR':>6} {'β':>8} {'alg':>6} " \
             f"{'fallo':>7} {'MSE':>10} {'iter':>7} {'‖γ‖₀':>6}"
    print_formatted_text(FormattedText([('class:subtitle', header)]), style=APP_STYLE)
    print_formatted_text(FormattedText([('class:separator', '-' * len(header))]), style=APP_STYLE)
    for row in agg.itertuples(index=False):
        line = (
            f"{int(row.cell):>5} {int(row.n):>4} {int(row.m):>4} {int(row.l):>3} {int(row.k):>3} "
            f"{_fmt(row.snr_db, '>6g'):>6} {_fmt(row.beta, '>8.4g'):>8} {row.algorithm:>6} "
            f"{row.failure_rate:>7.3f} {_fmt(row.mse, '>10.3e'):>10} {row.iterations:>7.1f} "
            f"{int(row.gamma_card_max):>6}"
        )
        print_formatted_text(FormattedText([('class:value', line)]), style=APP_STYLE)


def display_verification_results(results: Sequence) -> None:
    """Lista pass/fail del comando verify."""
    for result in results:
        style = 'class:success' if result.passed else 'class:error'
        mark = "✅" if result.passed else "❌"
        relation = ">" if result.lower_bound else "<"
        print_formatted_text(
            FormattedText([
                (style, f"{mark} {result.name:<30}"),
                ('class:hint', f" peor={result.worst:.3e} {relation} {result.tolerance:.0e} n={result.instances}"),
            ]),
            style=APP_STYLE
        )


def display_lambda_table(table: List[Dict[str, float]], best: float) -> None:
    """Tabla de la búsqueda de λ, marcando el elegido."""
    for row in table:
        style = 'class:success' if row["lambda"] == best else 'class:value'
        marker = " ◀" if row["lambda"] == best else ""
        print_formatted_text(
            FormattedText([(style, f"λ={row['lambda']:.3e}  fallo={row['failure_rate']:.3f}  "
                                   f"mse={row['mse']:.3e}{marker}")]),
            style=APP_STYLE
        )


def display_progress_bar(current: int, total: int, description: str = "") -> None:
    """Una línea de progreso por llamada: barra, hechos/total y unidad."""
    if total <= 0:
        return
    width = 30
    filled = width * current // total
    bar = '█' * filled + '·' * (width - filled)
    print_formatted_text(
        FormattedText([
            ('class:value', f"[{bar}] "),
            ('class:text', f"{current}/{total} {description}".rstrip()),
        ]),
        style=APP_STYLE
    )
