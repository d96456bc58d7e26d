"""
Generación de Salidas - CSV por ensayo, CSV agregado y gráficas SVG

- emit_report(): orquestador principal
- records_frame(): registros → DataFrame con el esquema versionado
- write_raw_csv(): CSV por ensayo (línea "# generated_at=..." opcional)
- aggregate_records(): media de fallo, MSE e iteraciones por celda × algoritmo
- plot_axis_family(): una gráfica SVG por familia de ejes

Las gráficas se guardan sin fecha y con una semilla de hash fija, de modo
que dos ejecuciones iguales producen los mismos bytes.
"""

import logging
import math
from dataclasses import dataclass, field
from datetime import datetime, timezone
from pathlib import Path
from typing import Dict, List, Optional, Sequence

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np
import pandas as pd

from .exceptions import EmptyRecordsError
from .models import ExperimentConfig, GridCell, TrialRecord

logger = logging.getLogger(__name__)

SCHEMA_VERSION = 1

RAW_COLUMNS = [
    "schema_version", "experiment_id", "cell", "n", "m", "l", "k", "snr_db", "beta", "c",
    "order", "trial", "algorithm", "failure", "mse", "iterations", "wall_ms", "gamma_card",
    "converged", "source_cond", "error_tag",
]
AXIS_COLUMNS = ["cell", "n", "m", "l", "k", "snr_db", "beta", "c", "order"]

DEFAULT_RAW_FILENAME = "{experiment_id}_trials.csv"
DEFAULT_AGG_FILENAME = "{experiment_id}_aggregate.csv"

# Paleta por algoritmo
ALGORITHM_STYLE = {
    "tsbl": {"color": "#1f4e79", "marker": "s", "label": "T-SBL"},
    "tmsbl": {"color": "#c00000", "marker": "o", "label": "T-MSBL"},
    "msbl": {"color": "#595959", "marker": "^", "label": "MSBL"},
}

# Familias de ejes: (columna x, métrica y, etiqueta x, etiqueta y)
AXIS_FAMILIES = {
    "l": ("l", "failure_rate", "L", "Tasa de fallo"),
    "k": ("k", "failure_rate", "K", "Tasa de fallo"),
    "m_over_n": ("m_over_n", "failure_rate", "M/N", "Tasa de fallo"),
    "snr_db": ("snr_db", "mse", "SNR (dB)", "MSE"),
    "c": ("c", "failure_rate", "C", "Tasa de fallo"),
    "c_condition": ("c", "source_cond", "C", "Número de condición de las fuentes"),
    "order": ("order", "failure_rate", "p", "Tasa de fallo"),
}


@dataclass
class ReportPaths:
    """Rutas de los ficheros generados."""
    raw_csv: Path
    aggregate_csv: Path
    plots: List[Path] = field(default_factory=list)

    def all(self) -> List[Path]:
        return [self.raw_csv, self.aggregate_csv, *self.plots]


def records_frame(records: Sequence[TrialRecord], experiment_id: str) -> pd.DataFrame:
    """DataFrame con las columnas del CSV por ensayo, en orden."""
    if not records:
        raise EmptyRecordsError("No hay registros")
    rows = []
    for record in records:
        row = record.to_dict()
        row["schema_version"] = SCHEMA_VERSION
        row["experiment_id"] = experiment_id
        rows.append(row)
    return pd.DataFrame(rows, columns=RAW_COLUMNS)


def write_raw_csv(frame: pd.DataFrame, path: Path, timestamp: bool = True) -> Path:
    """Escribe el CSV por ensayo (UTF-8, separado por comas, con cabecera)."""
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8", newline="") as f:
        if timestamp:
            f.write(f"# generated_at={datetime.now(timezone.utc).isoformat(timespec='seconds')}\n")
        frame.to_csv(f, index=False, na_rep="", lineterminator="\n")
    return path


def aggregate_records(frame: pd.DataFrame, cells: Optional[Sequence[GridCell]] = None,
                      algorithms: Optional[Sequence[str]] = None) -> pd.DataFrame:
    """
    Agrega por celda × algoritmo.

    Columnas: ejes de la celda, algorithm, trials, failure_rate, mse,
    iterations, gamma_card_max, nl_bound, converged_rate, source_cond.

    Args:
        frame: DataFrame por ensayo (records_frame o el CSV leído de disco)
        cells: Celdas esperadas; si falta alguna combinación celda × algoritmo
            se lanza EmptyRecordsError
        algorithms: Algoritmos esperados (los presentes en ``frame`` por defecto)

    Raises:
        EmptyRecordsError: Si no hay registros o alguna celda quedó vacía
    """
    if frame.empty:
        raise EmptyRecordsError("No hay registros que agregar")

    if cells is not None:
        algorithms = list(algorithms) if algorithms is not None else sorted(frame["algorithm"].unique())
        present = set(zip(frame["cell"].astype(int), frame["algorithm"]))
        missing = [(c.index, a) for c in cells for a in algorithms if (c.index, a) not in present]
        if missing:
            raise EmptyRecordsError(f"Celdas sin registros: {missing[:5]}")

    grouped = frame.groupby(["cell", "algorithm"], sort=True)
    agg = grouped.agg(
        n=("n", "first"),
        m=("m", "first"),
        l=("l", "first"),
        k=("k", "first"),
        snr_db=("snr_db", "first"),
        beta=("beta", "first"),
        c=("c", "first"),
        order=("order", "first"),
        trials=("trial", "count"),
        failure_rate=("failure", "mean"),
        mse=("mse", "mean"),
        iterations=("iterations", "mean"),
        gamma_card_max=("gamma_card", "max"),
        converged_rate=("converged", "mean"),
        source_cond=("source_cond", "mean"),
    ).reset_index()
    agg["nl_bound"] = agg["n"] * agg["l"]
    columns = AXIS_COLUMNS + ["algorithm", "trials", "failure_rate", "mse", "iterations",
                              "gamma_card_max", "nl_bound", "converged_rate", "source_cond"]
    return agg[columns]


def _varying_axes(agg: pd.DataFrame) -> List[str]:
    frame = agg.assign(m_over_n=agg["m"] / agg["n"])
    candidates = ["l", "k", "m_over_n", "snr_db", "beta", "c", "order"]
    return [col for col in candidates if frame[col].dropna().nunique() > 1]


def plot_axis_family(agg: pd.DataFrame, family: str, path: Path) -> Optional[Path]:
    """
    Gráfica de una métrica frente a un eje, una curva por algoritmo y por
    combinación de los demás ejes que varían.

    Los registros con β = 1 (sin C) se dibujan como referencias horizontales
    en las gráficas frente a C.

    Returns:
        Optional[Path]: Ruta del SVG, o None si el eje no varía
    """
    x_col, metric, x_label, y_label = AXIS_FAMILIES[family]
    frame = agg.assign(m_over_n=agg["m"] / agg["n"])
    reference = frame[frame[x_col].isna()] if x_col == "c" else frame.iloc[0:0]
    frame = frame[frame[x_col].notna()]
    if frame[x_col].nunique() < 2:
        return None

    others = [col for col in _varying_axes(agg) if col not in (x_col, "cell")]
    if x_col == "c":
        others = [col for col in others if col != "beta"]

    plt.rcParams["svg.hashsalt"] = "mmvsbl"
    fig, ax = plt.subplots(figsize=(6.0, 4.0))
    for algorithm, by_alg in frame.groupby("algorithm", sort=True):
        style = ALGORITHM_STYLE.get(algorithm, {"color": None, "marker": "x", "label": algorithm})
        series = by_alg.groupby(others, sort=True) if others else [((), by_alg)]
        for key, curve in series:
            key = key if isinstance(key, tuple) else (key,)
            suffix = ", ".join(f"{col}={val:g}" for col, val in zip(others, key))
            curve = curve.sort_values(x_col)
            ax.plot(curve[x_col], curve[metric], marker=style["marker"], color=style["color"],
                    label=style["label"] + (f" ({suffix})" if suffix else ""))
        ref = reference[reference["algorithm"] == algorithm]
        if not ref.empty:
            ax.axhline(float(ref[metric].mean()), color=style["color"], linestyle="--",
                       linewidth=1.0, label=f"{style['label']} (β=1)")

    ax.set_xlabel(x_label)
    ax.set_ylabel(y_label)
    if metric in ("mse", "source_cond"):
        positive = frame[metric].replace([np.inf], np.nan).dropna()
        if not positive.empty and (positive > 0).all():
            ax.set_yscale("log")
    ax.grid(True, alpha=0.3)
    ax.legend(fontsize=7)
    fig.tight_layout()
    path.parent.mkdir(parents=True, exist_ok=True)
    fig.savefig(path, format="svg", metadata={"Date": None})
    plt.close(fig)
    return path


def emit_report(records: Sequence[TrialRecord], config: ExperimentConfig,
                output_dir: Optional[str] = None,
                cells: Optional[Sequence[GridCell]] = None) -> ReportPaths:
    """
    Escribe el CSV por ensayo, el CSV agregado y las gráficas SVG.

    Args:
        records: Registros de run_experiment
        config: Configuración del experimento (identificador, timestamp)
        output_dir: Directorio de salida (config.output_dir por defecto)
        cells: Celdas esperadas, para detectar celdas vacías

    Returns:
        ReportPaths: Rutas generadas

    Raises:
        EmptyRecordsError: Sin registros o con alguna celda vacía
        OSError: Si el directorio de salida no es escribible
    """
    out = Path(output_dir or config.output_dir)
    frame = records_frame(records, config.experiment_id)
    agg = aggregate_records(frame, cells, config.algorithms if cells is not None else None)

    raw_path = write_raw_csv(frame, out / DEFAULT_RAW_FILENAME.format(experiment_id=config.experiment_id),
                             timestamp=config.timestamp)
    agg_path = out / DEFAULT_AGG_FILENAME.format(experiment_id=config.experiment_id)
    agg.to_csv(agg_path, index=False, na_rep="", lineterminator="\n")
    logger.info(f"CSV escritos en {out}")

    paths = ReportPaths(raw_csv=raw_path, aggregate_csv=agg_path)
    varying = set(_varying_axes(agg))
    for family, (x_col, *_rest) in AXIS_FAMILIES.items():
        if x_col not in varying:
            continue
        plot = plot_axis_family(agg, family, out / f"{config.experiment_id}_{family}.svg")
        if plot is not None:
            paths.plots.append(plot)
    logger.info(f"{len(paths.plots)} gráficas SVG generadas")
    return paths


def summarize_by_algorithm(agg: pd.DataFrame) -> Dict[str, Dict[str, float]]:
    """Resumen global por algoritmo (media de fallo y MSE sobre celdas)."""
    summary = {}
    for algorithm, group in agg.groupby("algorithm", sort=True):
        mse_values = group["mse"].replace([np.inf], np.nan).dropna()
        summary[algorithm] = {
            "failure_rate": float(group["failure_rate"].mean()),
            "mse": float(mse_values.mean()) if not mse_values.empty else math.nan,
            "gamma_card_max": int(group["gamma_card_max"].max()),
        }
    return summary
