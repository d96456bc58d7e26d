"""
Ejecutor de Experimentos Monte Carlo

Recorre la rejilla de una ExperimentConfig y, para cada celda y ensayo:
1. Deriva los subflujos aleatorios de (master_seed, celda, ensayo)
2. Genera Φ, X_gen e Y
3. Ejecuta cada algoritmo seleccionado sobre los mismos datos
4. Registra fallo, MSE, iteraciones, tiempo, ‖γ̂‖₀ y convergencia

Los ensayos se reparten entre procesos con joblib; el resultado se ordena
por (celda, ensayo, algoritmo), así que no depende del número de procesos.
Un error dentro de un solver se registra como ensayo fallido con el nombre
de la excepción y no detiene el barrido.
"""

import itertools
import logging
import math
import time
from dataclasses import dataclass, field, replace
from typing import Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np
from joblib import Parallel, delayed

from .config import (
    DEFAULT_LAMBDA_GRID, DEFAULT_PILOT_TRIALS, cell_dimensions, regime_for_snr,
    solver_options, validate_config,
)
from .datagen import generate_problem, sample_extreme_beta, trial_seeds
from .exceptions import ConfigError
from .metrics import is_failure, mse, source_condition_number
from .models import ExperimentConfig, GridCell, MmvProblem, SolverResult, SourceModel, TrialRecord
from .msbl import msbl_solve
from .tmsbl import tmsbl_solve
from .tsbl import tsbl_solve

logger = logging.getLogger(__name__)

SOLVERS: Dict[str, Callable[..., SolverResult]] = {
    "tsbl": tsbl_solve,
    "tmsbl": tmsbl_solve,
    "msbl": msbl_solve,
}


# ═══════════════════════════════════════════════════════════
# REJILLA
# ═══════════════════════════════════════════════════════════

def build_grid(config: ExperimentConfig) -> List[GridCell]:
    """
    Producto cartesiano de los ejes de la configuración.

    Orden de los ejes: M/N, L, K, SNR, β (o C), orden p. Para fuentes que
    no son common_ar1 el eje β no se usa (β = NaN en los registros).
    """
    if config.source.kind != "common_ar1":
        correlation = [(math.nan, None)]
    elif config.c_values:
        correlation = [(sample_extreme_beta(c), c) for c in config.c_values]
    else:
        correlation = [(float(b), None) for b in config.beta_values]
    if config.include_beta_one and config.source.kind == "common_ar1":
        correlation.append((1.0, None))

    orders = config.orders if config.source.kind != "common_ar1" else [1]

    cells = []
    for ratio, l, k, snr, (beta, c), order in itertools.product(
            config.m_over_n, config.l_values, config.k_values, config.snr_db, correlation, orders):
        n, m = cell_dimensions(config, ratio)
        cells.append(GridCell(
            index=len(cells), n=n, m=m, l=int(l), k=int(k),
            snr_db=math.inf if snr is None else float(snr),
            beta=beta, c=c, order=int(order),
        ))
    return cells


def cell_source_model(config: ExperimentConfig, cell: GridCell) -> SourceModel:
    """Modelo de fuentes concreto de una celda (β u orden p fijados)."""
    source = config.source
    if source.kind == "common_ar1":
        return replace(source, beta=cell.beta, extreme=source.extreme or abs(cell.beta) >= 1.0)
    if source.coeffs is None:
        return replace(source, order=cell.order)
    return source


# ═══════════════════════════════════════════════════════════
# ENSAYOS
# ═══════════════════════════════════════════════════════════

def _solve_and_score(algorithm: str, problem: MmvProblem, cell: GridCell, trial: int,
                     config: ExperimentConfig, source_cond: float) -> TrialRecord:
    opts = solver_options(algorithm, cell.snr_db, config.solver_overrides.get(algorithm))
    truth = problem.truth
    regime = "noiseless" if cell.noiseless else "noisy"
    start = time.perf_counter()
    try:
        result = SOLVERS[algorithm](problem, opts)
    except Exception as exc:
        logger.warning(f"Celda {cell.index} ensayo {trial} {algorithm}: {type(exc).__name__}: {exc}")
        return TrialRecord(
            cell=cell, trial=trial, algorithm=algorithm, failure=True, mse=math.nan,
            wall_ms=(time.perf_counter() - start) * 1e3 if config.timestamp else math.nan,
            source_cond=source_cond, error_tag=type(exc).__name__,
        )
    elapsed = (time.perf_counter() - start) * 1e3
    return TrialRecord(
        cell=cell,
        trial=trial,
        algorithm=algorithm,
        failure=is_failure(result.x_hat, truth.support, truth.k, regime),
        mse=mse(result.x_hat, truth.x_gen),
        iterations=result.iterations,
        wall_ms=elapsed if config.timestamp else math.nan,
        gamma_card=result.gamma_card,
        converged=result.converged,
        source_cond=source_cond,
    )


def _run_trial(config: ExperimentConfig, cell: GridCell, trial: int) -> List[TrialRecord]:
    seeds = trial_seeds(config.master_seed, cell.index, trial)
    problem = generate_problem(
        cell.n, cell.m, cell.l, cell.k, cell.snr_db,
        cell_source_model(config, cell), config.dictionary, seeds,
    )
    source_cond = source_condition_number(problem.truth.x_gen, problem.truth.support)
    return [_solve_and_score(alg, problem, cell, trial, config, source_cond)
            for alg in config.algorithms]


def support_bound_audit(records: Sequence[TrialRecord]) -> Tuple[int, bool]:
    """
    Máximo ‖γ̂‖₀ entre resultados convergidos y si todos cumplen ‖γ̂‖₀ ≤ NL.
    """
    converged = [r for r in records if r.converged]
    if not converged:
        return 0, True
    peak = max(r.gamma_card for r in converged)
    ok = all(r.gamma_card <= r.cell.n * r.cell.l for r in converged)
    return peak, ok


def run_experiment(config: ExperimentConfig,
                   progress: Optional[Callable[[int, int], None]] = None) -> List[TrialRecord]:
    """
    Ejecuta todas las celdas y ensayos de la configuración.

    Args:
        config: Configuración del experimento
        progress: Callback opcional (ensayos hechos, total), unas 20 veces por barrido

    Returns:
        List[TrialRecord]: Un registro por (celda, ensayo, algoritmo), ordenados

    Raises:
        ConfigError: Si la configuración no es válida
    """
    errors = validate_config(config)
    if errors:
        raise ConfigError("Configuración inválida: " + "; ".join(errors))

    cells = build_grid(config)
    tasks = [(cell, trial) for cell in cells for trial in range(config.trials)]
    logger.info(
        f"Experimento {config.experiment_id}: {len(cells)} celdas × {config.trials} ensayos × "
        f"{len(config.algorithms)} algoritmos (jobs={config.jobs})"
    )

    if config.jobs == 1:
        results = (_run_trial(config, cell, trial) for cell, trial in tasks)
    else:
        results = Parallel(n_jobs=config.jobs, return_as="generator")(
            delayed(_run_trial)(config, cell, trial) for cell, trial in tasks
        )

    step = max(1, len(tasks) // 20)
    batches = []
    for done, batch in enumerate(results, start=1):
        batches.append(batch)
        if progress is not None and (done % step == 0 or done == len(tasks)):
            progress(done, len(tasks))

    records = sorted(itertools.chain.from_iterable(batches), key=TrialRecord.key)
    peak, ok = support_bound_audit(records)
    if ok:
        logger.info(f"Cota ‖γ̂‖₀ ≤ NL respetada (máximo observado {peak})")
    else:
        logger.warning(f"Algún resultado convergido supera ‖γ̂‖₀ ≤ NL (máximo {peak})")
    return records


# ═══════════════════════════════════════════════════════════
# BÚSQUEDA DE λ
# ═══════════════════════════════════════════════════════════

@dataclass
class LambdaSearchResult:
    """λ elegido y la tabla (λ, tasa de fallo, MSE) de todos los candidatos."""
    algorithm: str
    best_lambda: float
    table: List[Dict[str, float]] = field(default_factory=list)


def lambda_grid_search(config: ExperimentConfig, algorithm: str,
                       candidates: Optional[Sequence[float]] = None,
                       pilot_trials: int = DEFAULT_PILOT_TRIALS,
                       progress: Optional[Callable[[int, int], None]] = None) -> LambdaSearchResult:
    """
    Búsqueda exhaustiva de un λ fijo para un solver.

    Cada candidato se ejecuta sobre ``pilot_trials`` ensayos de la rejilla;
    gana la menor tasa de fallo media, después el menor MSE y después el
    menor λ.

    Args:
        config: Configuración base (se usan sus ejes y semilla)
        algorithm: ``tsbl``, ``tmsbl`` o ``msbl``
        candidates: Valores de λ (por defecto logspace(-4, 0, 9))
        pilot_trials: Ensayos por candidato
        progress: Callback opcional (candidatos evaluados, total)

    Returns:
        LambdaSearchResult: λ elegido y tabla de resultados
    """
    if algorithm not in SOLVERS:
        raise ConfigError(f"Algoritmo desconocido: {algorithm}")
    candidates = list(DEFAULT_LAMBDA_GRID if candidates is None else candidates)
    if not candidates or any(not v > 0.0 for v in candidates):
        raise ConfigError("Los candidatos de λ deben ser positivos")

    table = []
    for lam in candidates:
        overrides = dict(config.solver_overrides.get(algorithm, {}))
        overrides["lambda_policy"] = {"kind": "fixed", "value": float(lam)}
        pilot = replace(config, trials=pilot_trials, algorithms=[algorithm],
                        solver_overrides={**config.solver_overrides, algorithm: overrides})
        records = run_experiment(pilot)
        failure = float(np.mean([r.failure for r in records]))
        errors = [r.mse for r in records if not math.isnan(r.mse)]
        mean_mse = float(np.mean(errors)) if errors else math.inf
        table.append({"lambda": float(lam), "failure_rate": failure, "mse": mean_mse})
        logger.info(f"λ={lam:.3e}: fallo={failure:.3f} mse={mean_mse:.3e}")
        if progress is not None:
            progress(len(table), len(candidates))

    best = min(table, key=lambda row: (row["failure_rate"], row["mse"], row["lambda"]))
    return LambdaSearchResult(algorithm=algorithm, best_lambda=best["lambda"], table=table)


def describe_cell(cell: GridCell) -> str:
    """Descripción corta de una celda para mensajes de consola."""
    snr = "∞" if cell.noiseless else f"{cell.snr_db:g}"
    regime = regime_for_snr(None if cell.noiseless else cell.snr_db)
    return f"N={cell.n} M={cell.m} L={cell.l} K={cell.k} SNR={snr} β={cell.beta:g} ({regime})"
