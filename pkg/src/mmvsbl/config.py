"""
Configuración - Valores por defecto, entorno y presets de régimen/protocolo

Este módulo centraliza:
- Los valores por defecto de solvers y experimentos (constantes DEFAULT_*)
- Las variables de entorno (MMVSBL_JOBS, MMVSBL_OUTPUT_DIR, MMVSBL_KRON_CAP),
  cargables desde un fichero .env con python-dotenv
- Los presets de régimen de ruido que eligen las opciones de cada solver
  según el SNR declarado de una celda
- Los presets de los protocolos experimentales A–G
- La validación cruzada de una ExperimentConfig

Precedencia: flags de CLI > variables de entorno > valores por defecto.
"""

import logging
import math
import os
from typing import Any, Dict, List, Optional, Union

import numpy as np
from dotenv import load_dotenv

from .models import (
    BPolicy, DictionaryKind, ExperimentConfig, LambdaPolicy, SourceModel,
    TmsblOptions, TsblOptions,
)

logger = logging.getLogger(__name__)

# ═══════════════════════════════════════════════════════════
# VALORES POR DEFECTO
# ═══════════════════════════════════════════════════════════

DEFAULT_TRIALS = 200
DEFAULT_MASTER_SEED = 0
DEFAULT_JOBS = 1
DEFAULT_OUTPUT_DIR = "outputs"

DEFAULT_MAX_ITERS = 2000
DEFAULT_GAMMA_TOL = 1e-8
DEFAULT_PRUNE_THRESH = 1e-5
DEFAULT_INIT_GAMMA = 1.0
LAMBDA_FLOOR = 1e-12
NOISELESS_LAMBDA = 1e-9
DEFAULT_ETA = 2.0
INITIAL_LAMBDA_SCALE = 1e-2

HIGH_SNR_DB = 20.0
LOW_SNR_DB = 15.0

DEFAULT_LAMBDA_GRID = tuple(float(v) for v in np.logspace(-4, 0, 9))
DEFAULT_PILOT_TRIALS = 50

# Número máximo de entradas de Φ ⊗ I_L (≈ 160 MB en float64)
KRON_SIZE_CAP = 20_000_000

ENV_JOBS = "MMVSBL_JOBS"
ENV_OUTPUT_DIR = "MMVSBL_OUTPUT_DIR"
ENV_KRON_CAP = "MMVSBL_KRON_CAP"

REGIMES = ("noiseless", "high_snr", "moderate_snr", "low_snr")


def load_environment(dotenv_path: Optional[str] = None) -> bool:
    """Carga un fichero .env si existe; devuelve True si se cargó alguno."""
    loaded = load_dotenv(dotenv_path) if dotenv_path else load_dotenv()
    if loaded:
        logger.debug("Variables de entorno cargadas desde .env")
    return bool(loaded)


def _env_int(name: str, default: int) -> int:
    raw = os.environ.get(name)
    if raw is None or not raw.strip():
        return default
    try:
        return int(raw)
    except ValueError:
        logger.warning(f"{name}={raw!r} no es un entero; se usa {default}")
        return default


def get_kron_cap() -> int:
    return _env_int(ENV_KRON_CAP, KRON_SIZE_CAP)


def get_default_jobs() -> int:
    return _env_int(ENV_JOBS, DEFAULT_JOBS)


def get_output_dir() -> str:
    return os.environ.get(ENV_OUTPUT_DIR) or DEFAULT_OUTPUT_DIR


# ═══════════════════════════════════════════════════════════
# PRESETS DE RÉGIMEN DE RUIDO
# ═══════════════════════════════════════════════════════════

def regime_for_snr(snr_db: Optional[float]) -> str:
    """
    Régimen declarado de una celda.

    Returns:
        str: ``noiseless`` (sin ruido), ``high_snr`` (> 20 dB),
        ``moderate_snr`` (15 < SNR ≤ 20) o ``low_snr`` (≤ 15 dB)
    """
    if snr_db is None or math.isinf(snr_db):
        return "noiseless"
    if snr_db > HIGH_SNR_DB:
        return "high_snr"
    if snr_db > LOW_SNR_DB:
        return "moderate_snr"
    return "low_snr"


def solver_options(algorithm: str, snr_db: Optional[float],
                   overrides: Optional[Dict[str, Any]] = None) -> Union[TsblOptions, TmsblOptions]:
    """
    Opciones del solver para el régimen de una celda, con overrides opcionales.

    T-MSBL usa TmsblOptions; T-SBL y MSBL usan TsblOptions. La modificación
    de λ para SNR bajo y la regla regularizada de B solo existen en T-MSBL;
    el cambio a B = I en SNR bajo se aplica a los dos solvers temporales.

    Args:
        algorithm: ``tsbl``, ``tmsbl`` o ``msbl``
        snr_db: SNR declarado (None o ∞ = sin ruido)
        overrides: Campos a sustituir (p. ej. {"lambda_policy": {"kind": "fixed", "value": 0.01}})
    """
    regime = regime_for_snr(snr_db)
    if regime == "noiseless":
        lam = LambdaPolicy.fixed(NOISELESS_LAMBDA)
    else:
        lam = LambdaPolicy.learned()

    common = dict(
        max_iters=DEFAULT_MAX_ITERS,
        gamma_tol=DEFAULT_GAMMA_TOL,
        prune_thresh=DEFAULT_PRUNE_THRESH,
        init_gamma=DEFAULT_INIT_GAMMA,
        lambda_policy=lam,
        lambda_floor=LAMBDA_FLOOR,
    )

    if algorithm == "tmsbl":
        opts = TmsblOptions(
            **common,
            b_policy=BPolicy.regularized(DEFAULT_ETA) if regime == "low_snr" else BPolicy.plain(),
            low_snr_lambda_mod=regime in ("moderate_snr", "low_snr"),
            b_identity_switch=regime == "low_snr",
        )
    elif algorithm == "tsbl":
        opts = TsblOptions(**common, b_identity_switch=regime == "low_snr")
    elif algorithm == "msbl":
        opts = TsblOptions(**common)
    else:
        raise ValueError(f"Algoritmo desconocido: {algorithm}")

    return opts.with_overrides(overrides) if overrides else opts


# ═══════════════════════════════════════════════════════════
# EXPERIMENTOS
# ═══════════════════════════════════════════════════════════

def default_experiment_config() -> ExperimentConfig:
    """Configuración por defecto (celda sin ruido del protocolo A con L = 4, β = 0.9)."""
    config = ExperimentConfig(
        trials=DEFAULT_TRIALS,
        master_seed=DEFAULT_MASTER_SEED,
        jobs=get_default_jobs(),
        output_dir=get_output_dir(),
    )
    return config


def _protocol_a() -> ExperimentConfig:
    return ExperimentConfig(
        experiment_id="A",
        n=25, m_over_n=[5.0], l_values=[1, 2, 3, 4], k_values=[12],
        snr_db=[None], beta_values=[-0.9, -0.5, 0.0, 0.5, 0.9, 0.99],
        algorithms=["tsbl", "tmsbl", "msbl"],
    )


def _protocol_a_noisy() -> ExperimentConfig:
    return ExperimentConfig(
        experiment_id="A-noisy",
        n=25, m_over_n=[5.0], l_values=[1, 2, 3, 4], k_values=[12],
        snr_db=[25.0], beta_values=[0.7, 0.9],
        algorithms=["tsbl", "tmsbl", "msbl"],
    )


def _protocol_b() -> ExperimentConfig:
    return ExperimentConfig(
        experiment_id="B",
        n=25, m_over_n=[5.0], l_values=[4], k_values=list(range(10, 19, 2)),
        snr_db=[None], beta_values=[0.0, 0.5, 0.9, 0.99],
        algorithms=["tsbl", "tmsbl", "msbl"],
    )


def _protocol_c() -> ExperimentConfig:
    return ExperimentConfig(
        experiment_id="C",
        n=25, m_over_n=[float(r) for r in (1, 5, 10, 15, 20, 25)], l_values=[4], k_values=[12],
        snr_db=[25.0], beta_values=[0.0],
        source=SourceModel(kind="ar", order=1, coeff_range=(0.5, 1.0)),
        algorithms=["tmsbl", "msbl"],
    )


def _protocol_d() -> ExperimentConfig:
    return ExperimentConfig(
        experiment_id="D",
        n=25, m_over_n=[5.0], l_values=[4], k_values=[14],
        snr_db=[25.0], beta_values=[0.0], orders=[1, 2, 3],
        source=SourceModel(kind="ar", order=1),
        algorithms=["tmsbl", "msbl"],
    )


def _protocol_d_ma() -> ExperimentConfig:
    config = _protocol_d()
    config.experiment_id = "D-ma"
    config.source = SourceModel(kind="ma", order=1)
    return config


def _protocol_e() -> ExperimentConfig:
    return ExperimentConfig(
        experiment_id="E",
        n=25, m_over_n=[5.0], l_values=[4], k_values=[7],
        snr_db=[5.0, 7.5, 10.0, 12.5, 15.0], beta_values=[0.8],
        algorithms=["tsbl", "tmsbl", "msbl"],
    )


def _protocol_f() -> ExperimentConfig:
    return ExperimentConfig(
        experiment_id="F",
        n=25, m_over_n=[5.0, 10.0, 15.0, 20.0], l_values=[4], k_values=[14],
        snr_db=[50.0], beta_values=[0.0, 0.5, 0.9],
        algorithms=["tmsbl", "msbl"],
    )


def _protocol_g() -> ExperimentConfig:
    return ExperimentConfig(
        experiment_id="G",
        n=40, m_over_n=[128 / 40], l_values=[3], k_values=[12],
        snr_db=[None], c_values=[float(c) for c in range(-10, 11)],
        dictionary=DictionaryKind(kind="hadamard_rows", order=128, rows_selected=40),
        source=SourceModel(kind="common_ar1", extreme=True),
        algorithms=["tmsbl", "msbl"],
        include_beta_one=True,
    )


PROTOCOLS = {
    "A": _protocol_a,
    "A-noisy": _protocol_a_noisy,
    "B": _protocol_b,
    "C": _protocol_c,
    "D": _protocol_d,
    "D-ma": _protocol_d_ma,
    "E": _protocol_e,
    "F": _protocol_f,
    "G": _protocol_g,
}


def protocol_config(name: str) -> ExperimentConfig:
    """
    Preset de un protocolo experimental por nombre (A, A-noisy, B, C, D, D-ma, E, F, G).

    Raises:
        KeyError: Si el nombre no existe
    """
    try:
        builder = PROTOCOLS[name]
    except KeyError:
        raise KeyError(f"Protocolo desconocido: {name} (disponibles: {', '.join(PROTOCOLS)})") from None
    config = builder()
    config.jobs = get_default_jobs()
    config.output_dir = get_output_dir()
    return config


def cell_dimensions(config: ExperimentConfig, m_over_n: float) -> tuple:
    """(N, M) de una celda: del diccionario de Hadamard o de n·M/N."""
    if config.dictionary.kind == "hadamard_rows":
        return config.dictionary.rows_selected, config.dictionary.order
    return config.n, int(round(config.n * m_over_n))


def validate_config(config: ExperimentConfig) -> List[str]:
    """
    Valida una configuración completa, incluidas las restricciones entre ejes.

    Returns:
        List[str]: Lista de errores (vacía si la configuración es válida)
    """
    errors = config.validate()
    if errors:
        return errors

    for ratio in config.m_over_n:
        n, m = cell_dimensions(config, ratio)
        for k in config.k_values:
            if k > m:
                errors.append(f"K={k} supera M={m}")
        if m < n:
            errors.append(f"M={m} menor que N={n}")

    for alg, overrides in config.solver_overrides.items():
        try:
            opts = solver_options(alg, None, overrides)
        except Exception as exc:
            errors.append(f"solver_overrides[{alg}]: {exc}")
            continue
        errors.extend(f"solver_overrides[{alg}]: {e}" for e in opts.validate())

    if config.source.kind == "common_ar1" and not config.c_values:
        for beta in config.beta_values:
            if abs(beta) > 1.0 or (abs(beta) == 1.0 and not config.source.extreme):
                errors.append(f"β={beta} fuera de rango")
    return errors
