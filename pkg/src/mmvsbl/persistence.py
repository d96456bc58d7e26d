"""
Módulo de Persistencia Local - Configuraciones de experimento y problemas

Funciones principales:
- save_config() / load_config(): ExperimentConfig como JSON legible
- create_config_template(): plantilla JSON con instrucciones para editar a mano
- save_problem() / load_problem(): un MmvProblem en un contenedor .npz con
  una cabecera JSON pequeña (N, M, L, K, snr_db, seed, versión)

Como en el resto del paquete, las funciones de persistencia registran los
errores en el logger y devuelven False/None en lugar de lanzar excepciones.
"""

import json
import logging
import math
from pathlib import Path
from typing import Optional, Union

import numpy as np

from .config import default_experiment_config
from .models import ExperimentConfig, GroundTruth, MmvProblem

logger = logging.getLogger(__name__)

DEFAULT_CONFIG_FILENAME = "experiment.json"
TEMPLATE_FILENAME = "experiment_template.json"
PROBLEM_FORMAT_VERSION = 1

PathLike = Union[str, Path]


# ═══════════════════════════════════════════════════════════
# CONFIGURACIONES
# ═══════════════════════════════════════════════════════════

def save_config(config: ExperimentConfig, filepath: Optional[PathLike] = None) -> bool:
    """
    Guarda una configuración de experimento en JSON (indent=4, UTF-8).

    Returns:
        bool: True si se guardó, False si hubo error (registrado en el log)
    """
    filepath = Path(filepath) if filepath is not None else Path.cwd() / DEFAULT_CONFIG_FILENAME
    try:
        filepath.parent.mkdir(parents=True, exist_ok=True)
        with open(filepath, 'w', encoding='utf-8') as f:
            json.dump(config.to_dict(), f, indent=4, ensure_ascii=False)
        logger.info(f"Configuración guardada en: {filepath}")
        return True
    except (IOError, OSError) as e:
        logger.error(f"Error de archivo al guardar configuración en {filepath}: {e}")
        return False
    except (TypeError, ValueError) as e:
        logger.error(f"Error de serialización JSON: {e}")
        return False


def load_config(filepath: PathLike) -> Optional[ExperimentConfig]:
    """
    Carga una configuración desde JSON.

    Las claves ausentes toman su valor por defecto y las que empiezan por
    ``_`` (instrucciones de plantilla) se ignoran.

    Returns:
        Optional[ExperimentConfig]: La configuración, o None si el fichero no
        existe o no es válido
    """
    filepath = Path(filepath)
    if not filepath.exists():
        logger.error(f"Archivo de configuración no encontrado: {filepath}")
        return None
    try:
        with open(filepath, 'r', encoding='utf-8') as f:
            data = json.load(f)
        data = {k: v for k, v in data.items() if not k.startswith('_')}
        config = ExperimentConfig.from_dict(data)
        logger.info(f"Configuración cargada desde: {filepath}")
        return config
    except (IOError, OSError) as e:
        logger.error(f"Error de archivo al cargar configuración desde {filepath}: {e}")
    except (json.JSONDecodeError, ValueError, TypeError, AttributeError) as e:
        logger.error(f"Error de formato en {filepath}: {e}")
    return None


def create_config_template(filepath: Optional[PathLike] = None) -> bool:
    """
    Crea una plantilla JSON con la configuración por defecto e instrucciones.

    Returns:
        bool: True si la plantilla se creó
    """
    filepath = Path(filepath) if filepath is not None else Path.cwd() / TEMPLATE_FILENAME
    template = default_experiment_config().to_dict()
    template["_INSTRUCTIONS"] = {
        "description": "Plantilla de experimento Monte Carlo",
        "usage": "1. Ajusta los ejes de la rejilla, 2. Guarda el archivo, 3. run --config <archivo>",
        "notes": "Las claves que empiezan por '_' se ignoran al cargar. snr_db null = sin ruido.",
    }
    template["_FIELD_EXAMPLES"] = {
        "algorithms": "Subconjunto de ['tsbl', 'tmsbl', 'msbl']",
        "snr_db": "Ejemplos: [null], [25], [5, 10, 15]",
        "c_values": "Si no está vacío sustituye a beta_values: β = sign(C)(1 − 10^−|C|)",
        "source.kind": "Opciones: 'common_ar1', 'ar', 'ma'",
        "dictionary.kind": "Opciones: 'unit_hypersphere', 'hadamard_rows' (con order y rows_selected)",
        "solver_overrides": "Ej: {\"tmsbl\": {\"lambda_policy\": {\"kind\": \"fixed\", \"value\": 0.01}}}",
    }
    try:
        filepath.parent.mkdir(parents=True, exist_ok=True)
        with open(filepath, 'w', encoding='utf-8') as f:
            json.dump(template, f, indent=4, ensure_ascii=False)
        logger.info(f"Plantilla de experimento creada en: {filepath}")
        return True
    except (IOError, OSError) as e:
        logger.error(f"Error al crear plantilla en {filepath}: {e}")
        return False


# ═══════════════════════════════════════════════════════════
# PROBLEMAS
# ═══════════════════════════════════════════════════════════

def save_problem(problem: MmvProblem, filepath: PathLike, seed: Optional[int] = None) -> bool:
    """
    Guarda un problema en un .npz (phi, y_mat, x_gen, support, header).

    Returns:
        bool: True si se guardó
    """
    filepath = Path(filepath)
    truth = problem.truth
    header = {
        'version': PROBLEM_FORMAT_VERSION,
        'n': problem.n,
        'm': problem.m,
        'l': problem.l,
        'k': truth.k if truth is not None else None,
        'snr_db': None if truth is None or truth.noiseless else truth.snr_db,
        'seed': seed,
    }
    arrays = {
        'phi': problem.phi,
        'y_mat': problem.y_mat,
        'header': np.array(json.dumps(header)),
    }
    if truth is not None:
        arrays['x_gen'] = truth.x_gen
        arrays['support'] = truth.support
    try:
        filepath.parent.mkdir(parents=True, exist_ok=True)
        with open(filepath, 'wb') as f:
            np.savez(f, **arrays)
        logger.info(f"Problema guardado en: {filepath}")
        return True
    except (IOError, OSError) as e:
        logger.error(f"Error de archivo al guardar problema en {filepath}: {e}")
        return False


def load_problem(filepath: PathLike) -> Optional[MmvProblem]:
    """
    Carga un problema guardado con save_problem.

    Returns:
        Optional[MmvProblem]: El problema, o None si no se pudo leer
    """
    filepath = Path(filepath)
    if not filepath.exists():
        logger.error(f"Archivo de problema no encontrado: {filepath}")
        return None
    try:
        with np.load(filepath, allow_pickle=False) as data:
            header = json.loads(str(data['header']))
            if header.get('version') != PROBLEM_FORMAT_VERSION:
                logger.error(f"Versión de formato no soportada: {header.get('version')}")
                return None
            truth = None
            if 'x_gen' in data.files:
                snr = header.get('snr_db')
                truth = GroundTruth(data['x_gen'], data['support'], math.inf if snr is None else float(snr))
            problem = MmvProblem(data['phi'], data['y_mat'], truth)
        if (problem.n, problem.m, problem.l) != (header['n'], header['m'], header['l']):
            logger.error(f"Cabecera incoherente con las matrices en {filepath}")
            return None
        logger.info(f"Problema cargado desde: {filepath}")
        return problem
    except (IOError, OSError) as e:
        logger.error(f"Error de archivo al cargar problema desde {filepath}: {e}")
    except (KeyError, ValueError, json.JSONDecodeError) as e:
        logger.error(f"Contenido inválido en {filepath}: {e}")
    return None


def read_problem_header(filepath: PathLike) -> dict:
    """Cabecera de un problema guardado sin cargar las matrices; {} si hay error."""
    try:
        with np.load(Path(filepath), allow_pickle=False) as data:
            return json.loads(str(data['header']))
    except (IOError, OSError, KeyError, ValueError):
        return {}
