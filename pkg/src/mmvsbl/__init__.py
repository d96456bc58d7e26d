"""
mmvsbl - Aprendizaje Bayesiano Disperso para MMV con correlación temporal

Recuperación de matrices fila-dispersas X a partir de Y = ΦX + V cuando cada
fila no nula es una secuencia temporalmente correlacionada, y banco Monte
Carlo para comparar los algoritmos.

Arquitectura:
- Modelo de bloques (coste, momentos a posteriori, estimación MAP)
- Solvers: T-SBL (exacto, EM), T-MSBL (aproximado, sin objetos NL×ML), MSBL
- Generación de datos sembrada por (semilla maestra, celda, ensayo)
- Métricas y oráculos teóricos
- Ejecutor de experimentos, CSV y gráficas SVG
"""

__version__ = "1.0.0"
__description__ = "Sparse Bayesian learning para MMV con fuentes temporalmente correlacionadas"

# Importaciones principales del paquete
from .models import (
    ExperimentConfig, Hyperparams, MmvProblem, SolverResult, TmsblOptions, TsblOptions,
)
from .tsbl import tsbl_solve
from .tmsbl import tmsbl_solve
from .msbl import msbl_solve

# Configuración de logging básica
import logging

logging.basicConfig(
    level=logging.INFO,
    format='%(asctime)s - %(name)s - %(levelname)s - %(message)s'
)

logger = logging.getLogger(__name__)

__all__ = [
    "ExperimentConfig", "Hyperparams", "MmvProblem", "SolverResult", "TmsblOptions",
    "TsblOptions", "tsbl_solve", "tmsbl_solve", "msbl_solve",
]
