"""
Álgebra lineal simétrica definida positiva (SPD).

Todas las resoluciones SPD del paquete pasan por aquí: factorización de
Cholesky (scipy.linalg.cho_factor) con un único reintento añadiendo
``1e-10 · traza / dim`` a la diagonal si la primera factorización falla.
Nunca se forma una inversa explícita salvo en los oráculos de test.
"""

import logging
from dataclasses import dataclass

import numpy as np
from scipy.linalg import LinAlgError, cho_factor, cho_solve

from .exceptions import NotPositiveDefiniteError

logger = logging.getLogger(__name__)

JITTER_SCALE = 1e-10


@dataclass(frozen=True)
class SpdFactor:
    """Factor de Cholesky inferior de una matriz SPD y el jitter aplicado."""

    factor: np.ndarray
    jitter: float = 0.0

    @property
    def dim(self) -> int:
        return self.factor.shape[0]

    def solve(self, rhs: np.ndarray) -> np.ndarray:
        """Resuelve A·x = rhs."""
        return cho_solve((self.factor, True), rhs, check_finite=False)

    def logdet(self) -> float:
        """log|A| a partir de la diagonal del factor."""
        return float(2.0 * np.sum(np.log(np.diag(self.factor))))

    def quad(self, vec: np.ndarray) -> float:
        """vᵀ A⁻¹ v."""
        return float(vec @ self.solve(vec))


def spd_factor(matrix: np.ndarray, what: str = "matriz") -> SpdFactor:
    """
    Factoriza una matriz SPD con un reintento con jitter.

    Args:
        matrix: Matriz cuadrada simétrica
        what: Nombre de la matriz para los mensajes de log y error

    Returns:
        SpdFactor: Factor de Cholesky inferior

    Raises:
        NotPositiveDefiniteError: Si la matriz no es finita o sigue sin
            ser definida positiva tras el reintento
    """
    matrix = np.asarray(matrix, dtype=float)
    if matrix.ndim != 2 or matrix.shape[0] != matrix.shape[1]:
        raise NotPositiveDefiniteError(f"{what}: se esperaba una matriz cuadrada, recibido {matrix.shape}")
    if not np.all(np.isfinite(matrix)):
        raise NotPositiveDefiniteError(f"{what}: contiene valores no finitos")

    try:
        c, _ = cho_factor(matrix, lower=True, check_finite=False)
        return SpdFactor(np.tril(c))
    except LinAlgError:
        pass

    dim = matrix.shape[0]
    jitter = JITTER_SCALE * float(np.trace(matrix)) / dim
    if jitter <= 0.0:
        raise NotPositiveDefiniteError(f"{what}: traza no positiva, no se puede regularizar")

    logger.warning(f"{what}: Cholesky falló, reintentando con jitter {jitter:.3e}")
    try:
        c, _ = cho_factor(matrix + jitter * np.eye(dim), lower=True, check_finite=False)
    except LinAlgError as exc:
        raise NotPositiveDefiniteError(f"{what}: no es definida positiva (incluso con jitter)") from exc
    return SpdFactor(np.tril(c), jitter)


def symmetrize(matrix: np.ndarray) -> np.ndarray:
    """(A + Aᵀ)/2."""
    return 0.5 * (matrix + matrix.T)


def spd_inverse(matrix: np.ndarray, what: str = "matriz") -> np.ndarray:
    """Inversa simétrica de una matriz SPD pequeña (L×L) vía Cholesky."""
    fac = spd_factor(matrix, what)
    return symmetrize(fac.solve(np.eye(fac.dim)))
