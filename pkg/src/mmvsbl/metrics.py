"""
Métricas y Oráculos Teóricos

Métricas de rendimiento de los experimentos:
- Tasa de fallo por ensayo (soporte recuperado ≠ soporte real)
- Error cuadrático medio relativo
- Número de condición de la submatriz de fuentes

Oráculos usados en los tests y en el comando ``verify``:
- γ̂ de un punto estacionario con soporte dado (solución básica factible)
- Error de la aproximación de Kronecker de T-MSBL
- Comprobación de mínimo global (soporte más disperso) y cota ‖γ̂‖₀ ≤ NL
- Gradiente del coste por diferencias centrales
"""

import logging
import math
from typing import Iterable, Optional, Sequence

import numpy as np

from .block_model import cost
from .exceptions import InconsistentSystemError, InvalidProblemError
from .linalg import spd_inverse
from .models import Hyperparams, MmvProblem, SolverResult

logger = logging.getLogger(__name__)

ROW_NONZERO_RTOL = 1e-8
LEMMA3_RESIDUAL_TOL = 1e-8
APPROX_MAX_DIM = 200
FD_STEP_SCALE = 1e-5

REGIMES = ("noiseless", "noisy")


def nonzero_rows(x_hat: np.ndarray, rtol: float = ROW_NONZERO_RTOL) -> np.ndarray:
    """Índices de filas con norma > rtol · (norma máxima de fila)."""
    norms = np.linalg.norm(x_hat, axis=1)
    peak = float(norms.max()) if norms.size else 0.0
    if peak == 0.0:
        return np.array([], dtype=int)
    return np.flatnonzero(norms > rtol * peak)


def is_failure(x_hat: np.ndarray, true_support: Iterable[int], k: int, regime: str) -> bool:
    """
    Determina si un ensayo ha fallado.

    Args:
        x_hat: Estimación M×L
        true_support: Soporte real
        k: Número de fuentes (= |true_support|)
        regime: ``noiseless`` (filas no nulas) o ``noisy`` (K filas de mayor norma)

    Returns:
        bool: True si el soporte estimado difiere del real
    """
    truth = set(int(i) for i in true_support)
    if regime == "noiseless":
        estimated = set(int(i) for i in nonzero_rows(x_hat))
    elif regime == "noisy":
        norms = np.linalg.norm(x_hat, axis=1)
        estimated = set(int(i) for i in np.argsort(-norms, kind="stable")[:k])
    else:
        raise ValueError(f"Régimen desconocido: {regime} (use {REGIMES})")
    return estimated != truth


def mse(x_hat: np.ndarray, x_gen: np.ndarray) -> float:
    """‖X̂ − X_gen‖²_F / ‖X_gen‖²_F."""
    denom = float(np.sum(x_gen * x_gen))
    if denom == 0.0:
        raise InvalidProblemError("MSE indefinido para X_gen nula")
    diff = x_hat - x_gen
    return float(np.sum(diff * diff)) / denom


def source_condition_number(x_gen: np.ndarray, support: Sequence[int]) -> float:
    """
    σ_max/σ_min de la submatriz K×L de filas fuente; ∞ si no tiene rango completo.
    """
    support = np.asarray(support, dtype=int)
    if support.size < 1:
        raise InvalidProblemError("El soporte debe tener al menos un índice")
    sub = x_gen[support]
    singular = np.linalg.svd(sub, compute_uv=False)
    if np.linalg.matrix_rank(sub) < min(sub.shape) or singular[-1] == 0.0:
        return math.inf
    return float(singular[0] / singular[-1])


def lemma3_gamma(phi: np.ndarray, y_mat: np.ndarray, support: Sequence[int],
                 b_mat: np.ndarray) -> np.ndarray:
    """
    γ̂ de un punto estacionario soportado en ``support``.

    Resuelve Φ_S X̃ = Y por mínimos cuadrados y devuelve γ̂_(i) = X̃_i B⁻¹ X̃_iᵀ / L.

    Raises:
        InvalidProblemError: Si K > N o Φ_S no tiene rango de columnas completo
        InconsistentSystemError: Si el residuo relativo supera 1e-8
    """
    support = np.asarray(support, dtype=int)
    phi_s = phi[:, support]
    n, k = phi_s.shape
    if k > n:
        raise InvalidProblemError(f"|S|={k} supera N={n}")
    if np.linalg.matrix_rank(phi_s) < k:
        raise InvalidProblemError("Φ restringido al soporte no tiene rango completo")

    x_tilde, *_ = np.linalg.lstsq(phi_s, y_mat, rcond=None)
    residual = float(np.linalg.norm(phi_s @ x_tilde - y_mat))
    scale = max(float(np.linalg.norm(y_mat)), 1.0)
    if residual > LEMMA3_RESIDUAL_TOL * scale:
        raise InconsistentSystemError(f"Residuo {residual:.3e} con el soporte dado")

    b_inv = spd_inverse(b_mat, "B")
    return np.einsum('is,st,it->i', x_tilde, b_inv, x_tilde) / y_mat.shape[1]


def approx_error(phi: np.ndarray, gamma: np.ndarray, b_mat: np.ndarray, lam: float) -> float:
    """
    Error relativo de Frobenius de (λI + (ΦΓΦᵀ) ⊗ B)⁻¹ ≈ (λI + ΦΓΦᵀ)⁻¹ ⊗ B⁻¹.

    Construcción densa; solo para NL ≤ 200.
    """
    n = phi.shape[0]
    l = b_mat.shape[0]
    if n * l > APPROX_MAX_DIM:
        raise InvalidProblemError(f"NL={n * l} supera {APPROX_MAX_DIM}")
    phi_gamma_phi = (phi * gamma) @ phi.T
    exact = np.linalg.inv(lam * np.eye(n * l) + np.kron(phi_gamma_phi, b_mat))
    approx = np.kron(np.linalg.inv(lam * np.eye(n) + phi_gamma_phi), np.linalg.inv(b_mat))
    return float(np.linalg.norm(exact - approx) / np.linalg.norm(exact))


def global_min_support_check(phi: np.ndarray, y_mat: np.ndarray, solver_result: SolverResult,
                             true_support: Sequence[int]) -> bool:
    """
    True si el solver alcanzó el soporte más disperso (único mínimo global).

    Solo aplicable sin ruido y con K0 < (N + L)/2.
    """
    n, l = y_mat.shape
    k0 = len(true_support)
    if not k0 < (n + l) / 2:
        raise InvalidProblemError(f"K0={k0} no cumple K0 < (N+L)/2 = {(n + l) / 2}")
    if solver_result.x_hat.shape != (phi.shape[1], l):
        raise InvalidProblemError("X̂ no encaja con Φ e Y")
    estimated = set(int(i) for i in nonzero_rows(solver_result.x_hat))
    return estimated == set(int(i) for i in true_support)


def gamma_card_within_bound(result: SolverResult, n: int, l: int) -> bool:
    """‖γ̂‖₀ ≤ NL para resultados convergidos (los no convergidos no cuentan)."""
    return (not result.converged) or result.gamma_card <= n * l


def cost_gradient_fd(problem: MmvProblem, hyper: Hyperparams,
                     indices: Optional[Sequence[int]] = None) -> np.ndarray:
    """
    Gradiente del coste respecto a γ por diferencias centrales.

    Paso h_i = 1e-5 · max(γ_i, 1).

    Args:
        problem: Problema MMV
        hyper: Punto de evaluación
        indices: Componentes a derivar (todas por defecto)

    Returns:
        np.ndarray: Componentes del gradiente en el orden de ``indices``
    """
    indices = np.arange(hyper.m) if indices is None else np.asarray(indices, dtype=int)
    grad = np.empty(indices.size)
    for pos, i in enumerate(indices):
        step = FD_STEP_SCALE * max(float(hyper.gamma[i]), 1.0)
        plus = hyper.gamma.copy()
        minus = hyper.gamma.copy()
        plus[i] += step
        minus[i] = max(minus[i] - step, 0.0)
        width = plus[i] - minus[i]
        grad[pos] = (cost(problem, hyper.with_updates(gamma=plus))
                     - cost(problem, hyper.with_updates(gamma=minus))) / width
    return grad
