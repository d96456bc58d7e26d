"""
Modelo por Bloques - Diccionario expandido, coste y momentos a posteriori

Este módulo implementa las operaciones compartidas por todos los solvers
sobre el modelo SMV por bloques y = D·x + v con D = Φ ⊗ I_L y
x = vec(Xᵀ):

- Construcción del diccionario expandido D (con límite de tamaño)
- Covarianza de las medidas Σ_y = λI + DΣ0Dᵀ = λI + (ΦΓΦᵀ) ⊗ B
- Función de coste L(Θ) = yᵀΣ_y⁻¹y + log|Σ_y|
- Media a posteriori y bloques diagonales de Σ_x
- Estimación MAP de X

Principios de diseño:
- Funciones puras sobre valores inmutables
- Toda resolución SPD pasa por linalg.spd_factor (Cholesky con reintento)
- Σ_x completa nunca se construye; solo sus M bloques diagonales L×L
"""

import logging
from typing import Optional, Tuple

import numpy as np
from scipy.linalg import toeplitz

from .config import get_kron_cap
from .exceptions import DimensionOverflowError, InvalidProblemError
from .linalg import SpdFactor, spd_factor, symmetrize
from .models import Hyperparams, MmvProblem, PosteriorMoments

logger = logging.getLogger(__name__)


def _check_compatible(problem: MmvProblem, hyper: Hyperparams) -> None:
    if hyper.m != problem.m or hyper.l != problem.l:
        raise InvalidProblemError(
            f"Hiperparámetros de tamaño (M={hyper.m}, L={hyper.l}) para un problema "
            f"(M={problem.m}, L={problem.l})"
        )
    hyper.check()


def build_block_dictionary(phi: np.ndarray, l: int, cap: Optional[int] = None) -> np.ndarray:
    """
    Construye D = Φ ⊗ I_L.

    La entrada ((n−1)L+s, (m−1)L+t) de D vale Φ[n, m] si s = t y 0 en otro caso.

    Args:
        phi: Diccionario N×M
        l: Número de vectores de medida L
        cap: Máximo número de entradas NL·ML (por defecto MMVSBL_KRON_CAP)

    Returns:
        np.ndarray: Matriz NL×ML

    Raises:
        InvalidProblemError: Si l < 1
        DimensionOverflowError: Si NL·ML supera el límite
    """
    if l < 1:
        raise InvalidProblemError(f"L debe ser ≥ 1, recibido {l}")
    phi = np.asarray(phi, dtype=float)
    n, m = phi.shape
    cap = get_kron_cap() if cap is None else cap
    entries = (n * l) * (m * l)
    if entries > cap:
        raise DimensionOverflowError(
            f"Φ ⊗ I_L tendría {entries} entradas (límite {cap}); use T-MSBL para este tamaño"
        )
    return np.kron(phi, np.eye(l))


def measurement_covariance(problem: MmvProblem, hyper: Hyperparams) -> np.ndarray:
    """Σ_y = λI_NL + (ΦΓΦᵀ) ⊗ B, matriz NL×NL."""
    phi_gamma_phi = (problem.phi * hyper.gamma) @ problem.phi.T
    sigma_y = np.kron(phi_gamma_phi, hyper.b_mat)
    sigma_y[np.diag_indices_from(sigma_y)] += hyper.lam
    return symmetrize(sigma_y)


def _factor_sigma_y(problem: MmvProblem, hyper: Hyperparams) -> SpdFactor:
    return spd_factor(measurement_covariance(problem, hyper), "Σ_y")


def cost(problem: MmvProblem, hyper: Hyperparams) -> float:
    """
    Coste efectivo L(Θ) = yᵀΣ_y⁻¹y + log|Σ_y| con y = vec(Yᵀ).

    Args:
        problem: Problema MMV
        hyper: Hiperparámetros Θ

    Returns:
        float: Valor del coste

    Raises:
        NotPositiveDefiniteError: Si Σ_y no es definida positiva
    """
    _check_compatible(problem, hyper)
    fac = _factor_sigma_y(problem, hyper)
    return fac.quad(problem.y_vec) + fac.logdet()


def _mean_from_factor(problem: MmvProblem, hyper: Hyperparams, fac: SpdFactor) -> np.ndarray:
    # Σ0 Dᵀ Σ_y⁻¹ y, fila i = γ_i (ΦᵀZ)_i B
    z_mat = fac.solve(problem.y_vec).reshape(problem.n, problem.l)
    return (hyper.gamma[:, None] * (problem.phi.T @ z_mat)) @ hyper.b_mat


def posterior_moments(problem: MmvProblem, hyper: Hyperparams) -> PosteriorMoments:
    """
    Media a posteriori μ_x y bloques diagonales Σ_x^i.

    Σ_x^i = γ_i B − γ_i² B (D_iᵀ Σ_y⁻¹ D_i) B, evaluado solo sobre los índices
    con γ_i > 0; los demás bloques y filas de la media son exactamente cero.

    Raises:
        NotPositiveDefiniteError: Si Σ_y es singular
        DimensionOverflowError: Si el diccionario expandido activo excede el límite
    """
    _check_compatible(problem, hyper)
    m, l, n = problem.m, problem.l, problem.n
    fac = _factor_sigma_y(problem, hyper)
    mu = _mean_from_factor(problem, hyper, fac)

    blocks = np.zeros((m, l, l))
    active = np.flatnonzero(hyper.gamma > 0.0)
    if active.size:
        phi_a = problem.phi[:, active]
        d_active = build_block_dictionary(phi_a, l)
        w4 = fac.solve(d_active).reshape(n, l, active.size, l)
        q = np.einsum('ni,nsit->ist', phi_a, w4)
        q = 0.5 * (q + q.transpose(0, 2, 1))
        b = hyper.b_mat
        g = hyper.gamma[active]
        bqb = np.einsum('st,itu,uv->isv', b, q, b)
        blocks[active] = g[:, None, None] * b[None] - (g ** 2)[:, None, None] * bqb
        blocks[active] = 0.5 * (blocks[active] + blocks[active].transpose(0, 2, 1))

    return PosteriorMoments(mu_x=mu.ravel(), sigma_x_blocks=blocks)


def map_estimate(problem: MmvProblem, hyper: Hyperparams) -> np.ndarray:
    """
    Estimación MAP X* = Σ0Dᵀ(λI + DΣ0Dᵀ)⁻¹y reordenada como matriz M×L.

    Solo resuelve un sistema NL×NL, sin construir D; las filas con γ_i = 0
    salen exactamente nulas.
    """
    _check_compatible(problem, hyper)
    return _mean_from_factor(problem, hyper, _factor_sigma_y(problem, hyper))


def reduced_posterior(phi: np.ndarray, y_mat: np.ndarray, gamma: np.ndarray,
                      lam: float) -> Tuple[np.ndarray, np.ndarray]:
    """
    Media y diagonal de la covarianza a posteriori en el espacio original N×M.

    X = ΓΦᵀ(λI + ΦΓΦᵀ)⁻¹Y y (Ξ_x)_ii = γ_i − γ_i² φ_iᵀ(λI + ΦΓΦᵀ)⁻¹φ_i,
    evaluados solo sobre las columnas con γ_i > 0. Ningún objeto de tamaño
    NL×ML interviene.

    Returns:
        Tuple[np.ndarray, np.ndarray]: X (M×L) y diag(Ξ_x) (longitud M)
    """
    m = phi.shape[1]
    x_cur = np.zeros((m, y_mat.shape[1]))
    xi_diag = np.zeros(m)
    active = np.flatnonzero(gamma > 0.0)
    if active.size == 0:
        return x_cur, xi_diag

    phi_a = phi[:, active]
    g = gamma[active]
    sigma = symmetrize((phi_a * g) @ phi_a.T)
    sigma[np.diag_indices_from(sigma)] += lam
    fac = spd_factor(sigma, "λI + ΦΓΦᵀ")

    x_cur[active] = g[:, None] * (phi_a.T @ fac.solve(y_mat))
    quad = np.sum(phi_a * fac.solve(phi_a), axis=0)
    xi_diag[active] = np.maximum(g - g * g * quad, 0.0)
    return x_cur, xi_diag


def initial_lambda(y_mat: np.ndarray, scale: float, floor: float) -> float:
    """λ inicial aprendido: scale · media(diag(YYᵀ)) / N, con suelo."""
    n = y_mat.shape[0]
    energy = float(np.mean(np.sum(y_mat * y_mat, axis=1)))
    return max(scale * energy / n, floor)


def ar1_toeplitz(beta: float, l: int) -> np.ndarray:
    """
    B de un AR(1) con coeficiente β: B[s, t] = β^|s−t|.

    Es definida positiva para |β| < 1; se usa como B inicial o de referencia.
    """
    if l < 1:
        raise InvalidProblemError(f"L debe ser ≥ 1, recibido {l}")
    if not abs(beta) < 1.0:
        raise InvalidProblemError(f"|β| debe ser < 1, recibido {beta}")
    return toeplitz(float(beta) ** np.arange(l))
