"""
T-MSBL - Versión rápida de T-SBL en el espacio original del problema

Aproxima (λI + (ΦΓΦᵀ) ⊗ B)⁻¹ por (λI + ΦΓΦᵀ)⁻¹ ⊗ B⁻¹, con lo que cada
iteración trabaja con matrices N×N y L×L:

    X  ← ΓΦᵀ(λI + ΦΓΦᵀ)⁻¹Y
    Ξ  ← diag(γ_i − γ_i² φ_iᵀ(λI + ΦΓΦᵀ)⁻¹φ_i)
    B  ← Σ_i X_iᵀX_i/γ_i (+ ηI), normalizada en norma de Frobenius
    γ_i ← X_i B⁻¹ X_iᵀ / L + Ξ_ii
    λ  ← ‖Y − ΦX‖²_F/(NL) + (λ/N)·Tr[ΦΓΦᵀ(λI + ΦΓΦᵀ)⁻¹]

Con B fijada a la identidad el algoritmo coincide iteración a iteración
con MSBL.
"""

import logging
from typing import Optional

import numpy as np

from .block_model import initial_lambda, reduced_posterior
from .config import INITIAL_LAMBDA_SCALE
from .exceptions import AllPrunedError, SingularBError
from .linalg import spd_inverse, symmetrize
from .models import (
    BPolicy, Hyperparams, IterationCallback, IterationState, MmvProblem,
    SolverResult, TmsblOptions,
)

logger = logging.getLogger(__name__)

SINGULAR_RTOL = 1e-12
FALLBACK_ETA_SCALE = 1e-6


def tmsbl_gamma_update(x_cur: np.ndarray, xi_diag: np.ndarray, b_inv: np.ndarray) -> np.ndarray:
    """
    γ_i = X_i B⁻¹ X_iᵀ / L + (Ξ_x)_ii.

    Args:
        x_cur: Estimación actual de X (M×L)
        xi_diag: Diagonal de Ξ_x (longitud M)
        b_inv: B⁻¹ (L×L, SPD)

    Returns:
        np.ndarray: γ actualizado (longitud M)
    """
    l = x_cur.shape[1]
    mahalanobis = np.einsum('is,st,it->i', x_cur, b_inv, x_cur)
    return np.maximum(mahalanobis / l + xi_diag, 0.0)


def accumulate_b(x_cur: np.ndarray, gamma: np.ndarray) -> np.ndarray:
    """B̃ = Σ_{i: γ_i > 0} X_iᵀX_i / γ_i (sin regularizar ni normalizar)."""
    active = np.flatnonzero(gamma > 0.0)
    if active.size == 0:
        raise AllPrunedError("estimate_b necesita al menos un γ_i > 0")
    rows = x_cur[active]
    return symmetrize((rows / gamma[active, None]).T @ rows)


def estimate_b(x_cur: np.ndarray, gamma: np.ndarray, policy: BPolicy,
               check_invertible: bool = False) -> np.ndarray:
    """
    Estima B normalizada (‖B‖_F = 1) según la política.

    Args:
        x_cur: Estimación actual de X (M×L)
        gamma: γ actual; solo cuentan los índices con γ_i > 0
        policy: ``plain``, ``regularized`` (B̃ + ηI) o ``pinned_identity``
        check_invertible: Si True, una B̃ plana singular lanza SingularBError

    Returns:
        np.ndarray: B (L×L), simétrica

    Raises:
        AllPrunedError: Si no hay ningún índice activo
        SingularBError: Si B̃ es nula, o singular con check_invertible
    """
    l = x_cur.shape[1]
    if policy.kind == "pinned_identity":
        return np.eye(l)

    b_tilde = accumulate_b(x_cur, gamma)
    if policy.kind == "regularized":
        b_tilde = b_tilde + policy.eta * np.eye(l)

    norm = float(np.linalg.norm(b_tilde, 'fro'))
    if norm == 0.0:
        raise SingularBError("B̃ es la matriz nula")
    if check_invertible and policy.kind == "plain":
        eig = np.linalg.eigvalsh(b_tilde)
        if eig[0] <= SINGULAR_RTOL * eig[-1]:
            raise SingularBError(f"B̃ singular (autovalores extremos {eig[0]:.3e}, {eig[-1]:.3e})")
    return symmetrize(b_tilde / norm)


def tmsbl_lambda_update(problem: MmvProblem, x_cur: np.ndarray, gamma: np.ndarray,
                        lambda_prev: float, low_snr_mod: bool = False) -> float:
    """
    Regla simplificada de λ, sin suelo.

    λ = ‖Y − ΦX‖²_F/(NL) + (λ_prev/N)·Tr[ΦΓΦᵀ(λ_prev I + ΦΓΦᵀ)⁻¹].

    Con ``low_snr_mod`` se anulan los elementos fuera de la diagonal de ΦΓΦᵀ
    en el término de traza (el residuo no cambia).
    """
    n, l = problem.n, problem.l
    residual = problem.y_mat - problem.phi @ x_cur
    phi_gamma_phi = (problem.phi * gamma) @ problem.phi.T
    if low_snr_mod:
        spectrum = np.diag(phi_gamma_phi)
    else:
        spectrum = np.linalg.eigvalsh(symmetrize(phi_gamma_phi))
    spectrum = np.maximum(spectrum, 0.0)
    trace = float(np.sum(spectrum / (lambda_prev + spectrum)))
    return float(np.sum(residual * residual)) / (n * l) + lambda_prev * trace / n


def _fallback_b(x_cur: np.ndarray, gamma: np.ndarray) -> np.ndarray:
    l = x_cur.shape[1]
    trace = float(np.trace(accumulate_b(x_cur, gamma)))
    eta = FALLBACK_ETA_SCALE * trace / l if trace > 0.0 else 1.0
    return estimate_b(x_cur, gamma, BPolicy.regularized(eta))


def tmsbl_solve(problem: MmvProblem, opts: Optional[TmsblOptions] = None,
                callback: Optional[IterationCallback] = None) -> SolverResult:
    """
    Ejecuta T-MSBL hasta convergencia o max_iters.

    Orden dentro de cada iteración: X, Ξ, B, γ, λ (todo con el Γ anterior),
    después poda y criterio max |Δγ| < gamma_tol. Si la B̃ plana es singular
    se reintenta con la regla regularizada y se anota un aviso. Con
    ``b_identity_switch`` B queda fijada a I en cuanto hay menos de N índices
    activos.

    Args:
        problem: Problema MMV
        opts: Opciones (por defecto TmsblOptions())
        callback: Función opcional llamada con un IterationState por iteración

    Returns:
        SolverResult: X̂ = ΓΦᵀ(λI + ΦΓΦᵀ)⁻¹Y con los hiperparámetros finales
    """
    opts = (opts or TmsblOptions()).check()
    n, m, l = problem.n, problem.m, problem.l
    phi, y_mat = problem.phi, problem.y_mat

    if opts.lambda_policy.is_learned:
        lam = initial_lambda(y_mat, INITIAL_LAMBDA_SCALE, opts.lambda_floor)
    else:
        lam = opts.lambda_policy.value
    gamma = np.full(m, float(opts.init_gamma))
    b_mat = np.eye(l)
    b_pinned = opts.b_policy.kind == "pinned_identity"

    warnings = []
    converged = False
    iterations = 0

    for iterations in range(1, opts.max_iters + 1):
        if not np.any(gamma > opts.prune_thresh):
            raise AllPrunedError("Todos los γ_i están por debajo del umbral de poda")

        x_cur, xi_diag = reduced_posterior(phi, y_mat, gamma, lam)

        if b_pinned:
            b_mat = np.eye(l)
        else:
            try:
                b_mat = estimate_b(x_cur, gamma, opts.b_policy, check_invertible=True)
            except SingularBError as exc:
                message = f"iteración {iterations}: {exc}; se usa B regularizada"
                logger.warning(f"T-MSBL {message}")
                warnings.append(message)
                b_mat = _fallback_b(x_cur, gamma)

        new_gamma = tmsbl_gamma_update(x_cur, xi_diag, spd_inverse(b_mat, "B"))
        if opts.lambda_policy.is_learned:
            lam = max(tmsbl_lambda_update(problem, x_cur, gamma, lam, opts.low_snr_lambda_mod),
                      opts.lambda_floor)

        new_gamma[new_gamma < opts.prune_thresh] = 0.0
        active = np.flatnonzero(new_gamma)
        if opts.b_identity_switch and not b_pinned and active.size < n:
            logger.debug(f"T-MSBL: B fijada a la identidad en la iteración {iterations}")
            b_pinned = True

        delta = float(np.max(np.abs(new_gamma - gamma)))
        gamma = new_gamma

        logger.debug(f"T-MSBL it={iterations} activos={active.size} max|Δγ|={delta:.3e} λ={lam:.3e}")
        if callback is not None:
            callback(IterationState(iterations, gamma.copy(), x_cur, lam, b_mat.copy(), active.copy()))

        if active.size == 0 or delta < opts.gamma_tol:
            converged = True
            break

    x_hat, _ = reduced_posterior(phi, y_mat, gamma, lam)
    if b_pinned:
        b_mat = np.eye(l)

    logger.info(
        f"T-MSBL: {iterations} iteraciones, convergido={converged}, "
        f"activos={int(np.count_nonzero(gamma))}"
    )
    return SolverResult(
        x_hat=x_hat,
        hyper=Hyperparams(gamma, b_mat, lam),
        active_set=np.flatnonzero(gamma),
        cost_trace=[],
        iterations=iterations,
        converged=converged,
        algorithm="tmsbl",
        warnings=warnings,
    )
