"""
T-SBL - Aprendizaje bayesiano disperso exacto sobre el modelo por bloques

Algoritmo EM sobre y = Dx + v con prior x ~ N(0, Γ ⊗ B):
- Paso E: momentos a posteriori (block_model.posterior_moments)
- Paso M: γ con la B anterior, B con el γ nuevo, λ si se aprende
- Reescalado de (γ, B) a Tr(B) = L, que deja Γ ⊗ B igual
- Poda de γ_i por debajo de un umbral y convergencia por max |Δγ|

El paso M es un ascenso por coordenadas (γ y luego B), de modo que cada
iteración no aumenta el coste mientras no haya podas ni se acoten
autovalores de B.
"""

import logging
import math
from typing import Optional, Tuple

import numpy as np

from .block_model import cost, initial_lambda, map_estimate, posterior_moments
from .config import INITIAL_LAMBDA_SCALE
from .exceptions import AllPrunedError, InvalidProblemError, NotPositiveDefiniteError
from .linalg import spd_inverse, symmetrize
from .models import (
    Hyperparams, IterationCallback, IterationState, MmvProblem,
    PosteriorMoments, SolverResult, TsblOptions,
)

logger = logging.getLogger(__name__)

# Cota inferior relativa de los autovalores de B
B_EIG_FLOOR = 1e-8


def tsbl_lambda_rule(problem: MmvProblem, hyper: Hyperparams, moments: PosteriorMoments) -> float:
    """
    Regla de aprendizaje de λ sin suelo.

    λ ← (‖y − Dμ_x‖² + λ̂[|A|L − Σ_{i∈A} Tr(B⁻¹Σ_x^i)/γ_i]) / (NL)

    donde λ̂, γ y B son los de la iteración anterior y A el conjunto activo.
    """
    n, l = problem.n, problem.l
    residual = problem.y_mat - problem.phi @ moments.mu_matrix
    active = np.flatnonzero(hyper.gamma > 0.0)
    b_inv = spd_inverse(hyper.b_mat, "B")
    traces = np.einsum('st,its->i', b_inv, moments.sigma_x_blocks[active])
    shrink = active.size * l - float(np.sum(traces / hyper.gamma[active]))
    return (float(np.sum(residual * residual)) + hyper.lam * shrink) / (n * l)


def tsbl_gamma_update(second_moments: np.ndarray, b_mat: np.ndarray,
                      active: Optional[np.ndarray] = None) -> np.ndarray:
    """
    γ_i ← Tr[B⁻¹(Σ_x^i + μ_x^i μ_x^iᵀ)] / L sobre los índices activos.

    Args:
        second_moments: Array (M, L, L) con Σ_x^i + μ_x^i μ_x^iᵀ
        b_mat: B de la iteración anterior
        active: Máscara booleana de índices activos (todos si es None)

    Returns:
        np.ndarray: γ nuevo, cero fuera del conjunto activo
    """
    m, l, _ = second_moments.shape
    active = np.ones(m, dtype=bool) if active is None else np.asarray(active, dtype=bool)
    b_inv = spd_inverse(b_mat, "B")
    gamma = np.zeros(m)
    gamma[active] = np.einsum('st,its->i', b_inv, second_moments[active]) / l
    return np.maximum(gamma, 0.0)


def tsbl_b_update(second_moments: np.ndarray, gamma: np.ndarray,
                  fallback: Optional[np.ndarray] = None) -> np.ndarray:
    """
    B ← media sobre i ∈ A de (Σ_x^i + μ_x^i μ_x^iᵀ)/γ_i, simetrizada.

    A son los índices con γ_i > 0. Los autovalores de B se acotan por debajo
    con B_EIG_FLOOR·λ_max, así que B sale SPD aunque haya menos fuentes
    activas que L. Sin índices activos, o si la media no tiene ningún
    autovalor positivo, devuelve ``fallback`` (o la identidad).
    """
    l = second_moments.shape[1]
    previous = np.eye(l) if fallback is None else np.array(fallback, dtype=float)
    kept = np.flatnonzero(gamma > 0.0)
    if kept.size == 0:
        return previous
    total = symmetrize(np.sum(second_moments[kept] / gamma[kept, None, None], axis=0) / kept.size)
    if not np.all(np.isfinite(total)):
        return previous

    eigvals, eigvecs = np.linalg.eigh(total)
    top = float(eigvals[-1])
    if top <= 0.0:
        return previous
    floor = B_EIG_FLOOR * top
    if eigvals[0] >= floor:
        return total
    logger.debug(f"T-SBL: B casi singular (λ_min={eigvals[0]:.3e}), autovalores acotados a {floor:.3e}")
    return symmetrize((eigvecs * np.maximum(eigvals, floor)) @ eigvecs.T)


def normalize_b(b_mat: np.ndarray, gamma: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    """
    Reescala (γ, B) a (s·γ, B/s) con s = Tr(B)/L, de modo que Tr(B) = L.

    Γ ⊗ B no cambia, y con él tampoco el coste; solo se fija la escala que
    el modelo deja libre entre γ y B.
    """
    scale = float(np.trace(b_mat)) / b_mat.shape[0]
    return symmetrize(b_mat / scale), gamma * scale


def tsbl_em_step(problem: MmvProblem, hyper: Hyperparams,
                 opts: TsblOptions) -> Tuple[Hyperparams, PosteriorMoments]:
    """
    Una iteración EM de T-SBL.

    Args:
        problem: Problema MMV
        hyper: Hiperparámetros actuales
        opts: Opciones (política de λ, umbral de poda)

    Returns:
        Tuple[Hyperparams, PosteriorMoments]: Hiperparámetros actualizados y
        los momentos a posteriori calculados con los de entrada

    Raises:
        AllPrunedError: Si ningún γ_i supera el umbral de poda
    """
    if not np.any(hyper.gamma > opts.prune_thresh):
        raise AllPrunedError("Todos los γ_i están por debajo del umbral de poda")

    moments = posterior_moments(problem, hyper)
    second = moments.second_moments()
    active = hyper.gamma > 0.0

    gamma = tsbl_gamma_update(second, hyper.b_mat, active)
    b_mat = tsbl_b_update(second, gamma, fallback=hyper.b_mat)
    b_mat, gamma = normalize_b(b_mat, gamma)

    lam = hyper.lam
    if opts.lambda_policy.is_learned:
        lam = max(tsbl_lambda_rule(problem, hyper, moments), opts.lambda_floor)

    return Hyperparams(gamma, b_mat, lam), moments


def _traced_cost(problem: MmvProblem, hyper: Hyperparams, iteration: int) -> float:
    # Fallo numérico en la traza: se registra NaN y el EM sigue
    try:
        return cost(problem, hyper)
    except (NotPositiveDefiniteError, InvalidProblemError) as exc:
        logger.warning(f"T-SBL it={iteration}: coste no evaluable ({exc}), se registra NaN")
        return math.nan


def tsbl_solve(problem: MmvProblem, opts: Optional[TsblOptions] = None,
               callback: Optional[IterationCallback] = None) -> SolverResult:
    """
    Ejecuta T-SBL hasta convergencia o max_iters.

    Tras cada paso se podan los γ_i < prune_thresh (sus filas de X̂ quedan a
    cero) y se registra el coste. Si se podan todos, X̂ = 0 y la ejecución
    se da por convergida.

    Args:
        problem: Problema MMV
        opts: Opciones del solver (por defecto TsblOptions())
        callback: Función opcional llamada con un IterationState por iteración

    Returns:
        SolverResult: X̂ (estimación MAP con los hiperparámetros finales) y traza
    """
    opts = (opts or TsblOptions()).check()
    n, m, l = problem.n, problem.m, problem.l

    if opts.lambda_policy.is_learned:
        lam0 = initial_lambda(problem.y_mat, INITIAL_LAMBDA_SCALE, opts.lambda_floor)
    else:
        lam0 = opts.lambda_policy.value
    hyper = Hyperparams.initial(m, l, lam0, opts.init_gamma)

    cost_trace = []
    converged = False
    b_pinned = False
    iterations = 0

    for iterations in range(1, opts.max_iters + 1):
        updated, moments = tsbl_em_step(problem, hyper, opts)
        gamma = updated.gamma.copy()
        gamma[gamma < opts.prune_thresh] = 0.0
        active = np.flatnonzero(gamma)

        b_mat = updated.b_mat
        if opts.b_identity_switch and (b_pinned or active.size < n):
            if not b_pinned:
                logger.debug(f"T-SBL: B fijada a la identidad en la iteración {iterations}")
            b_pinned = True
            b_mat = np.eye(l)

        delta = float(np.max(np.abs(gamma - hyper.gamma)))
        hyper = Hyperparams(gamma, b_mat, updated.lam)
        cost_trace.append(_traced_cost(problem, hyper, iterations))

        logger.debug(
            f"T-SBL it={iterations} activos={active.size} max|Δγ|={delta:.3e} λ={hyper.lam:.3e}"
        )
        if callback is not None:
            callback(IterationState(iterations, gamma.copy(), moments.mu_matrix.copy(),
                                    hyper.lam, b_mat.copy(), active.copy()))

        if active.size == 0:
            converged = True
            break
        if delta < opts.gamma_tol:
            converged = True
            break

    if np.any(hyper.gamma > 0.0):
        x_hat = map_estimate(problem, hyper)
        x_hat[hyper.gamma == 0.0] = 0.0
    else:
        x_hat = np.zeros((m, l))

    logger.info(
        f"T-SBL: {iterations} iteraciones, convergido={converged}, "
        f"activos={int(np.count_nonzero(hyper.gamma))}"
    )
    return SolverResult(
        x_hat=x_hat,
        hyper=hyper,
        active_set=np.flatnonzero(hyper.gamma),
        cost_trace=cost_trace,
        iterations=iterations,
        converged=converged,
        algorithm="tsbl",
    )
