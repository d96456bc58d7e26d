"""
MSBL - Línea base sin correlación temporal (B = I)

    Ξ_x = (Γ⁻¹ + ΦᵀΦ/λ)⁻¹           (solo su diagonal)
    X   = ΓΦᵀ(λI + ΦΓΦᵀ)⁻¹Y
    γ_i = ‖X_i‖²₂/L + (Ξ_x)_ii

λ aprendido con la regla simplificada de T-MSBL particularizada a B = I.
"""

import logging
from typing import Optional, Tuple

import numpy as np

from .block_model import initial_lambda, reduced_posterior
from .config import INITIAL_LAMBDA_SCALE
from .exceptions import AllPrunedError, InvalidProblemError
from .models import (
    Hyperparams, IterationCallback, IterationState, MmvProblem, SolverResult, TsblOptions,
)
from .tmsbl import tmsbl_lambda_update

logger = logging.getLogger(__name__)


def msbl_em_step(problem: MmvProblem, gamma: np.ndarray, lam: float,
                 opts: TsblOptions) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    """
    Una iteración EM de MSBL.

    Returns:
        Tuple: (γ nuevo, X actual, diag(Ξ_x)); γ nuevo no está podado
    """
    gamma = np.asarray(gamma, dtype=float)
    if gamma.shape != (problem.m,):
        raise InvalidProblemError(f"γ debe tener longitud {problem.m}, recibido {gamma.shape}")
    if not lam > 0.0:
        raise InvalidProblemError(f"λ debe ser positivo, recibido {lam}")
    x_cur, xi_diag = reduced_posterior(problem.phi, problem.y_mat, gamma, lam)
    new_gamma = np.sum(x_cur * x_cur, axis=1) / problem.l + xi_diag
    return np.maximum(new_gamma, 0.0), x_cur, xi_diag


def msbl_solve(problem: MmvProblem, opts: Optional[TsblOptions] = None,
               callback: Optional[IterationCallback] = None) -> SolverResult:
    """Ejecuta MSBL con la misma poda y convergencia que T-MSBL."""
    opts = (opts or TsblOptions()).check()
    m, l = problem.m, problem.l

    if opts.lambda_policy.is_learned:
        lam = initial_lambda(problem.y_mat, INITIAL_LAMBDA_SCALE, opts.lambda_floor)
    else:
        lam = opts.lambda_policy.value
    gamma = np.full(m, float(opts.init_gamma))
    identity = np.eye(l)

    converged = False
    iterations = 0
    for iterations in range(1, opts.max_iters + 1):
        if not np.any(gamma > opts.prune_thresh):
            raise AllPrunedError("Todos los γ_i están por debajo del umbral de poda")

        new_gamma, x_cur, _ = msbl_em_step(problem, gamma, lam, opts)
        if opts.lambda_policy.is_learned:
            lam = max(tmsbl_lambda_update(problem, x_cur, gamma, lam), opts.lambda_floor)

        new_gamma[new_gamma < opts.prune_thresh] = 0.0
        active = np.flatnonzero(new_gamma)
        delta = float(np.max(np.abs(new_gamma - gamma)))
        gamma = new_gamma

        logger.debug(f"MSBL it={iterations} activos={active.size} max|Δγ|={delta:.3e} λ={lam:.3e}")
        if callback is not None:
            callback(IterationState(iterations, gamma.copy(), x_cur, lam, identity, active.copy()))

        if active.size == 0 or delta < opts.gamma_tol:
            converged = True
            break

    x_hat, _ = reduced_posterior(problem.phi, problem.y_mat, gamma, lam)
    logger.info(
        f"MSBL: {iterations} iteraciones, convergido={converged}, "
        f"activos={int(np.count_nonzero(gamma))}"
    )
    return SolverResult(
        x_hat=x_hat,
        hyper=Hyperparams(gamma, identity, lam),
        active_set=np.flatnonzero(gamma),
        iterations=iterations,
        converged=converged,
        algorithm="msbl",
    )
