"""
Generación de Datos Sintéticos - Diccionarios, fuentes correlacionadas y ruido

Este módulo produce de forma determinista, a partir de semillas, todos los
datos de un ensayo Monte Carlo:

- Diccionarios con columnas en la hiperesfera unidad o filas de Hadamard
- Fuentes AR(1) con coeficiente común, AR(p) y MA(p), iniciadas en su
  distribución estacionaria y reescaladas por fila
- Ruido gaussiano con SNR exacto

Flujos de números aleatorios:
- Cada ensayo (celda, ensayo) deriva cuatro subflujos independientes
  (diccionario, soporte, fuentes, ruido) de SeedSequence(master_seed,
  spawn_key=(celda, ensayo, flujo)); cada uno alimenta un Generator Philox.
- Las mismas semillas producen salidas idénticas bit a bit.
"""

import logging
import math
from dataclasses import dataclass, replace
from typing import Optional, Sequence, Tuple, Union

import numpy as np
from scipy.linalg import hadamard, solve_discrete_lyapunov
from scipy.special import comb

from .exceptions import InvalidDictionaryError, InvalidProblemError, UnstableProcessError, ZeroSignalError
from .models import DictionaryKind, GroundTruth, MmvProblem, SourceModel

logger = logging.getLogger(__name__)

SeedLike = Union[int, np.random.SeedSequence]

MAX_STABILITY_DRAWS = 10_000
STREAMS = ("dictionary", "support", "sources", "noise")


# ═══════════════════════════════════════════════════════════
# SEMILLAS
# ═══════════════════════════════════════════════════════════

def _seed_sequence(seed: SeedLike) -> np.random.SeedSequence:
    if isinstance(seed, np.random.SeedSequence):
        return seed
    return np.random.SeedSequence(int(seed))


def _child(seq: np.random.SeedSequence, index: int) -> np.random.SeedSequence:
    # Derivación explícita: SeedSequence.spawn depende de llamadas previas
    return np.random.SeedSequence(seq.entropy, spawn_key=tuple(seq.spawn_key) + (index,))


def make_rng(seed: Union[SeedLike, np.random.Generator]) -> np.random.Generator:
    """Generator Philox para una semilla entera o un SeedSequence."""
    if isinstance(seed, np.random.Generator):
        return seed
    return np.random.Generator(np.random.Philox(_seed_sequence(seed)))


@dataclass(frozen=True)
class TrialSeeds:
    """Subflujos independientes de un ensayo."""
    dictionary: np.random.SeedSequence
    support: np.random.SeedSequence
    sources: np.random.SeedSequence
    noise: np.random.SeedSequence


def trial_seeds(master_seed: int, cell: int, trial: int) -> TrialSeeds:
    """Deriva los subflujos de (master_seed, celda, ensayo)."""
    base = np.random.SeedSequence(int(master_seed), spawn_key=(int(cell), int(trial)))
    return TrialSeeds(*(_child(base, i) for i in range(len(STREAMS))))


# ═══════════════════════════════════════════════════════════
# DICCIONARIOS
# ═══════════════════════════════════════════════════════════

def sample_dictionary(n: int, m: int, kind: DictionaryKind, seed: SeedLike) -> np.ndarray:
    """
    Genera un diccionario N×M.

    Args:
        n: Número de filas N
        m: Número de columnas M (≥ N)
        kind: unit_hypersphere (columnas gaussianas normalizadas) o
            hadamard_rows (n filas de Hadamard elegidas sin reemplazo;
            entradas ±1, sin normalizar)
        seed: Semilla del flujo de diccionario

    Raises:
        InvalidProblemError: Si n > m
        InvalidDictionaryError: Si el orden de Hadamard o el número de filas no encajan
    """
    if n < 1 or n > m:
        raise InvalidProblemError(f"Se necesita 1 ≤ N ≤ M, recibido N={n}, M={m}")
    rng = make_rng(seed)

    if kind.kind == "unit_hypersphere":
        phi = rng.standard_normal((n, m))
        return phi / np.linalg.norm(phi, axis=0)

    if kind.kind == "hadamard_rows":
        errors = kind.validate()
        if errors:
            raise InvalidDictionaryError("; ".join(errors))
        if m != kind.order or n != kind.rows_selected:
            raise InvalidDictionaryError(
                f"Hadamard {kind.order} con {kind.rows_selected} filas no produce {n}×{m}"
            )
        rows = rng.choice(kind.order, size=n, replace=False)
        return hadamard(kind.order).astype(float)[rows]

    raise InvalidDictionaryError(f"Tipo de diccionario desconocido: {kind.kind}")


# ═══════════════════════════════════════════════════════════
# PROCESOS TEMPORALES
# ═══════════════════════════════════════════════════════════

def companion_matrix(coeffs: Sequence[float]) -> np.ndarray:
    """Matriz compañera de x_t = Σ_j a_j x_{t−j} + e_t."""
    p = len(coeffs)
    comp = np.zeros((p, p))
    comp[0] = coeffs
    comp[1:, :-1] = np.eye(p - 1)
    return comp


def is_stable(coeffs: Sequence[float]) -> bool:
    """True si todas las raíces características están dentro del círculo unidad."""
    if len(coeffs) == 0:
        return True
    return bool(np.max(np.abs(np.linalg.eigvals(companion_matrix(coeffs)))) < 1.0)


def stable_ar_box(order: int) -> np.ndarray:
    """
    Semiancho de la caja que contiene la región de estabilidad AR(p).

    Con raíces de módulo < 1, |a_j| ≤ C(p, j) para cada coeficiente.
    """
    return comb(order, np.arange(1, order + 1), exact=False)


def sample_stable_ar(order: int, coeff_range: Optional[Tuple[float, float]], rng: np.random.Generator,
                     max_draws: int = MAX_STABILITY_DRAWS) -> np.ndarray:
    """
    Coeficientes AR(p) uniformes con rechazo por estabilidad.

    Se muestrea en la caja |a_j| ≤ C(p, j) que contiene toda la región
    estable; si se da ``coeff_range`` se intersecta con ella.

    Raises:
        UnstableProcessError: Si la intersección es vacía o se agotan
            ``max_draws`` intentos
    """
    box = stable_ar_box(order)
    lo, hi = -box, box
    if coeff_range is not None:
        lo = np.maximum(lo, coeff_range[0])
        hi = np.minimum(hi, coeff_range[1])
    if np.any(lo >= hi):
        raise UnstableProcessError(f"coeff_range={coeff_range} no corta la región estable AR({order})")
    for _ in range(max_draws):
        coeffs = rng.uniform(lo, hi)
        if is_stable(coeffs):
            return coeffs
    raise UnstableProcessError(f"Sin coeficientes AR({order}) estables tras {max_draws} intentos")


def sample_ma_coeffs(order: int, rng: np.random.Generator) -> np.ndarray:
    """Coeficientes MA(p) uniformes en (0, 1]."""
    return 1.0 - rng.random(order)


def simulate_ar(coeffs: Sequence[float], length: int, rng: np.random.Generator) -> np.ndarray:
    """
    Serie AR(p) de longitud ``length`` con innovaciones N(0, 1).

    El estado inicial (x_0, x_−1, …, x_−p+1) se muestrea de la distribución
    estacionaria, cuya covarianza resuelve P = FPFᵀ + e₁e₁ᵀ.
    """
    coeffs = np.asarray(coeffs, dtype=float)
    if not is_stable(coeffs):
        raise UnstableProcessError(f"Coeficientes AR inestables: {coeffs.tolist()}")
    p = coeffs.size
    comp = companion_matrix(coeffs)
    q = np.zeros((p, p))
    q[0, 0] = 1.0
    stationary = solve_discrete_lyapunov(comp, q)
    stationary = 0.5 * (stationary + stationary.T)
    state = rng.multivariate_normal(np.zeros(p), stationary, method="eigh")

    series = np.empty(length)
    series[0] = state[0]
    innovations = rng.standard_normal(length - 1)
    for t in range(1, length):
        state = np.concatenate(([coeffs @ state + innovations[t - 1]], state[:-1]))
        series[t] = state[0]
    return series


def simulate_ma(coeffs: Sequence[float], length: int, rng: np.random.Generator) -> np.ndarray:
    """Serie MA(p): x_t = e_t + Σ_j b_j e_{t−j}, con p innovaciones previas."""
    coeffs = np.asarray(coeffs, dtype=float)
    p = coeffs.size
    innovations = rng.standard_normal(length + p)
    kernel = np.concatenate(([1.0], coeffs))
    return np.convolve(innovations, kernel, mode="valid")[:length]


def _common_ar1_row(beta: float, length: int, rng: np.random.Generator) -> np.ndarray:
    if abs(beta) >= 1.0:
        # Correlación extrema: fila x0·sign(β)^t
        return rng.standard_normal() * np.sign(beta) ** np.arange(length)
    return simulate_ar([beta], length, rng)


def _source_row(model: SourceModel, length: int, rng: np.random.Generator) -> np.ndarray:
    if model.kind == "common_ar1":
        return _common_ar1_row(model.beta, length, rng)
    if model.kind == "ar":
        coeffs = model.coeffs if model.coeffs is not None else sample_stable_ar(model.order, model.coeff_range, rng)
        return simulate_ar(coeffs, length, rng)
    if model.kind == "ma":
        coeffs = model.coeffs if model.coeffs is not None else sample_ma_coeffs(model.order, rng)
        return simulate_ma(coeffs, length, rng)
    raise InvalidProblemError(f"Modelo de fuente desconocido: {model.kind}")


def resolve_rescale(model: SourceModel, snr_db: float) -> SourceModel:
    """Sustituye rescale='auto' según el régimen: U(1/3,1) sin ruido, norma 1 con ruido."""
    if model.rescale != "auto":
        return model
    rescale = "noiseless_uniform_third_to_one" if math.isinf(snr_db) else "unit_norm"
    return replace(model, rescale=rescale)


def gen_sources(m: int, l: int, k: int, model: SourceModel, seed: SeedLike,
                snr_db: float = math.inf,
                support_seed: Optional[SeedLike] = None) -> Tuple[np.ndarray, np.ndarray]:
    """
    Genera X_gen (M×L) con K filas no nulas.

    El soporte se sortea sin reemplazo con un subflujo y las filas con otro.
    Sin ``support_seed`` ambos se derivan de ``seed``.

    Args:
        m: Número de filas M
        l: Longitud temporal L
        k: Número de fuentes K (≤ M)
        model: Modelo de las fuentes
        seed: Semilla
        snr_db: Solo se usa para resolver rescale='auto'
        support_seed: Semilla propia para el sorteo del soporte

    Returns:
        Tuple[np.ndarray, np.ndarray]: X_gen y el soporte ordenado

    Raises:
        InvalidProblemError: Si k > m o el modelo no es válido
        UnstableProcessError: Si los coeficientes AR fijos son inestables
    """
    if not 1 <= k <= m:
        raise InvalidProblemError(f"Se necesita 1 ≤ K ≤ M, recibido K={k}, M={m}")
    if l < 1:
        raise InvalidProblemError(f"L debe ser ≥ 1, recibido {l}")
    errors = model.validate()
    if errors:
        if model.kind == "common_ar1" and abs(model.beta) >= 1.0:
            raise UnstableProcessError("; ".join(errors))
        raise InvalidProblemError("; ".join(errors))
    if model.kind == "ar" and model.coeffs is not None and not is_stable(model.coeffs):
        raise UnstableProcessError(f"Coeficientes AR inestables: {list(model.coeffs)}")

    model = resolve_rescale(model, snr_db)
    seq = _seed_sequence(seed)
    if support_seed is None:
        support_rng = make_rng(_child(seq, 0))
        source_rng = make_rng(_child(seq, 1))
    else:
        support_rng = make_rng(support_seed)
        source_rng = make_rng(seq)

    support = np.sort(support_rng.choice(m, size=k, replace=False))
    rows = np.vstack([_source_row(model, l, source_rng) for _ in range(k)])

    if model.rescale == "noiseless_uniform_third_to_one":
        target = source_rng.uniform(1.0 / 3.0, 1.0, size=k)
    else:
        target = np.ones(k)
    norms = np.linalg.norm(rows, axis=1)
    norms[norms == 0.0] = 1.0
    rows = rows * (target / norms)[:, None]

    x_gen = np.zeros((m, l))
    x_gen[support] = rows
    return x_gen, support


# ═══════════════════════════════════════════════════════════
# RUIDO Y PROBLEMAS COMPLETOS
# ═══════════════════════════════════════════════════════════

def add_noise(clean: np.ndarray, snr_db: float, seed: SeedLike) -> np.ndarray:
    """
    Añade ruido gaussiano escalado para que 20·log10(‖clean‖_F/‖V‖_F) = snr_db.

    Raises:
        ZeroSignalError: Si se pide un SNR finito para una señal nula
    """
    clean = np.asarray(clean, dtype=float)
    if snr_db is None or math.isinf(snr_db):
        return clean.copy()
    signal_norm = float(np.linalg.norm(clean))
    if signal_norm == 0.0:
        raise ZeroSignalError("No se puede fijar un SNR finito para una señal nula")
    noise = make_rng(seed).standard_normal(clean.shape)
    noise *= signal_norm / (np.linalg.norm(noise) * 10.0 ** (snr_db / 20.0))
    return clean + noise


def sample_extreme_beta(c: float) -> float:
    """β = sign(C)·(1 − 10^−|C|); C = 0 da β = 0."""
    return float(np.sign(c) * (1.0 - 10.0 ** (-abs(c))))


def generate_problem(n: int, m: int, l: int, k: int, snr_db: Optional[float],
                     model: SourceModel, dictionary: DictionaryKind,
                     seeds: TrialSeeds) -> MmvProblem:
    """
    Problema completo Y = ΦX_gen + V de un ensayo.

    Args:
        n, m, l, k: Dimensiones de la celda
        snr_db: SNR en dB (None o ∞ = sin ruido)
        model: Modelo de fuentes (rescale='auto' se resuelve aquí)
        dictionary: Tipo de diccionario
        seeds: Subflujos del ensayo

    Returns:
        MmvProblem: Con la verdad de referencia adjunta
    """
    snr = math.inf if snr_db is None else float(snr_db)
    phi = sample_dictionary(n, m, dictionary, seeds.dictionary)
    x_gen, support = gen_sources(m, l, k, model, seeds.sources, snr, support_seed=seeds.support)
    y_mat = add_noise(phi @ x_gen, snr, seeds.noise)
    return MmvProblem(phi, y_mat, GroundTruth(x_gen, support, snr))
