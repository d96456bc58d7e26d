"""
Modelo de Datos Central - Problemas MMV, hiperparámetros y experimentos

Este módulo define todas las estructuras de datos que circulan por el
paquete: el problema de recuperación con múltiples vectores de medida
(MMV), los hiperparámetros del modelo por bloques, los momentos a
posteriori, el resultado de un solver, las opciones de cada algoritmo y
la descripción de un experimento Monte Carlo con sus registros.

Convención de disposición (fija en todo el paquete):
- X es M×L y sus filas son las fuentes.
- vec apila columnas, de modo que x = vec(Xᵀ) concatena las filas de X;
  en NumPy eso es ``X.ravel()`` (orden C) y la inversa ``x.reshape(M, L)``.

Utiliza dataclasses de Python con tipado estático; los tipos que viajan en
ficheros JSON (opciones, configuración, registros) ofrecen to_dict/from_dict.
"""

import math
from dataclasses import dataclass, field, fields, replace
from typing import Any, Callable, Dict, List, Optional, Tuple

import numpy as np

from .exceptions import InvalidProblemError

SYM_RTOL = 1e-12
UNIT_NORM_ATOL = 1e-10


def _frozen_array(values: Any, ndim: int, name: str) -> np.ndarray:
    arr = np.array(values, dtype=float, copy=True)
    if arr.ndim != ndim:
        raise InvalidProblemError(f"{name}: se esperaban {ndim} dimensiones, recibido {arr.shape}")
    arr.setflags(write=False)
    return arr


def _snr_to_json(snr_db: Optional[float]) -> Optional[float]:
    if snr_db is None or math.isinf(snr_db):
        return None
    return float(snr_db)


def _snr_from_json(value: Any) -> float:
    return math.inf if value is None else float(value)


# ═══════════════════════════════════════════════════════════
# PROBLEMA MMV
# ═══════════════════════════════════════════════════════════

@dataclass(frozen=True)
class GroundTruth:
    """Matriz generadora X_gen (M×L), su soporte y el SNR usado (∞ = sin ruido)."""
    x_gen: np.ndarray
    support: np.ndarray
    snr_db: float = math.inf

    def __post_init__(self):
        object.__setattr__(self, "x_gen", _frozen_array(self.x_gen, 2, "x_gen"))
        support = np.array(sorted(int(i) for i in np.asarray(self.support).ravel()), dtype=int)
        support.setflags(write=False)
        object.__setattr__(self, "support", support)

    @property
    def k(self) -> int:
        return int(self.support.size)

    @property
    def noiseless(self) -> bool:
        return math.isinf(self.snr_db)


@dataclass(frozen=True)
class MmvProblem:
    """
    Problema Y = ΦX + V.

    Los arrays se copian y se marcan como solo lectura en la construcción,
    así que una instancia puede compartirse entre hilos sin riesgo.
    """
    phi: np.ndarray
    y_mat: np.ndarray
    truth: Optional[GroundTruth] = None

    def __post_init__(self):
        object.__setattr__(self, "phi", _frozen_array(self.phi, 2, "phi"))
        object.__setattr__(self, "y_mat", _frozen_array(self.y_mat, 2, "y_mat"))
        errors = self.validate()
        if errors:
            raise InvalidProblemError("; ".join(errors))

    @property
    def n(self) -> int:
        return self.phi.shape[0]

    @property
    def m(self) -> int:
        return self.phi.shape[1]

    @property
    def l(self) -> int:
        return self.y_mat.shape[1]

    @property
    def y_vec(self) -> np.ndarray:
        """y = vec(Yᵀ), longitud NL."""
        return self.y_mat.ravel()

    @property
    def has_unit_columns(self) -> bool:
        """True si todas las columnas de Φ tienen norma euclídea 1."""
        norms = np.linalg.norm(self.phi, axis=0)
        return bool(np.allclose(norms, 1.0, rtol=0.0, atol=UNIT_NORM_ATOL))

    def validate(self) -> List[str]:
        """
        Valida dimensiones y coherencia con la verdad de referencia.

        Las columnas no unitarias NO son un error (las acepta la entrada
        libre del usuario); se informan mediante ``has_unit_columns``.

        Returns:
            List[str]: Lista de errores (vacía si el problema es válido)
        """
        errors = []
        n, m = self.phi.shape
        if n < 1:
            errors.append("N debe ser ≥ 1")
        if m < n:
            errors.append(f"M ({m}) debe ser ≥ N ({n})")
        if self.y_mat.shape[0] != n:
            errors.append(f"Y tiene {self.y_mat.shape[0]} filas, Φ tiene {n}")
        if self.y_mat.shape[1] < 1:
            errors.append("L debe ser ≥ 1")
        if not (np.all(np.isfinite(self.phi)) and np.all(np.isfinite(self.y_mat))):
            errors.append("Φ e Y deben ser finitos")

        if self.truth is not None and not errors:
            x_gen = self.truth.x_gen
            if x_gen.shape != (m, self.y_mat.shape[1]):
                errors.append(f"x_gen debe ser {m}×{self.y_mat.shape[1]}, recibido {x_gen.shape}")
            else:
                support = self.truth.support
                if support.size and (support.min() < 0 or support.max() >= m):
                    errors.append("soporte fuera de rango")
                else:
                    nonzero = np.flatnonzero(np.any(x_gen != 0.0, axis=1))
                    if not np.array_equal(nonzero, support):
                        errors.append("las filas no nulas de x_gen no coinciden con el soporte")
        return errors


# ═══════════════════════════════════════════════════════════
# HIPERPARÁMETROS Y MOMENTOS
# ═══════════════════════════════════════════════════════════

@dataclass(frozen=True)
class Hyperparams:
    """Θ = {γ (longitud M), B (L×L SPD), λ > 0}."""
    gamma: np.ndarray
    b_mat: np.ndarray
    lam: float

    def __post_init__(self):
        object.__setattr__(self, "gamma", _frozen_array(self.gamma, 1, "gamma"))
        object.__setattr__(self, "b_mat", _frozen_array(self.b_mat, 2, "b_mat"))
        object.__setattr__(self, "lam", float(self.lam))

    @classmethod
    def initial(cls, m: int, l: int, lam: float, init_gamma: float = 1.0) -> 'Hyperparams':
        """γ_i = init_gamma, B = I_L."""
        return cls(np.full(m, float(init_gamma)), np.eye(l), lam)

    @property
    def m(self) -> int:
        return self.gamma.size

    @property
    def l(self) -> int:
        return self.b_mat.shape[0]

    def validate(self) -> List[str]:
        """
        Comprueba γ ≥ 0, B simétrica y definida positiva, λ > 0.

        Returns:
            List[str]: Lista de errores (vacía si válido)
        """
        errors = []
        if not np.all(np.isfinite(self.gamma)) or np.any(self.gamma < 0.0):
            errors.append("γ debe ser finito y no negativo")
        b = self.b_mat
        if b.shape[0] != b.shape[1]:
            errors.append(f"B debe ser cuadrada, recibido {b.shape}")
        elif not np.all(np.isfinite(b)):
            errors.append("B debe ser finita")
        else:
            scale = max(float(np.max(np.abs(b))), np.finfo(float).tiny)
            if np.max(np.abs(b - b.T)) > SYM_RTOL * scale:
                errors.append("B no es simétrica")
            elif np.linalg.eigvalsh(b)[0] <= 0.0:
                errors.append("B no es definida positiva")
        if not (math.isfinite(self.lam) and self.lam > 0.0):
            errors.append(f"λ debe ser positivo, recibido {self.lam}")
        return errors

    def check(self) -> 'Hyperparams':
        errors = self.validate()
        if errors:
            raise InvalidProblemError("Hiperparámetros inválidos: " + "; ".join(errors))
        return self

    def prior_covariance(self) -> np.ndarray:
        """Σ0 = Γ ⊗ B como matriz densa ML×ML (solo para tamaños pequeños)."""
        return np.kron(np.diag(self.gamma), self.b_mat)

    def with_updates(self, **changes) -> 'Hyperparams':
        return replace(self, **changes)


@dataclass(frozen=True)
class PosteriorMoments:
    """
    Media a posteriori μ_x (longitud ML) y los M bloques diagonales L×L de Σ_x.

    Σ_x completa nunca se materializa en la API de la librería.
    """
    mu_x: np.ndarray
    sigma_x_blocks: np.ndarray

    @property
    def mu_matrix(self) -> np.ndarray:
        """μ_x reordenado como matriz M×L (fila i = (μ_x^i)ᵀ)."""
        m = self.sigma_x_blocks.shape[0]
        return self.mu_x.reshape(m, -1)

    def second_moments(self) -> np.ndarray:
        """Σ_x^i + μ_x^i μ_x^iᵀ para cada i, forma (M, L, L)."""
        mu = self.mu_matrix
        return self.sigma_x_blocks + np.einsum('is,it->ist', mu, mu)


@dataclass
class IterationState:
    """Estado publicado a un callback tras cada iteración de un solver."""
    iteration: int
    gamma: np.ndarray
    x_cur: np.ndarray
    lam: float
    b_mat: np.ndarray
    active_set: np.ndarray


IterationCallback = Callable[[IterationState], None]


@dataclass
class SolverResult:
    """Contenedor de salida: X̂, hiperparámetros finales, conjunto activo y traza de coste."""
    x_hat: np.ndarray
    hyper: Hyperparams
    active_set: np.ndarray
    cost_trace: List[float] = field(default_factory=list)
    iterations: int = 0
    converged: bool = False
    algorithm: str = ""
    warnings: List[str] = field(default_factory=list)

    @property
    def gamma_card(self) -> int:
        """‖γ̂‖₀."""
        return int(np.count_nonzero(self.hyper.gamma))

    def to_dict(self) -> Dict[str, Any]:
        """Resumen serializable (sin las matrices)."""
        return {
            'algorithm': self.algorithm,
            'iterations': self.iterations,
            'converged': self.converged,
            'active_set': [int(i) for i in self.active_set],
            'gamma_card': self.gamma_card,
            'lambda': self.hyper.lam,
            'final_cost': self.cost_trace[-1] if self.cost_trace else None,
            'warnings': list(self.warnings),
        }


# ═══════════════════════════════════════════════════════════
# OPCIONES DE LOS SOLVERS
# ═══════════════════════════════════════════════════════════

@dataclass(frozen=True)
class LambdaPolicy:
    """λ fijo (``fixed``, con su valor) o aprendido (``learned``)."""
    kind: str = "learned"
    value: Optional[float] = None

    KINDS = ("fixed", "learned")

    @classmethod
    def fixed(cls, value: float) -> 'LambdaPolicy':
        return cls("fixed", float(value))

    @classmethod
    def learned(cls) -> 'LambdaPolicy':
        return cls("learned", None)

    @property
    def is_learned(self) -> bool:
        return self.kind == "learned"

    def validate(self) -> List[str]:
        if self.kind not in self.KINDS:
            return [f"lambda_policy.kind debe ser uno de {self.KINDS}"]
        if self.kind == "fixed" and not (self.value is not None and self.value > 0.0):
            return ["lambda_policy fija requiere value > 0"]
        return []

    def to_dict(self) -> Dict[str, Any]:
        return {'kind': self.kind, 'value': self.value}

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> 'LambdaPolicy':
        value = data.get('value')
        return cls(kind=data.get('kind', 'learned'), value=None if value is None else float(value))


@dataclass(frozen=True)
class BPolicy:
    """Regla para B en T-MSBL: ``plain``, ``regularized`` (con η) o ``pinned_identity``."""
    kind: str = "plain"
    eta: float = 0.0

    KINDS = ("plain", "regularized", "pinned_identity")

    @classmethod
    def plain(cls) -> 'BPolicy':
        return cls("plain")

    @classmethod
    def regularized(cls, eta: float) -> 'BPolicy':
        return cls("regularized", float(eta))

    @classmethod
    def pinned_identity(cls) -> 'BPolicy':
        return cls("pinned_identity")

    def validate(self) -> List[str]:
        if self.kind not in self.KINDS:
            return [f"b_policy.kind debe ser uno de {self.KINDS}"]
        if self.kind == "regularized" and not self.eta > 0.0:
            return ["b_policy regularizada requiere η > 0"]
        return []

    def to_dict(self) -> Dict[str, Any]:
        return {'kind': self.kind, 'eta': self.eta}

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> 'BPolicy':
        return cls(kind=data.get('kind', 'plain'), eta=float(data.get('eta', 0.0)))


@dataclass(frozen=True)
class TsblOptions:
    """
    Opciones de T-SBL (y de MSBL, que las reutiliza).

    ``b_identity_switch`` fija B = I en cuanto el número de índices activos
    baja de N (usado por el preset de SNR bajo); ``lambda_floor`` es el
    suelo aplicado a λ aprendido.
    """
    max_iters: int = 2000
    gamma_tol: float = 1e-8
    prune_thresh: float = 1e-5
    lambda_policy: LambdaPolicy = field(default_factory=LambdaPolicy.learned)
    init_gamma: float = 1.0
    b_identity_switch: bool = False
    lambda_floor: float = 1e-12

    def validate(self) -> List[str]:
        errors = []
        if self.max_iters < 1:
            errors.append("max_iters debe ser ≥ 1")
        if not self.gamma_tol > 0.0:
            errors.append("gamma_tol debe ser > 0")
        if not self.prune_thresh > 0.0:
            errors.append("prune_thresh debe ser > 0")
        if not self.init_gamma > 0.0:
            errors.append("init_gamma debe ser > 0")
        errors.extend(self.lambda_policy.validate())
        return errors

    def check(self):
        errors = self.validate()
        if errors:
            raise InvalidProblemError("Opciones inválidas: " + "; ".join(errors))
        return self

    def to_dict(self) -> Dict[str, Any]:
        data = {f.name: getattr(self, f.name) for f in fields(self)}
        data['lambda_policy'] = self.lambda_policy.to_dict()
        return data

    @classmethod
    def from_dict(cls, data: Dict[str, Any]):
        return cls().with_overrides(data)

    def with_overrides(self, overrides: Dict[str, Any]):
        """Copia con los campos de ``overrides`` sustituidos (acepta dicts anidados)."""
        known = {f.name for f in fields(self)}
        unknown = set(overrides) - known
        if unknown:
            raise InvalidProblemError(f"Opciones desconocidas para {type(self).__name__}: {sorted(unknown)}")
        changes = dict(overrides)
        if isinstance(changes.get('lambda_policy'), dict):
            changes['lambda_policy'] = LambdaPolicy.from_dict(changes['lambda_policy'])
        if isinstance(changes.get('b_policy'), dict):
            changes['b_policy'] = BPolicy.from_dict(changes['b_policy'])
        return replace(self, **changes)


@dataclass(frozen=True)
class TmsblOptions(TsblOptions):
    """Opciones de T-MSBL: añade la regla de B y la modificación de λ para SNR bajo."""
    b_policy: BPolicy = field(default_factory=BPolicy.plain)
    low_snr_lambda_mod: bool = False

    def validate(self) -> List[str]:
        return super().validate() + self.b_policy.validate()

    def to_dict(self) -> Dict[str, Any]:
        data = super().to_dict()
        data['b_policy'] = self.b_policy.to_dict()
        return data


# ═══════════════════════════════════════════════════════════
# GENERACIÓN DE DATOS
# ═══════════════════════════════════════════════════════════

@dataclass(frozen=True)
class SourceModel:
    """
    Modelo de las filas fuente.

    kind:
        ``common_ar1``  AR(1) con coeficiente común ``beta``
        ``ar``          AR(p); ``coeffs`` fijos o, si es None, muestreados
                        uniformemente en la caja |a_j| ≤ C(p, j) (cortada con
                        ``coeff_range`` si se da) con rechazo por estabilidad
        ``ma``          MA(p); ``coeffs`` fijos o muestreados en (0, 1]
    rescale:
        ``noiseless_uniform_third_to_one`` norma de fila ~ U(1/3, 1),
        ``unit_norm`` norma 1, ``auto`` elige según el SNR de la celda.
    ``extreme`` permite |β| ≤ 1 (generador de correlación extrema).
    """
    kind: str = "common_ar1"
    beta: float = 0.0
    order: int = 1
    coeffs: Optional[Tuple[float, ...]] = None
    coeff_range: Optional[Tuple[float, float]] = None
    rescale: str = "auto"
    extreme: bool = False

    KINDS = ("common_ar1", "ar", "ma")
    RESCALES = ("noiseless_uniform_third_to_one", "unit_norm", "auto")

    def validate(self) -> List[str]:
        errors = []
        if self.kind not in self.KINDS:
            errors.append(f"source.kind debe ser uno de {self.KINDS}")
        if self.rescale not in self.RESCALES:
            errors.append(f"source.rescale debe ser uno de {self.RESCALES}")
        if self.kind == "common_ar1":
            limit_ok = abs(self.beta) <= 1.0 if self.extreme else abs(self.beta) < 1.0
            if not limit_ok:
                errors.append(f"|β| = {abs(self.beta)} fuera de rango para un AR(1) estable")
        else:
            if self.order < 1:
                errors.append("el orden p debe ser ≥ 1")
            if self.coeffs is not None and len(self.coeffs) != self.order:
                errors.append(f"se esperaban {self.order} coeficientes, recibidos {len(self.coeffs)}")
            if self.coeff_range is not None and not self.coeff_range[0] < self.coeff_range[1]:
                errors.append("coeff_range debe cumplir lo < hi")
        return errors

    def to_dict(self) -> Dict[str, Any]:
        return {
            'kind': self.kind,
            'beta': self.beta,
            'order': self.order,
            'coeffs': None if self.coeffs is None else list(self.coeffs),
            'coeff_range': None if self.coeff_range is None else list(self.coeff_range),
            'rescale': self.rescale,
            'extreme': self.extreme,
        }

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> 'SourceModel':
        coeffs = data.get('coeffs')
        coeff_range = data.get('coeff_range')
        return cls(
            kind=data.get('kind', 'common_ar1'),
            beta=float(data.get('beta', 0.0)),
            order=int(data.get('order', 1)),
            coeffs=None if coeffs is None else tuple(float(c) for c in coeffs),
            coeff_range=None if coeff_range is None else tuple(float(c) for c in coeff_range),
            rescale=data.get('rescale', 'auto'),
            extreme=bool(data.get('extreme', False)),
        )


@dataclass(frozen=True)
class DictionaryKind:
    """Columnas en la hiperesfera unidad o filas de una matriz de Hadamard."""
    kind: str = "unit_hypersphere"
    order: Optional[int] = None
    rows_selected: Optional[int] = None

    KINDS = ("unit_hypersphere", "hadamard_rows")

    def validate(self) -> List[str]:
        errors = []
        if self.kind not in self.KINDS:
            errors.append(f"dictionary.kind debe ser uno de {self.KINDS}")
        if self.kind == "hadamard_rows":
            if self.order is None or self.order < 1 or self.order & (self.order - 1):
                errors.append(f"el orden de Hadamard debe ser potencia de dos, recibido {self.order}")
            if self.rows_selected is None or not 1 <= self.rows_selected <= (self.order or 0):
                errors.append("rows_selected debe estar entre 1 y order")
        return errors

    def to_dict(self) -> Dict[str, Any]:
        return {'kind': self.kind, 'order': self.order, 'rows_selected': self.rows_selected}

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> 'DictionaryKind':
        return cls(kind=data.get('kind', 'unit_hypersphere'),
                   order=data.get('order'), rows_selected=data.get('rows_selected'))


# ═══════════════════════════════════════════════════════════
# EXPERIMENTOS MONTE CARLO
# ═══════════════════════════════════════════════════════════

ALGORITHMS = ("tsbl", "tmsbl", "msbl")


@dataclass
class ExperimentConfig:
    """
    Una rejilla de celdas Monte Carlo y cómo ejecutarla.

    Cada eje es una lista; la rejilla es su producto cartesiano. ``snr_db``
    usa None para "sin ruido". Si ``c_values`` no está vacío sustituye a
    ``beta_values`` (β = sign(C)(1 − 10^−|C|)). Con un diccionario de
    Hadamard, N y M salen de ``dictionary`` y se ignoran ``n``/``m_over_n``.
    """
    experiment_id: str = "custom"
    n: int = 25
    m_over_n: List[float] = field(default_factory=lambda: [5.0])
    l_values: List[int] = field(default_factory=lambda: [4])
    k_values: List[int] = field(default_factory=lambda: [12])
    snr_db: List[Optional[float]] = field(default_factory=lambda: [None])
    beta_values: List[float] = field(default_factory=lambda: [0.9])
    c_values: List[float] = field(default_factory=list)
    orders: List[int] = field(default_factory=lambda: [1])
    source: SourceModel = field(default_factory=SourceModel)
    dictionary: DictionaryKind = field(default_factory=DictionaryKind)
    algorithms: List[str] = field(default_factory=lambda: ["tmsbl", "msbl"])
    trials: int = 200
    master_seed: int = 0
    jobs: int = 1
    solver_overrides: Dict[str, Dict[str, Any]] = field(default_factory=dict)
    include_beta_one: bool = False
    output_dir: str = "outputs"
    timestamp: bool = True

    def validate(self) -> List[str]:
        """
        Returns:
            List[str]: Lista de errores de configuración (vacía si válida)
        """
        errors = []
        if self.trials < 1:
            errors.append("trials debe ser ≥ 1")
        if self.jobs == 0:
            errors.append("jobs no puede ser 0")
        if not self.algorithms:
            errors.append("hay que seleccionar al menos un algoritmo")
        for alg in self.algorithms:
            if alg not in ALGORITHMS:
                errors.append(f"algoritmo desconocido: {alg}")
        for alg in self.solver_overrides:
            if alg not in ALGORITHMS:
                errors.append(f"solver_overrides para algoritmo desconocido: {alg}")
        for axis in ("m_over_n", "l_values", "k_values", "snr_db", "orders"):
            if not getattr(self, axis):
                errors.append(f"el eje {axis} no puede estar vacío")
        if not self.beta_values and not self.c_values:
            errors.append("hace falta beta_values o c_values")
        if self.n < 1:
            errors.append("n debe ser ≥ 1")
        if any(l < 1 for l in self.l_values):
            errors.append("todos los L deben ser ≥ 1")
        if any(k < 1 for k in self.k_values):
            errors.append("todos los K deben ser ≥ 1")
        if any(r < 1 for r in self.m_over_n):
            errors.append("M/N debe ser ≥ 1")
        errors.extend(self.source.validate())
        errors.extend(self.dictionary.validate())
        return errors

    def to_dict(self) -> Dict[str, Any]:
        return {
            'experiment_id': self.experiment_id,
            'n': self.n,
            'm_over_n': list(self.m_over_n),
            'l_values': list(self.l_values),
            'k_values': list(self.k_values),
            'snr_db': list(self.snr_db),
            'beta_values': list(self.beta_values),
            'c_values': list(self.c_values),
            'orders': list(self.orders),
            'source': self.source.to_dict(),
            'dictionary': self.dictionary.to_dict(),
            'algorithms': list(self.algorithms),
            'trials': self.trials,
            'master_seed': self.master_seed,
            'jobs': self.jobs,
            'solver_overrides': {k: dict(v) for k, v in self.solver_overrides.items()},
            'include_beta_one': self.include_beta_one,
            'output_dir': self.output_dir,
            'timestamp': self.timestamp,
        }

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> 'ExperimentConfig':
        """
        Crea una configuración desde un diccionario (p. ej. un JSON cargado).

        Las claves que empiezan por ``_`` (instrucciones de plantilla) se ignoran
        y los campos ausentes toman su valor por defecto.
        """
        defaults = cls()
        return cls(
            experiment_id=data.get('experiment_id', defaults.experiment_id),
            n=int(data.get('n', defaults.n)),
            m_over_n=[float(v) for v in data.get('m_over_n', defaults.m_over_n)],
            l_values=[int(v) for v in data.get('l_values', defaults.l_values)],
            k_values=[int(v) for v in data.get('k_values', defaults.k_values)],
            snr_db=[None if v is None else float(v) for v in data.get('snr_db', defaults.snr_db)],
            beta_values=[float(v) for v in data.get('beta_values', defaults.beta_values)],
            c_values=[float(v) for v in data.get('c_values', defaults.c_values)],
            orders=[int(v) for v in data.get('orders', defaults.orders)],
            source=SourceModel.from_dict(data.get('source') or {}),
            dictionary=DictionaryKind.from_dict(data.get('dictionary') or {}),
            algorithms=list(data.get('algorithms', defaults.algorithms)),
            trials=int(data.get('trials', defaults.trials)),
            master_seed=int(data.get('master_seed', defaults.master_seed)),
            jobs=int(data.get('jobs', defaults.jobs)),
            solver_overrides={k: dict(v) for k, v in (data.get('solver_overrides') or {}).items()},
            include_beta_one=bool(data.get('include_beta_one', defaults.include_beta_one)),
            output_dir=data.get('output_dir', defaults.output_dir),
            timestamp=bool(data.get('timestamp', defaults.timestamp)),
        )


@dataclass(frozen=True)
class GridCell:
    """Una celda de la rejilla: fija completamente la distribución de los problemas."""
    index: int
    n: int
    m: int
    l: int
    k: int
    snr_db: float
    beta: float
    c: Optional[float] = None
    order: int = 1

    @property
    def noiseless(self) -> bool:
        return math.isinf(self.snr_db)

    def axes(self) -> Dict[str, Any]:
        """Identificadores de celda tal como aparecen en los CSV."""
        return {
            'cell': self.index,
            'n': self.n,
            'm': self.m,
            'l': self.l,
            'k': self.k,
            'snr_db': None if self.noiseless else self.snr_db,
            'beta': self.beta,
            'c': self.c,
            'order': self.order,
        }


@dataclass
class TrialRecord:
    """Métricas de un algoritmo en un ensayo de una celda."""
    cell: GridCell
    trial: int
    algorithm: str
    failure: bool
    mse: float
    iterations: int = 0
    wall_ms: float = 0.0
    gamma_card: int = 0
    converged: bool = False
    source_cond: float = math.nan
    error_tag: str = ""

    def key(self) -> Tuple[int, int, int]:
        return (self.cell.index, self.trial, ALGORITHMS.index(self.algorithm))

    def to_dict(self) -> Dict[str, Any]:
        row = self.cell.axes()
        row.update({
            'trial': self.trial,
            'algorithm': self.algorithm,
            'failure': int(self.failure),
            'mse': self.mse,
            'iterations': self.iterations,
            'wall_ms': self.wall_ms,
            'gamma_card': self.gamma_card,
            'converged': int(self.converged),
            'source_cond': self.source_cond,
            'error_tag': self.error_tag,
        })
        return row
