"""
Excepciones del paquete mmvsbl.

Cada condición de error que puede señalar una operación del paquete tiene
su propia clase, todas derivadas de MmvSblError, de modo que el ejecutor de
experimentos puede capturar cualquier fallo de un ensayo con un único
``except MmvSblError`` y registrar el nombre de la clase como etiqueta.
"""

import numpy as np


class MmvSblError(Exception):
    """Raíz de todas las excepciones del paquete."""


class InvalidProblemError(MmvSblError, ValueError):
    """Dimensiones o precondiciones de un problema MMV violadas."""


class DimensionOverflowError(MmvSblError):
    """El diccionario expandido Φ ⊗ I_L supera el tamaño máximo permitido."""


class NotPositiveDefiniteError(MmvSblError, np.linalg.LinAlgError):
    """Una matriz que debía ser simétrica definida positiva no lo es."""


class AllPrunedError(MmvSblError):
    """Todos los hiperparámetros γ_i han sido podados."""


class SingularBError(MmvSblError):
    """La matriz B̃ acumulada sin regularizar no es invertible."""


class UnstableProcessError(MmvSblError, ValueError):
    """Coeficientes AR inestables o muestreo por rechazo agotado."""


class InvalidDictionaryError(MmvSblError, ValueError):
    """Parámetros de diccionario inválidos (orden de Hadamard, filas)."""


class ZeroSignalError(MmvSblError, ValueError):
    """Se pidió un SNR finito para una señal limpia idénticamente nula."""


class InconsistentSystemError(MmvSblError):
    """El sistema restringido al soporte no reproduce las medidas."""


class EmptyRecordsError(MmvSblError, ValueError):
    """No hay registros que agregar (o una celda del experimento quedó vacía)."""


class ConfigError(MmvSblError, ValueError):
    """Configuración de experimento inválida."""
