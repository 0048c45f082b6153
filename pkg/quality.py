"""
Curva de calidad del servicio: precisión del modelo en función de las
unidades de datos compradas, q(n) = alpha1 - alpha2·exp(-alpha3·n).

Incluye el ajuste por mínimos cuadrados (proyección de variables sobre
alpha3), el generador de muestras sintéticas y la lectura/escritura del
CSV de muestras.
"""

import logging
from dataclasses import dataclass
from pathlib import Path
from typing import List, Sequence, Tuple, Union

import numpy as np
import pandas as pd

from config import FIT_CONFIG
from errors import DomainError, SampleFormatError, UnderdeterminedFitError
from numopt import golden_section_maximize
from report import write_csv

logger = logging.getLogger(__name__)

ArrayLike = Union[float, np.ndarray]


@dataclass(frozen=True)
class QualityCurve:
    """Parámetros (alpha1, alpha2, alpha3) de la curva de precisión."""
    alpha1: float
    alpha2: float
    alpha3: float

    def __post_init__(self):
        if not 0 < self.alpha1 <= 1:
            raise DomainError(f"alpha1 debe estar en (0, 1], se recibió {self.alpha1}")
        if not 0 <= self.alpha2 < self.alpha1:
            raise DomainError(f"alpha2 debe estar en [0, alpha1), se recibió {self.alpha2}")
        if not self.alpha3 > 0:
            raise DomainError(f"alpha3 debe ser positivo, se recibió {self.alpha3}")

    @property
    def floor(self) -> float:
        """Calidad sin datos, q(0)."""
        return self.alpha1 - self.alpha2


@dataclass(frozen=True)
class AccuracySample:
    """Un punto experimental (tamaño de datos, precisión medida)."""
    n: float
    accuracy: float

    def __post_init__(self):
        if not self.n >= 0:
            raise DomainError(f"El tamaño de datos debe ser >= 0, se recibió {self.n}")
        if not 0 <= self.accuracy <= 1:
            raise DomainError(f"La precisión debe estar en [0, 1], se recibió {self.accuracy}")


@dataclass(frozen=True)
class FitResult:
    """Resultado del ajuste: curva, error cuadrático medio y bandera de datos planos."""
    curve: QualityCurve
    residual: float
    degenerate: bool = False


def _as_output(value: np.ndarray) -> ArrayLike:
    return float(value) if np.ndim(value) == 0 else value


def _checked_sizes(n: ArrayLike) -> np.ndarray:
    n = np.asarray(n, dtype=float)
    if np.any(n < 0) or np.any(np.isnan(n)):
        raise DomainError(f"El tamaño de datos debe ser >= 0 (se recibió {n})")
    return n


def evaluate(curve: QualityCurve, n: ArrayLike) -> ArrayLike:
    """Calidad q(n). Acepta escalares o arreglos de numpy."""
    n = _checked_sizes(n)
    return _as_output(curve.alpha1 - curve.alpha2 * np.exp(-curve.alpha3 * n))


def marginal(curve: QualityCurve, n: ArrayLike) -> ArrayLike:
    """Derivada q'(n) = alpha2·alpha3·exp(-alpha3·n)."""
    n = _checked_sizes(n)
    return _as_output(curve.alpha2 * curve.alpha3 * np.exp(-curve.alpha3 * n))


def curvature(curve: QualityCurve, n: ArrayLike) -> ArrayLike:
    """Segunda derivada q''(n), nunca positiva."""
    n = _checked_sizes(n)
    return _as_output(-curve.alpha2 * curve.alpha3 ** 2 * np.exp(-curve.alpha3 * n))


def _constrained_projection(basis: np.ndarray, y: np.ndarray) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    """
    Mínimos cuadrados en (alpha1, alpha2) para cada fila de `basis`
    (exp(-alpha3·n) de un alpha3 fijo), restringido a 0 < alpha1 <= 1 y
    0 <= alpha2 <= alpha1.

    El óptimo de una cuadrática convexa en ese triángulo está en su interior
    o sobre una de sus tres aristas, así que basta con evaluar los cuatro
    candidatos y quedarse con el factible de menor error.

    Returns:
        (alpha1, alpha2, sse), cada uno con una entrada por fila
    """
    tiny = 1e-12
    e = basis
    y_mean = y.mean()
    e_mean = e.mean(axis=1, keepdims=True)
    e_centered = e - e_mean
    sxx = np.sum(e_centered ** 2, axis=1)
    sxy = np.sum(e_centered * (y - y_mean), axis=1)

    with np.errstate(divide="ignore", invalid="ignore"):
        slope = np.where(sxx > 0, sxy / sxx, np.nan)
    free_a2 = -slope
    free_a1 = y_mean - slope * e_mean[:, 0]

    # Aristas: alpha2 = 0, alpha1 = 1, alpha2 = alpha1
    flat_a1 = np.full(e.shape[0], np.clip(y_mean, tiny, 1.0))
    flat_a2 = np.zeros(e.shape[0])

    with np.errstate(divide="ignore", invalid="ignore"):
        top_a2 = np.clip(np.sum((1.0 - y) * e, axis=1) / np.sum(e ** 2, axis=1), 0.0, 1.0)
    top_a1 = np.ones(e.shape[0])

    growth = 1.0 - e
    with np.errstate(divide="ignore", invalid="ignore"):
        tied = np.sum(y * growth, axis=1) / np.sum(growth ** 2, axis=1)
    tied_a1 = np.clip(np.nan_to_num(tied, nan=tiny), tiny, 1.0)
    tied_a2 = tied_a1.copy()

    candidates_a1 = np.stack([free_a1, flat_a1, top_a1, tied_a1])
    candidates_a2 = np.stack([free_a2, flat_a2, top_a2, tied_a2])
    feasible = ((candidates_a1 > 0) & (candidates_a1 <= 1)
                & (candidates_a2 >= 0) & (candidates_a2 <= candidates_a1))
    feasible &= np.isfinite(candidates_a1) & np.isfinite(candidates_a2)

    residuals = y[None, None, :] - candidates_a1[:, :, None] + candidates_a2[:, :, None] * e[None, :, :]
    sse = np.where(feasible, np.sum(residuals ** 2, axis=2), np.inf)

    pick = np.argmin(sse, axis=0)
    rows = np.arange(e.shape[0])
    return candidates_a1[pick, rows], candidates_a2[pick, rows], sse[pick, rows]


def fit(samples: Sequence[AccuracySample]) -> FitResult:
    """
    Ajusta la curva de calidad minimizando el error cuadrático medio.

    Para alpha3 fijo el modelo es lineal en (alpha1, alpha2); se resuelve
    ese subproblema en forma cerrada sobre una rejilla log-espaciada de
    alpha3 y se refina con sección áurea entre los vecinos del mejor punto.

    Args:
        samples: Puntos (n, precisión) medidos

    Returns:
        FitResult con la curva, el error medio y la bandera de ajuste degenerado

    Raises:
        UnderdeterminedFitError: menos de tres tamaños distintos
        DomainError: todas las precisiones son cero (no existe alpha1 > 0)
    """
    n = np.array([s.n for s in samples], dtype=float)
    y = np.array([s.accuracy for s in samples], dtype=float)
    distinct = np.unique(n).size
    if distinct < FIT_CONFIG['min_distinct_sizes']:
        raise UnderdeterminedFitError(
            f"Se necesitan al menos {FIT_CONFIG['min_distinct_sizes']} tamaños distintos, hay {distinct}"
        )

    lower, upper = FIT_CONFIG['alpha3_lower'], FIT_CONFIG['alpha3_upper']
    if np.ptp(y) == 0:
        if y[0] <= 0:
            raise DomainError("Precisiones constantes en cero: no existe una curva con alpha1 > 0")
        logger.warning(f"⚠️ Precisión constante ({y[0]:.6g}): ajuste degenerado con alpha2=0")
        return FitResult(QualityCurve(float(y[0]), 0.0, lower), 0.0, degenerate=True)

    grid = np.geomspace(lower, upper, FIT_CONFIG['alpha3_grid_points'])
    a1, a2, sse = _constrained_projection(np.exp(-np.outer(grid, n)), y)
    best = int(np.argmin(sse))
    alpha3, best_a1, best_a2, best_sse = grid[best], a1[best], a2[best], sse[best]

    def neg_sse(a3: float) -> float:
        return -float(_constrained_projection(np.exp(-a3 * n)[None, :], y)[2][0])

    lo, hi = grid[max(best - 1, 0)], grid[min(best + 1, grid.size - 1)]
    refined_a3, refined_neg = golden_section_maximize(neg_sse, lo, hi, tol=FIT_CONFIG['refine_tol'])
    if -refined_neg <= best_sse:
        r_a1, r_a2, r_sse = _constrained_projection(np.exp(-refined_a3 * n)[None, :], y)
        alpha3, best_a1, best_a2, best_sse = refined_a3, r_a1[0], r_a2[0], r_sse[0]

    alpha1, alpha2 = float(best_a1), float(best_a2)
    if alpha2 >= alpha1:
        alpha2 = float(np.nextafter(alpha1, 0.0))

    curve = QualityCurve(alpha1, alpha2, float(alpha3))
    residual = float(best_sse) / n.size
    logger.info(f"✅ Curva ajustada: alpha=({alpha1:.6g}, {alpha2:.6g}, {alpha3:.6g}), MSE={residual:.3g}")
    return FitResult(curve, residual)


def generate_synthetic(curve: QualityCurve, sizes: Sequence[float], noise_sd: float,
                       seed: int) -> List[AccuracySample]:
    """Muestras sobre la curva con ruido gaussiano aditivo, recortadas a [0, 1]."""
    if noise_sd < 0:
        raise DomainError(f"noise_sd debe ser >= 0, se recibió {noise_sd}")
    sizes = _checked_sizes(sizes).ravel()
    if sizes.size == 0:
        raise DomainError("Se necesita al menos un tamaño de datos")

    rng = np.random.default_rng(seed)
    noise = rng.normal(0.0, noise_sd, size=sizes.size)
    accuracy = np.clip(curve.alpha1 - curve.alpha2 * np.exp(-curve.alpha3 * sizes) + noise, 0.0, 1.0)
    return [AccuracySample(float(n), float(a)) for n, a in zip(sizes, accuracy)]


def read_samples_csv(path: Union[str, Path]) -> List[AccuracySample]:
    """
    Lee el CSV de muestras (encabezado `n,accuracy`).

    Raises:
        SampleFormatError: archivo vacío, encabezado distinto o fila inválida,
            con el número de línea del archivo
    """
    try:
        frame = pd.read_csv(path, dtype=str, keep_default_na=False, skipinitialspace=True)
    except FileNotFoundError as e:
        raise SampleFormatError(f"No existe el archivo de muestras: {path}") from e
    except pd.errors.EmptyDataError as e:
        raise SampleFormatError("archivo vacío", line=1) from e
    except pd.errors.ParserError as e:
        raise SampleFormatError(f"CSV mal formado: {e}") from e

    columns = [str(col).strip() for col in frame.columns]
    if columns != ["n", "accuracy"]:
        raise SampleFormatError(f"encabezado esperado 'n,accuracy', se encontró '{','.join(columns)}'", line=1)
    if frame.empty:
        raise SampleFormatError("el archivo no contiene muestras", line=2)

    samples = []
    for offset, (n_text, acc_text) in enumerate(frame.itertuples(index=False, name=None)):
        line = offset + 2
        try:
            samples.append(AccuracySample(float(n_text), float(acc_text)))
        except (TypeError, ValueError) as e:
            raise SampleFormatError(f"fila inválida ({n_text!r}, {acc_text!r}): {e}", line=line) from e
    logger.info(f"📊 {len(samples)} muestras leídas de {path}")
    return samples


def write_samples_csv(samples: Sequence[AccuracySample], path: Union[str, Path]) -> None:
    """Escribe las muestras con 9 dígitos significativos y fin de línea LF."""
    frame = pd.DataFrame({"n": [s.n for s in samples], "accuracy": [s.accuracy for s in samples]})
    write_csv(frame, path)
