"""
Primitivas numéricas deterministas compartidas por todos los solucionadores.
Bisección con intervalo, búsqueda de sección áurea, rejilla exhaustiva con
pulido local y diferencias finitas. Sirven de oráculo independiente para
cada solución cerrada.

Todas las funciones objetivo se invocan como f(*punto); para la rejilla se
llaman con arreglos de numpy, así que deben admitir broadcasting.
"""

import math
import logging
from dataclasses import dataclass
from typing import Callable, List, Optional, Sequence, Tuple

import numpy as np

from errors import BracketError, DomainError

logger = logging.getLogger(__name__)

INV_PHI = (math.sqrt(5) - 1) / 2  # 1 / phi
INV_PHI_SQUARE = (3 - math.sqrt(5)) / 2  # 1 / phi^2


@dataclass(frozen=True)
class Bracket:
    """Intervalo [lo, hi] con cambio de signo de la función."""
    lo: float
    hi: float

    def __post_init__(self):
        if not self.lo < self.hi:
            raise DomainError(f"Intervalo inválido: lo={self.lo} debe ser menor que hi={self.hi}")


@dataclass(frozen=True)
class GridSpec:
    """Rejilla rectangular: un (inferior, superior, puntos) por dimensión."""
    axes: Tuple[Tuple[float, float, int], ...]

    def __post_init__(self):
        if not 1 <= len(self.axes) <= 3:
            raise DomainError(f"La rejilla admite 1 a 3 dimensiones, se recibieron {len(self.axes)}")
        for lower, upper, count in self.axes:
            if not lower < upper:
                raise DomainError(f"Límites de rejilla inválidos: {lower} >= {upper}")
            if count < 2:
                raise DomainError(f"Cada dimensión necesita al menos 2 puntos (recibido {count})")

    @property
    def lower(self) -> np.ndarray:
        return np.array([a[0] for a in self.axes], dtype=float)

    @property
    def upper(self) -> np.ndarray:
        return np.array([a[1] for a in self.axes], dtype=float)

    @property
    def steps(self) -> np.ndarray:
        return np.array([(hi - lo) / (count - 1) for lo, hi, count in self.axes], dtype=float)

    def points(self) -> List[np.ndarray]:
        return [np.linspace(lo, hi, count) for lo, hi, count in self.axes]


def bisect(f: Callable[[float], float], bracket: Bracket, tol: float = 1e-10) -> float:
    """
    Encuentra una raíz de f por bisección.

    Args:
        f: Función continua en el intervalo
        bracket: Intervalo con f(lo)·f(hi) <= 0
        tol: Ancho máximo del intervalo final

    Returns:
        Punto medio del intervalo final (o una raíz exacta si se encuentra antes)

    Raises:
        BracketError: si no hay cambio de signo en el intervalo
    """
    lo, hi = float(bracket.lo), float(bracket.hi)
    f_lo, f_hi = f(lo), f(hi)
    if f_lo == 0:
        return lo
    if f_hi == 0:
        return hi
    if (f_lo < 0) == (f_hi < 0):
        raise BracketError(f"Sin cambio de signo en [{lo}, {hi}]: f(lo)={f_lo}, f(hi)={f_hi}")

    iterations = max(0, math.ceil(math.log2((hi - lo) / tol)))
    for _ in range(iterations):
        mid = 0.5 * (lo + hi)
        f_mid = f(mid)
        if f_mid == 0:
            return mid
        if (f_mid < 0) == (f_lo < 0):
            lo, f_lo = mid, f_mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


def golden_section_maximize(f: Callable[[float], float], lo: float, hi: float,
                            tol: float = 1e-10) -> Tuple[float, float]:
    """
    Búsqueda de sección áurea para el máximo de una función unimodal en [lo, hi].
    Los extremos se evalúan al final para capturar máximos en la frontera.

    Returns:
        (argmax, máximo)
    """
    a, b = min(lo, hi), max(lo, hi)
    h = b - a
    if h <= tol:
        x = 0.5 * (a + b)
        return x, f(x)

    steps = int(math.ceil(math.log(tol / h) / math.log(INV_PHI)))
    c = a + INV_PHI_SQUARE * h
    d = a + INV_PHI * h
    yc = f(c)
    yd = f(d)
    for _ in range(steps - 1):
        if yc > yd:
            b, d, yd = d, c, yc
            h = INV_PHI * h
            c = a + INV_PHI_SQUARE * h
            yc = f(c)
        else:
            a, c, yc = c, d, yd
            h = INV_PHI * h
            d = a + INV_PHI * h
            yd = f(d)

    best_x, best_y = (c, yc) if yc >= yd else (d, yd)
    for edge in (lo, hi):
        y_edge = f(edge)
        if y_edge > best_y:
            best_x, best_y = edge, y_edge
    return best_x, best_y


def coordinate_ascent(f: Callable[..., float], x0: Sequence[float], lower: Sequence[float],
                      upper: Sequence[float], widths: Sequence[float], tol: float = 1e-10,
                      max_sweeps: int = 200) -> Tuple[np.ndarray, float]:
    """
    Ascenso por coordenadas con sección áurea en una ventana alrededor del punto
    actual, proyectado sobre la caja [lower, upper]. Solo acepta mejoras, de modo
    que el valor final nunca es peor que f(x0).

    Args:
        widths: Semiancho inicial de la ventana por coordenada (p. ej. el paso de la rejilla)
        tol: Movimiento máximo por barrido que declara convergencia
        max_sweeps: Número máximo de barridos completos
    """
    x = np.array(x0, dtype=float)
    lower = np.asarray(lower, dtype=float)
    upper = np.asarray(upper, dtype=float)
    window = np.array(widths, dtype=float)
    min_window = 1e3 * tol
    fx = float(f(*x))

    for sweep in range(max_sweeps):
        max_move = 0.0
        f_start = fx
        for i in range(x.size):
            a = max(lower[i], x[i] - window[i])
            b = min(upper[i], x[i] + window[i])
            if b <= a:
                continue

            def along(t, i=i):
                y = x.copy()
                y[i] = t
                return float(f(*y))

            t, ft = golden_section_maximize(along, a, b, tol=tol)
            if ft > fx:
                move = abs(t - x[i])
                x[i], fx = t, ft
                max_move = max(max_move, move)
                if move >= 0.9 * window[i]:
                    window[i] *= 2.0
                else:
                    window[i] = max(4.0 * move, min_window)
            else:
                window[i] = max(0.5 * window[i], min_window)
        # mejoras por debajo del redondeo no cuentan como avance
        if max_move <= tol or fx - f_start <= 1e-15 * max(1.0, abs(fx)):
            logger.debug(f"Ascenso por coordenadas convergió en {sweep + 1} barridos")
            break
    return x, fx


def grid_polish_maximize(f: Callable[..., float], grid: GridSpec, polish_iters: int = 200,
                         tol: float = 1e-10) -> Tuple[np.ndarray, float]:
    """
    Maximiza f por fuerza bruta en la rejilla y pule el mejor punto con
    ascenso por coordenadas dentro de la caja de la rejilla.

    El empate entre puntos de la rejilla se resuelve a favor del primer
    multi-índice (orden C), así que el resultado es determinista.

    Returns:
        (argmax, máximo)
    """
    axes = grid.points()
    mesh = np.meshgrid(*axes, indexing="ij")
    with np.errstate(all="ignore"):
        values = np.asarray(f(*mesh), dtype=float)
    values = np.broadcast_to(values, mesh[0].shape)
    values = np.where(np.isnan(values), -np.inf, values)

    index = np.unravel_index(int(np.argmax(values)), values.shape)
    x0 = np.array([axes[k][index[k]] for k in range(len(axes))], dtype=float)
    best = float(values[index])
    logger.debug(f"🔍 Rejilla {values.shape}: mejor punto {x0.tolist()} con valor {best:.9g}")

    if polish_iters <= 0 or not np.isfinite(best):
        return x0, best
    return coordinate_ascent(f, x0, grid.lower, grid.upper, grid.steps, tol=tol,
                             max_sweeps=polish_iters)


def finite_diff_grad(f: Callable[..., float], x: Sequence[float], h: float = 1e-5) -> np.ndarray:
    """Gradiente por diferencias centrales, una coordenada a la vez."""
    if h <= 0:
        raise DomainError(f"El paso h debe ser positivo (recibido {h})")
    x = np.asarray(x, dtype=float)
    grad = np.zeros(x.size)
    for j in range(x.size):
        xp, xm = x.copy(), x.copy()
        xp[j] += h
        xm[j] -= h
        grad[j] = (float(f(*xp)) - float(f(*xm))) / (2 * h)
    return grad


def finite_diff_hessian(f: Callable[..., float], x: Sequence[float], h: float = 1e-4) -> np.ndarray:
    """Hessiana por diferencias centrales, simetrizada."""
    if h <= 0:
        raise DomainError(f"El paso h debe ser positivo (recibido {h})")
    x = np.asarray(x, dtype=float)
    d = x.size
    f0 = float(f(*x))
    hess = np.zeros((d, d))

    def at(offsets):
        y = x.copy()
        for k, s in offsets:
            y[k] += s * h
        return float(f(*y))

    for i in range(d):
        hess[i, i] = (at([(i, 1)]) - 2 * f0 + at([(i, -1)])) / h ** 2
        for j in range(i + 1, d):
            value = (at([(i, 1), (j, 1)]) - at([(i, 1), (j, -1)])
                     - at([(i, -1), (j, 1)]) + at([(i, -1), (j, -1)])) / (4 * h ** 2)
            hess[i, j] = hess[j, i] = value
    return hess


def is_negative_semidefinite(hessian: np.ndarray, tol: float = 1e-6) -> bool:
    """True si todos los autovalores de la parte simétrica son <= tol."""
    sym = 0.5 * (hessian + hessian.T)
    return bool(np.all(np.linalg.eigvalsh(sym) <= tol))


def projected_gradient_norm(f: Callable[..., float], x: Sequence[float], lower: Sequence[float],
                            h: float = 1e-6, upper: Optional[Sequence[float]] = None) -> float:
    """
    Residuo KKT de un máximo con cotas: norma infinito del gradiente
    proyectado. En una cota se usa una diferencia de segundo orden hacia
    dentro y se anulan las componentes que empujan fuera de la región
    factible. Una coordenada con intervalo más corto que 2h se toma fija.
    """
    x = np.asarray(x, dtype=float)
    lower = np.asarray(lower, dtype=float)
    upper = np.full(x.size, np.inf) if upper is None else np.asarray(upper, dtype=float)
    grad = np.zeros(x.size)
    for j in range(x.size):
        def along(t, j=j):
            y = x.copy()
            y[j] = t
            return float(f(*y))

        if upper[j] - lower[j] < 2 * h:
            continue
        if x[j] - h < lower[j]:
            grad[j] = (-3 * along(x[j]) + 4 * along(x[j] + h) - along(x[j] + 2 * h)) / (2 * h)
            if grad[j] < 0:
                grad[j] = 0.0
        elif x[j] + h > upper[j]:
            grad[j] = (3 * along(x[j]) - 4 * along(x[j] - h) + along(x[j] - 2 * h)) / (2 * h)
            if grad[j] > 0:
                grad[j] = 0.0
        else:
            grad[j] = (along(x[j] + h) - along(x[j] - h)) / (2 * h)
    return float(np.max(np.abs(grad))) if grad.size else 0.0
