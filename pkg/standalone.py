"""
Mercado de un proveedor que vende su servicio por separado.
La disposición a pagar θ es uniforme en [0, 1] y el cliente se suscribe
si θ·q(n) >= ps.
"""

import logging
import math
from dataclasses import dataclass
from typing import Union

import numpy as np

from errors import DomainError
from quality import QualityCurve, curvature, evaluate, marginal

logger = logging.getLogger(__name__)

ArrayLike = Union[float, np.ndarray]


@dataclass(frozen=True)
class StandaloneMarket:
    """Instancia del problema: clientes M, costo por unidad de datos c y curva de calidad."""
    customers: int
    cost: float
    curve: QualityCurve

    def __post_init__(self):
        if self.customers < 1:
            raise DomainError(f"M debe ser >= 1, se recibió {self.customers}")
        if not self.cost > 0:
            raise DomainError(f"c debe ser positivo, se recibió {self.cost}")


@dataclass(frozen=True)
class StandaloneSolution:
    n_star: float
    ps_star: float
    profit: float
    interior: bool
    quality: float


def _check_nonnegative(**values: ArrayLike) -> None:
    for name, value in values.items():
        array = np.asarray(value, dtype=float)
        if np.any(array < 0) or np.any(np.isnan(array)):
            raise DomainError(f"{name} debe ser >= 0 (se recibió {value})")


def demand(market: StandaloneMarket, ps: ArrayLike, n: ArrayLike) -> ArrayLike:
    """Probabilidad de suscripción P(θ·q(n) >= ps), recortada a [0, 1]."""
    _check_nonnegative(ps=ps, n=n)
    q = np.asarray(evaluate(market.curve, n))
    result = np.clip(1.0 - np.asarray(ps, dtype=float) / q, 0.0, 1.0)
    return float(result) if np.ndim(result) == 0 else result


def profit(market: StandaloneMarket, ps: ArrayLike, n: ArrayLike) -> ArrayLike:
    """Beneficio M·ps·P(suscripción) - n·c. Acepta arreglos para las rejillas."""
    share = demand(market, ps, n)
    value = market.customers * np.asarray(ps, dtype=float) * share - np.asarray(n, dtype=float) * market.cost
    return float(value) if np.ndim(value) == 0 else value


def hessian(market: StandaloneMarket, ps: float, n: float) -> np.ndarray:
    """
    Hessiana analítica del beneficio en (ps, n) dentro de la región ps <= q(n).
    """
    _check_nonnegative(ps=ps, n=n)
    M = market.customers
    q = evaluate(market.curve, n)
    dq = marginal(market.curve, n)
    d2q = curvature(market.curve, n)
    f_pp = -2.0 * M / q
    f_pn = 2.0 * M * ps * dq / q ** 2
    f_nn = M * ps ** 2 * (d2q / q ** 2 - 2.0 * dq ** 2 / q ** 3)
    return np.array([[f_pp, f_pn], [f_pn, f_nn]])


def feasibility_threshold(market: StandaloneMarket) -> float:
    """Mayor costo por unidad de datos que admite un óptimo interior."""
    curve = market.curve
    return min(market.customers * curve.alpha1 * curve.alpha3,
               market.customers * curve.alpha2 * curve.alpha3) / 4.0


def optimize_closed_form(market: StandaloneMarket) -> StandaloneSolution:
    """
    Óptimo en forma cerrada a partir de las condiciones KKT.

    Si M·alpha1·alpha3 > 4c y M·alpha2·alpha3 > 4c el óptimo es interior:
        n* = ln(M·alpha2·alpha3 / 4c) / alpha3
        ps* = (M·alpha1·alpha3 - 4c) / (2·M·alpha3) = q(n*) / 2
    En otro caso el máximo está en la frontera n = 0, ps = q(0)/2.
    """
    M, c, curve = market.customers, market.cost, market.curve
    interior = M * curve.alpha1 * curve.alpha3 > 4 * c and M * curve.alpha2 * curve.alpha3 > 4 * c

    if interior:
        n_star = math.log(M * curve.alpha2 * curve.alpha3 / (4 * c)) / curve.alpha3
        ps_star = (M * curve.alpha1 * curve.alpha3 - 4 * c) / (2 * M * curve.alpha3)
    else:
        logger.warning(f"⚠️ c={c:.6g} supera el umbral {feasibility_threshold(market):.6g}: "
                       f"se usa la solución de frontera n=0")
        n_star = 0.0
        ps_star = curve.floor / 2.0

    solution = StandaloneSolution(
        n_star=n_star,
        ps_star=ps_star,
        profit=profit(market, ps_star, n_star),
        interior=interior,
        quality=evaluate(curve, n_star),
    )
    logger.info(f"✅ Óptimo independiente: n*={n_star:.6g}, ps*={ps_star:.6g}, beneficio={solution.profit:.6g}")
    return solution
