"""
Coalición de dos proveedores que venden un paquete a una sola tarifa pb.

Un cliente con disposiciones a pagar (θ1, θ2), uniformes e independientes
en [0, 1], se suscribe si θ1·q1 + θ2·q2 >= pb. La región de suscripción
dentro del cuadrado unitario tiene cuatro geometrías (casos 1 a 4) según
cómo se compara pb con q1 y q2.
"""

import logging
import math
from dataclasses import dataclass
from enum import IntEnum
from typing import Iterable, List, Optional, Tuple, Union

import numpy as np

from config import SOLVER_CONFIG
from errors import BracketError, DegenerateMarketError, DomainError
from numopt import Bracket, GridSpec, bisect, coordinate_ascent, grid_polish_maximize, projected_gradient_norm
from quality import QualityCurve, evaluate, marginal
from standalone import StandaloneMarket

logger = logging.getLogger(__name__)

ArrayLike = Union[float, np.ndarray]


class DemandCase(IntEnum):
    """Geometrías de demanda del paquete."""
    CASE_1 = 1  # pb <= min(q1, q2)
    CASE_2 = 2  # q2 <= pb <= q1
    CASE_3 = 3  # q1 <= pb <= q2
    CASE_4 = 4  # max(q1, q2) <= pb <= q1 + q2


@dataclass(frozen=True)
class BundleMarket:
    """Clientes M y, por servicio, costo por unidad de datos y curva de calidad."""
    customers: int
    cost1: float
    curve1: QualityCurve
    cost2: float
    curve2: QualityCurve

    def __post_init__(self):
        if self.customers < 1:
            raise DomainError(f"M debe ser >= 1, se recibió {self.customers}")
        for name, cost in (("c1", self.cost1), ("c2", self.cost2)):
            if not cost > 0:
                raise DomainError(f"{name} debe ser positivo, se recibió {cost}")

    def service(self, index: int) -> StandaloneMarket:
        """Mercado independiente del servicio 1 o 2."""
        if index == 1:
            return StandaloneMarket(self.customers, self.cost1, self.curve1)
        if index == 2:
            return StandaloneMarket(self.customers, self.cost2, self.curve2)
        raise DomainError(f"Servicio inexistente: {index}")

    def swapped(self) -> "BundleMarket":
        """El mismo mercado con los servicios intercambiados."""
        return BundleMarket(self.customers, self.cost2, self.curve2, self.cost1, self.curve1)


@dataclass(frozen=True)
class ReservationPricePair:
    """Disposiciones a pagar (θ1, θ2) de un cliente."""
    theta1: float
    theta2: float

    def __post_init__(self):
        for name, theta in (("theta1", self.theta1), ("theta2", self.theta2)):
            if not 0 <= theta <= 1:
                raise DomainError(f"{name} debe estar en [0, 1], se recibió {theta}")

    def subscribes(self, q1: float, q2: float, pb: float) -> bool:
        return self.theta1 * q1 + self.theta2 * q2 >= pb


@dataclass(frozen=True)
class BundleSolution:
    """
    Óptimo restringido a un caso de demanda. Un caso sin solución se
    devuelve con feasible=False y valores NaN, nunca como excepción.
    """
    case: DemandCase
    pb_star: float
    n1_star: float
    n2_star: float
    profit: float
    kkt_residual: float
    feasible: bool = True
    on_boundary: bool = False
    in_region: bool = True
    reason: str = ""

    @classmethod
    def infeasible(cls, case: DemandCase, reason: str) -> "BundleSolution":
        nan = float("nan")
        return cls(case, nan, nan, nan, nan, nan, feasible=False, in_region=False, reason=reason)


@dataclass(frozen=True)
class MarketSplit:
    """Fracciones de clientes bajo venta separada y bajo el paquete."""
    both: float
    only_service1: float
    only_service2: float
    neither: float
    bundle: float


@dataclass(frozen=True)
class PrintedClosedForm:
    """Constante A3 y valores de la forma cerrada impresa del caso 1."""
    a3: float
    pb: float
    n1: float
    n2: float


@dataclass(frozen=True)
class DiscrepancyReport:
    printed: PrintedClosedForm
    solution: BundleSolution
    pb_gap: float
    mismatch: bool

    def lines(self) -> List[Tuple[str, object]]:
        return [
            ("printed_a3", self.printed.a3),
            ("printed_pb", self.printed.pb),
            ("printed_n1", self.printed.n1),
            ("printed_n2", self.printed.n2),
            ("kkt_pb", self.solution.pb_star),
            ("pb_gap", self.pb_gap),
            ("closed_form_mismatch", self.mismatch),
        ]


def _as_output(value: np.ndarray) -> ArrayLike:
    return float(value) if np.ndim(value) == 0 else value


def demand_probability(q1: ArrayLike, q2: ArrayLike, pb: ArrayLike) -> ArrayLike:
    """
    P(θ1·q1 + θ2·q2 >= pb) con θ1, θ2 uniformes en [0, 1]: el área de la
    región de suscripción dentro del cuadrado unitario.

    Raises:
        DomainError: si q1 o q2 no son positivos o pb es negativo
    """
    q1, q2, pb = np.broadcast_arrays(*(np.asarray(v, dtype=float) for v in (q1, q2, pb)))
    if np.any(q1 <= 0) or np.any(q2 <= 0):
        raise DomainError("q1 y q2 deben ser positivos")
    if np.any(pb < 0) or np.any(np.isnan(pb)):
        raise DomainError("pb debe ser >= 0")

    low = np.minimum(q1, q2)
    high = np.maximum(q1, q2)
    total = q1 + q2
    corner = 1.0 - pb ** 2 / (2.0 * q1 * q2)
    strip = 1.0 - (2.0 * pb - low) / (2.0 * high)
    tail = (total - pb) ** 2 / (2.0 * q1 * q2)
    result = np.select([pb <= low, pb <= high, pb <= total], [corner, strip, tail], default=0.0)
    return _as_output(np.clip(result, 0.0, 1.0))


def classify_case(q1: float, q2: float, pb: float) -> DemandCase:
    """Caso de demanda de la tarifa pb; en las fronteras gana el menor id."""
    if pb <= min(q1, q2):
        return DemandCase.CASE_1
    if q2 <= pb <= q1:
        return DemandCase.CASE_2
    if q1 <= pb <= q2:
        return DemandCase.CASE_3
    return DemandCase.CASE_4


def _check_nonnegative(**values: ArrayLike) -> None:
    for name, value in values.items():
        array = np.asarray(value, dtype=float)
        if np.any(array < 0) or np.any(np.isnan(array)):
            raise DomainError(f"{name} debe ser >= 0 (se recibió {value})")


def profit(market: BundleMarket, pb: ArrayLike, n1: ArrayLike, n2: ArrayLike) -> ArrayLike:
    """Beneficio del paquete M·pb·P(suscripción) - n1·c1 - n2·c2."""
    _check_nonnegative(pb=pb, n1=n1, n2=n2)
    q1 = evaluate(market.curve1, n1)
    q2 = evaluate(market.curve2, n2)
    pb = np.asarray(pb, dtype=float)
    value = (market.customers * pb * demand_probability(q1, q2, pb)
             - np.asarray(n1, dtype=float) * market.cost1 - np.asarray(n2, dtype=float) * market.cost2)
    return _as_output(value)


def case_profile(market: BundleMarket, case: DemandCase, n1: ArrayLike, n2: ArrayLike) -> Tuple[ArrayLike, ArrayLike]:
    """
    Beneficio con la tarifa óptima del caso para (n1, n2) dados.

    En cada caso el ingreso es un polinomio en pb con maximizador explícito,
    recortado al intervalo del caso:
        caso 1: pb = sqrt(2·q1·q2/3) en [0, min(q1, q2)]
        caso 2: pb = (2·q1 + q2)/4 en [q2, q1]
        caso 3: pb = (2·q2 + q1)/4 en [q1, q2]
        caso 4: pb = max(q1, q2), el ingreso decrece en todo el intervalo
    Donde la región del caso es vacía el beneficio es -inf.

    Returns:
        (beneficio, pb)
    """
    case = DemandCase(case)
    _check_nonnegative(n1=n1, n2=n2)
    q1 = np.asarray(evaluate(market.curve1, n1), dtype=float)
    q2 = np.asarray(evaluate(market.curve2, n2), dtype=float)
    q1, q2 = np.broadcast_arrays(q1, q2)
    empty = np.zeros(q1.shape, dtype=bool)

    if case == DemandCase.CASE_1:
        pb = np.minimum(np.sqrt(2.0 * q1 * q2 / 3.0), np.minimum(q1, q2))
    elif case == DemandCase.CASE_2:
        empty = q2 - q1 > SOLVER_CONFIG['region_tol']
        pb = np.clip((2.0 * q1 + q2) / 4.0, q2, np.maximum(q1, q2))
    elif case == DemandCase.CASE_3:
        empty = q1 - q2 > SOLVER_CONFIG['region_tol']
        pb = np.clip((2.0 * q2 + q1) / 4.0, q1, np.maximum(q1, q2))
    else:
        pb = np.maximum(q1, q2)

    revenue = market.customers * pb * demand_probability(q1, q2, pb)
    value = revenue - np.asarray(n1, dtype=float) * market.cost1 - np.asarray(n2, dtype=float) * market.cost2
    value = np.where(empty, -np.inf, value)
    return _as_output(value), _as_output(pb)


def _data_residual(customers: int, pb: float, curve: QualityCurve, cost: float, n: float) -> float:
    """Residuo de (M·pb/3)·q'/q = c; con n = 0 solo cuenta la violación de complementariedad."""
    gap = customers * pb / 3.0 * marginal(curve, n) / evaluate(curve, n) - cost
    return max(0.0, gap) if n == 0 else abs(gap)


def solve_case1(market: BundleMarket, allow_zero_data: bool = False,
                restrict_region: bool = True) -> BundleSolution:
    """
    Punto estacionario del caso 1 resolviendo el sistema KKT:
        pb² = (2/3)·q1·q2,   (M·pb/3)·qi'/qi = ci
    Con qi' = alpha3i·(alpha1i - qi), la segunda condición da qi en función
    de pb: ui = alpha1i - qi = 3·ci·alpha1i / (M·pb·alpha3i + 3·ci). Queda
    una sola ecuación en pb que se resuelve por bisección.

    Args:
        allow_zero_data: admite ni = 0 con la cota activa cuando ui >= alpha2i
        restrict_region: exige pb <= min(q1, q2); sin la restricción se
            devuelve el punto estacionario del modelo del caso 1 aunque la
            tarifa salga de su región (in_region=False)

    Returns:
        BundleSolution, con feasible=False si no hay solución en el caso
    """
    M = market.customers
    c1, c2 = market.cost1, market.cost2
    k1, k2 = market.curve1, market.curve2

    def induced(pb: float) -> Tuple[float, float, float, float]:
        u1 = 3.0 * c1 * k1.alpha1 / (M * pb * k1.alpha3 + 3.0 * c1)
        u2 = 3.0 * c2 * k2.alpha1 / (M * pb * k2.alpha3 + 3.0 * c2)
        return u1, u2, k1.alpha1 - min(u1, k1.alpha2), k2.alpha1 - min(u2, k2.alpha2)

    def residual(pb: float) -> float:
        _, _, q1, q2 = induced(pb)
        return pb * pb - 2.0 * q1 * q2 / 3.0

    try:
        bracket = Bracket(SOLVER_CONFIG['case1_pb_lower'], math.sqrt(2.0 * k1.alpha1 * k2.alpha1 / 3.0))
        pb = bisect(residual, bracket, tol=SOLVER_CONFIG['bisect_tol'])
    except (BracketError, DomainError) as e:
        return BundleSolution.infeasible(DemandCase.CASE_1, f"sin raíz para pb: {e}")

    u1, u2, _, _ = induced(pb)
    zero1, zero2 = u1 >= k1.alpha2, u2 >= k2.alpha2
    if (zero1 or zero2) and not allow_zero_data:
        return BundleSolution.infeasible(DemandCase.CASE_1, "algún tamaño de datos sería <= 0")
    n1 = 0.0 if zero1 else math.log(k1.alpha2 / u1) / k1.alpha3
    n2 = 0.0 if zero2 else math.log(k2.alpha2 / u2) / k2.alpha3

    q1, q2 = evaluate(k1, n1), evaluate(k2, n2)
    in_region = pb <= min(q1, q2)
    if restrict_region and not in_region:
        return BundleSolution.infeasible(DemandCase.CASE_1, f"pb={pb:.6g} fuera de la región del caso 1")

    kkt = max(abs(pb * pb - 2.0 * q1 * q2 / 3.0),
              _data_residual(M, pb, k1, c1, n1),
              _data_residual(M, pb, k2, c2, n2))
    solution = BundleSolution(
        case=DemandCase.CASE_1,
        pb_star=pb,
        n1_star=n1,
        n2_star=n2,
        profit=profit(market, pb, n1, n2),
        kkt_residual=kkt,
        in_region=in_region,
    )
    logger.debug(f"Caso 1: pb={pb:.9g}, n1={n1:.9g}, n2={n2:.9g}, KKT={kkt:.3g}")
    return solution


def _data_for_quality(curve: QualityCurve, q: ArrayLike, cap: float) -> np.ndarray:
    """Datos que llevan la curva a la calidad q, recortados a [0, cap]."""
    q = np.asarray(q, dtype=float)
    with np.errstate(divide="ignore", invalid="ignore"):
        n = np.log(curve.alpha2 / (curve.alpha1 - q)) / curve.alpha3
    n = np.where(q >= curve.alpha1, cap, n)
    n = np.where(q <= curve.floor, 0.0, n)
    return np.clip(n, 0.0, cap)


@dataclass(frozen=True)
class _CaseRegion:
    """
    Región de los casos 2 y 3 sobre el cuadrado [0, 1]².

    El servicio "alto" es el de mayor calidad en el caso (2 en el caso 3,
    1 en el caso 2). s recorre sus datos desde el mínimo que alcanza la
    calidad sin datos del servicio "bajo" hasta el tope, y t es la fracción
    de los datos del servicio bajo que aún lo dejan por debajo del alto.
    """
    case: DemandCase
    low: QualityCurve
    high: QualityCurve
    start: float
    span: float
    cap: float

    def low_limit(self, s: ArrayLike) -> np.ndarray:
        return _data_for_quality(self.low, evaluate(self.high, self.start + np.asarray(s) * self.span), self.cap)

    def to_data(self, t: ArrayLike, s: ArrayLike) -> Tuple[np.ndarray, np.ndarray]:
        n_high = self.start + np.asarray(s, dtype=float) * self.span
        n_low = np.asarray(t, dtype=float) * self.low_limit(s)
        return (n_low, n_high) if self.case == DemandCase.CASE_3 else (n_high, n_low)


def _case_region(market: BundleMarket, case: DemandCase) -> Optional[_CaseRegion]:
    low, high = (market.curve1, market.curve2) if case == DemandCase.CASE_3 else (market.curve2, market.curve1)
    cap = SOLVER_CONFIG['n_upper']
    start = float(_data_for_quality(high, low.floor, cap))
    if evaluate(high, start) < low.floor - SOLVER_CONFIG['region_tol']:
        return None
    return _CaseRegion(case, low, high, start, cap - start, cap)


def _region_kkt(objective, region: _CaseRegion, t: float, s: float) -> float:
    """
    Residuo KKT en la caja [0, 1]² reescalada a unidades de datos, de modo
    que un paso h en cada coordenada mueve h unidades de datos.
    """
    scale_t = float(region.low_limit(s)) or 1.0
    scale_s = region.span or 1.0

    def scaled(a, b):
        return objective(a / scale_t, b / scale_s)

    with np.errstate(all="ignore"):
        return projected_gradient_norm(scaled, (t * scale_t, s * scale_s), lower=(0.0, 0.0),
                                       upper=(scale_t, scale_s), h=SOLVER_CONFIG['kkt_grad_step'])


def solve_case(market: BundleMarket, case: DemandCase) -> BundleSolution:
    """
    Máximo del beneficio restringido a la región de un caso.

    Para los casos 2 y 3 la tarifa se optimiza en forma cerrada
    (case_profile) y (n1, n2) se busca con rejilla y pulido por
    coordenadas sobre la región del caso parametrizada en [0, 1]², así que
    la frontera q1 = q2 es una cota de la caja y no una diagonal. Si tras
    repulir el residuo KKT sigue sobre la tolerancia, el caso se declara
    infactible. El caso 4 siempre alcanza su máximo en la frontera
    pb = max(q1, q2), que pertenece a los casos 2 y 3.
    """
    case = DemandCase(case)
    if case == DemandCase.CASE_1:
        return solve_case1(market)
    if case == DemandCase.CASE_4:
        return BundleSolution.infeasible(case, "el máximo está en la frontera pb = max(q1, q2) de los casos 2 y 3")

    region = _case_region(market, case)
    if region is None:
        return BundleSolution.infeasible(case, "la región del caso es vacía")

    def objective(t, s):
        return case_profile(market, case, *region.to_data(t, s))[0]

    points = SOLVER_CONFIG['case_grid_points']
    grid = GridSpec(((0.0, 1.0, points), (0.0, 1.0, points)))
    (t, s), value = grid_polish_maximize(objective, grid, polish_iters=SOLVER_CONFIG['polish_sweeps'],
                                         tol=SOLVER_CONFIG['polish_tol'])
    if not np.isfinite(value):
        return BundleSolution.infeasible(case, "la región del caso es vacía")

    kkt = _region_kkt(objective, region, t, s)
    for _ in range(SOLVER_CONFIG['repolish_rounds']):
        if kkt <= SOLVER_CONFIG['kkt_tol']:
            break
        logger.debug(f"Caso {int(case)}: residuo KKT {kkt:.3g}, se repule")
        (t, s), value = coordinate_ascent(objective, (t, s), (0.0, 0.0), (1.0, 1.0), grid.steps / points,
                                          tol=SOLVER_CONFIG['polish_tol'],
                                          max_sweeps=SOLVER_CONFIG['polish_sweeps'])
        kkt = _region_kkt(objective, region, t, s)
    if not kkt <= SOLVER_CONFIG['kkt_tol']:
        logger.warning(f"⚠️ Caso {int(case)}: residuo KKT {kkt:.3g} sobre la tolerancia")
        return BundleSolution.infeasible(case, f"residuo KKT {kkt:.3g} sobre la tolerancia")

    n1, n2 = (float(v) for v in region.to_data(t, s))
    pb = float(case_profile(market, case, n1, n2)[1])
    q1, q2 = evaluate(market.curve1, n1), evaluate(market.curve2, n2)
    floor = q2 if case == DemandCase.CASE_2 else q1
    on_boundary = pb - floor <= SOLVER_CONFIG['boundary_tol']

    return BundleSolution(
        case=case,
        pb_star=pb,
        n1_star=n1,
        n2_star=n2,
        profit=float(value),
        kkt_residual=kkt,
        on_boundary=on_boundary,
    )


def optimize(market: BundleMarket, case: Optional[Union[int, DemandCase]] = None) -> BundleSolution:
    """
    Evalúa los cuatro casos y devuelve la solución factible de mayor
    beneficio; beneficios a menos de 1e-9 empatan y gana el menor id.

    Si falla la solución interior del caso 1 se reintenta con la cota
    n = 0 activa. Con `case` se fija el caso de demanda; fijar el caso 1
    devuelve su punto estacionario aunque la tarifa salga de la región.

    Raises:
        DegenerateMarketError: ningún caso es factible
    """
    cases: Iterable[DemandCase] = list(DemandCase) if case is None else [DemandCase(case)]
    restrict = case is None

    candidates = []
    for k in cases:
        if k == DemandCase.CASE_1:
            solution = solve_case1(market, restrict_region=restrict)
            if not solution.feasible:
                solution = solve_case1(market, allow_zero_data=True, restrict_region=restrict)
        else:
            solution = solve_case(market, k)
        if solution.feasible:
            logger.info(f"🔍 Caso {int(k)}: beneficio {solution.profit:.9g} (pb={solution.pb_star:.6g})")
        else:
            logger.info(f"🔍 Caso {int(k)} infactible: {solution.reason}")
        candidates.append(solution)

    feasible = [s for s in candidates if s.feasible]
    if not feasible:
        raise DegenerateMarketError("Ningún caso de demanda del paquete es factible")

    best = feasible[0]
    for solution in feasible[1:]:
        if solution.profit > best.profit + SOLVER_CONFIG['profit_tie_tol']:
            best = solution
    logger.info(f"✅ Paquete: caso {int(best.case)}, pb*={best.pb_star:.6g}, "
                f"n1*={best.n1_star:.6g}, n2*={best.n2_star:.6g}, beneficio={best.profit:.6g}")
    return best


def market_split(q1: float, q2: float, ps1: float, ps2: float, pb: float) -> MarketSplit:
    """
    Reparto de clientes bajo venta separada (θi·qi >= psi por servicio) y
    fracción que compra el paquete a la tarifa pb.
    """
    _check_nonnegative(ps1=ps1, ps2=ps2, pb=pb)
    if q1 <= 0 or q2 <= 0:
        raise DomainError("q1 y q2 deben ser positivos")
    buys1 = min(max(1.0 - ps1 / q1, 0.0), 1.0)
    buys2 = min(max(1.0 - ps2 / q2, 0.0), 1.0)
    return MarketSplit(
        both=buys1 * buys2,
        only_service1=buys1 * (1.0 - buys2),
        only_service2=(1.0 - buys1) * buys2,
        neither=(1.0 - buys1) * (1.0 - buys2),
        bundle=demand_probability(q1, q2, pb),
    )


def printed_case1_closed_form(market: BundleMarket, a3_coefficient: float = 8.0 / 2.0) -> PrintedClosedForm:
    """
    Evalúa la forma cerrada publicada del caso 1 (constante A3) tal cual
    está impresa. Los logaritmos de argumento no positivo dan NaN.
    """
    M = market.customers
    c1, c2 = market.cost1, market.cost2
    a11, a21, a31 = market.curve1.alpha1, market.curve1.alpha2, market.curve1.alpha3
    a12, a22, a32 = market.curve2.alpha1, market.curve2.alpha2, market.curve2.alpha3

    radicand = (a3_coefficient * a11 * a12 * M ** 2 * a31 ** 2 * a32 ** 2
                + 9 * a31 ** 2 * c2 ** 2 - 18 * a31 * a32 * c1 * c2 + 9 * a32 ** 2 * c1 ** 2)
    a3 = 3 * a31 * c2 + 3 * a32 * c1 - math.sqrt(radicand)
    pb = -0.5 * a3 / (M * a31 * a32)

    with np.errstate(all="ignore"):
        n1 = float(np.log(np.float64(a21 / a11 - (a21 * a3 / 6.0) / (a11 * a32 * c1))) / a31)
        n2 = float(np.log(np.float64(a22 / a12 - (a22 * a3 / 6.0) / (a12 * a31 * c2))) / a32)
    return PrintedClosedForm(a3=a3, pb=pb, n1=n1, n2=n2)


def discrepancy_report(market: BundleMarket, solution: Optional[BundleSolution] = None,
                       tolerance: float = 1e-3) -> DiscrepancyReport:
    """
    Compara la forma cerrada impresa con la solución KKT del caso 1 y marca
    la discrepancia cuando la tarifa difiere más que `tolerance` o algún
    valor impreso no es finito.
    """
    if solution is None:
        solution = solve_case1(market)
        if not solution.feasible:
            solution = solve_case1(market, allow_zero_data=True)
    printed = printed_case1_closed_form(market)
    gap = abs(printed.pb - solution.pb_star)
    values = (printed.pb, printed.n1, printed.n2, solution.pb_star)
    mismatch = not all(math.isfinite(v) for v in values) or gap > tolerance
    if mismatch:
        logger.warning(f"⚠️ La forma cerrada impresa da pb={printed.pb:.6g}, "
                       f"la solución KKT pb={solution.pb_star:.6g}")
    return DiscrepancyReport(printed=printed, solution=solution, pb_gap=gap, mismatch=mismatch)
