"""
Barridos de parámetros para reproducir las tendencias de las figuras.
Los parámetros barribles viven en un registro; cada entrada sabe a qué
mercado se aplica y cómo reemplazar el valor.
"""

import logging
from dataclasses import dataclass, replace
from pathlib import Path
from typing import Callable, Dict, List, Optional, Union

import numpy as np
import pandas as pd

from bundle import BundleMarket, optimize
from coalition import share_bundle
from config import MarketConfig, ServiceBlock
from errors import ConfigError
from quality import QualityCurve, fit, read_samples_csv
from report import write_csv
from standalone import StandaloneMarket, optimize_closed_form
from throttler import progress_throttler

logger = logging.getLogger(__name__)

Market = Union[StandaloneMarket, BundleMarket]

STANDALONE_COLUMNS = ["value", "n_star", "ps_star", "quality", "profit", "interior"]
BUNDLE_COLUMNS = ["value", "case", "pb_star", "n1_star", "n2_star", "profit"]
PINNED_COLUMNS = ["in_region"]
SHARING_COLUMNS = ["profit1", "profit2", "shapley1", "shapley2", "core_lo", "core_hi"]


@dataclass(frozen=True)
class SweepParameter:
    """Parámetro barrible: mercado al que aplica y cómo fijar su valor."""
    name: str
    target: Optional[str]  # 'standalone', 'bundle' o None (según la configuración)
    apply: Callable[[Market, float], Market]
    description: str


def _with_customers(market: Market, value: float) -> Market:
    return replace(market, customers=int(round(value)))


def _with_decay(curve: QualityCurve, value: float) -> QualityCurve:
    return QualityCurve(curve.alpha1, curve.alpha2, value)


class SweepRegistry:
    """
    Registro de parámetros barribles.
    Permite agregar parámetros sin tocar el bucle del barrido.
    """

    def __init__(self):
        self._parameters: Dict[str, SweepParameter] = {}
        self._register_default_parameters()

    def _register_default_parameters(self):
        self.register(SweepParameter("c", "standalone", lambda m, v: replace(m, cost=v),
                                     "costo por unidad de datos del servicio 1"))
        self.register(SweepParameter("alpha3", "standalone",
                                     lambda m, v: replace(m, curve=_with_decay(m.curve, v)),
                                     "tasa de aprendizaje alpha3 del servicio 1"))
        self.register(SweepParameter("M", None, _with_customers, "número de clientes"))
        self.register(SweepParameter("c1", "bundle", lambda m, v: replace(m, cost1=v),
                                     "costo por unidad de datos del servicio 1 en el paquete"))
        self.register(SweepParameter("c2", "bundle", lambda m, v: replace(m, cost2=v),
                                     "costo por unidad de datos del servicio 2 en el paquete"))
        self.register(SweepParameter("alpha31", "bundle",
                                     lambda m, v: replace(m, curve1=_with_decay(m.curve1, v)),
                                     "tasa de aprendizaje del servicio 1 en el paquete"))

    def register(self, parameter: SweepParameter) -> None:
        self._parameters[parameter.name] = parameter
        logger.debug(f"Parámetro de barrido registrado: {parameter.name}")

    def get(self, name: str) -> SweepParameter:
        if name not in self._parameters:
            raise ConfigError(f"Parámetro de barrido desconocido: '{name}'. Disponibles: {', '.join(self.names())}")
        return self._parameters[name]

    def names(self) -> List[str]:
        return sorted(self._parameters)


# Instancia global del registro
sweep_registry = SweepRegistry()


def resolve_curve(block: ServiceBlock) -> QualityCurve:
    """Curva de un bloque de servicio: parámetros dados o ajuste del CSV de muestras."""
    if block.alphas is not None:
        return QualityCurve(*block.alphas)
    result = fit(read_samples_csv(block.samples))
    if result.degenerate:
        logger.warning(f"⚠️ Ajuste degenerado para {block.samples}: la calidad no depende de los datos")
    return result.curve


def build_standalone_market(config: MarketConfig) -> StandaloneMarket:
    return StandaloneMarket(config.customers, config.service1.cost, resolve_curve(config.service1))


def build_bundle_market(config: MarketConfig) -> BundleMarket:
    if config.service2 is None:
        raise ConfigError("El paquete requiere los bloques [service1] y [service2]")
    return BundleMarket(
        customers=config.customers,
        cost1=config.service1.cost,
        curve1=resolve_curve(config.service1),
        cost2=config.service2.cost,
        curve2=resolve_curve(config.service2),
    )


def _standalone_row(market: StandaloneMarket, value: float) -> dict:
    solution = optimize_closed_form(market)
    return {
        "value": value,
        "n_star": solution.n_star,
        "ps_star": solution.ps_star,
        "quality": solution.quality,
        "profit": solution.profit,
        "interior": "true" if solution.interior else "false",
    }


def _bundle_row(market: BundleMarket, value: float, case, share: bool, overhead: float) -> dict:
    solution = optimize(market, case=None if case == "auto" else case)
    row = {
        "value": value,
        "case": int(solution.case),
        "pb_star": solution.pb_star,
        "n1_star": solution.n1_star,
        "n2_star": solution.n2_star,
        "profit": solution.profit,
    }
    if case != "auto":
        row["in_region"] = "true" if solution.in_region else "false"
    if share:
        profits = [optimize_closed_form(market.service(k)).profit for k in (1, 2)]
        sharing = share_bundle(profits, solution.profit, overhead)
        row.update({
            "profit1": profits[0],
            "profit2": profits[1],
            "shapley1": sharing.shapley[0],
            "shapley2": sharing.shapley[1],
            "core_lo": sharing.core.lo,
            "core_hi": sharing.core.hi,
        })
    return row


def run_sweep(config: MarketConfig) -> pd.DataFrame:
    """
    Recalcula el óptimo en cada punto del barrido, en orden ascendente y
    sin arranques en caliente.

    Raises:
        ConfigError: falta el bloque [sweep] o el parámetro no aplica al mercado
    """
    if config.sweep is None:
        raise ConfigError("La configuración no tiene bloque [sweep]")
    block = config.sweep
    parameter = sweep_registry.get(block.parameter)
    target = parameter.target or ("bundle" if config.is_bundle else "standalone")
    if target == "bundle" and not config.is_bundle:
        raise ConfigError(f"El parámetro '{parameter.name}' requiere un mercado de paquete")

    base = build_bundle_market(config) if target == "bundle" else build_standalone_market(config)
    values = np.linspace(block.lo, block.hi, block.steps)
    label = f"barrido:{parameter.name}"
    logger.info(f"📊 Barrido de {parameter.description}: {block.steps} puntos")

    rows = []
    for index, raw in enumerate(values, start=1):
        value = float(round(raw)) if parameter.name == "M" else float(raw)
        market = parameter.apply(base, value)
        if target == "bundle":
            rows.append(_bundle_row(market, value, block.case, block.share, config.sharing.bundle_overhead))
        else:
            rows.append(_standalone_row(market, value))
        progress_throttler.progress(label, index, block.steps, 'sweep_point')

    if target == "bundle":
        columns = (BUNDLE_COLUMNS + (PINNED_COLUMNS if block.case != "auto" else [])
                   + (SHARING_COLUMNS if block.share else []))
    else:
        columns = STANDALONE_COLUMNS
    return pd.DataFrame(rows, columns=columns)


def write_sweep_csv(frame: pd.DataFrame, path: Union[str, Path]) -> None:
    write_csv(frame, path)
