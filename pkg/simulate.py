"""
Validación Monte Carlo de las probabilidades de demanda.
Muestrea disposiciones a pagar uniformes con PCG64 y compara la fracción
de suscriptores con las fórmulas analíticas.
"""

import logging
import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from bundle import BundleMarket
from config import SIMULATION_CONFIG
from errors import DomainError
from quality import evaluate
from throttler import progress_throttler

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class SimulationConfig:
    """Número de muestras y semilla; el tamaño de lote no cambia el flujo de números."""
    sample_count: int
    seed: int
    batch_size: int = field(default=SIMULATION_CONFIG['batch_size'])

    def __post_init__(self):
        if self.sample_count < 1:
            raise DomainError(f"sample_count debe ser >= 1, se recibió {self.sample_count}")
        if self.seed < 0:
            raise DomainError(f"seed debe ser >= 0, se recibió {self.seed}")
        if self.batch_size < 1:
            raise DomainError(f"batch_size debe ser >= 1, se recibió {self.batch_size}")


@dataclass(frozen=True)
class Estimate:
    mean: float
    std_error: float


def _generator(seed: int) -> np.random.Generator:
    return np.random.Generator(np.random.PCG64(seed))


def _count_hits(config: SimulationConfig, columns: int, accept: Callable[[np.ndarray], np.ndarray],
                label: str) -> int:
    """Cuenta las filas aceptadas; las filas se generan por lotes en orden."""
    rng = _generator(config.seed)
    total_batches = math.ceil(config.sample_count / config.batch_size)
    remaining = config.sample_count
    hits = 0
    for batch in range(1, total_batches + 1):
        size = min(config.batch_size, remaining)
        draws = rng.random((size, columns))
        hits += int(np.count_nonzero(accept(draws)))
        remaining -= size
        progress_throttler.progress(label, batch, total_batches, 'mc_batch')
    return hits


def _binomial_estimate(hits: int, count: int) -> Estimate:
    mean = hits / count
    return Estimate(mean=mean, std_error=math.sqrt(mean * (1.0 - mean) / count))


def _check_quality(**values: float) -> None:
    for name, q in values.items():
        if not 0 < q <= 1:
            raise DomainError(f"{name} debe estar en (0, 1], se recibió {q}")


def mc_standalone_demand(q: float, ps: float, config: SimulationConfig) -> Estimate:
    """Fracción de clientes con θ·q >= ps y su error estándar binomial."""
    _check_quality(q=q)
    if ps < 0:
        raise DomainError(f"ps debe ser >= 0, se recibió {ps}")
    hits = _count_hits(config, 1, lambda theta: theta[:, 0] * q >= ps, "mc:independiente")
    return _binomial_estimate(hits, config.sample_count)


def mc_bundle_demand(q1: float, q2: float, pb: float, config: SimulationConfig) -> Estimate:
    """Fracción de clientes con θ1·q1 + θ2·q2 >= pb y su error estándar binomial."""
    _check_quality(q1=q1, q2=q2)
    if pb < 0:
        raise DomainError(f"pb debe ser >= 0, se recibió {pb}")
    hits = _count_hits(config, 2, lambda theta: theta[:, 0] * q1 + theta[:, 1] * q2 >= pb, "mc:paquete")
    return _binomial_estimate(hits, config.sample_count)


def mc_bundle_revenue(market: BundleMarket, pb: float, n1: float, n2: float,
                      config: SimulationConfig) -> Estimate:
    """Ingreso M·pb·(fracción de suscriptores) estimado por muestreo."""
    q1 = evaluate(market.curve1, n1)
    q2 = evaluate(market.curve2, n2)
    share = mc_bundle_demand(q1, q2, pb, config)
    scale = market.customers * pb
    return Estimate(mean=scale * share.mean, std_error=scale * share.std_error)


def agrees(analytic: float, estimate: Estimate, sigmas: float = SIMULATION_CONFIG['sigma_threshold']) -> bool:
    """True si el valor analítico está a menos de `sigmas` errores estándar de la estimación."""
    passed = abs(estimate.mean - analytic) <= sigmas * estimate.std_error + 1e-12
    if not passed:
        logger.warning(f"⚠️ Monte Carlo {estimate.mean:.6g} ± {estimate.std_error:.3g} "
                       f"no coincide con el valor analítico {analytic:.6g}")
    return passed
