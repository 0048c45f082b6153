"""
Módulo de configuración del motor de precios.
Carga y valida el archivo TOML de mercado que recibe la CLI con --config.
"""

import logging
try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib
from pathlib import Path
from typing import Any, Dict, Literal, Optional, Tuple, Union

from pydantic import BaseModel, ConfigDict, Field, ValidationError, field_validator, model_validator
from pydantic_settings import BaseSettings, PydanticBaseSettingsSource, SettingsConfigDict

from errors import ConfigError

logger = logging.getLogger(__name__)

SWEEP_PARAMETERS = ("c", "c1", "c2", "M", "alpha3", "alpha31")


class ServiceBlock(BaseModel):
    """
    Bloque [serviceN]: costo por unidad de datos y la curva de calidad,
    ya sea con sus tres parámetros o con un CSV de muestras a ajustar.
    """
    model_config = ConfigDict(extra="forbid", populate_by_name=True)

    cost: float = Field(..., alias="c", gt=0)
    alpha1: Optional[float] = None
    alpha2: Optional[float] = None
    alpha3: Optional[float] = None
    samples: Optional[str] = None

    @model_validator(mode="after")
    def _curve_source(self):
        alphas = (self.alpha1, self.alpha2, self.alpha3)
        given = sum(a is not None for a in alphas)
        if self.samples is not None and given:
            raise ValueError("use 'samples' o alpha1/alpha2/alpha3, no ambos")
        if self.samples is None and given != 3:
            raise ValueError("faltan parámetros de curva: se requieren alpha1, alpha2 y alpha3 (o 'samples')")
        if given == 3:
            if not 0 < self.alpha1 <= 1:
                raise ValueError(f"alpha1 debe estar en (0, 1], se recibió {self.alpha1}")
            if not 0 <= self.alpha2 < self.alpha1:
                raise ValueError(f"alpha2 debe estar en [0, alpha1), se recibió {self.alpha2}")
            if not self.alpha3 > 0:
                raise ValueError(f"alpha3 debe ser positivo, se recibió {self.alpha3}")
        return self

    @property
    def alphas(self) -> Optional[Tuple[float, float, float]]:
        if self.samples is not None:
            return None
        return (self.alpha1, self.alpha2, self.alpha3)


class SweepBlock(BaseModel):
    """Bloque [sweep]: parámetro barrido, rango y número de puntos."""
    model_config = ConfigDict(extra="forbid")

    parameter: Literal["c", "c1", "c2", "M", "alpha3", "alpha31"]
    lo: float
    hi: float
    steps: int = Field(..., ge=1)
    share: bool = False
    case: Union[Literal["auto"], int] = "auto"

    @field_validator("case")
    def _check_case(cls, v):
        if v != "auto" and v not in (1, 2, 3, 4):
            raise ValueError(f"case debe ser 'auto' o 1..4, se recibió {v}")
        return v

    @model_validator(mode="after")
    def _check_range(self):
        if self.hi < self.lo:
            raise ValueError(f"rango inválido: hi={self.hi} < lo={self.lo}")
        if self.steps > 1 and self.hi == self.lo:
            raise ValueError("un barrido de varios puntos necesita lo < hi")
        return self


class SimulateBlock(BaseModel):
    """Bloque [simulate]: tarifa a validar; si falta se usa la tarifa óptima."""
    model_config = ConfigDict(extra="forbid")

    fee: Optional[float] = Field(None, ge=0)


class SharingBlock(BaseModel):
    """Bloque [sharing]: costo fijo de operar la coalición."""
    model_config = ConfigDict(extra="forbid")

    bundle_overhead: float = Field(0.0, ge=0)


class MarketConfig(BaseSettings):
    """
    Configuración de mercado cargada desde el archivo TOML.
    Los valores llegan como argumentos de inicialización; no se leen
    variables de entorno ni archivos .env.
    """
    model_config = SettingsConfigDict(extra="forbid", populate_by_name=True, case_sensitive=True)

    customers: int = Field(..., alias="M", ge=1)
    service1: ServiceBlock
    service2: Optional[ServiceBlock] = None
    sweep: Optional[SweepBlock] = None
    simulate: SimulateBlock = Field(default_factory=SimulateBlock)
    sharing: SharingBlock = Field(default_factory=SharingBlock)

    @field_validator("customers", mode="before")
    def _clean_customers(cls, v):
        # TOML admite 50.0; se acepta solo si es entero
        if isinstance(v, float) and v.is_integer():
            return int(v)
        return v

    @model_validator(mode="after")
    def _check_sweep_target(self):
        if self.sweep is not None and self.sweep.parameter in ("c1", "c2", "alpha31") and self.service2 is None:
            raise ValueError(f"el parámetro '{self.sweep.parameter}' requiere el bloque [service2]")
        return self

    @classmethod
    def settings_customise_sources(
        cls,
        settings_cls: type[BaseSettings],
        init_settings: PydanticBaseSettingsSource,
        env_settings: PydanticBaseSettingsSource,
        dotenv_settings: PydanticBaseSettingsSource,
        file_secret_settings: PydanticBaseSettingsSource,
    ) -> Tuple[PydanticBaseSettingsSource, ...]:
        return (init_settings,)

    @property
    def is_bundle(self) -> bool:
        return self.service2 is not None


def _describe_validation_error(error: ValidationError) -> str:
    parts = []
    for item in error.errors():
        location = ".".join(str(p) for p in item.get("loc", ())) or "raíz"
        parts.append(f"{location}: {item.get('msg')}")
    return "; ".join(parts)


def load_market_config(path: Union[str, Path], overrides: Optional[Dict[str, Any]] = None) -> MarketConfig:
    """
    Factory function para crear la configuración de mercado con manejo de errores.

    Args:
        path: Ruta del archivo TOML
        overrides: Claves de primer nivel que reemplazan a las del archivo

    Returns:
        Instancia validada de MarketConfig, con las rutas de muestras resueltas
        relativas al directorio del archivo.

    Raises:
        ConfigError: archivo inexistente, TOML inválido o valores fuera de dominio
    """
    path = Path(path)
    if not path.is_file():
        raise ConfigError(f"No existe el archivo de configuración: {path}")

    try:
        raw = tomllib.loads(path.read_text(encoding="utf-8"))
    except (tomllib.TOMLDecodeError, UnicodeDecodeError) as e:
        raise ConfigError(f"TOML inválido en {path}: {e}") from e
    if overrides:
        raw.update(overrides)

    try:
        settings = MarketConfig(**raw)
    except ValidationError as e:
        logger.error(f"❌ Error cargando configuración {path}")
        raise ConfigError(f"Configuración inválida en {path}: {_describe_validation_error(e)}") from e

    for name in ("service1", "service2"):
        block = getattr(settings, name)
        if block is None or block.samples is None:
            continue
        samples_path = Path(block.samples)
        if not samples_path.is_absolute():
            samples_path = path.parent / samples_path
        if not samples_path.is_file():
            raise ConfigError(f"[{name}] el archivo de muestras no existe: {samples_path}")
        block.samples = str(samples_path)

    logger.info(f"✅ Configuración cargada: {path}")
    logger.info(f"👥 Clientes M={settings.customers}")
    logger.info(f"📦 Servicios: {'2 (paquete)' if settings.is_bundle else '1 (independiente)'}")
    if settings.sweep is not None:
        logger.info(f"📊 Barrido de {settings.sweep.parameter} en [{settings.sweep.lo}, {settings.sweep.hi}] "
                    f"con {settings.sweep.steps} puntos")
    return settings


# Ajuste de la curva de calidad
FIT_CONFIG = {
    'alpha3_lower': 1e-3,
    'alpha3_upper': 2.0,
    'alpha3_grid_points': 1000,  # log-espaciados
    'refine_tol': 1e-8,
    'min_distinct_sizes': 3,
}

# Solucionadores de mercado
SOLVER_CONFIG = {
    'n_upper': 200.0,  # cota de unidades de datos para los oráculos
    'case1_pb_lower': 1e-9,
    'bisect_tol': 1e-10,
    'case_grid_points': 81,  # por dimensión, casos 2 y 3
    'polish_sweeps': 400,
    'polish_tol': 1e-11,
    'kkt_tol': 1e-6,
    'kkt_grad_step': 1e-6,
    'profit_tie_tol': 1e-9,
    'boundary_tol': 1e-7,
    'region_tol': 1e-12,  # holgura de redondeo en la frontera q1 = q2
    'repolish_rounds': 3,
}

# Monte Carlo
SIMULATION_CONFIG = {
    'default_samples': 1_000_000,
    'default_seed': 20240607,
    'batch_size': 65_536,
    'sigma_threshold': 4.0,
    'progress_log_seconds': 2.0,
    'progress_log_every_n': 8,
}
