"""
Jerarquía de excepciones del motor de precios.
Cada excepción lleva el código de salida que usa la CLI.
"""

from typing import Optional


class PricingError(Exception):
    """Error base del paquete."""

    exit_code: int = 3


class DomainError(PricingError, ValueError):
    """Argumento fuera del dominio de una operación (n negativo, q <= 0, ...)."""

    exit_code = 2


class ConfigError(PricingError):
    """Archivo de configuración inválido o inexistente."""

    exit_code = 2


class SampleFormatError(ConfigError):
    """CSV de muestras mal formado."""

    def __init__(self, message: str, line: Optional[int] = None):
        self.line = line
        if line is not None:
            message = f"línea {line}: {message}"
        super().__init__(message)


class CapacityError(PricingError):
    """Juego cooperativo demasiado grande para enumerar subconjuntos."""

    exit_code = 2


class UnderdeterminedFitError(PricingError):
    """Menos de tres tamaños de datos distintos para ajustar la curva."""

    exit_code = 3


class BracketError(PricingError):
    """El intervalo de bisección no contiene un cambio de signo."""

    exit_code = 3


class DegenerateMarketError(PricingError):
    """Ningún caso de demanda del paquete es factible."""

    exit_code = 3
