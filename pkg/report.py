"""
Módulo de utilidades de formato para los reportes de la CLI.
Todos los reales se imprimen con 9 dígitos significativos para que las
salidas sean idénticas entre ejecuciones y se puedan volver a leer.
"""

import math
import logging
from pathlib import Path
from typing import Iterable, Tuple, Union

import numpy as np
import pandas as pd

logger = logging.getLogger(__name__)

SIGNIFICANT_DIGITS = 9
FLOAT_FORMAT = f"%.{SIGNIFICANT_DIGITS}g"


def format_value(value: object) -> str:
    """
    Convierte un valor del reporte a texto.

    Args:
        value: bool, entero, real, enum entero o texto

    Returns:
        'true'/'false' para booleanos, reales con 9 dígitos significativos
    """
    if isinstance(value, (bool, np.bool_)):
        return "true" if value else "false"
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if isinstance(value, (float, np.floating)):
        value = float(value)
        if math.isnan(value):
            return "nan"
        if value == 0:
            value = 0.0  # sin '-0'
        return FLOAT_FORMAT % value
    return str(value)


def format_report(pairs: Iterable[Tuple[str, object]]) -> str:
    """Líneas key=value terminadas en LF."""
    return "".join(f"{key}={format_value(value)}\n" for key, value in pairs)


def write_csv(frame: pd.DataFrame, path: Union[str, Path]) -> None:
    """Escribe una tabla con 9 dígitos significativos y fin de línea LF."""
    frame.to_csv(path, index=False, float_format=FLOAT_FORMAT, lineterminator="\n")
    logger.info(f"💾 {len(frame)} filas escritas en {path}")


def read_csv(path: Union[str, Path]) -> pd.DataFrame:
    """Lee una tabla escrita por write_csv."""
    return pd.read_csv(path)
