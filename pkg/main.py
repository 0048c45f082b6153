"""
Punto de entrada del motor de precios de servicios IoT.

Uso:
    python main.py fit muestras.csv
    python main.py standalone --config configs/servicio1.toml
    python main.py bundle --config configs/paquete.toml --diagnose
    python main.py sweep --config configs/barrido_c1_caso1.toml --out costo_c1.csv
    python main.py simulate --config configs/paquete.toml --samples 1000000 --seed 7
"""

import sys

from cli import run


def main() -> int:
    return run(sys.argv[1:])


if __name__ == "__main__":
    sys.exit(main())
