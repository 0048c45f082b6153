"""
Interfaz de línea de comandos: ajuste de curvas, óptimos independiente y
de paquete, barridos y validación Monte Carlo.

La salida estándar lleva solo el reporte key=value (o nada, si se escribe
un CSV); los logs van a stderr.
"""

import argparse
import logging
import sys
from pathlib import Path
from typing import List, Optional, Sequence, Tuple

from bundle import demand_probability, discrepancy_report, optimize
from coalition import share_bundle
from config import SIMULATION_CONFIG, MarketConfig, load_market_config
from errors import ConfigError, PricingError
from quality import evaluate, fit, read_samples_csv
from report import format_report
from simulate import SimulationConfig, agrees, mc_bundle_demand, mc_bundle_revenue, mc_standalone_demand
from standalone import feasibility_threshold, optimize_closed_form
from sweep import build_bundle_market, build_standalone_market, run_sweep, write_sweep_csv
from throttler import progress_throttler

logger = logging.getLogger(__name__)

LOG_FORMAT = '%(asctime)s - %(levelname)s - %(message)s'

Report = List[Tuple[str, object]]


def _require_config(args: argparse.Namespace) -> MarketConfig:
    if args.config is None:
        raise ConfigError(f"El subcomando '{args.command}' requiere --config PATH")
    return load_market_config(args.config)


def cmd_fit(args: argparse.Namespace) -> Report:
    result = fit(read_samples_csv(args.path))
    report = [
        ("alpha1", result.curve.alpha1),
        ("alpha2", result.curve.alpha2),
        ("alpha3", result.curve.alpha3),
        ("residual", result.residual),
        ("degenerate", result.degenerate),
    ]
    if args.out is not None:
        Path(args.out).write_text(format_report(report), encoding="utf-8")
    return report


def cmd_standalone(args: argparse.Namespace) -> Report:
    market = build_standalone_market(_require_config(args))
    solution = optimize_closed_form(market)
    return [
        ("n_star", solution.n_star),
        ("ps_star", solution.ps_star),
        ("quality", solution.quality),
        ("profit", solution.profit),
        ("interior", solution.interior),
        ("threshold", feasibility_threshold(market)),
    ]


def cmd_bundle(args: argparse.Namespace) -> Report:
    config = _require_config(args)
    market = build_bundle_market(config)
    solution = optimize(market)
    profits = [optimize_closed_form(market.service(k)).profit for k in (1, 2)]
    sharing = share_bundle(profits, solution.profit, config.sharing.bundle_overhead)

    report = [
        ("case", int(solution.case)),
        ("pb_star", solution.pb_star),
        ("n1_star", solution.n1_star),
        ("n2_star", solution.n2_star),
        ("profit", solution.profit),
        ("kkt_residual", solution.kkt_residual),
        ("profit1", profits[0]),
        ("profit2", profits[1]),
        ("coalition_value", sharing.game.value({1, 2})),
        ("shapley1", sharing.shapley[0]),
        ("shapley2", sharing.shapley[1]),
        ("core_lo", sharing.core.lo),
        ("core_hi", sharing.core.hi),
        ("core_empty", sharing.core.empty),
        ("shapley_in_core", sharing.shapley_in_core),
    ]
    if args.diagnose:
        report.extend(discrepancy_report(market).lines())
    return report


def cmd_sweep(args: argparse.Namespace) -> Report:
    if args.out is None:
        raise ConfigError("El subcomando 'sweep' requiere --out PATH")
    frame = run_sweep(_require_config(args))
    write_sweep_csv(frame, args.out)
    return [("rows", len(frame))]


def cmd_simulate(args: argparse.Namespace) -> Report:
    config = _require_config(args)
    sim = SimulationConfig(sample_count=args.samples, seed=args.seed)
    fee = config.simulate.fee

    if not config.is_bundle:
        market = build_standalone_market(config)
        solution = optimize_closed_form(market)
        ps = solution.ps_star if fee is None else fee
        q = evaluate(market.curve, solution.n_star)
        analytic = min(max(1.0 - ps / q, 0.0), 1.0)
        estimate = mc_standalone_demand(q, ps, sim)
        report = [("mode", "standalone"), ("fee", ps), ("q", q)]
    else:
        market = build_bundle_market(config)
        solution = optimize(market)
        pb = solution.pb_star if fee is None else fee
        q1 = evaluate(market.curve1, solution.n1_star)
        q2 = evaluate(market.curve2, solution.n2_star)
        analytic = demand_probability(q1, q2, pb)
        estimate = mc_bundle_demand(q1, q2, pb, sim)
        revenue = mc_bundle_revenue(market, pb, solution.n1_star, solution.n2_star, sim)
        report = [("mode", "bundle"), ("fee", pb), ("q1", q1), ("q2", q2)]

    report.extend([
        ("samples", sim.sample_count),
        ("seed", sim.seed),
        ("analytic", analytic),
        ("mc_mean", estimate.mean),
        ("std_error", estimate.std_error),
        ("pass", agrees(analytic, estimate)),
    ])
    if config.is_bundle:
        report.extend([
            ("analytic_revenue", market.customers * pb * analytic),
            ("mc_revenue", revenue.mean),
            ("revenue_std_error", revenue.std_error),
        ])
    progress_throttler.log_session_summary()
    return report


COMMANDS = {
    "fit": cmd_fit,
    "standalone": cmd_standalone,
    "bundle": cmd_bundle,
    "sweep": cmd_sweep,
    "simulate": cmd_simulate,
}


def _common_options(top_level: bool) -> argparse.ArgumentParser:
    # En los subcomandos los valores por defecto se suprimen para no pisar
    # lo que se haya dado antes del nombre del subcomando.
    options = argparse.ArgumentParser(add_help=False)
    options.add_argument("--config", metavar="PATH", help="archivo TOML de mercado",
                         default=None if top_level else argparse.SUPPRESS)
    options.add_argument("--log-level", choices=["DEBUG", "INFO", "WARNING", "ERROR", "CRITICAL"],
                         help="nivel de log en stderr (por defecto WARNING)",
                         default="WARNING" if top_level else argparse.SUPPRESS)
    return options


def build_parser() -> argparse.ArgumentParser:
    common = _common_options(top_level=False)
    parser = argparse.ArgumentParser(
        prog="iot-pricing",
        description="Precios de servicios IoT basados en aprendizaje automático",
        parents=[_common_options(top_level=True)],
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_fit = sub.add_parser("fit", parents=[common], help="ajusta la curva de calidad a un CSV n,accuracy")
    p_fit.add_argument("path", help="CSV de muestras")
    p_fit.add_argument("--out", metavar="PATH", help="copia del reporte")

    sub.add_parser("standalone", parents=[common], help="óptimo de venta independiente del servicio 1")

    p_bundle = sub.add_parser("bundle", parents=[common], help="óptimo del paquete y reparto del beneficio")
    p_bundle.add_argument("--diagnose", action="store_true",
                          help="agrega la comparación con la forma cerrada publicada del caso 1")

    p_sweep = sub.add_parser("sweep", parents=[common], help="barrido de parámetros a CSV")
    p_sweep.add_argument("--out", metavar="PATH", help="CSV de salida")

    p_sim = sub.add_parser("simulate", parents=[common], help="validación Monte Carlo de la demanda")
    p_sim.add_argument("--samples", type=int, default=SIMULATION_CONFIG['default_samples'])
    p_sim.add_argument("--seed", type=int, default=SIMULATION_CONFIG['default_seed'])
    return parser


def run(argv: Optional[Sequence[str]] = None) -> int:
    """
    Ejecuta un subcomando y devuelve el código de salida:
    0 éxito, 2 error de entrada o configuración, 3 problema numérico.
    """
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return int(e.code) if e.code is not None else 0

    logging.basicConfig(level=getattr(logging, args.log_level), format=LOG_FORMAT,
                        stream=sys.stderr, force=True)

    try:
        report = COMMANDS[args.command](args)
    except PricingError as e:
        print(f"❌ {e}", file=sys.stderr)
        return e.exit_code
    except Exception as e:
        logger.error(f"❌ Error inesperado en '{args.command}': {e}", exc_info=True)
        return 3

    sys.stdout.write(format_report(report))
    return 0
