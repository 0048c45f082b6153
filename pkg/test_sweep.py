"""
Pruebas de los barridos de parámetros y del registro de parámetros.
"""

import sys
import os
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, os.path.dirname(os.path.abspath(__file__)))

from bundle import optimize
from config import load_market_config
from errors import ConfigError
from report import format_value, read_csv
from sweep import (BUNDLE_COLUMNS, PINNED_COLUMNS, SHARING_COLUMNS, STANDALONE_COLUMNS, SweepParameter, SweepRegistry,
                   build_bundle_market, build_standalone_market, run_sweep, sweep_registry, write_sweep_csv)

CONFIGS = Path(__file__).parent / "configs"


def _nonincreasing(values, tol=1e-9):
    return bool(np.all(np.diff(np.asarray(values, dtype=float)) <= tol))


def _nondecreasing(values, tol=1e-9):
    return bool(np.all(np.diff(np.asarray(values, dtype=float)) >= -tol))


def test_registry_defaults_and_unknown_name():
    assert sweep_registry.names() == ["M", "alpha3", "alpha31", "c", "c1", "c2"]
    with pytest.raises(ConfigError):
        sweep_registry.get("beta")


def test_registry_accepts_new_parameters():
    registry = SweepRegistry()
    registry.register(SweepParameter("alpha1", "standalone", lambda m, v: m, "prueba"))
    assert registry.get("alpha1").description == "prueba"


def test_cost_sweep_is_monotone_and_continuous():
    frame = run_sweep(load_market_config(CONFIGS / "barrido_costo.toml"))
    assert list(frame.columns) == STANDALONE_COLUMNS
    assert len(frame) == 50
    for column in ("n_star", "ps_star", "profit"):
        assert _nonincreasing(frame[column]), column
    assert frame["interior"].iloc[0] == "true"
    assert frame["interior"].iloc[-1] == "false"
    # constante pasado el umbral
    beyond = frame[frame["value"] > 0.85]
    assert beyond["n_star"].eq(0.0).all()
    assert beyond["ps_star"].nunique() == 1


def test_learning_rate_sweep_peaks_inside_range():
    frame = run_sweep(load_market_config(CONFIGS / "barrido_alpha3.toml"))
    n_star = frame["n_star"].to_numpy()
    peak = int(np.argmax(n_star))
    assert n_star[0] == 0.0
    assert 0 < peak < len(n_star) - 1
    assert _nonincreasing(n_star[peak:])


def test_customers_sweep_standalone_is_monotone():
    frame = run_sweep(load_market_config(CONFIGS / "barrido_clientes.toml"))
    assert frame["value"].tolist() == [float(round(v)) for v in np.linspace(10, 200, 20)]
    for column in ("n_star", "ps_star", "profit"):
        assert _nondecreasing(frame[column]), column


def test_pinned_case1_cost_sweep():
    frame = run_sweep(load_market_config(CONFIGS / "barrido_c1_caso1.toml"))
    assert list(frame.columns) == BUNDLE_COLUMNS + PINNED_COLUMNS
    assert len(frame) == 45
    assert (frame["case"] == 1).all()
    for column in ("pb_star", "n1_star", "n2_star", "profit"):
        assert _nonincreasing(frame[column]), column
    # con c1 alto la tarifa del caso 1 sale de su región y la fila lo indica
    assert frame["in_region"].iloc[0] == "true"
    assert frame["in_region"].iloc[-1] == "false"
    flags = list(frame["in_region"])
    assert flags == sorted(flags, key=lambda flag: flag == "false")


def test_customers_sweep_bundle_with_sharing():
    sweep = {"parameter": "M", "lo": 10, "hi": 200, "steps": 8, "share": True}
    frame = run_sweep(load_market_config(CONFIGS / "barrido_clientes_paquete.toml", overrides={"sweep": sweep}))
    assert list(frame.columns) == BUNDLE_COLUMNS + SHARING_COLUMNS
    assert (frame["case"] == 1).all()
    assert frame["n2_star"].iloc[0] == 0.0
    for column in ("pb_star", "n1_star", "n2_star", "profit", "profit1", "profit2"):
        assert _nondecreasing(frame[column]), column
    np.testing.assert_allclose(frame["shapley1"] + frame["shapley2"], frame["profit"], atol=1e-9)
    assert ((frame["core_lo"] <= frame["shapley1"]) & (frame["shapley1"] <= frame["core_hi"])).all()


def test_single_point_sweep_matches_direct_optimum():
    sweep = {"parameter": "c1", "lo": 0.1, "hi": 0.1, "steps": 1}
    config = load_market_config(CONFIGS / "paquete.toml", overrides={"sweep": sweep})
    row = run_sweep(config).iloc[0]
    solution = optimize(build_bundle_market(config))
    assert row["case"] == int(solution.case)
    assert row["pb_star"] == solution.pb_star
    assert row["profit"] == solution.profit


def test_customers_sweep_follows_market_type():
    sweep = {"parameter": "M", "lo": 50, "hi": 50, "steps": 1}
    standalone = run_sweep(load_market_config(CONFIGS / "servicio1.toml", overrides={"sweep": sweep}))
    assert list(standalone.columns) == STANDALONE_COLUMNS
    bundle = run_sweep(load_market_config(CONFIGS / "paquete.toml", overrides={"sweep": sweep}))
    assert list(bundle.columns) == BUNDLE_COLUMNS


def test_sweep_requires_block():
    with pytest.raises(ConfigError):
        run_sweep(load_market_config(CONFIGS / "paquete.toml"))


def test_bundle_market_requires_second_service():
    config = load_market_config(CONFIGS / "servicio1.toml")
    assert build_standalone_market(config).customers == 50
    with pytest.raises(ConfigError):
        build_bundle_market(config)


def test_sweep_csv_is_deterministic(tmp_path):
    config = load_market_config(CONFIGS / "barrido_costo.toml")
    first, second = tmp_path / "a.csv", tmp_path / "b.csv"
    write_sweep_csv(run_sweep(config), first)
    write_sweep_csv(run_sweep(config), second)
    assert first.read_bytes() == second.read_bytes()
    assert b"\r" not in first.read_bytes()

    header = first.read_text(encoding="utf-8").splitlines()[0]
    assert header == ",".join(STANDALONE_COLUMNS)
    loaded = read_csv(first)
    original = run_sweep(config)
    for expected, got in zip(original["profit"], loaded["profit"]):
        assert got == pytest.approx(float(format_value(expected)), rel=1e-15)
