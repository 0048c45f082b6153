"""
Pruebas del paquete de dos servicios: demanda por casos, óptimo KKT del
caso 1, casos 2 y 3 por perfil, selección global y diagnóstico de la forma
cerrada impresa.
"""

import sys
import os

import numpy as np
import pytest

sys.path.insert(0, os.path.dirname(os.path.abspath(__file__)))

from bundle import (BundleMarket, DemandCase, ReservationPricePair, case_profile, classify_case,
                    demand_probability, discrepancy_report, market_split, optimize,
                    printed_case1_closed_form, profit, solve_case, solve_case1)
from errors import DomainError
from numopt import GridSpec, finite_diff_grad, finite_diff_hessian, grid_polish_maximize, is_negative_semidefinite
from quality import QualityCurve, evaluate

CURVE1 = QualityCurve(0.884, 0.59, 0.114)
CURVE2 = QualityCurve(0.82, 0.069, 0.142)
REFERENCE = BundleMarket(50, 0.1, CURVE1, 0.05, CURVE2)
WEAK_SECOND = BundleMarket(50, 0.1, CURVE1, 1.0, QualityCurve(0.05, 0.03, 0.1))
NO_CASE2 = BundleMarket(50, 0.1, QualityCurve(0.3, 0.1, 0.1), 0.1, QualityCurve(0.9, 0.05, 0.1))
# región del caso 3 delgada: q1 <= q2 solo en una franja estrecha de (n1, n2)
THIN_CASE3 = BundleMarket(106, 0.02042, QualityCurve(0.7891, 0.6935, 0.1843),
                          0.6966, QualityCurve(0.2180, 0.1773, 0.3133))


def _oracle(market, points, polish_iters=400):
    upper_pb = market.curve1.alpha1 + market.curve2.alpha1
    grid = GridSpec(((0.0, upper_pb, points), (0.0, 200.0, points), (0.0, 200.0, points)))
    return grid_polish_maximize(lambda pb, n1, n2: profit(market, pb, n1, n2), grid, polish_iters=polish_iters)


# ---------------------------------------------------------------------------
# Demanda
# ---------------------------------------------------------------------------

def test_demand_examples():
    assert demand_probability(0.8, 0.7, 0.0) == 1.0
    assert demand_probability(0.8, 0.7, 1.5) == 0.0
    assert demand_probability(0.8, 0.7, 3.0) == 0.0
    assert demand_probability(0.8186, 0.7945, 0.65846) == pytest.approx(0.6667, abs=1e-4)


def test_demand_rejects_invalid_inputs():
    with pytest.raises(DomainError):
        demand_probability(0.0, 0.5, 0.1)
    with pytest.raises(DomainError):
        demand_probability(0.5, 0.5, -0.1)


@pytest.mark.parametrize("q1, q2", [(0.8, 0.5), (0.5, 0.8), (0.6, 0.6)])
def test_demand_is_continuous_at_case_boundaries(q1, q2):
    for boundary in (min(q1, q2), max(q1, q2), q1 + q2):
        left = demand_probability(q1, q2, boundary)
        right = demand_probability(q1, q2, np.nextafter(boundary, np.inf))
        assert abs(left - right) <= 1e-12


def test_demand_is_monotone_in_fee():
    rng = np.random.default_rng(1)
    for _ in range(50):
        q1, q2 = rng.uniform(0.05, 1.0, size=2)
        values = demand_probability(q1, q2, np.linspace(0, q1 + q2 + 0.1, 2001))
        assert np.all(np.diff(values) <= 1e-15)
        assert np.all((values >= 0) & (values <= 1))


def test_demand_matches_pointwise_subscription_rule():
    q1, q2, pb = 0.7, 0.4, 0.55
    thetas = np.linspace(0.0005, 0.9995, 1000)
    t1, t2 = np.meshgrid(thetas, thetas)
    share = np.mean(t1 * q1 + t2 * q2 >= pb)
    assert share == pytest.approx(demand_probability(q1, q2, pb), abs=2e-3)
    assert ReservationPricePair(1.0, 0.5).subscribes(q1, q2, pb)
    assert not ReservationPricePair(0.1, 0.1).subscribes(q1, q2, pb)


def test_classify_case_prefers_lower_id_on_ties():
    assert classify_case(0.8, 0.7, 0.5) == DemandCase.CASE_1
    assert classify_case(0.8, 0.7, 0.7) == DemandCase.CASE_1
    assert classify_case(0.8, 0.7, 0.75) == DemandCase.CASE_2
    assert classify_case(0.7, 0.8, 0.75) == DemandCase.CASE_3
    assert classify_case(0.8, 0.7, 0.8) == DemandCase.CASE_2
    assert classify_case(0.8, 0.7, 1.2) == DemandCase.CASE_4


# ---------------------------------------------------------------------------
# Beneficio y perfiles por caso
# ---------------------------------------------------------------------------

def test_profit_examples():
    assert profit(REFERENCE, 0.65846, 19.29, 7.01) == pytest.approx(19.67, abs=0.01)
    assert profit(REFERENCE, 0.0, 0.0, 0.0) == 0.0
    assert profit(REFERENCE, 5.0, 10.0, 10.0) == pytest.approx(-1.5)
    with pytest.raises(DomainError):
        profit(REFERENCE, 0.5, -1.0, 0.0)


def test_case_profile_is_best_fee_within_case():
    n1, n2 = 19.29, 7.01
    q1, q2 = evaluate(CURVE1, n1), evaluate(CURVE2, n2)
    value, pb = case_profile(REFERENCE, DemandCase.CASE_1, n1, n2)
    assert value == pytest.approx(profit(REFERENCE, pb, n1, n2), abs=1e-12)
    fees = np.linspace(0, min(q1, q2), 5001)
    assert np.max(profit(REFERENCE, fees, n1, n2)) <= value + 1e-12


def test_case_profile_empty_region_is_minus_infinity():
    value, _ = case_profile(NO_CASE2, DemandCase.CASE_2, 10.0, 10.0)
    assert value == -np.inf


# ---------------------------------------------------------------------------
# Caso 1
# ---------------------------------------------------------------------------

def test_case1_reference_solution():
    solution = solve_case1(REFERENCE)
    assert solution.feasible and solution.in_region
    assert solution.pb_star == pytest.approx(0.658, abs=0.001)
    assert solution.n1_star == pytest.approx(19.29, abs=0.05)
    assert solution.n2_star == pytest.approx(7.01, abs=0.05)
    assert solution.profit == pytest.approx(19.67, abs=0.01)
    assert solution.kkt_residual <= 1e-6


def test_case1_demand_is_two_thirds():
    solution = solve_case1(REFERENCE)
    q1, q2 = evaluate(CURVE1, solution.n1_star), evaluate(CURVE2, solution.n2_star)
    assert demand_probability(q1, q2, solution.pb_star) == pytest.approx(2 / 3, abs=1e-6)


def test_case1_stationarity_and_concavity():
    solution = solve_case1(REFERENCE)
    point = (solution.pb_star, solution.n1_star, solution.n2_star)

    def f(pb, n1, n2):
        return profit(REFERENCE, pb, n1, n2)

    assert np.max(np.abs(finite_diff_grad(f, point))) <= 1e-4
    assert is_negative_semidefinite(finite_diff_hessian(f, point, h=1e-3))


def test_case1_symmetric_services_buy_equal_data():
    market = BundleMarket(50, 0.1, CURVE1, 0.1, CURVE1)
    solution = solve_case1(market)
    assert solution.n1_star == solution.n2_star
    q = evaluate(CURVE1, solution.n1_star)
    assert solution.pb_star ** 2 == pytest.approx(2 * q * q / 3, abs=1e-9)


def test_case1_zero_data_when_service_is_too_expensive():
    market = BundleMarket(10, 0.1, CURVE1, 0.05, CURVE2)
    assert not solve_case1(market).feasible
    solution = solve_case1(market, allow_zero_data=True)
    assert solution.feasible
    assert solution.n2_star == 0.0
    assert solution.pb_star == pytest.approx(0.547, abs=1e-3)
    assert solution.kkt_residual <= 1e-6


def test_case1_unrestricted_reports_point_outside_region():
    market = BundleMarket(50, 0.9, CURVE1, 0.05, CURVE2)
    assert not solve_case1(market).feasible
    solution = solve_case1(market, restrict_region=False)
    assert solution.feasible and not solution.in_region
    assert solution.pb_star > evaluate(CURVE1, solution.n1_star)


# ---------------------------------------------------------------------------
# Casos 2 a 4 y selección global
# ---------------------------------------------------------------------------

def test_case4_is_never_selected():
    solution = solve_case(REFERENCE, DemandCase.CASE_4)
    assert not solution.feasible
    assert np.isnan(solution.profit)


def test_empty_case2_region_is_infeasible():
    assert not solve_case(NO_CASE2, DemandCase.CASE_2).feasible
    assert optimize(NO_CASE2).case == DemandCase.CASE_3


def test_case2_for_reference_market_is_worse_than_case1():
    case2 = solve_case(REFERENCE, DemandCase.CASE_2)
    assert case2.feasible
    assert case2.profit < solve_case1(REFERENCE).profit


def test_thin_case3_region_reaches_restricted_maximum():
    solution = solve_case(THIN_CASE3, DemandCase.CASE_3)
    assert solution.feasible
    assert solution.kkt_residual <= 1e-6
    q1 = evaluate(THIN_CASE3.curve1, solution.n1_star)
    q2 = evaluate(THIN_CASE3.curve2, solution.n2_star)
    assert q1 <= solution.pb_star <= q2 + 1e-12
    assert solution.profit >= 6.10

    n1, n2 = np.meshgrid(np.linspace(0.0, 2.0, 2001), np.linspace(3.0, 7.0, 401))
    best = np.max(case_profile(THIN_CASE3, DemandCase.CASE_3, n1, n2)[0])
    assert solution.profit >= best - 1e-9
    assert solution.profit == pytest.approx(best, abs=1e-2)


def test_case2_and_case3_are_stationary_on_random_markets():
    rng = np.random.default_rng(13)
    n = np.linspace(0.0, 200.0, 201)
    n1, n2 = np.meshgrid(n, n)
    for _ in range(8):
        curves = []
        for _ in range(2):
            a1 = rng.uniform(0.2, 0.95)
            curves.append(QualityCurve(a1, rng.uniform(0.3, 0.9) * a1, rng.uniform(0.08, 0.35)))
        market = BundleMarket(int(rng.integers(30, 121)), rng.uniform(0.02, 0.7), curves[0],
                              rng.uniform(0.02, 0.7), curves[1])
        for case in (DemandCase.CASE_2, DemandCase.CASE_3):
            solution = solve_case(market, case)
            best = np.max(case_profile(market, case, n1, n2)[0])
            if not solution.feasible:
                assert not np.isfinite(best)
                continue
            assert solution.kkt_residual <= 1e-6
            assert solution.profit >= best - 1e-6


def test_weak_second_service_selects_case2():
    solution = optimize(WEAK_SECOND)
    assert solution.case == DemandCase.CASE_2
    assert solution.n2_star == 0.0
    assert solution.kkt_residual <= 1e-6
    q1, q2 = evaluate(WEAK_SECOND.curve1, solution.n1_star), evaluate(WEAK_SECOND.curve2, 0.0)
    assert q2 <= solution.pb_star <= q1
    (_, _, _), best = _oracle(WEAK_SECOND, 40)
    assert solution.profit == pytest.approx(best, abs=1e-4)


def test_optimize_reference_market():
    solution = optimize(REFERENCE)
    assert solution.case == DemandCase.CASE_1
    assert solution.pb_star == pytest.approx(0.658, abs=0.001)
    assert solution.profit == pytest.approx(19.67, abs=0.01)
    # el paquete supera la suma de las ventas separadas con tarifa menor
    assert solution.profit > 8.31 + 9.58
    assert solution.pb_star < 0.407 + 0.396


def test_optimize_matches_global_oracle():
    solution = optimize(REFERENCE)
    (pb, n1, n2), best = _oracle(REFERENCE, 60)
    assert best <= solution.profit + 1e-6
    assert solution.profit == pytest.approx(best, abs=1e-3)
    assert (pb, n1, n2) == pytest.approx((solution.pb_star, solution.n1_star, solution.n2_star), abs=1e-2)


def test_optimize_matches_oracle_on_random_markets():
    rng = np.random.default_rng(7)
    for _ in range(20):
        curves = []
        for _ in range(2):
            a1 = rng.uniform(0.7, 0.95)
            curves.append(QualityCurve(a1, rng.uniform(0.3, 0.6) * a1, rng.uniform(0.08, 0.3)))
        market = BundleMarket(int(rng.integers(30, 101)), rng.uniform(0.02, 0.2), curves[0],
                              rng.uniform(0.02, 0.2), curves[1])
        solution = optimize(market)
        (pb, n1, n2), best = _oracle(market, 30)
        assert best <= solution.profit + 1e-6
        assert solution.profit == pytest.approx(best, abs=1e-4)
        assert (pb, n1, n2) == pytest.approx((solution.pb_star, solution.n1_star, solution.n2_star), abs=1e-3)


def test_optimize_is_symmetric_under_service_swap():
    direct = optimize(REFERENCE)
    swapped = optimize(REFERENCE.swapped())
    assert swapped.pb_star == pytest.approx(direct.pb_star, abs=1e-9)
    assert swapped.n1_star == pytest.approx(direct.n2_star, abs=1e-9)
    assert swapped.n2_star == pytest.approx(direct.n1_star, abs=1e-9)


def test_optimize_is_deterministic():
    assert optimize(WEAK_SECOND) == optimize(WEAK_SECOND)


def test_pinned_case1_is_monotone_in_first_cost():
    solutions = [optimize(BundleMarket(50, c1, CURVE1, 0.05, CURVE2), case=1)
                 for c1 in np.linspace(0.02, 0.9, 45)]
    assert all(s.case == DemandCase.CASE_1 for s in solutions)
    for field in ("pb_star", "n1_star", "n2_star", "profit"):
        values = np.array([getattr(s, field) for s in solutions])
        assert np.all(np.diff(values) <= 1e-9), field


def test_expensive_first_service_switches_to_case3():
    market = BundleMarket(50, 0.9, CURVE1, 0.05, CURVE2)
    pinned = optimize(market, case=1)
    best = optimize(market)
    assert best.case == DemandCase.CASE_3
    assert best.profit >= pinned.profit - 1e-9


# ---------------------------------------------------------------------------
# Reparto del mercado y forma cerrada impresa
# ---------------------------------------------------------------------------

def test_market_split_fractions():
    split = market_split(0.8186, 0.7945, 0.4093, 0.39725, 0.65846)
    total = split.both + split.only_service1 + split.only_service2 + split.neither
    assert total == pytest.approx(1.0, abs=1e-12)
    assert split.both == pytest.approx(0.25, abs=1e-3)
    assert split.neither == pytest.approx(0.25, abs=1e-3)
    assert split.bundle == pytest.approx(2 / 3, abs=1e-3)


def test_printed_closed_form_does_not_match():
    printed = printed_case1_closed_form(REFERENCE)
    assert printed.pb == pytest.approx(0.8147, abs=1e-3)
    assert printed.n1 == pytest.approx(21.03, abs=0.05)
    assert printed.n2 == pytest.approx(8.47, abs=0.05)
    report = discrepancy_report(REFERENCE)
    assert report.mismatch
    assert report.pb_gap > 0.1
    keys = [key for key, _ in report.lines()]
    assert keys == ["printed_a3", "printed_pb", "printed_n1", "printed_n2", "kkt_pb", "pb_gap",
                    "closed_form_mismatch"]


def test_printed_closed_form_with_eight_thirds_matches():
    printed = printed_case1_closed_form(REFERENCE, a3_coefficient=8 / 3)
    assert printed.pb == pytest.approx(solve_case1(REFERENCE).pb_star, abs=1e-3)
