import math

import numpy as np
import pytest

from ergoharvest import (ContractError, ExtinctionRegimeError,
                         convex_power_yield, custom_drift_params, golden_max,
                         logistic_params, optimal_constant, optimal_threshold,
                         optimal_threshold_general, parameter_sweep,
                         parameter_sweep_detailed, yield_H, yield_bounds)

from conftest import CONVEX_RHO, CONVEX_X_STAR, H_STAR, X_STAR


def test_optimal_constant_closed_forms(fig1_params):
    assert optimal_constant(fig1_params) == (0.25, 0.0625)
    p2 = logistic_params(mu_bar=2.0, kappa=1.0, sigma=1.0, harvest_cap=1.0)
    assert optimal_constant(p2) == (0.75, 0.5625)
    boundary = logistic_params(mu_bar=0.5, kappa=1.0, sigma=1.0,
                               harvest_cap=1.0)
    with pytest.raises(ExtinctionRegimeError):
        optimal_constant(boundary)  # mu_bar = sigma^2/2 exactly


def test_yield_bounds_logistic(fig1_params):
    assert yield_bounds(fig1_params) == (0.0625, 0.25)
    # sigma -> 0: lower approaches upper
    tight = logistic_params(mu_bar=1.0, kappa=1.0, sigma=1e-4, harvest_cap=1.0)
    lo, hi = yield_bounds(tight)
    assert hi == 0.25
    assert lo == pytest.approx(hi, rel=1e-7)


def test_yield_bounds_capped_constant():
    # with M below the unconstrained best constant, the lower envelope is
    # the best admissible constant L(M)
    p = logistic_params(mu_bar=1.0, kappa=1.0, sigma=1.0, harvest_cap=0.1)
    lo, hi = yield_bounds(p)
    assert lo == pytest.approx(0.1 * (0.5 - 0.1), abs=1e-15)
    assert hi == 0.25


def test_yield_bounds_custom_drift():
    p = custom_drift_params(mu=lambda x: 1.0 - x * x, sigma=0.3,
                            harvest_cap=1.0, x_max=3.0)
    lo, hi = yield_bounds(p)
    assert lo == 0.0
    assert hi == pytest.approx(2.0 / (3.0 * math.sqrt(3.0)), abs=1e-8)


def test_golden_max_quadratic():
    x, v = golden_max(lambda x: -(x - 1.3) ** 2 + 2.0, 0.0, 4.0)
    assert x == pytest.approx(1.3, abs=1e-7)
    assert v == pytest.approx(2.0, abs=1e-12)
    with pytest.raises(ContractError):
        golden_max(lambda x: x, 1.0, 1.0)


def test_optimal_threshold_result(fig1_params, fig1_threshold):
    res, _ = fig1_threshold
    assert res.x_star == pytest.approx(X_STAR, abs=1e-6)
    assert res.H_at_x_star == pytest.approx(H_STAR, rel=1e-9)
    lo, hi = res.bracket
    assert lo < res.x_star < hi
    assert res.H_at_x_star >= np.max(res.scan_H) - 1e-12
    assert res.lower_bound < res.H_at_x_star < res.upper_bound
    assert res.unique_max_witness is True
    scan = res.grid_scan
    assert len(scan) == len(res.scan_eta)
    assert scan[0] == (res.scan_eta[0], res.scan_H[0])


def test_optimal_threshold_is_local_max(fig1_params, fig1_threshold):
    res, _ = fig1_threshold
    delta = 1e-4 * res.x_star
    h0 = yield_H(fig1_params, res.x_star)
    assert h0 >= yield_H(fig1_params, res.x_star - delta)
    assert h0 >= yield_H(fig1_params, res.x_star + delta)


def test_optimal_threshold_dominates_constants(fig1_params, fig1_threshold):
    res, _ = fig1_threshold
    margin = 0.5  # mu_bar - sigma^2/2
    for ell in np.linspace(0.0, fig1_params.harvest_cap_M, 100):
        l_of_ell = max(0.0, ell * (margin - ell) / fig1_params.kappa)
        assert res.H_at_x_star >= l_of_ell


def test_parameter_sweep_monotonicity(sweep_results):
    rows_mu, _ = sweep_results["mu_bar"]
    xs = [r.x_star for r in rows_mu]
    assert xs == sorted(xs) and len(set(xs)) == 5

    rows_m, _ = sweep_results["harvest_cap_M"]
    assert [r.x_star for r in rows_m] == sorted(r.x_star for r in rows_m)
    assert [r.H_at_x_star for r in rows_m] == \
        sorted(r.H_at_x_star for r in rows_m)

    rows_k, _ = sweep_results["kappa"]
    assert [r.x_star for r in rows_k] == \
        sorted((r.x_star for r in rows_k), reverse=True)
    assert [r.H_at_x_star for r in rows_k] == \
        sorted((r.H_at_x_star for r in rows_k), reverse=True)


def test_sweep_rows_report_bounds(sweep_results):
    for rows, _ in sweep_results.values():
        for r in rows:
            assert r.error is None
            assert r.lower_bound < r.H_at_x_star < r.upper_bound


def test_sweep_failure_isolation(fig1_params):
    # mu_bar = 0.3 fails persistence; the sweep must keep going
    detailed = parameter_sweep_detailed(fig1_params, "mu_bar",
                                        [0.3, 1.0], scan_n=200)
    assert len(detailed) == 2
    row_bad, res_bad = detailed[0]
    assert res_bad is None and row_bad.error
    assert math.isnan(row_bad.x_star)
    row_ok, res_ok = detailed[1]
    assert row_ok.error is None and res_ok is not None


def test_sweep_rejects_unknown_parameter(fig1_params):
    with pytest.raises(ContractError):
        parameter_sweep(fig1_params, "sigma_squared", [1.0])


def test_optimal_threshold_general_convex(fig1_params):
    res = optimal_threshold_general(fig1_params, convex_power_yield(2.0),
                                    scan_n=600)
    assert res.x_star == pytest.approx(CONVEX_X_STAR, abs=1e-6)
    assert res.H_at_x_star == pytest.approx(CONVEX_RHO, rel=1e-8)
    assert res.unique_max_witness is True
    # no finite yield envelope exists for a general Phi
    assert res.lower_bound == 0.0
    assert math.isinf(res.upper_bound)
    assert res.lower_bound <= res.H_at_x_star <= res.upper_bound


def test_threshold_result_serializes(fig1_threshold):
    res, _ = fig1_threshold
    payload = res.to_json_dict()
    assert payload["x_star"] == res.x_star
    assert payload["unique_max_witness"] is True
    assert payload["scan_points"] == len(res.scan_eta)
