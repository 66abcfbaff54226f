import math

import numpy as np
import pytest

from ergoharvest import (ContractError, DomainError, concave_log_yield,
                         convex_power_yield, custom_drift_params, drift_mu,
                         identity_yield, logistic_params, peak_of_x_mu,
                         persistence_margin, phi_prime_inverse,
                         validate_assumptions, validate_yield,
                         yield_spec_from_config)


def test_logistic_params_defaults_and_validation():
    p = logistic_params(mu_bar=1.0, kappa=1.0, sigma=1.0, harvest_cap=1.0)
    assert p.drift_kind == "logistic"
    assert p.x_max == 10.0  # ten carrying capacities
    assert p.sigma2 == 1.0
    with pytest.raises(ContractError):
        logistic_params(mu_bar=-1.0, kappa=1.0, sigma=1.0, harvest_cap=1.0)
    with pytest.raises(ContractError):
        logistic_params(mu_bar=1.0, kappa=1.0, sigma=0.0, harvest_cap=1.0)
    with pytest.raises(ContractError):
        logistic_params(mu_bar=1.0, kappa=1.0, sigma=1.0, harvest_cap=0.0)


def test_drift_and_margin():
    p = logistic_params(mu_bar=2.0, kappa=0.5, sigma=1.0, harvest_cap=1.0)
    assert drift_mu(p, 0.0) == 2.0
    assert drift_mu(p, 2.0) == 1.0
    np.testing.assert_allclose(drift_mu(p, np.array([0.0, 4.0])), [2.0, 0.0])
    assert persistence_margin(p) == 1.5
    with pytest.raises(DomainError):
        drift_mu(p, -1.0)


def test_peak_of_x_mu_logistic_closed_form():
    p = logistic_params(mu_bar=3.0, kappa=2.0, sigma=1.0, harvest_cap=1.0)
    x_iota, val = peak_of_x_mu(p)
    assert x_iota == pytest.approx(0.75, abs=1e-14)
    assert val == pytest.approx(9.0 / 8.0, abs=1e-14)


def test_peak_of_x_mu_custom_golden():
    p = custom_drift_params(mu=lambda x: 1.0 - x * x, sigma=0.3,
                            harvest_cap=1.0, x_max=3.0)
    x_iota, val = peak_of_x_mu(p)
    # max of x(1 - x^2) at x = 1/sqrt(3)
    assert x_iota == pytest.approx(1.0 / math.sqrt(3.0), abs=1e-7)
    assert val == pytest.approx(2.0 / (3.0 * math.sqrt(3.0)), abs=1e-8)


def test_yield_specs():
    ident = identity_yield()
    assert ident.phi(3.5) == 3.5
    conc = concave_log_yield()
    assert conc.phi(0.0) == 0.0
    assert conc.phi_prime(0.0) == 1.0
    vex = convex_power_yield(2.0)
    assert vex.phi(3.0) == 9.0
    assert vex.phi_prime(3.0) == 6.0
    assert vex.label == "power2"
    with pytest.raises(ContractError):
        convex_power_yield(0.5)


def test_validate_assumptions_pass_and_fail():
    good = logistic_params(mu_bar=1.0, kappa=1.0, sigma=1.0, harvest_cap=1.0)
    rep = validate_assumptions(good)
    assert rep.all_pass and not rep.failing()

    bad = logistic_params(mu_bar=0.4, kappa=1.0, sigma=1.0, harvest_cap=1.0)
    rep = validate_assumptions(bad)
    assert not rep.all_pass
    assert any("persistence" in c.name for c in rep.failing())

    payload = rep.to_json_dict()
    assert payload["all_pass"] is False
    assert any(not c["passed"] for c in payload["checks"])


def test_validate_yield():
    for spec in (identity_yield(), concave_log_yield(), convex_power_yield()):
        assert validate_yield(spec).all_pass, spec.label


def test_phi_prime_inverse_log_yield():
    conc = concave_log_yield()
    # Phi'(z) = 1/(1+z): inverse of a is 1/a - 1
    assert phi_prime_inverse(conc, 0.5) == pytest.approx(1.0, abs=1e-9)
    assert phi_prime_inverse(conc, 0.1) == pytest.approx(9.0, abs=1e-8)
    assert phi_prime_inverse(conc, 1.0) == 0.0  # a = Phi'(0) boundary
    assert phi_prime_inverse(conc, 2.0) is None  # above Phi'(0)
    with pytest.raises(ContractError):
        phi_prime_inverse(identity_yield(), 0.5)


def test_yield_spec_from_config():
    assert yield_spec_from_config({"kind": "identity"}).kind == "identity"
    assert yield_spec_from_config({}).kind == "identity"
    conc = yield_spec_from_config({"kind": "concave", "form": "log1p"})
    assert conc.label == "log1p"
    vex = yield_spec_from_config({"kind": "convex", "exponent": 3.0})
    assert vex.phi(2.0) == 8.0
    with pytest.raises(ContractError):
        yield_spec_from_config({"kind": "concave", "form": "sqrt"})
    with pytest.raises(ContractError):
        yield_spec_from_config({"kind": "mystery"})
