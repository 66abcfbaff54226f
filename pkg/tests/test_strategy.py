import numpy as np
import pytest

from ergoharvest import (ContractError, DomainError, make_bang_bang,
                         make_constant, make_tabulated, strategy_eval)


def test_constant_eval():
    s = make_constant(0.3)
    assert strategy_eval(s, 2.0) == 0.3
    np.testing.assert_allclose(strategy_eval(s, np.array([0.1, 5.0])),
                               [0.3, 0.3])
    with pytest.raises(ContractError):
        make_constant(-0.1)


def test_bang_bang_left_continuity():
    s = make_bang_bang(0.5, 1.0)
    # no harvesting at or below the threshold, cap above
    assert strategy_eval(s, 0.5) == 0.0
    assert strategy_eval(s, np.nextafter(0.5, 1.0)) == 1.0
    assert strategy_eval(s, 0.49) == 0.0
    assert strategy_eval(s, 3.0) == 1.0


def test_bang_bang_matches_one_node_table():
    bb = make_bang_bang(0.7, 2.0)
    tab = make_tabulated([0.7], [2.0], cap=2.0)
    xs = np.array([0.1, 0.7, 0.7000001, 1.0, 10.0])
    np.testing.assert_array_equal(strategy_eval(bb, xs),
                                  strategy_eval(tab, xs))


def test_tabulated_steps():
    s = make_tabulated([1.0, 2.0], [0.25, 0.75], cap=1.0)
    xs = [0.5, 1.0, 1.5, 2.0, 2.5]
    np.testing.assert_allclose(strategy_eval(s, np.array(xs)),
                               [0.0, 0.0, 0.25, 0.25, 0.75])


def test_tabulated_validation():
    with pytest.raises(ContractError):
        make_tabulated([2.0, 1.0], [0.1, 0.1], cap=1.0)  # not increasing
    with pytest.raises(ContractError):
        make_tabulated([1.0], [1.5], cap=1.0)  # above cap
    with pytest.raises(ContractError):
        make_tabulated([1.0, 2.0], [0.1], cap=1.0)  # shape mismatch
    with pytest.raises(ContractError):
        make_bang_bang(-1.0, 1.0)
    with pytest.raises(ContractError):
        make_bang_bang(1.0, 0.0)


def test_domain_guard():
    s = make_constant(0.1)
    with pytest.raises(DomainError):
        strategy_eval(s, 0.0)
    with pytest.raises(DomainError):
        strategy_eval(s, np.array([1.0, -2.0]))


def test_descriptor_is_deterministic():
    a = make_bang_bang(0.4643296738584164, 1.0)
    b = make_bang_bang(0.4643296738584164, 1.0)
    assert a.descriptor() == b.descriptor()
    assert a.descriptor() != make_bang_bang(0.46433, 1.0).descriptor()
    t = make_tabulated([0.5, 1.5], [0.0, 1.0], cap=1.0)
    assert "0.5" in t.descriptor() and "1.5" in t.descriptor()
