import numpy as np

from ctkkt.core import exprdsl
from ctkkt.core.selfcheck import (
    derivative_sweep,
    increase_direction_sweep,
    inverse_bound_sweep,
    run_selftest,
)


def test_derivative_sweep_passes():
    result = derivative_sweep(count=1000, seed=0)
    assert result.passed, result.first_failure
    assert result.worst <= 1e-5
    assert result.cases + result.skipped == 1000


def test_inverse_bound_has_no_violations():
    result = inverse_bound_sweep(count=500, seed=0)
    assert result.failures == 0
    assert result.worst <= 1.0


def test_increase_direction_sweep():
    result = increase_direction_sweep(count=200, seed=0)
    assert result.passed, result.first_failure
    assert result.worst <= 1e-9


def test_corrupted_chain_rule_is_detected(monkeypatch):
    monkeypatch.setitem(exprdsl._CHAIN_RULES, "sin", lambda a: exprdsl.func("sin", a))
    result = derivative_sweep(count=200, seed=0)
    assert not result.passed
    assert result.first_failure is not None


def test_run_selftest_reports_every_sweep():
    results = run_selftest(seed=3)
    assert [r.name for r in results] == [
        "derivatives",
        "inverse_norm_bound",
        "increase_direction",
    ]
    assert all(r.passed for r in results)
    assert all(isinstance(r.to_dict()["worst"], float) for r in results)
    assert np.isfinite([r.worst for r in results]).all()


def test_mixed_partials_are_differentiated_independently(monkeypatch):
    from ctkkt.core import selfcheck

    calls = []

    def counting(e, v):
        calls.append(v)
        return exprdsl.differentiate(e, v)

    monkeypatch.setattr(selfcheck, "differentiate", counting)
    result = derivative_sweep(count=50, seed=1)
    assert result.passed, result.first_failure
    assert calls

    monkeypatch.setattr(selfcheck, "differentiate", lambda e, v: exprdsl.const(0.0))
    result = derivative_sweep(count=200, seed=1)
    assert not result.passed
    assert "mixed partials" in result.first_failure
