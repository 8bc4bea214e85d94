import json
import math
from fractions import Fraction

import pytest

from nekhoroshev_lab.constants import Constants
from nekhoroshev_lab.exponents import condition_ledger, exponent_conditions, exponent_plan


def test_plan_n2_tau2():
    p = exponent_plan(2, 2)
    assert p.a_seq == (Fraction(1, 144), Fraction(1, 12))
    assert p.a == p.b == Fraction(1, 432)
    assert p.theorem_value == Fraction(1, 12288)


def test_plan_errors():
    with pytest.raises(ValueError):
        exponent_plan(2, Fraction(3, 2))
    with pytest.raises(ValueError):
        exponent_plan(1, 2)


@pytest.mark.parametrize("n", range(2, 7))
@pytest.mark.parametrize("tau", [2, 5, 11])
def test_exponent_inequalities(n, tau):
    p = exponent_plan(n, tau)
    assert all(x < y for x, y in zip(p.a_seq, p.a_seq[1:]))
    assert all(p.a < x for x in p.a_seq)
    rows = exponent_conditions(p)
    assert rows and all(r.passed for r in rows)


def test_plan_derived_forms():
    p = exponent_plan(2, 2)
    assert p.m(1e-3) == math.ceil(1e-3 ** (-1 / 432))
    assert p.r0(1e-3) == pytest.approx(1e-3 ** (1 / 432))
    assert p.r(2, 1e-3, T=2.0) == pytest.approx(1e-3 ** (1 / 12) / 2)


def test_ledger_gamma_half_binding():
    led = condition_ledger(2, 2, 0.5, 1e-3)
    assert led.binding.label() == "ix'"
    assert led.log_eps0 == pytest.approx(432 * math.log(0.5))
    assert led.log_eps0_bisect == pytest.approx(led.log_eps0, rel=1e-15)
    assert not led.passed
    below = condition_ledger(2, 2, 0.5, 0.0, log_eps=432 * math.log(0.5) - 1)
    assert below.passed


def test_ledger_trivial_thresholds():
    led = condition_ledger(2, 2, 1.0, 1e-3)
    assert led.passed
    for r in led.rows:
        if r.kind == "threshold":
            assert r.threshold == pytest.approx(1.0)


@pytest.mark.parametrize("gamma, r, s", [(0.5, 1.0, 1.0), (1.0, 0.1, 0.3), (0.9, 0.5, 0.05)])
def test_ledger_monotone_in_eps(gamma, r, s):
    logs = [-5000, -1000, -300, -100, -30, -10, -1, -0.1]
    verdicts = [condition_ledger(2, 3, gamma, 0.0, r=r, s=s, log_eps=x).passed for x in logs]
    first_fail = verdicts.index(False) if False in verdicts else len(verdicts)
    assert all(verdicts[:first_fail]) and not any(verdicts[first_fail:])


def test_ledger_bisection_close_to_closed_form():
    for gamma in (0.3, 0.7, 1.0):
        led = condition_ledger(3, 5, gamma, 1e-3, r=0.2, s=0.4)
        assert abs(led.log_eps0_bisect - led.log_eps0) <= 4 * math.ulp(abs(led.log_eps0) or 1)


def test_ledger_constants_move_threshold():
    base = condition_ledger(2, 2, 0.5, 1e-3)
    c = Constants(conditions={"ix'": 2.0})
    led = condition_ledger(2, 2, 0.5, 1e-3, constants=c)
    assert led.log_eps0 == pytest.approx(base.log_eps0 - 432 * math.log(2))


def test_ledger_exports():
    led = condition_ledger(2, 2, 0.5, 1e-3)
    d = json.loads(led.to_json())
    assert d["binding"] == "ix'" and d["plan"]["a"] == "1/432"
    assert "binding: ix'" in led.table()


def test_ledger_rejects_nonpositive():
    with pytest.raises(ValueError):
        condition_ledger(2, 2, 0.0, 1e-3)
