import json
import math
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from nekhoroshev_lab.diophantine import (ApproximationCertificate, PeriodicVector,
                                         dirichlet_approx, exact_rank, hermite_normal_form,
                                         integer_kernel, iter_rationals, l1_ball, period_of,
                                         project_onto, resonance_module, smallest_divisor,
                                         to_rational)


def test_periodic_vector_reduction():
    w = PeriodicVector.from_rationals([Fraction(3, 4), Fraction(5, 6)])
    assert w.period == 12
    assert w.numerator == (9, 10)
    assert w.value == (Fraction(3, 4), Fraction(5, 6))


@pytest.mark.parametrize("w, T", [
    ([Fraction(3, 4), Fraction(5, 6)], 12),
    ([1, Fraction(8, 13)], 13),
    ([2, 4], 1),
])
def test_period_of(w, T):
    assert period_of(w) == T


def test_period_of_zero():
    with pytest.raises(ValueError):
        period_of([0, 0])


def test_dirichlet_exact_input():
    c = dirichlet_approx([1, Fraction(1, 2)], 4)
    assert c.result.value == (1, Fraction(1, 2))
    assert c.period == 2 and c.error == 0


def test_dirichlet_sqrt2():
    x = math.sqrt(2) - 1
    c = dirichlet_approx([1, x], 10)
    assert c.q == 5
    assert c.result.value == (1, Fraction(2, 5))
    assert float(c.error) == pytest.approx(abs(5 * x - 2) / 5, rel=1e-12)
    assert c.error <= Fraction(1, 50)


def test_dirichlet_golden():
    c = dirichlet_approx([1, 0.618034], 20)
    assert c.q == 13 and c.period == 13
    assert c.result.value == (1, Fraction(8, 13))


def test_dirichlet_fast_path_agrees(rng):
    for _ in range(200):
        v = rng.uniform(-1, 1, 2)
        Q = int(rng.integers(2, 200))
        a = dirichlet_approx(v, Q, fast_path=True)
        b = dirichlet_approx(v, Q, fast_path=False)
        assert (a.q, a.result) == (b.q, b.result)


@pytest.mark.parametrize("v, Q", [([0, 0], 5), ([1, 2], 1), ([1, 2], 0.5), ([1], 4)])
def test_dirichlet_domain_errors(v, Q):
    with pytest.raises(ValueError):
        dirichlet_approx(v, Q)


@settings(max_examples=200, deadline=None)
@given(st.lists(st.floats(-10, 10, allow_nan=False), min_size=2, max_size=4),
       st.sampled_from([5, 10, 50]))
def test_dirichlet_bounds_property(v, Q):
    if not any(v):
        return
    c = dirichlet_approx(v, Q)
    assert c.check()
    lo, hi = c.period_bounds()
    assert lo <= c.period <= hi


def test_certificate_roundtrip():
    c = dirichlet_approx([0.3, -0.7, 0.11], 50)
    d = json.loads(c.to_json())
    assert ApproximationCertificate.from_dict(d) == c
    assert d["bounds_hold"] is True


def test_resonance_module_examples():
    w = PeriodicVector.from_rationals
    m = resonance_module([w([1, 1, 0])])
    assert m.rank == 2
    assert set(m.generators) == {(1, -1, 0), (0, 0, 1)}
    m = resonance_module([w([1, 1, 0]), w([1, 0, 0])])
    assert m.generators == ((0, 0, 1),)
    m = resonance_module([w([1, 1])])
    assert m.generators in (((1, -1),), ((-1, 1),))


def test_resonance_module_dependent():
    w = PeriodicVector.from_rationals
    with pytest.raises(ValueError, match="#1"):
        resonance_module([w([1, 2]), w([2, 4])])


def test_resonance_module_saturated(rng):
    # every small integer point in the real span lies in the integer span
    for _ in range(10):
        om = [PeriodicVector.from_rationals([int(x) for x in rng.integers(-3, 4, 3)])
              for _ in range(1)]
        if not any(om[0].numerator):
            continue
        mod = resonance_module(om)
        G = np.array(mod.generators, dtype=float)
        for k in l1_ball(3, 6):
            if not mod.contains(k):
                continue
            coef, *_ = np.linalg.lstsq(G.T, np.array(k, float), rcond=None)
            assert np.allclose(coef, np.round(coef), atol=1e-9)


def test_projection():
    mod = resonance_module([PeriodicVector.from_rationals([1, 1, 0])])
    assert np.allclose(project_onto(mod, [1, 0, 0]), [0.5, -0.5, 0], atol=1e-14)
    x = np.array([1.0, -1.0, 3.0])
    assert np.allclose(project_onto(mod, x), x)
    full = resonance_module([], n=3)
    assert np.allclose(project_onto(full, [1, 2, 3]), [1, 2, 3])


@settings(max_examples=50, deadline=None)
@given(st.lists(st.floats(-5, 5), min_size=3, max_size=3))
def test_projection_idempotent_symmetric(x):
    mod = resonance_module([PeriodicVector.from_rationals([1, 2, -1])])
    P = mod.projector()
    assert np.allclose(P, P.T, atol=1e-12)
    y = project_onto(mod, x)
    assert np.allclose(project_onto(mod, y), y, atol=1e-12)


def test_smallest_divisor_examples():
    w = PeriodicVector.from_rationals([1, Fraction(2, 5)])
    assert smallest_divisor(w, 3) == Fraction(1, 5)
    assert smallest_divisor(PeriodicVector.from_rationals([1, 1]), 2) == 1


def test_smallest_divisor_lower_bound():
    for w in iter_rationals(2, 6):
        d = smallest_divisor(w, 4)
        assert d is None or d >= Fraction(1, w.period)


def test_integer_kernel_and_hnf():
    rows = [[1, 2, 3], [4, 5, 6]]
    ker = integer_kernel(rows, 3)
    assert len(ker) == 1
    assert all(sum(a * b for a, b in zip(r, ker[0])) == 0 for r in rows)
    assert exact_rank(rows) == 2
    assert hermite_normal_form([[2, 4], [1, 3]]) == hermite_normal_form([[1, 3], [0, 2]])


def test_to_rational_exact():
    assert to_rational(0.5) == Fraction(1, 2)
    assert to_rational("3/7") == Fraction(3, 7)
