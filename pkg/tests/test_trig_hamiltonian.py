import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from nekhoroshev_lab.diophantine import PeriodicVector, smallest_divisor
from nekhoroshev_lab.trig_hamiltonian import (AnalyticDomain, TrigPolyHamiltonian, action_norm,
                                              angular_norm, average_along, divisors_used,
                                              homological_solve, linear_hamiltonian,
                                              majorant_norm, poisson_bracket, weighted_vf_norm)

from conftest import random_trig

T = TrigPolyHamiltonian
pv = PeriodicVector.from_rationals


def test_bracket_examples():
    f = T.sin_mode((1, 0))
    I1 = T.monomial((1, 0))
    assert poisson_bracket(f, I1).allclose(T.cos_mode((1, 0), 2 * math.pi))
    assert poisson_bracket(f, f).is_zero()
    assert poisson_bracket(T.monomial((1, 1)), I1).is_zero()


def test_bracket_dimension_mismatch():
    with pytest.raises(ValueError):
        poisson_bracket(T.zero(2), T.zero(3))


def test_jacobi_identity(rng):
    for _ in range(20):
        f, g, h = (random_trig(rng, nterms=3) for _ in range(3))
        J = (poisson_bracket(poisson_bracket(f, g), h) + poisson_bracket(poisson_bracket(g, h), f)
             + poisson_bracket(poisson_bracket(h, f), g))
        assert J.max_abs_coeff() < 1e-10


def test_reality_preserved(rng):
    f, g = random_trig(rng), random_trig(rng)
    assert poisson_bracket(f, g).real_part_check() < 1e-12


def test_evaluation_matches_closed_form():
    H = T.quadratic([1.0, -1.0]) + T.sin_mode((1, 1), 0.3)
    th, I = np.array([0.1, 0.25]), np.array([0.4, -0.2])
    expect = 0.5 * (0.16 - 0.04) + 0.3 * math.sin(2 * math.pi * 0.35)
    assert H(th, I) == pytest.approx(expect, abs=1e-14)


def test_average_examples():
    f = T.sin_mode((1, 1))
    assert average_along(f, pv([1, -1])).allclose(f)
    assert average_along(f, pv([1, 1])).is_zero()


def test_average_matches_quadrature(rng):
    # [f](theta) = (1/T) int_0^T f(theta + omega t) dt, sampled at 64 points
    for _ in range(20):
        f = random_trig(rng, K=3)
        w = pv([1, int(rng.integers(-3, 4))])
        Tp = float(w.real_period)
        th, I = rng.uniform(0, 1, 2), rng.uniform(-1, 1, 2)
        ts = np.arange(64) * Tp / 64
        quad = np.mean([f(th + w.to_array() * t, I) for t in ts])
        assert average_along(f, w)(th, I) == pytest.approx(quad, abs=1e-10)


def test_average_is_projection(rng):
    dom = AnalyticDomain(0.2, 0.1)
    for _ in range(10):
        f = random_trig(rng)
        w = pv([1, 1])
        a = average_along(f, w)
        assert average_along(a, w).allclose(a)
        assert majorant_norm(a, dom) <= majorant_norm(f, dom) + 1e-15


def test_homological_example():
    chi = homological_solve(T.sin_mode((1, 1)), pv([1, 1]))
    assert chi.allclose(T.cos_mode((1, 1), -1 / (4 * math.pi)))
    assert homological_solve(T.sin_mode((1, -1)), pv([1, 1])).is_zero()


def test_homological_identity(rng):
    for _ in range(30):
        f = random_trig(rng, K=3)
        w = pv([1, int(rng.integers(1, 5))])
        chi = homological_solve(f, w)
        res = poisson_bracket(chi, linear_hamiltonian(w)) - (f - average_along(f, w))
        assert res.max_abs_coeff() < 1e-12


def test_divisors_bounded_by_period(rng):
    for _ in range(20):
        f = random_trig(rng, K=3)
        w = pv([1, int(rng.integers(1, 7)) / 7])
        ds = divisors_used(f, w)
        if ds:
            assert min(ds) >= 1 / w.real_period
            assert min(ds) >= smallest_divisor(w, 6)


def test_commuting_average(rng):
    w1, w2 = pv([1, 1, 0]), pv([1, 0, 2])
    modes = [(1, -1, 0), (0, 0, 1), (1, -1, 1), (2, -2, -1)]
    for _ in range(20):
        g = random_trig(rng, n=3, modes=modes)
        for out in (average_along(g, w2), homological_solve(g, w2)):
            assert all(w1.is_resonant(k) for k in out.modes())


def test_majorant_examples():
    f = T.sin_mode((1, 0))
    assert majorant_norm(f, AnalyticDomain(0.5, 0.0, R=0.5)) == pytest.approx(1.0)
    assert majorant_norm(f, AnalyticDomain(0.5, 0.1, R=0.5)) == pytest.approx(
        math.exp(0.2 * math.pi))
    assert majorant_norm(T.monomial((2, 0)), AnalyticDomain(0.25, 0.1, R=1.0)) == pytest.approx(
        1.5625)


def test_majorant_dominates_sup(rng):
    # sup over real points of B inside the domain never exceeds the majorant
    for _ in range(10):
        f = random_trig(rng)
        dom = AnalyticDomain(0.1, 0.05)
        th = rng.uniform(0, 1, (200, 2))
        I = rng.uniform(-1.1, 1.1, (200, 2))
        sup = max(abs(f(a, b)) for a, b in zip(th, I))
        assert sup <= majorant_norm(f, dom)


@settings(max_examples=30, deadline=None)
@given(st.floats(0.01, 0.5), st.floats(0.0, 0.5), st.floats(0.01, 0.5))
def test_majorant_monotone(r, s, dr):
    f = T.cos_mode((1, 2), 0.7, alpha=(1, 2)) + T.monomial((3, 0), 0.2)
    a = majorant_norm(f, AnalyticDomain(r, s))
    b = majorant_norm(f, AnalyticDomain(min(r + dr, 0.99), min(s + dr, 0.99)))
    assert a <= b


def test_weighted_norm_examples():
    w = pv([1, 2])
    dom = AnalyticDomain(0.1, 0.0, R=0.9)
    assert weighted_vf_norm(linear_hamiltonian(w), dom, 3.0) == pytest.approx(2.0)
    assert weighted_vf_norm(T.sin_mode((1, 0)), dom, 2.0) == pytest.approx(4 * math.pi)
    with pytest.raises(ValueError):
        weighted_vf_norm(T.sin_mode((1, 0)), dom, 0.5)


def test_cauchy_estimates(rng):
    for _ in range(40):
        f = random_trig(rng, deg=3)
        r, s = rng.uniform(0.05, 0.9), rng.uniform(0.05, 0.9)
        rp, sp = r * rng.uniform(0.05, 0.95), s * rng.uniform(0.05, 0.95)
        c = tuple(rng.uniform(-0.5, 0.5, 2)) if rng.uniform() < 0.5 else None
        dom = AnalyticDomain(r, s, center=c)
        full = majorant_norm(f, dom)
        assert action_norm(f, dom.shrink(rp, 0)) <= full / rp * (1 + 1e-12)
        assert angular_norm(f, dom.shrink(0, sp)) <= full / sp * (1 + 1e-12)


def test_bracket_estimate(rng):
    # weighted norm of {f, g} on the shrunk domain against the product bound
    for _ in range(60):
        r = rng.uniform(0.01, 0.3)
        s = rng.uniform(r, 0.9)
        dom = AnalyticDomain(r, s, center=(0.3, -0.2))
        rp, sp = r * rng.uniform(0.05, 0.9), s * rng.uniform(0.05, 0.9)
        out = dom.shrink(rp, sp)
        w = s / r
        f, g = random_trig(rng), random_trig(rng)
        lhs = weighted_vf_norm(poisson_bracket(f, g), out, w)
        assert lhs <= weighted_vf_norm(f, dom, w) * weighted_vf_norm(g, dom, w) / rp
        gi = random_trig(rng, integrable=True)
        lhs = weighted_vf_norm(poisson_bracket(f, gi), out, w)
        assert lhs <= weighted_vf_norm(f, dom, w) * action_norm(gi, dom) / sp


def test_domain_validation():
    for r, s in [(0, 0.1), (1.0, 0.1), (0.1, 1.0), (0.1, -0.1)]:
        with pytest.raises(ValueError):
            AnalyticDomain(r, s)


def test_json_roundtrip(rng, tmp_path):
    f = random_trig(rng) + T.sin_mode((1, 1), grade=1)
    p = tmp_path / "h.json"
    p.write_text(f.to_json())
    g = T.load(p)
    assert g.allclose(f) and g.grades() == f.grades() == {0, 1}


def test_instantiate_scales_by_grade():
    H = T.quadratic([1, 1]) + T.sin_mode((1, 0), grade=1) + T.monomial((1, 0), grade=2)
    Hi = H.instantiate(0.1)
    th, I = np.array([0.2, 0.0]), np.array([0.3, 0.1])
    expect = 0.05 + 0.1 * math.sin(2 * math.pi * 0.2) + 0.01 * 0.3
    assert Hi(th, I) == pytest.approx(expect)


def test_translate(rng):
    f = random_trig(rng, deg=3)
    shift = (0.3, -0.7)
    g = f.translate(shift)
    th, I = rng.uniform(0, 1, 2), rng.uniform(-1, 1, 2)
    assert g(th, I) == pytest.approx(f(th, I + np.array(shift)), abs=1e-12)
