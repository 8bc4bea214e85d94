import math

import numpy as np
import pytest

from nekhoroshev_lab.steepness import (PolyField, all_frames, c3_bound, consistent,
                                       enumerate_subspaces, prevalence_mc, sdm_check,
                                       steep_witness)
from nekhoroshev_lab.trig_hamiltonian import TrigPolyHamiltonian

T = TrigPolyHamiltonian


def quad(a, b):
    return T.monomial((2, 0), a) + T.monomial((0, 2), b)


def test_frame_counts():
    assert len(enumerate_subspaces(2, 1, 1)) == 2
    frames = enumerate_subspaces(2, 1, 2)
    assert len(frames) == 4
    assert {f.label() for f in frames} == {"1,0", "0,1", "1,1", "1,-1"}
    assert len(enumerate_subspaces(2, 2, 3)) == 1


@pytest.mark.parametrize("n, k, L", [(2, 1, 2), (2, 1, 3), (3, 1, 2), (3, 2, 2), (3, 2, 3)])
def test_frame_count_bound(n, k, L):
    assert len(enumerate_subspaces(n, k, L)) <= L ** (n * n)


@pytest.mark.parametrize("n, L", [(2, 3), (3, 2)])
def test_frame_validity(n, L):
    for fr in all_frames(n, L):
        assert all(sum(abs(x) for x in v) <= fr.L <= L for v in fr.complement_generators)
        E, F = fr.basis_e, fr.basis_f
        assert np.allclose(E.T @ E, np.eye(fr.k), atol=1e-12)
        assert np.allclose(F.T @ F, np.eye(n - fr.k), atol=1e-12)
        assert np.allclose(E.T @ F, 0, atol=1e-12)
        for g in fr.complement_generators:
            assert np.allclose(E.T @ np.array(g, float), 0, atol=1e-12)


def test_frames_distinct():
    keys = [f.key for f in enumerate_subspaces(3, 2, 3)]
    assert len(keys) == len(set(keys))


def test_polyfield_derivatives(rng):
    h = T.monomial((3, 1), 0.7) + T.monomial((0, 2), -1.2) + T.monomial((1, 0), 0.3)
    F = PolyField(h)
    X = rng.uniform(-1, 1, (5, 2))
    x, y = X[:, 0], X[:, 1]
    assert np.allclose(F.value(X), 0.7 * x**3 * y - 1.2 * y**2 + 0.3 * x)
    assert np.allclose(F.gradient(X), np.stack([2.1 * x**2 * y + 0.3, 0.7 * x**3 - 2.4 * y], 1))
    H = F.hessian(X)
    assert np.allclose(H[:, 0, 1], 2.1 * x**2)
    assert np.allclose(H[:, 1, 1], -2.4)


def test_c3_bound_quadratic():
    assert c3_bound(quad(0.5, 0.5)) >= 1.0


def test_convex_passes():
    rep = sdm_check(quad(0.5, 0.5), 0.5, 11, 3, 32)
    assert rep.passed and rep.verdict == "no violation found at resolution"
    assert rep.critical_gamma == pytest.approx(1.0, rel=1e-9)


def test_saddle_refuted_on_diagonals(saddle):
    rep = sdm_check(saddle, 1e-6, 11, 3, 16, random_points=100)
    assert rep.refuted and rep.critical_gamma == 0
    assert {r.frame.label() for r in rep.violations()} == {"1,-1", "1,1"}


def test_non_integrable_rejected():
    with pytest.raises(ValueError):
        sdm_check(T.sin_mode((1, 0)), 0.5, 11, 2)


def test_monotone_in_gamma_and_L():
    h = quad(1.0, -2.0)
    rep = sdm_check(h, 0.5, 3, 3, 16, random_points=0)
    crit = rep.critical_gamma
    assert sdm_check(h, 0.9 * crit, 3, 3, 16, random_points=0).passed
    assert sdm_check(h, 0.9 * crit, 3, 2, 16, random_points=0).passed
    assert sdm_check(h, 1.1 * crit, 3, 3, 16, random_points=0).refuted


def test_margin_closed_form():
    rep = sdm_check(quad(1.0, -2.0), 0.5, 11, 3, 32, random_points=0)
    expect = min(2 * abs(q * q - 2 * p * p) / (q * q + p * p)
                 for (p, q) in [(1, 0), (0, 1), (1, 1), (1, -1), (1, 2), (2, 1), (1, -2), (2, -1)])
    k1 = [r for r in rep.records if r.frame.k == 1]
    assert min(r.sigma_min for r in k1) == pytest.approx(expect, abs=1e-10)


def test_report_exports(tmp_path, saddle):
    rep = sdm_check(saddle, 0.1, 11, 2, 8, random_points=10)
    rep.write_csv(tmp_path / "s.csv")
    rows = (tmp_path / "s.csv").read_text().splitlines()
    assert rows[0].startswith("k,L,generators") and len(rows) == 1 + len(rep.records)
    assert '"verdict": "refuted"' in rep.to_json()


def test_witness_convex():
    h = quad(0.5, 0.5)
    fr = enumerate_subspaces(2, 1, 1)
    frame = next(f for f in fr if f.label() == "0,1")  # Lambda = span e1
    r = 0.01
    t = np.linspace(0, 1, 2001)
    curve = np.stack([r * t, 0 * t], 1)
    w = steep_witness(h, frame, 0.5, 1, curve, r)
    assert w.found and w.check()
    assert r / 2 < w.t_star <= r / 2 + 1e-3


def test_witness_trivial_start():
    h = quad(0.5, 0.5)
    frame = next(f for f in enumerate_subspaces(2, 1, 1) if f.label() == "0,1")
    r = 0.01
    curve = np.stack([0.5 + r * np.linspace(0, 1, 11), np.zeros(11)], 1)
    w = steep_witness(h, frame, 0.5, 1, curve, r)
    assert w.t_star == 0.0 and w.check()


def test_witness_saddle_counterexample(saddle):
    frame = next(f for f in enumerate_subspaces(2, 1, 2) if f.label() == "1,-1")
    r = 1e-3
    s = np.linspace(0, 1, 101) * r / math.sqrt(2)
    curve = np.stack([s, s], 1)
    w = steep_witness(saddle, frame, 0.5, 1, curve, r, M=4.0)
    assert not w.found and not w.check()
    assert w.max_projected_gradient < 1e-12


def test_witness_radius_precondition():
    h = quad(0.5, 0.5)
    frame = enumerate_subspaces(2, 1, 1)[0]
    with pytest.raises(ValueError, match="gamma L"):
        steep_witness(h, frame, 0.01, 1, np.zeros((3, 2)), 0.5)


def test_prevalence_convex_zero():
    tab = prevalence_mc(quad(0.5, 0.5), [0.5, 0.25], 11, 2, samples=1000, grid_res=8)
    assert tab.bad_fraction == [0.0, 0.0]


def test_prevalence_deterministic(saddle):
    a = prevalence_mc(saddle, [0.5, 0.25], 11, 2, samples=1000, seed=3, grid_res=8)
    b = prevalence_mc(saddle, [0.5, 0.25], 11, 2, samples=1000, seed=3, grid_res=8)
    assert a.bad_count == b.bad_count
    assert consistent(a, b)


def test_prevalence_preconditions(saddle):
    with pytest.raises(ValueError, match="tau"):
        prevalence_mc(saddle, [0.5], 10, 2)
    with pytest.raises(ValueError, match="samples"):
        prevalence_mc(saddle, [0.5], 11, 2, samples=100)
