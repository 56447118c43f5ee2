import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from kppspeed import eigen, media, pde, speed
from kppspeed.errors import BracketError


def _table(fn, p=np.linspace(-4, 4, 65)):
    H = fn(p)
    return speed.HamiltonianTable(p, H, H, "analytic", "test")


@pytest.mark.parametrize("a0,c0", [(1, 1), (1, 0.25), (2, 0.5), (0.5, 3)])
def test_quadratic_speed(a0, c0):
    res = speed.spreading_speed(_table(lambda p: a0 * p * p + c0))
    assert res.w_under == pytest.approx(2 * math.sqrt(a0 * c0), abs=1e-10)
    assert res.p_star_under == pytest.approx(math.sqrt(c0 / a0), abs=1e-5)
    assert res.w_under <= res.w_over + 1e-12


def test_bracket_widening_leaves_speed_unchanged():
    f = lambda p: p * p + 1  # noqa: E731
    w1 = speed.spreading_speed(_table(f)).w_under
    w2 = speed.spreading_speed(_table(f, np.linspace(-8, 8, 129))).w_under
    assert abs(w1 - w2) < 1e-8


def test_narrow_table_raises():
    with pytest.raises(BracketError):
        speed.spreading_speed(_table(lambda p: p * p + 1, np.linspace(-0.5, 0.5, 9)))


def test_homogeneous_table(homog):
    p = np.arange(-3, 3.0001, 0.25)
    t = speed.hamiltonian_table(homog, p, "const_testfn", {"R_sequence": [0, 10], "window_width": 50},
                                refine=False)
    assert np.allclose(t.H_under, p * p + 1, atol=1e-14) and np.array_equal(t.H_under, t.H_over)


def test_compact_perturbation_table():
    m = media.make_compact_perturbation(0.25, -0.2, 5)
    p = np.arange(-3, 3.0001, 0.25)
    t = speed.hamiltonian_table(m, p, "const_testfn", {"R_sequence": [10, 50], "window_width": 500},
                                refine=False)
    assert np.allclose(t.H_under, p * p + 0.25, atol=1e-14) and np.allclose(t.H_over, p * p + 0.25, atol=1e-14)


def test_periodic_table_rows(cosine_c):
    p = np.linspace(-2, 2, 9)
    t = speed.hamiltonian_table(cosine_c, p, "periodic", {"n": 256}, refine=False)
    for pi, h in zip(p, t.H_under):
        assert h == eigen.periodic_principal_eigenvalue(eigen.assemble_Lp(cosine_c, pi), 256).value


def test_scale_covariance():
    ws = [speed.spreading_speed(speed.hamiltonian_table(media.make_homogeneous(1, 0, s * s))).w_under
          for s in (0.5, 1.0, 2.0)]
    assert ws == pytest.approx([1.0, 2.0, 4.0], abs=1e-8)


@pytest.fixture(scope="module")
def quad_legendre():
    t = _table(lambda p: p * p + 1, np.linspace(-8, 8, 161))
    return speed.legendre_conjugate(t, np.linspace(-6, 6, 61))


def test_conjugate_of_quadratic(quad_legendre):
    q = quad_legendre.q_grid
    assert np.allclose(quad_legendre.H_star, q * q / 4 - 1, atol=1e-9)
    assert quad_legendre(-2.0)[0] == pytest.approx(0.0, abs=1e-9)


def test_conjugate_midpoint_convex(quad_legendre):
    h = quad_legendre.H_star
    assert np.all(h[1:-1] <= 0.5 * (h[:-2] + h[2:]) + 1e-9)


def test_fenchel_inequality(quad_legendre, rng):
    src = quad_legendre.source
    p = rng.uniform(-4, 4, 1000)
    q = rng.uniform(-6, 6, 1000)
    Hs = np.interp(q, quad_legendre.q_grid, quad_legendre.H_star)
    Hp = np.interp(p, src.p_grid, src.H_under)
    # interpolated H* overestimates the convex conjugate, so this is a valid sampled check
    assert np.all(Hp + Hs - p * q >= -1e-8)


def test_double_conjugate_recovers_table():
    p = np.linspace(-3, 3, 121)
    H = np.cosh(p) + 0.3 * p
    t = speed.HamiltonianTable(p, H, H, "analytic", "test")
    q = np.linspace(-9, 9, 361)
    star = speed.legendre_conjugate(t, q)
    back = speed.legendre_conjugate(speed.HamiltonianTable(q, star.H_star, star.H_star, "dual", "test"), p[20:-20])
    assert np.allclose(back.H_star, H[20:-20], atol=1e-4)


def test_wkb_profile_shape(quad_legendre):
    x = np.linspace(0, 4, 81)
    prof = speed.wkb_profile(quad_legendre, 1.0, x)
    assert np.all(prof <= 0)
    assert np.all(prof[x < 2] == 0) and abs(prof[x == 2][0]) < 1e-12
    assert np.allclose(prof[x > 2], -(x[x > 2] ** 2 / 4 - 1), atol=1e-9)
    for t in (0.5, 2.0):
        assert np.allclose(speed.wkb_profile(quad_legendre, t, t * x[:41]),
                           t * speed.wkb_profile(quad_legendre, 1.0, x[:41]), atol=1e-9)


def _flat_trajectory(value, T=10.0):
    grid = pde.Grid1D(-10.0, 0.1, 1101)
    final = pde.State(T, grid, np.full(grid.n, value))
    levels = np.array([0.05, 0.5, 0.95])
    fr = pde.FrontRecords(levels, np.array([T / 2, T]), np.full((2, 3), np.nan), np.full((2, 3), np.nan))
    return pde.Trajectory([], fr, final)


def test_all_ones_is_degenerate():
    est = speed.empirical_speeds(_flat_trajectory(1.0))
    assert est.w_star_emp == 6.0
    assert est.w_upper_emp is None and "s2_unsatisfiable" in est.flags


@pytest.mark.slow
def test_homogeneous_empirical(homog):
    traj = pde.simulate(homog, {"kind": "indicator"}, 200.0, levels=[0.05, 0.5, 0.95])
    est = speed.empirical_speeds(traj)
    assert est.w_star_emp == pytest.approx(2, rel=0.1)
    assert est.w_upper_emp == pytest.approx(2, rel=0.1)
    rep = speed.speed_report(homog, speed.spreading_speed(speed.hamiltonian_table(homog)), est)
    assert rep.verdict and rep.to_json()["verdict"] == "pass"


def test_report_flags_violation(homog):
    sp = speed.SpeedResult(2.0, 2.0, 1.0, 1.0, "analytic", (0.1, 4))
    est = speed.FrontSpeedEstimate({}, (0, 1), {}, {}, 1.5, 2.5, 1.0, 0.05, (1, 1))
    rep = speed.speed_report(homog, sp, est, 0.1)
    assert not rep.verdict
    assert rep.checks["lower_sandwich"] is False and rep.checks["upper_sandwich"] is False


@settings(max_examples=30, deadline=None)
@given(a0=st.floats(0.2, 5), c0=st.floats(0.05, 4))
def test_speed_formula_property(a0, c0):
    p = np.linspace(-8 * math.sqrt(c0 / a0) - 1, 8 * math.sqrt(c0 / a0) + 1, 161)
    res = speed.spreading_speed(_table(lambda v: a0 * v * v + c0, p))
    assert res.w_under == pytest.approx(2 * math.sqrt(a0 * c0), rel=1e-7)
