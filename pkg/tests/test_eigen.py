import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from kppspeed import eigen, media
from kppspeed.errors import ConvergenceError, DomainError

from oracles import dense_periodic_matrix, perron_value


def _k(medium, p, n=256):
    return eigen.periodic_principal_eigenvalue(eigen.assemble_Lp(medium, p), n).value


@pytest.fixture(scope="module")
def three_periodic():
    return [
        media.make_periodic(c_modes=[(0.5, 1, 0.0)]),
        media.make_periodic(a_modes=[(0.3, 1, 0.0)], c_modes=[(0.4, 2, 0.5)], period=2.0, divergence_form=True),
        media.make_periodic(a_modes=[(0.2, 1, 0.1)], q_modes=[(0.3, 1, 0.7)], c_modes=[(0.3, 1, 0.0)]),
    ]


def test_Lp_coefficients_homogeneous(homog):
    op = eigen.assemble_Lp(homog, 2.0)
    x = np.linspace(-3, 3, 7)
    assert np.all(op.zeroth(x) == 5.0) and np.all(op.first(x) == 4.0) and np.all(op.second(x) == 1.0)
    assert np.all(eigen.assemble_Lp(homog, 0.0).zeroth(x) == homog.c(x))


def test_Lp_coefficients_cosine(cosine_c):
    x = np.linspace(0, 1, 17)
    assert np.allclose(eigen.assemble_Lp(cosine_c, 1.0).zeroth(x), 2 + 0.5 * np.cos(2 * np.pi * x), atol=1e-15)


@pytest.mark.parametrize("p", [-2.0, 0.0, 0.5, 3.0])
def test_homogeneous_as_periodic(p):
    m = media.make_periodic(period=1.0)
    assert _k(m, p, 64) == pytest.approx(p * p + 1, abs=1e-10)


@pytest.mark.parametrize("p", [-1.0, 0.0, 1.3])
def test_periodic_against_dense_oracle(three_periodic, p):
    for m in three_periodic:
        n = 128
        est = eigen.periodic_principal_eigenvalue(eigen.assemble_Lp(m, p), n)
        assert est.value == pytest.approx(perron_value(dense_periodic_matrix(m, p, n)), abs=1e-8)
        assert est.residual < 1e-8
        assert est.eigenfunction.max() == pytest.approx(1.0) and est.eigenfunction.min() > 0


def test_dirichlet_laplacian_on_pi():
    zero = media.constant_field(0.0)
    m = media.Medium(media.constant_field(1.0), zero, media.logistic(zero))
    est = eigen.dirichlet_principal_eigenvalue(m, (0.0, math.pi), 2000)
    assert est.value == pytest.approx(-1.0, abs=1e-5)


def test_const_testfn_examples(homog, cosine_c):
    lo, hi = eigen.const_testfn_bounds(eigen.assemble_Lp(homog, 1.0), (0, 50))
    assert (lo.value, hi.value) == (2.0, 2.0)
    lo, hi = eigen.const_testfn_bounds(eigen.assemble_Lp(cosine_c, 0.0), (0, 10), 20_001)
    assert lo.value == pytest.approx(0.5, abs=1e-12) and hi.value == pytest.approx(1.5, abs=1e-12)
    cp = media.make_compact_perturbation(0.25, -0.2, 5)
    lo, hi = eigen.const_testfn_bounds(eigen.assemble_Lp(cp, 0.0), (10, 100))
    assert (lo.value, hi.value) == (0.25, 0.25)


def test_corrector_homogeneous_constant(homog):
    sol = eigen.approximate_corrector(homog, 1.0, 0.1, (0.0, 10.0))
    assert sol.lambda_band[0] == pytest.approx(2.0, abs=1e-10)
    assert sol.band_width < 1e-10


def test_corrector_midpoints_approach_periodic(cosine_c):
    sols = eigen.corrector_sequence(cosine_c, 0.0, [0.2, 0.1, 0.05])
    ref = _k(cosine_c, 0.0, 512)
    errs = [abs(s.midpoint - ref) for s in sols]
    assert errs[0] > errs[1] > errs[2]
    assert eigen.richardson_lambda(sols).value == pytest.approx(ref, abs=1e-4)


def test_corrector_band_shrinks_almost_periodic():
    m = media.make_almost_periodic(c_modes=[(0.3, 1.0, 0.0), (0.3, math.sqrt(2), 0.0)])
    widths = [s.band_width for s in eigen.corrector_sequence(m, 0.0, [0.4, 0.2, 0.1], (0.0, 2 * math.pi * 70))]
    assert widths[0] > widths[1] > widths[2]


def test_richardson_on_exact_constants(homog):
    sols = eigen.corrector_sequence(homog, 0.5, [0.2, 0.1, 0.05], (0.0, 5.0))
    assert eigen.richardson_lambda(sols).value == pytest.approx(1.25, abs=1e-10)


def test_richardson_rejects_mixed_momenta(homog):
    sols = [eigen.approximate_corrector(homog, p, e, (0.0, 5.0)) for p, e in [(0, 0.2), (0, 0.1), (1, 0.05)]]
    with pytest.raises(ValueError):
        eigen.richardson_lambda(sols)


def test_richardson_rejects_zigzag(homog):
    sols = eigen.corrector_sequence(homog, 0.5, [0.2, 0.1, 0.05], (0.0, 5.0))
    sols[1].lambda_band = (1.5, 1.5)
    with pytest.raises(ConvergenceError):
        eigen.richardson_lambda(sols)


@pytest.mark.parametrize("gamma,mu", [(2.0, 1.0), (1.25, 0.5)])
def test_riccati_homogeneous(homog, gamma, mu):
    tr = eigen.riccati_mu(homog, gamma, (0, 200))
    assert tr.mu == pytest.approx(mu, abs=1e-10)
    assert np.ptp(tr.r_samples) < 1e-8


def test_riccati_needs_divergence_form():
    m = media.make_periodic(q_modes=[(0.3, 1, 0.0)], c_modes=[(0.5, 1, 0.0)])
    with pytest.raises(DomainError):
        eigen.riccati_mu(m, 3.0, (0, 100))


def test_riccati_below_threshold(homog):
    with pytest.raises(DomainError):
        eigen.riccati_mu(homog, 0.9, (0, 100), lambda1=1.0)


def test_lyapunov_inverse_homogeneous(homog):
    assert eigen.lyapunov_inverse_k(homog, 1.0, (0, 400)).value == pytest.approx(2.0, abs=1e-9)
    est = eigen.lyapunov_inverse_k(homog, 0.01, (0, 400))
    assert not est.info["plateau"]
    assert est.value == pytest.approx(1.0001, abs=1e-7)


def test_lyapunov_random_matches_corrector_window():
    m = media.make_random_ergodic(42, 1.0, (0.5, 1.5), (0.8, 1.2))
    k = eigen.lyapunov_inverse_k(m, 1.0, (0, 2000)).value
    sols = eigen.corrector_sequence(m, -1.0, [0.2, 0.1, 0.05], (0.0, 1000.0))
    assert k == pytest.approx(eigen.richardson_lambda(sols, order=2).value, abs=5e-3)


def test_window_H_compact_perturbation():
    m = media.make_compact_perturbation(0.25, -0.2, 5)
    lo, hi, diag = eigen.window_H(m, 1.0, [0, 2, 10, 50], "const_testfn", 500)
    assert lo == hi == 1.25
    assert diag.lower_raw[0] < 1.25


def test_window_H_asymptotic_approaches_limit():
    lim = media.make_almost_periodic(c_modes=[(0.3, 1.0, 0.0), (0.3, math.sqrt(2), 0.0)])
    m = media.make_asymptotic(lim, 0.5, 0.05)
    width = 2 * math.pi * 70
    _, _, d = eigen.window_H(m, 0.0, [0, 50, 200], "dirichlet_window", width, n_per_unit=20)
    _, _, dl = eigen.window_H(lim, 0.0, [200], "dirichlet_window", width, n_per_unit=20)
    gaps = [abs(v - dl.lower_raw[0]) for v in d.lower_raw]
    assert gaps[-1] < gaps[0] and gaps[-1] < 1e-3


def test_window_H_homogeneous_constant(homog):
    _, _, d = eigen.window_H(homog, 0.7, [0, 10, 100], "const_testfn", 50)
    assert set(d.lower_raw) == set(d.upper_raw) == {0.49 + 1.0}


# ---------------------------------------------------------------- property suite

def test_ordering_across_engines(three_periodic):
    for m in three_periodic:
        for p in (-1.0, 0.0, 1.0):
            op = eigen.assemble_Lp(m, p)
            lo, hi = eigen.const_testfn_bounds(op, (0.0, m.period), 4001)
            k = _k(m, p)
            dirich = eigen.dirichlet_principal_eigenvalue(m, (0.0, 20 * m.period), 800, p=p).value
            assert lo.value - 1e-8 <= k <= hi.value + 1e-8
            assert dirich <= k + 1e-8


def test_exact_eigenpair_is_bracketed(three_periodic):
    for m in three_periodic:
        est = eigen.periodic_principal_eigenvalue(eigen.assemble_Lp(m, 0.5), 256)
        assert est.residual < 1e-8
        lo, hi = eigen.const_testfn_bounds(eigen.assemble_Lp(m, 0.5), (0, m.period), 4001)
        assert lo.value <= est.value <= hi.value


@pytest.mark.parametrize("M", [-0.3, 0.7, 2.5])
def test_shift_equivariance(three_periodic, M):
    for m in three_periodic:
        sh = m.with_c_shift(M)
        assert _k(sh, 0.4) - _k(m, 0.4) == pytest.approx(M, abs=1e-9)
        iv = (0.0, 5 * m.period)
        d0 = eigen.dirichlet_principal_eigenvalue(m, iv, 200).value
        assert eigen.dirichlet_principal_eigenvalue(sh, iv, 200).value - d0 == pytest.approx(M, abs=1e-9)
        s0 = eigen.corrector_sequence(m, 0.4, [0.2, 0.1, 0.05])
        s1 = eigen.corrector_sequence(sh, 0.4, [0.2, 0.1, 0.05])
        assert eigen.richardson_lambda(s1).value - eigen.richardson_lambda(s0).value == pytest.approx(M, abs=1e-6)


def test_shift_equivariance_riccati(div_periodic):
    k0 = eigen.lyapunov_inverse_k(div_periodic, 1.0, (0, 400)).value
    k1 = eigen.lyapunov_inverse_k(div_periodic.with_c_shift(0.5), 1.0, (0, 400)).value
    assert k1 - k0 == pytest.approx(0.5, abs=1e-6)


def test_growth_envelope(three_periodic):
    for m in three_periodic:
        x = np.linspace(0, m.period, 4001)
        a, q, c = m.coefficients(x)
        for p in np.linspace(-3, 3, 13):
            k = _k(m, p)
            z = a * p * p + q * p + c
            assert z.min() - 1e-8 <= k <= z.max() + 1e-8
            # quadratic envelopes from the coefficient extremes
            assert k >= a.min() * p * p - np.abs(q).max() * abs(p) + c.min() - 1e-8
            assert k <= a.max() * p * p + np.abs(q).max() * abs(p) + c.max() + 1e-8


@pytest.mark.parametrize("eta", [0.05, 0.2, 0.5])
def test_drift_continuity(eta):
    bases = [((), [(0.5, 1, 0.0)]), ([(0.3, 1, 0.0)], [(0.5, 1, 0.0)]), ([(0.2, 2, 0.3)], [(0.4, 1, 0.1)])]
    for am, cm in bases:
        m0 = media.make_periodic(a_modes=am, c_modes=cm)
        m1 = media.make_periodic(a_modes=am, q_modes=[(eta, 1, 0.2)], c_modes=cm)
        x = np.linspace(0, 1, 4001)
        inf_a = m0.a(x).min()
        dq = np.abs(m1.q(x) - m0.q(x)).max()
        C = math.sqrt(np.abs(m0.c(x)).max()) / inf_a
        assert abs(_k(m1, 0.0) - _k(m0, 0.0)) <= C * dq + dq * dq / (4 * inf_a)


def test_midpoint_convexity(three_periodic):
    ps = np.linspace(-3, 3, 25)
    for m in three_periodic:
        k = np.array([_k(m, p, 128) for p in ps])
        assert np.all(k[1:-1] <= 0.5 * (k[:-2] + k[2:]) + 1e-6)


def test_dirichlet_monotone(three_periodic):
    for m in list(three_periodic) + [media.make_compact_perturbation(0.25, -0.2, 5)]:
        vals = [eigen.dirichlet_principal_eigenvalue(m, (-R, R), int(40 * R)).value for R in (2, 4, 8, 16)]
        assert all(b >= a - 1e-8 for a, b in zip(vals, vals[1:]))


@settings(max_examples=15, deadline=None)
@given(amp=st.floats(0.0, 0.9), harmonic=st.integers(1, 3), phase=st.floats(0, 6.3), p=st.floats(-3, 3),
       M=st.floats(-2, 2))
def test_periodic_shift_property(amp, harmonic, phase, p, M):
    m = media.make_periodic(c_modes=[(amp, harmonic, phase)])
    assert _k(m.with_c_shift(M), p, 64) - _k(m, p, 64) == pytest.approx(M, abs=1e-9)


@pytest.mark.parametrize("p", [0.0, 1.0])
def test_dirichlet_against_dense_oracle(three_periodic, p):
    for m in three_periodic:
        n = 300
        est = eigen.dirichlet_principal_eigenvalue(m, (0.0, 8.0), n, p=p)
        dx = 8.0 / (n + 1)
        x = dx * np.arange(1, n + 1)
        a, q, c = m.coefficients(x)
        b, z = 2 * p * a + q, a * p * p + q * p + c
        A = np.diag(-2 * a / dx**2 + z) + np.diag((a / dx**2 - b / (2 * dx))[1:], -1) \
            + np.diag((a / dx**2 + b / (2 * dx))[:-1], 1)
        assert est.value == pytest.approx(perron_value(A), abs=1e-9)
        assert est.eigenfunction is not None and est.residual < 1e-8


def test_dirichlet_long_random_window():
    m = media.make_random_ergodic(4, 1.0, (0.5, 1.5))
    lam = eigen.lambda1_estimate(m, (0.0, 2000.0))
    assert 0.5 < lam < 1.5
