import math
from dataclasses import replace

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from kppspeed import media
from kppspeed.errors import HypothesisError


def test_homogeneous_values_and_hypotheses(homog):
    x = np.linspace(-50, 50, 101)
    assert np.all(homog.c(x) == 1.0)
    rep = media.validate(homog, (-100, 100), 10_000)
    assert rep.passed, str(rep)
    assert rep.checks["kpp"].margin == pytest.approx(0.0, abs=1e-12)


def test_homogeneous_quarter_rate():
    m = media.make_homogeneous(1, 0, 0.25)
    assert m.c(3.0) == 0.25


def test_homogeneous_rejects_strong_drift():
    with pytest.raises(HypothesisError):
        media.make_homogeneous(1, 3, 1)


def test_monostability_margin_reported():
    rep = media.validate(media.make_homogeneous(1, 1.9, 1), (-10, 10), 101)
    assert rep.checks["monostable"].passed
    assert rep.checks["monostable"].margin == pytest.approx(0.39, abs=1e-12)


def test_extra_quadratic_term_breaks_steady_state(homog):
    # s(1-s) + 0.1 s^2 = s - 0.9 s^2 stays below c s; what breaks is f(x, 1) = 0
    f = media.Nonlinearity(homog.c, "custom", lambda x, s: s * (1 - s) + 0.1 * s * s)
    rep = media.validate(replace(homog, f=f), (-10, 10), 101)
    assert rep.checks["kpp"].passed
    assert not rep.checks["f_steady_states"].passed
    assert rep.checks["f_steady_states"].witness is not None


def test_non_kpp_nonlinearity_fails_with_witness(homog):
    f = media.Nonlinearity(homog.c, "custom", lambda x, s: s * (1 - s) * (1 + 2 * s))
    rep = media.validate(replace(homog, f=f), (-10, 10), 101)
    kpp = rep.checks["kpp"]
    assert not kpp.passed
    assert kpp.witness is not None and 0 < kpp.witness[1] < 1


def test_periodic_cosine(cosine_c):
    x = np.linspace(-3, 3, 61)
    assert np.allclose(cosine_c.c(x), 1 + 0.5 * np.cos(2 * np.pi * x), atol=1e-15)
    assert cosine_c.period == 1.0


def test_periodic_zero_modes_match_homogeneous(homog):
    m = media.make_periodic(c_modes=[(0.0, 1, 0.0)], period=1.0)
    x = np.linspace(-5, 5, 33)
    for f0, f1 in zip(m.coefficients(x), homog.coefficients(x)):
        assert np.array_equal(f0, f1)


def test_periodic_two_period_medium_validates():
    m = media.make_periodic(a_modes=[(0.3, 1, 0.0)], c_modes=[(0.4, 2, 0.0)], period=2.0)
    assert m.period == 2.0
    assert media.validate(m, (0, 2), 2001).passed


def test_periodicity_to_round_off(div_periodic, rng):
    x = rng.uniform(-100, 100, 1000)
    L = div_periodic.period
    for fld in (div_periodic.a, div_periodic.q, div_periodic.c):
        assert np.max(np.abs(fld(x + L) - fld(x))) <= 1e-12


def test_divergence_form_periodic(div_periodic):
    assert media.validate(div_periodic, (0, 4), 2001).checks["divergence_form"].passed


def test_compact_perturbation_exact_outside():
    m = media.make_compact_perturbation(0.25, -0.2, 5)
    x = np.concatenate([np.linspace(-100, -5.0001, 500), np.linspace(5.0001, 100, 500)])
    assert np.all(m.c(x) == 0.25)
    inside = m.c(np.linspace(-5, 5, 1001))
    assert inside.min() == pytest.approx(0.05, abs=1e-6)
    assert inside.max() == pytest.approx(0.25, abs=1e-12)


def test_compact_perturbation_zero_bump():
    m = media.make_compact_perturbation(0.25, 0.0, 5)
    assert np.all(m.c(np.linspace(-10, 10, 101)) == 0.25)


def test_compact_perturbation_negative_c_rejected():
    with pytest.raises(HypothesisError):
        media.make_compact_perturbation(0.25, -0.3, 5)


def test_almost_periodic_two_frequency():
    m = media.make_almost_periodic(c_modes=[(0.3, 1.0, 0.0), (0.3, math.sqrt(2), 0.0)])
    x = np.linspace(0, 50, 11)
    assert np.allclose(m.c(x), 1 + 0.3 * np.cos(x) + 0.3 * np.cos(math.sqrt(2) * x))
    assert media.validate(m, (0, 10_000), 100_001).passed
    assert m.period is None


def test_almost_periodic_single_frequency_has_no_period():
    m = media.make_almost_periodic(c_modes=[(0.3, 1.0, 0.0)])
    assert m.class_tag == "trig-almost-periodic"
    assert m.period is None


def test_almost_periodic_amplitudes_too_large():
    with pytest.raises(HypothesisError):
        media.make_almost_periodic(c_modes=[(0.6, 1.0, 0.0), (0.5, math.sqrt(2), 0.0)])


@pytest.fixture(scope="module")
def ap_limit():
    return media.make_almost_periodic(c_modes=[(0.3, 1.0, 0.0), (0.3, math.sqrt(2), 0.0)])


def test_asymptotic_converges_to_limit(ap_limit):
    m = media.make_asymptotic(ap_limit, 0.5, 0.05)
    assert media.sup_deviation(m, 200.0) < 1e-3
    devs = [media.sup_deviation(m, R, 400.0, 20_001) for R in (0, 25, 50, 100, 200)]
    assert all(b <= a for a, b in zip(devs, devs[1:]))


def test_asymptotic_zero_amplitude_is_limit(ap_limit):
    m = media.make_asymptotic(ap_limit, 0.0, 0.05)
    x = np.linspace(-30, 30, 71)
    assert np.array_equal(m.c(x), ap_limit.c(x))


def test_asymptotic_negative_c_rejected():
    lim = media.make_almost_periodic(c_modes=[(0.1, 1.0, 0.0), (0.1, math.sqrt(2), 0.0)])
    with pytest.raises(HypothesisError):
        media.make_asymptotic(lim, -2.0, 0.05)


def test_random_deterministic_per_seed():
    x = np.linspace(-20, 300, 4001)
    m1 = media.make_random_ergodic(42, 1.0, (0.5, 1.5), (1, 1))
    m2 = media.make_random_ergodic(42, 1.0, (0.5, 1.5), (1, 1))
    assert np.array_equal(m1.c(x), m2.c(x))
    assert np.all(m1.a(x) == 1.0) and np.all(m1.q(x) == 0.0)
    assert not np.array_equal(m1.c(x), media.make_random_ergodic(43, 1.0, (0.5, 1.5), (1, 1)).c(x))


def test_random_degenerate_range_is_homogeneous():
    m = media.make_random_ergodic(7, 1.0, (1, 1), (1, 1))
    assert np.all(m.c(np.linspace(-50, 50, 501)) == 1.0)


def test_random_divergence_form():
    m = media.make_random_ergodic(42, 1.0, (0.5, 1.5), (0.8, 1.2))
    x = np.linspace(0, 200, 20_001)
    h = 1e-4
    fd = (m.a(x + h) - m.a(x - h)) / (2 * h)
    assert np.max(np.abs(m.q(x) - m.a.deriv(x))) == 0.0
    assert np.max(np.abs(fd - m.q(x))) < 1e-5   # centered-difference truncation


def test_random_inverted_range_rejected():
    with pytest.raises(HypothesisError):
        media.make_random_ergodic(1, 1.0, (1.5, 0.5))


def test_slow_oscillation_metadata():
    m = media.make_slowly_oscillating([(0.5, 1, 0.0)], alpha=3)
    assert m.metadata["mu0_min"] == pytest.approx(0.5)
    assert m.metadata["mu0_max"] == pytest.approx(1.5)


def test_slow_oscillation_constant_profile():
    m = media.make_slowly_oscillating([], alpha=0.7)
    assert np.all(m.c(np.linspace(0, 1e4, 101)) == 1.0)


def test_slow_regime_valid():
    m = media.make_slowly_oscillating([(0.5, 1, 0.0)], alpha=0.5)
    assert media.validate(m, (0, 1e4), 20_001).passed


def test_c_shift(cosine_c):
    x = np.linspace(0, 1, 11)
    assert np.allclose(cosine_c.with_c_shift(2.0).c(x), cosine_c.c(x) + 2.0, atol=1e-15)


@settings(max_examples=25, deadline=None)
@given(b0=st.floats(0.05, 4.0), frac=st.floats(0.0, 0.9), radius=st.floats(0.5, 20.0))
def test_validation_soundness_compact(b0, frac, radius):
    m = media.make_compact_perturbation(b0, -frac * b0, radius)
    x = np.linspace(-3 * radius, 3 * radius, 2001)
    a, q, c = m.coefficients(x)
    s = np.linspace(0, 1, 11)[:, None]
    f = m.f(x[None, :], s)
    assert np.all(a > 0) and np.all(4 * c * a - q * q > 0)
    assert np.all(f <= c * s + 1e-15)
    assert np.all(f[1:-1] > 0)


@settings(max_examples=20, deadline=None)
@given(seed=st.integers(0, 2**31 - 1), ell=st.floats(0.2, 5.0))
def test_random_fields_within_range(seed, ell):
    m = media.make_random_ergodic(seed, ell, (0.5, 1.5))
    c = m.c(np.linspace(-50, 50, 2001))
    assert c.min() >= 0.5 - 1e-12 and c.max() <= 1.5 + 1e-12
