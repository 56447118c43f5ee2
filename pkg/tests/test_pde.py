import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from kppspeed import media, pde
from kppspeed.errors import StabilityError


def _state(u, x0=-10.0, dx=0.1):
    return pde.State(0.0, pde.Grid1D(x0, dx, len(u)), np.asarray(u, dtype=float))


@pytest.mark.parametrize("value", [0.0, 1.0])
def test_steady_states_are_fixed_points(homog, cosine_c, value):
    for m in (homog, cosine_c):
        s = _state(np.full(201, value))
        out = pde.step(s, m, pde.SolverConfig())
        assert np.array_equal(out.u, s.u)


def test_small_constant_follows_the_ode(homog):
    d, dt = 1e-3, 0.02
    s = _state(np.full(401, d))
    out = pde.step(s, homog, pde.SolverConfig(dt=dt))
    interior = out.u[100:-100]
    assert np.allclose(interior, d * (1 + dt * (1 - d)), rtol=0, atol=d * dt * dt)


def test_zero_datum_stays_zero(homog):
    traj = pde.simulate(homog, {"kind": "zero"}, 10.0)
    assert np.all(traj.final.u == 0)
    assert np.all(np.isnan(traj.fronts.x_front))


def test_local_convergence_to_one(homog):
    traj = pde.simulate(homog, {"kind": "indicator", "lo": -1, "hi": 1}, 50.0)
    x, u = traj.final.grid.x, traj.final.u
    assert u[np.argmin(np.abs(x))] > 0.99


def test_half_level_speed_homogeneous(homog):
    traj = pde.simulate(homog, {"kind": "indicator"}, 200.0, levels=[0.5])
    t, X = traj.front(0.5)
    assert X[-1] / t[-1] == pytest.approx(2.0, rel=0.05)


def test_range_preserved(cosine_c):
    cfg = pde.SolverConfig(snapshot_times=(5, 10, 20))
    traj = pde.simulate(cosine_c, {"kind": "bump", "radius": 3}, 30.0, cfg)
    for s in traj.snapshots:
        assert s.u.min() >= 0 and s.u.max() <= 1


def test_unstable_explicit_step_rejected(homog):
    with pytest.raises(StabilityError):
        pde.simulate(homog, {"kind": "indicator"}, 1.0, pde.SolverConfig(theta=0.0, dt=0.02, dx=0.1))


def test_comparison_identical_inputs(homog):
    cfg = pde.SolverConfig(snapshot_times=(5, 10))
    a = pde.simulate(homog, {"kind": "indicator"}, 10.0, cfg)
    b = pde.simulate(homog, {"kind": "indicator"}, 10.0, cfg)
    rep = pde.compare_solutions(a, b)
    assert rep.ordered and rep.worst_violation == 0.0


def test_comparison_with_supersolution_one(cosine_c):
    cfg = pde.SolverConfig(domain=(-60.0, 60.0), snapshot_times=(1, 5, 20))
    a = pde.simulate(cosine_c, {"kind": "indicator"}, 20.0, cfg)
    b = pde.simulate(cosine_c, {"kind": "ones"}, 20.0, cfg)
    assert pde.compare_solutions(a, b).ordered
    assert all(np.all(s.u == 1.0) for s in b.snapshots)


def test_comparison_random_ordered_pairs(div_periodic, rng):
    cfg = pde.SolverConfig(domain=(-10.0, 10.0), snapshot_times=(5.0, 10.0, 20.0))
    x = np.linspace(-10, 10, 201)
    for _ in range(100):
        lo = rng.uniform(0, 1, x.size) * (rng.uniform() < 0.5 or np.abs(x) < 3)
        hi = np.minimum(1.0, lo + rng.uniform(0, 0.3, x.size))
        ta = pde.simulate(div_periodic, lambda _x, v=lo: v, 20.0, cfg)
        tb = pde.simulate(div_periodic, lambda _x, v=hi: v, 20.0, cfg)
        rep = pde.compare_solutions(ta, tb)
        assert rep.ordered, str(rep)


def test_truncation_neutrality(homog):
    X = []
    for margin in (60.0, 120.0):
        traj = pde.simulate(homog, {"kind": "indicator"}, 100.0, pde.SolverConfig(right_margin=margin), [0.5])
        X.append(traj.front(0.5)[1][-1])
    assert abs(X[1] - X[0]) < 0.1


@pytest.mark.slow
def test_refinement_convergence(homog):
    X = []
    for dx, dt in ((0.1, 0.02), (0.05, 0.01)):
        traj = pde.simulate(homog, {"kind": "indicator"}, 200.0, pde.SolverConfig(dx=dx, dt=dt), [0.5])
        X.append(traj.front(0.5)[1][-1])
    assert abs(X[1] - X[0]) / X[1] < 0.02


def test_front_positions_interpolate():
    x = np.linspace(-1, 3, 5)
    u = np.array([1.0, 1.0, 0.8, 0.2, 0.0])
    ahead, behind = pde.front_positions(x, u, np.array([0.5]))
    assert ahead[0] == pytest.approx(1.5)
    assert behind[0] == pytest.approx(1.5)


@settings(max_examples=15, deadline=None)
@given(h=st.floats(0.0, 1.0), theta=st.sampled_from([0.5, 1.0]))
def test_constant_states_stay_in_range(homog, h, theta):
    s = _state(np.full(101, h))
    out = pde.step(s, homog, pde.SolverConfig(theta=theta, dt=0.002))
    assert out.u.min() >= 0.0 and out.u.max() <= 1.0
