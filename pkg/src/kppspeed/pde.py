"""Long-time solver for u_t = a u_xx + q u_x + f(x, u) on an expanding domain.

The linear part uses a theta-weighted implicit tridiagonal solve (central
second differences, first-order upwind drift); the reaction is explicit.
Beyond each edge sits a ghost node equal to 1 if the edge value is at least
0.999 and 0 otherwise, so u = 0 and u = 1 are exact fixed points and the
right edge acts as Dirichlet 0 ahead of the front.  The right edge is pushed
out whenever the solution becomes visible (> 1e-10) in the last
``right_margin`` length units.
"""

from __future__ import annotations

import math
from collections.abc import Callable, Mapping, Sequence
from dataclasses import dataclass, field

import numpy as np

from kppspeed import _backend
from kppspeed.errors import DomainError, StabilityError
from kppspeed.media import Medium

VISIBLE = 1e-10
GHOST_THRESHOLD = 0.999
CLIP_TOL = 1e-12
FAIL_TOL = 1e-9


@dataclass(frozen=True)
class Grid1D:
    x0: float
    dx: float
    n: int

    def __post_init__(self):
        if self.n < 3:
            raise ValueError("a grid needs at least 3 nodes")
        if not self.dx > 0:
            raise ValueError("dx must be positive")

    @property
    def x(self) -> np.ndarray:
        return self.x0 + self.dx * np.arange(self.n)

    @property
    def x_end(self) -> float:
        return self.x0 + self.dx * (self.n - 1)


@dataclass
class State:
    t: float
    grid: Grid1D
    u: np.ndarray

    def __post_init__(self):
        self.u = np.ascontiguousarray(self.u, dtype=float)
        if self.u.shape != (self.grid.n,):
            raise ValueError("u does not match the grid")
        if self.u.min() < -FAIL_TOL or self.u.max() > 1 + FAIL_TOL:
            raise ValueError("state leaves [0, 1]")


@dataclass
class SolverConfig:
    dt: float = 0.02
    dx: float = 0.1
    theta: float = 1.0
    right_margin: float = 60.0
    growth_chunk: int = 500
    left_buffer: float = 50.0
    boundary: tuple[str, ...] = ("dirichlet_one_left", "dirichlet_zero_right")
    snapshot_times: tuple[float, ...] = ()
    check_every: int = 50
    max_nodes: int = 2_000_000
    domain: tuple[float, float] | None = None

    def __post_init__(self):
        if not self.dt > 0 or not self.dx > 0:
            raise ValueError("dt and dx must be positive")
        if not 0.0 <= self.theta <= 1.0:
            raise ValueError("theta must lie in [0, 1]")
        if self.right_margin <= 0 or self.growth_chunk < 1 or self.check_every < 1:
            raise ValueError("right_margin, growth_chunk and check_every must be positive")
        unknown = set(self.boundary) - {"dirichlet_one_left", "dirichlet_zero_right"}
        if unknown:
            raise ValueError(f"unknown boundary rules {sorted(unknown)}")
        self.snapshot_times = tuple(sorted(float(t) for t in self.snapshot_times))

    @classmethod
    def from_mapping(cls, d: Mapping) -> SolverConfig:
        known = {f for f in cls.__dataclass_fields__}
        kw = {k: (tuple(v) if isinstance(v, list) else v) for k, v in d.items() if k in known}
        return cls(**kw)


@dataclass
class FrontRecords:
    levels: np.ndarray
    t: np.ndarray
    x_front: np.ndarray      # rightmost crossing sup{x : u >= level}
    x_behind: np.ndarray     # first x >= 0 where u drops below level


@dataclass
class Trajectory:
    snapshots: list[State]
    fronts: FrontRecords
    final: State
    medium_description: str = ""
    info: dict = field(default_factory=dict)

    @property
    def T(self) -> float:
        return self.final.t

    def front(self, level: float) -> tuple[np.ndarray, np.ndarray]:
        j = int(np.argmin(np.abs(self.fronts.levels - level)))
        if abs(self.fronts.levels[j] - level) > 1e-12:
            raise KeyError(f"level {level} was not recorded")
        return self.fronts.t, self.fronts.x_front[:, j]


# --------------------------------------------------------------------- operator pieces

def _operator(medium: Medium, x: np.ndarray, dx: float):
    a, q, _ = medium.coefficients(x)
    lower = a / dx ** 2 + np.maximum(-q, 0.0) / dx
    upper = a / dx ** 2 + np.maximum(q, 0.0) / dx
    diag = -(lower + upper)
    return lower, diag, upper


def _check_stability(lower, diag, upper, react, config: SolverConfig):
    rmax = float(np.max(np.abs(react))) if react.size else 0.0
    if config.dt * rmax >= 1.0:
        raise StabilityError(f"dt * max reaction slope = {config.dt * rmax:.3g} >= 1")
    explicit = (1.0 - config.theta) * config.dt * float(np.max(-diag)) + config.dt * rmax
    if explicit > 1.0:
        raise StabilityError(
            f"(1-theta) dt (l+u) + dt c = {explicit:.3g} > 1 breaks the discrete maximum principle; "
            "lower dt or raise theta")


class _Stepper:
    """Holds the operator arrays for the current grid and advances u in place."""

    def __init__(self, medium: Medium, grid: Grid1D, config: SolverConfig):
        self.medium, self.config = medium, config
        self.logistic = medium.f.form_tag == "logistic"
        self.grid = grid
        self._build(grid.x)

    def _build(self, x):
        m, cfg = self.medium, self.config
        self.lower, self.diag, self.upper = _operator(m, x, cfg.dx)
        self.react = np.ascontiguousarray(m.c(x))
        _check_stability(self.lower, self.diag, self.upper, self.react, cfg)

    def extend(self, k: int):
        g = self.grid
        xn = g.x_end + g.dx * np.arange(1, k + 1)
        lo, di, up = _operator(self.medium, xn, g.dx)
        self.lower = np.concatenate([self.lower, lo])
        self.diag = np.concatenate([self.diag, di])
        self.upper = np.concatenate([self.upper, up])
        self.react = np.concatenate([self.react, self.medium.c(xn)])
        _check_stability(lo, di, up, self.react[-k:], self.config)
        self.grid = Grid1D(g.x0, g.dx, g.n + k)

    def advance(self, u: np.ndarray, nsteps: int) -> None:
        cfg = self.config
        if self.logistic:
            done, worst = _backend.imex_run(u, self.react, self.lower, self.diag, self.upper, cfg.theta,
                                            cfg.dt, nsteps, GHOST_THRESHOLD, CLIP_TOL, FAIL_TOL)
        else:
            done, worst = self._advance_generic(u, nsteps)
        if done < nsteps:
            raise StabilityError(f"overshoot {worst:.3g} beyond [0, 1] exceeds {FAIL_TOL:g}")

    def _advance_generic(self, u, nsteps):
        cfg = self.config
        x = self.grid.x
        im = cfg.theta * cfg.dt
        lower_s, diag_s, upper_s = -im * self.lower, 1.0 - im * self.diag, -im * self.upper
        worst = 0.0
        for k in range(nsteps):
            gl = 1.0 if u[0] >= GHOST_THRESHOLD else 0.0
            gr = 1.0 if u[-1] >= GHOST_THRESHOLD else 0.0
            left = np.concatenate([[gl], u[:-1]])
            right = np.concatenate([u[1:], [gr]])
            rhs = cfg.dt * (self.medium.f(x, u) + ((self.lower * left + self.upper * right) + self.diag * u))
            u += _backend.tridiag_solve(lower_s, diag_s, upper_s, rhs)
            over = max(0.0, float(-u.min()), float(u.max() - 1.0))
            worst = max(worst, over)
            np.clip(u, 0.0, 1.0, out=u, where=(u < 0) & (u >= -CLIP_TOL) | (u > 1) & (u <= 1 + CLIP_TOL))
            if worst > FAIL_TOL:
                return k + 1, worst
        return nsteps, worst


def step(state: State, medium: Medium, config: SolverConfig) -> State:
    """One IMEX step on a fixed grid."""
    if abs(state.grid.dx - config.dx) > 1e-15 * config.dx:
        config = SolverConfig(**{**config.__dict__, "dx": state.grid.dx})
    stepper = _Stepper(medium, state.grid, config)
    u = state.u.copy()
    stepper.advance(u, 1)
    return State(state.t + config.dt, state.grid, u)


# --------------------------------------------------------------------- initial data

def initial_profile(spec, x: np.ndarray) -> np.ndarray:
    """Evaluate an initial-datum description on nodes.

    Accepted forms: a mapping ``{"kind": "indicator", "lo": -1, "hi": 1,
    "value": 1}``, ``{"kind": "zero"}``, ``{"kind": "ones"}``,
    ``{"kind": "bump", "center": 0, "radius": 1, "height": 1}`` (cosine
    bump), or a callable of x.
    """
    if callable(spec):
        u = np.asarray(spec(x), dtype=float)
    else:
        kind = spec.get("kind", "indicator")
        if kind == "indicator":
            lo, hi, v = float(spec.get("lo", -1.0)), float(spec.get("hi", 1.0)), float(spec.get("value", 1.0))
            u = np.where((x >= lo - 1e-12) & (x <= hi + 1e-12), v, 0.0)
        elif kind == "zero":
            u = np.zeros_like(x)
        elif kind == "ones":
            u = np.ones_like(x)
        elif kind == "bump":
            c0, r, h = float(spec.get("center", 0.0)), float(spec.get("radius", 1.0)), float(spec.get("height", 1.0))
            s = np.clip((x - c0) / r, -1, 1)
            u = np.where(np.abs(x - c0) < r, h * 0.5 * (1 + np.cos(np.pi * s)), 0.0)
        else:
            raise ValueError(f"unknown initial datum kind {kind!r}")
    if u.shape != x.shape:
        raise ValueError("initial datum has the wrong shape")
    if u.min() < 0 or u.max() > 1:
        raise ValueError("initial datum must take values in [0, 1]")
    return np.ascontiguousarray(u)


def _support(spec) -> tuple[float, float]:
    if callable(spec):
        return (-1.0, 1.0)
    kind = spec.get("kind", "indicator")
    if kind == "indicator":
        return float(spec.get("lo", -1.0)), float(spec.get("hi", 1.0))
    if kind == "bump":
        c0, r = float(spec.get("center", 0.0)), float(spec.get("radius", 1.0))
        return c0 - r, c0 + r
    return (-1.0, 1.0)


# --------------------------------------------------------------------- fronts

def front_positions(x: np.ndarray, u: np.ndarray, levels: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Rightmost crossing sup{x : u >= level} and first drop below level on x >= 0.

    Both are linearly interpolated between nodes; the first is NaN when u
    never reaches the level.
    """
    dx = x[1] - x[0]
    ahead = np.full(levels.shape, np.nan)
    behind = np.full(levels.shape, np.nan)
    start = int(np.searchsorted(x, 0.0))
    for j, lam in enumerate(levels):
        idx = np.flatnonzero(u >= lam)
        if idx.size:
            i = idx[-1]
            if i == u.size - 1:
                ahead[j] = x[-1]
            else:
                ahead[j] = x[i] + dx * (u[i] - lam) / (u[i] - u[i + 1])
        below = np.flatnonzero(u[start:] < lam)
        if below.size == 0:
            behind[j] = x[-1]
        else:
            i = start + below[0]
            if i == start:
                behind[j] = 0.0
            else:
                behind[j] = x[i - 1] + dx * (u[i - 1] - lam) / (u[i - 1] - u[i])
    return ahead, behind


# --------------------------------------------------------------------- simulate

def simulate(medium: Medium, u0_spec, T: float, config: SolverConfig | None = None,
             levels: Sequence[float] = (0.05, 0.5, 0.95), *, record_every: int | None = None,
             progress: Callable[[float], None] | None = None) -> Trajectory:
    """Integrate to time ``T`` on a right-expanding domain and track level sets.

    Front records are taken every ``record_every`` steps (default: every
    growth check); full snapshots at ``config.snapshot_times`` and at ``T``.
    """
    config = config or SolverConfig()
    levels = np.asarray(sorted(float(v) for v in levels))
    if np.any((levels <= 0) | (levels >= 1)):
        raise ValueError("levels must lie in (0, 1)")
    if T <= 0:
        raise ValueError("T must be positive")
    dx, dt = config.dx, config.dt
    if config.domain is not None:
        x_lo, x_hi = map(float, config.domain)
        growth = False
    else:
        lo, hi = _support(u0_spec)
        x_lo = lo - config.left_buffer
        x_hi = hi + config.right_margin + config.growth_chunk * dx
        growth = True
    n = int(math.floor((x_hi - x_lo) / dx + 1e-9)) + 1
    grid = Grid1D(x_lo, dx, n)
    u = initial_profile(u0_spec, grid.x)
    stepper = _Stepper(medium, grid, config)

    nsteps = int(round(T / dt))
    if abs(nsteps * dt - T) > 1e-9 * max(1.0, T):
        raise ValueError(f"T={T} is not a multiple of dt={dt}")
    snap_steps = sorted({int(round(t / dt)) for t in config.snapshot_times if 0 <= t <= T} | {nsteps})
    record_every = record_every or config.check_every
    margin_nodes = max(2, int(math.ceil(config.right_margin / dx)))

    snapshots: list[State] = []
    rec_t, rec_a, rec_b = [], [], []

    def record(k):
        a_, b_ = front_positions(stepper.grid.x, u, levels)
        rec_t.append(k * dt)
        rec_a.append(a_)
        rec_b.append(b_)

    if 0 in snap_steps:
        snapshots.append(State(0.0, stepper.grid, u.copy()))
    record(0)
    k = 0
    next_check = config.check_every
    next_record = record_every
    snap_iter = iter(s for s in snap_steps if s > 0)
    next_snap = next(snap_iter, None)
    while k < nsteps:
        stop = min(next_check, next_record, nsteps, next_snap if next_snap is not None else nsteps)
        stepper.advance(u, stop - k)
        k = stop
        if k == next_check:
            next_check += config.check_every
            if growth:
                while float(u[-margin_nodes:].max()) > VISIBLE:
                    if stepper.grid.n + config.growth_chunk > config.max_nodes:
                        raise DomainError(f"domain growth would exceed max_nodes={config.max_nodes}")
                    stepper.extend(config.growth_chunk)
                    u = np.concatenate([u, np.zeros(config.growth_chunk)])
        if k == next_record:
            next_record += record_every
            record(k)
        if next_snap is not None and k == next_snap:
            snapshots.append(State(k * dt, stepper.grid, u.copy()))
            next_snap = next(snap_iter, None)
        if progress is not None:
            progress(k * dt)
    if rec_t[-1] != nsteps * dt:
        record(nsteps)
    fronts = FrontRecords(levels, np.array(rec_t), np.array(rec_a), np.array(rec_b))
    final = State(nsteps * dt, stepper.grid, u.copy())
    return Trajectory(snapshots, fronts, final, medium.description,
                      {"dx": dx, "dt": dt, "theta": config.theta, "nodes": stepper.grid.n,
                       "backend": _backend.BACKEND})


# --------------------------------------------------------------------- comparison

@dataclass
class OrderingReport:
    ordered: bool
    worst_violation: float
    where: tuple[float, float] | None
    tolerance: float

    def __str__(self):
        verdict = "ordered" if self.ordered else "NOT ordered"
        return f"{verdict}: worst violation {self.worst_violation:.3g} at {self.where}"


def compare_solutions(traj_a: Trajectory, traj_b: Trajectory, tol: float = 1e-10) -> OrderingReport:
    """Check u_a <= u_b at every node of every snapshot (missing nodes count as 0)."""
    sa, sb = traj_a.snapshots, traj_b.snapshots
    if len(sa) != len(sb) or any(abs(x.t - y.t) > 1e-12 for x, y in zip(sa, sb)):
        raise ValueError("trajectories have different snapshot times")
    worst, where = -math.inf, None
    for a, b in zip(sa, sb):
        ga, gb = a.grid, b.grid
        if abs(ga.x0 - gb.x0) > 1e-12 or abs(ga.dx - gb.dx) > 1e-15:
            raise ValueError("trajectories use different grids")
        n = max(ga.n, gb.n)
        ua = np.zeros(n)
        ub = np.zeros(n)
        ua[:ga.n] = a.u
        ub[:gb.n] = b.u
        d = ua - ub
        i = int(np.argmax(d))
        if d[i] > worst:
            worst, where = float(d[i]), (a.t, ga.x0 + i * ga.dx)
    return OrderingReport(worst <= tol, max(worst, 0.0), where if worst > 0 else None, tol)
