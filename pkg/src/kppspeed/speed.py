"""Hamiltonian tables, spreading speeds, Legendre/WKB diagnostics and empirical speeds."""

from __future__ import annotations

import math
from collections.abc import Callable, Mapping, Sequence
from dataclasses import dataclass, field

import numpy as np
from scipy.interpolate import CubicSpline
from scipy.optimize import minimize_scalar

from kppspeed import eigen
from kppspeed.errors import BracketError, DomainError
from kppspeed.media import Medium, almost_period
from kppspeed.pde import Trajectory

DEFAULT_P_GRID = np.linspace(-4.0, 4.0, 65)

ENGINES = ("const_testfn", "periodic", "corrector", "corrector_window", "riccati", "dirichlet_window")


@dataclass
class HamiltonianTable:
    p_grid: np.ndarray
    H_under: np.ndarray
    H_over: np.ndarray
    engine: str
    medium_id: str
    info: dict = field(default_factory=dict)

    def __post_init__(self):
        self.p_grid = np.asarray(self.p_grid, dtype=float)
        self.H_under = np.asarray(self.H_under, dtype=float)
        self.H_over = np.asarray(self.H_over, dtype=float)
        if np.any(np.diff(self.p_grid) <= 0):
            raise ValueError("p_grid must be strictly increasing")
        if not (self.p_grid.shape == self.H_under.shape == self.H_over.shape):
            raise ValueError("table rows have mismatched lengths")

    def spline(self, which: str = "under") -> CubicSpline:
        return CubicSpline(self.p_grid, self.H_under if which == "under" else self.H_over)

    def merged(self, p, lo, hi) -> HamiltonianTable:
        p_all = np.concatenate([self.p_grid, np.atleast_1d(p)])
        p_all, idx = np.unique(np.round(p_all, 12), return_index=True)
        lo_all = np.concatenate([self.H_under, np.atleast_1d(lo)])[idx]
        hi_all = np.concatenate([self.H_over, np.atleast_1d(hi)])[idx]
        return HamiltonianTable(p_all, lo_all, hi_all, self.engine, self.medium_id, dict(self.info))

    def rows(self):
        for p, lo, hi in zip(self.p_grid, self.H_under, self.H_over):
            yield {"medium_id": self.medium_id, "engine": self.engine, "p": float(p),
                   "H_under": float(lo), "H_over": float(hi)}


def _engine_evaluator(medium: Medium, engine: str, policy: Mapping) -> Callable[[float], tuple[float, float, dict]]:
    """Return p -> (H_under(p), H_over(p), diagnostics) for one engine."""
    if engine == "periodic":
        n = int(policy.get("n", 512))

        def ev(p):
            est = eigen.periodic_principal_eigenvalue(eigen.assemble_Lp(medium, p), n)
            return est.value, est.value, {"residual": est.residual, "R": math.nan}
        return ev

    if engine == "const_testfn":
        R_seq = policy.get("R_sequence", [0.0])
        width = float(policy.get("window_width", 1000.0))
        samples = int(policy.get("samples", 20_001))

        def ev(p):
            lo, hi, diag = eigen.window_H(medium, p, R_seq, "const_testfn", width, samples=samples)
            return lo, hi, {"residual": 0.0, "R": diag.R[-1]}
        return ev

    if engine in ("corrector_window", "dirichlet_window"):
        R_seq = policy.get("R_sequence", [0.0, 100.0, 200.0])
        width = float(policy.get("window_width", 2 * math.pi * 70))
        eps_list = tuple(policy.get("epsilons", (0.2, 0.1, 0.05)))
        order = int(policy.get("richardson_order", 2))
        name = "corrector" if engine == "corrector_window" else engine

        def ev(p):
            lo, hi, diag = eigen.window_H(medium, p, R_seq, name, width, epsilons=eps_list,
                                          richardson_order=order)
            return lo, hi, {"residual": hi - lo, "R": diag.R[-1]}
        return ev

    if engine == "corrector":
        eps_list = tuple(policy.get("epsilons", (0.2, 0.1, 0.05)))
        order = int(policy.get("richardson_order", 2))
        window = policy.get("window")
        if window is None and medium.period is None:
            freqs = medium.metadata.get("frequencies")
            if not freqs:
                raise DomainError("corrector engine needs a window for non-periodic media")
            L = almost_period(freqs, *policy.get("period_search", (400.0, 500.0)))
            window = (0.0, L)
        window = tuple(window) if window is not None else None
        n = policy.get("n")
        if n is None and window is not None:
            n = int(math.ceil((window[1] - window[0]) / float(policy.get("dx", 0.02))))

        def ev(p):
            sols = eigen.corrector_sequence(medium, p, eps_list, window, n)
            est = eigen.richardson_lambda(sols, order=order)
            return est.value, est.value, {"residual": est.residual, "R": math.nan}
        return ev

    if engine == "riccati":
        span = tuple(policy.get("span", (0.0, 2000.0)))
        h = float(policy.get("h", 0.01))

        def ev(p):
            if p == 0:
                lam = eigen.lambda1_estimate(medium, span)
                return lam, lam, {"residual": 0.0, "R": math.nan, "plateau": True}
            side = "right" if p < 0 else "left"
            est = eigen.lyapunov_inverse_k(medium, abs(p), span, h=h, side=side)
            return est.value, est.value, {"residual": est.residual, "R": math.nan,
                                          "plateau": est.info["plateau"]}
        return ev

    raise ValueError(f"unknown engine {engine!r}")


def hamiltonian_table(medium: Medium, p_grid=None, engine: str = "const_testfn", window_policy=None,
                      *, refine: bool = True, refine_points: int = 8) -> HamiltonianTable:
    """Fill H_under/H_over on a p-grid with one engine, refined near the speed minimizer.

    With ``refine`` the negative-p branch is re-evaluated on a finer grid
    around the coarse argmin of H(-p)/p so the interpolated minimum is
    resolved.
    """
    p_grid = DEFAULT_P_GRID if p_grid is None else np.asarray(p_grid, dtype=float)
    policy = dict(window_policy or {})
    ev = _engine_evaluator(medium, engine, policy)
    lows, highs, diags = [], [], []
    for p in p_grid:
        lo, hi, d = ev(float(p))
        lows.append(lo)
        highs.append(hi)
        diags.append(d)
    table = HamiltonianTable(p_grid, lows, highs, engine, medium.medium_id,
                             {"policy": {k: v for k, v in policy.items() if _jsonable(v)}, "diagnostics": diags})
    if refine:
        step = float(np.min(np.diff(p_grid)))
        extra = []
        for which in ("under", "over"):
            pstar = _coarse_argmin(table, which)
            if pstar is not None:
                extra.extend(-(pstar + step * np.linspace(-1, 1, 2 * refine_points + 1)[1:-1]))
        extra = [float(p) for p in sorted(set(np.round(extra, 12))) if p < 0 and p not in set(p_grid)]
        if extra:
            vals = [ev(p) for p in extra]
            table = table.merged(extra, [v[0] for v in vals], [v[1] for v in vals])
            table.info["refined"] = extra
    return table


def _jsonable(v):
    return isinstance(v, (int, float, str, list, tuple, bool)) or v is None


def _coarse_argmin(table: HamiltonianTable, which: str):
    neg = table.p_grid < 0
    if not neg.any():
        return None
    ps = -table.p_grid[neg]
    H = (table.H_under if which == "under" else table.H_over)[neg]
    return float(ps[int(np.argmin(H / ps))])


# --------------------------------------------------------------------- speeds

@dataclass
class SpeedResult:
    w_under: float
    w_over: float
    p_star_under: float
    p_star_over: float
    method: str
    bracket: tuple[float, float]


def _min_ratio(table: HamiltonianTable, which: str) -> tuple[float, float]:
    neg = table.p_grid < 0
    ps = -table.p_grid[neg][::-1]
    if ps.size < 3:
        raise BracketError("table has fewer than three negative momenta")
    H = (table.H_under if which == "under" else table.H_over)[neg][::-1]
    ratios = H / ps
    i = int(np.argmin(ratios))
    if i == ps.size - 1:
        raise BracketError(f"H(-p)/p is still decreasing at p={ps[-1]:g}; widen the table")
    if i == 0:
        raise BracketError(f"H(-p)/p minimum at the smallest momentum p={ps[0]:g}; refine near 0")
    spline = table.spline(which)
    res = minimize_scalar(lambda p: float(spline(-p)) / p, bounds=(ps[i - 1], ps[i + 1]), method="bounded",
                          options={"xatol": 1e-12})
    pstar = float(res.x)
    w = float(spline(-pstar)) / pstar
    return min(w, float(ratios[i])), pstar


def spreading_speed(table: HamiltonianTable) -> SpeedResult:
    """min over p > 0 of H(-p)/p for both rows of the table."""
    w_lo, p_lo = _min_ratio(table, "under")
    w_hi, p_hi = _min_ratio(table, "over")
    neg = -table.p_grid[table.p_grid < 0]
    return SpeedResult(w_lo, w_hi, p_lo, p_hi, table.engine, (float(neg.min()), float(neg.max())))


# --------------------------------------------------------------------- Legendre / WKB

@dataclass
class LegendreTable:
    q_grid: np.ndarray
    H_star: np.ndarray
    p_argmax: np.ndarray
    source: HamiltonianTable

    def __call__(self, q) -> np.ndarray:
        q = np.atleast_1d(np.asarray(q, dtype=float))
        return np.array([_conjugate_at(self.source, float(v))[0] for v in q])


def _conjugate_at(table: HamiltonianTable, q: float, spline=None):
    spline = spline or table.spline("under")
    p = table.p_grid
    vals = p * q - table.H_under
    i = int(np.argmax(vals))
    if i == 0 or i == p.size - 1:
        raise BracketError(f"sup over p of (pq - H) sits at the table edge for q={q:g}")
    res = minimize_scalar(lambda s: -(s * q - float(spline(s))), bounds=(p[i - 1], p[i + 1]), method="bounded",
                          options={"xatol": 1e-12})
    best = max(-float(res.fun), float(vals[i]))
    return best, float(res.x)


def legendre_conjugate(table: HamiltonianTable, q_grid) -> LegendreTable:
    """H*(q) = sup_p (p q - H_under(p)) with local refinement around the grid argmax."""
    q_grid = np.asarray(q_grid, dtype=float)
    spline = table.spline("under")
    out = np.array([_conjugate_at(table, float(q), spline) for q in q_grid])
    return LegendreTable(q_grid, out[:, 0], out[:, 1], table)


def wkb_profile(legendre: LegendreTable, t: float, x) -> np.ndarray:
    """The lower-bound profile x -> min(-t H*(-x/t), 0)."""
    if t <= 0:
        raise ValueError("t must be positive")
    x = np.asarray(x, dtype=float)
    q = -x / t
    lo, hi = float(legendre.q_grid.min()), float(legendre.q_grid.max())
    if q.min() < lo - 1e-12 or q.max() > hi + 1e-12:
        raise DomainError(f"x/t outside the Legendre table range [{-hi:g}, {-lo:g}]")
    return np.minimum(-t * legendre(q), 0.0)


@dataclass
class WkbReport:
    epsilons: list[float]
    deviations: list[float]
    positivity: list[float]
    x_grid: np.ndarray
    w_under: float

    @property
    def decreasing(self) -> bool:
        return self.deviations[-1] <= self.deviations[0]


def wkb_compare(trajectory: Trajectory, legendre: LegendreTable, epsilon_list: Sequence[float],
                x_grid=None, w_under: float | None = None) -> WkbReport:
    """One-sided check of Z_eps(1, x) = eps ln u(1/eps, x/eps) against the profile.

    Reports sup over x of (profile - Z_eps)^+ per eps, and the minimum of
    u(1/eps, x/eps) on 0 <= x <= 0.9 w_under (the interior of the zero set).
    """
    x_grid = np.linspace(0.0, 3.0, 301) if x_grid is None else np.asarray(x_grid, dtype=float)
    if w_under is None:
        w_under = spreading_speed(legendre.source).w_under
    profile = wkb_profile(legendre, 1.0, x_grid)
    snaps = {round(s.t, 9): s for s in trajectory.snapshots}
    devs, pos = [], []
    eps_sorted = sorted(map(float, epsilon_list), reverse=True)
    for e in eps_sorted:
        t = 1.0 / e
        if t > trajectory.T + 1e-9:
            raise DomainError(f"trajectory ends at T={trajectory.T:g} < 1/eps={t:g}")
        snap = snaps.get(round(t, 9))
        if snap is None:
            raise DomainError(f"no snapshot at t={t:g}; add it to snapshot_times")
        xs = x_grid / e
        if xs.max() > snap.grid.x_end:
            raise DomainError(f"snapshot at t={t:g} ends before x={xs.max():g}")
        u = np.interp(xs, snap.grid.x, snap.u)
        Z = e * np.log(np.maximum(u, 1e-300))
        devs.append(float(np.max(np.clip(profile - Z, 0.0, None))))
        inner = x_grid <= 0.9 * w_under
        pos.append(float(u[inner].min()) if inner.any() else math.nan)
    return WkbReport(eps_sorted, devs, pos, x_grid, float(w_under))


# --------------------------------------------------------------------- empirical speeds

@dataclass
class FrontSpeedEstimate:
    slopes: dict[float, float]
    fit_window: tuple[float, float]
    fit_residuals: dict[float, float]
    log_fits: dict[float, tuple[float, float, float]]
    w_star_emp: float | None
    w_upper_emp: float | None
    T_final: float
    delta: float
    tail_window: tuple[float, float]
    flags: list[str] = field(default_factory=list)

    @property
    def slopes_flat(self) -> bool:
        """Pulled-front flatness: slopes agree within twice their combined residuals."""
        vals = list(self.slopes.values())
        res = list(self.fit_residuals.values())
        return max(vals) - min(vals) <= 2 * (sum(res) + 1e-3)


def _fits(t, X, with_log=True):
    ok = np.isfinite(X)
    t, X = t[ok], X[ok]
    if t.size < 3:
        return math.nan, math.nan, (math.nan, math.nan, math.nan)
    A = np.column_stack([t, np.ones_like(t)])
    coef, *_ = np.linalg.lstsq(A, X, rcond=None)
    resid = X - A @ coef
    # standard error of the slope
    se = math.sqrt(float(resid @ resid) / max(t.size - 2, 1) / float(((t - t.mean()) ** 2).sum()))
    logfit = (math.nan, math.nan, math.nan)
    if with_log and t.size >= 4 and t.min() > 0:
        B = np.column_stack([t, -np.log(t), np.ones_like(t)])
        lc, *_ = np.linalg.lstsq(B, X, rcond=None)
        logfit = tuple(float(v) for v in lc)
    return float(coef[0]), se, logfit


def empirical_speeds(trajectory: Trajectory, w_grid=None, delta: float = 0.05, *,
                     tail_start: float = 1.0, fit_start: float = 0.5) -> FrontSpeedEstimate:
    """Finite-time surrogates of the lower and upper spreading speeds.

    s1(w) = sup over tail times t and 0 <= x <= w t of |u - 1| and
    s2(w) = sup over tail times and x >= w t of u, where the tail is
    [tail_start T, T] (tail_start = 1 uses only the final time).  w_star_emp
    is the largest grid w with s1 <= delta, w_upper_emp the smallest with
    s2 <= delta.  Slopes of X_lambda(t) are fitted on [fit_start T, T], with
    an optional w t - k ln t + b fit reported alongside.
    """
    if not 0 < delta < 1:
        raise ValueError("delta must lie in (0, 1)")
    w_grid = np.arange(0.0, 6.0 + 1e-9, 0.005) if w_grid is None else np.sort(np.asarray(w_grid, dtype=float))
    T = trajectory.T
    fr = trajectory.fronts
    t0 = tail_start * T
    times, u_lows, u_highs = [], [], []
    for snap in trajectory.snapshots + [trajectory.final]:
        if snap.t >= t0 - 1e-9 and snap.t > 0 and snap.t not in times:
            times.append(snap.t)
            x, u = snap.grid.x, snap.u
            # for each tail time: first x >= 0 where |u-1| > delta and last x where u > delta
            start = int(np.searchsorted(x, 0.0))
            bad = np.flatnonzero(np.abs(u[start:] - 1.0) > delta)
            u_lows.append(x[start + bad[0]] if bad.size else math.inf)
            hot = np.flatnonzero(u > delta)
            u_highs.append(x[hot[-1]] if hot.size else -math.inf)
    # records at levels delta and 1-delta extend the tail between snapshots
    lev = fr.levels
    j_hi = np.flatnonzero(np.abs(lev - delta) < 1e-12)
    j_lo = np.flatnonzero(np.abs(lev - (1.0 - delta)) < 1e-12)
    if tail_start < 1.0 and j_hi.size and j_lo.size:
        sel = (fr.t >= t0 - 1e-9) & (fr.t > 0)
        for t, xb, xa in zip(fr.t[sel], fr.x_behind[sel, j_lo[0]], fr.x_front[sel, j_hi[0]]):
            times.append(float(t))
            u_lows.append(xb if np.isfinite(xb) else math.inf)
            u_highs.append(xa if np.isfinite(xa) else -math.inf)
    flags = []
    if not times:
        raise DomainError("no snapshot in the tail window")
    times = np.array(times)
    first_bad = np.array(u_lows)
    last_hot = np.array(u_highs)
    # s1(w) <= delta at time t iff w t < first_bad(t); s2(w) <= delta iff w t >= last_hot(t)
    ok1 = np.array([np.all(w * times < first_bad) for w in w_grid])
    ok2 = np.array([np.all(w * times >= last_hot) for w in w_grid])
    w_star = float(w_grid[ok1].max()) if ok1.any() else None
    w_upper = float(w_grid[ok2].min()) if ok2.any() else None
    if w_star is None and w_upper is None:
        raise DomainError("neither speed criterion is met anywhere on the w-grid; run longer")
    if w_star is not None and w_star == w_grid[-1]:
        flags.append("w_star_at_grid_max")
    if w_upper is None:
        flags.append("s2_unsatisfiable")
    if w_star is None:
        flags.append("s1_unsatisfiable")

    t_fit0 = fit_start * T
    sel = fr.t >= t_fit0 - 1e-9
    slopes, resid, logs = {}, {}, {}
    for j, lam in enumerate(fr.levels):
        s, se, lf = _fits(fr.t[sel], fr.x_front[sel, j])
        slopes[float(lam)] = s
        resid[float(lam)] = se
        logs[float(lam)] = lf
    return FrontSpeedEstimate(slopes, (t_fit0, T), resid, logs, w_star, w_upper, T, delta, (t0, T), flags)


# --------------------------------------------------------------------- report

@dataclass
class SpeedReport:
    medium: dict
    engine: str
    w_under: float
    w_over: float
    p_star_under: float
    p_star_over: float
    w_star_emp: float | None
    w_upper_emp: float | None
    tolerance: float
    verdict: bool
    checks: dict
    slopes: dict
    provenance: dict = field(default_factory=dict)
    notes: list[str] = field(default_factory=list)

    def to_json(self) -> dict:
        return {
            "medium": self.medium,
            "engine": self.engine,
            "speeds": {"w_under": self.w_under, "w_over": self.w_over, "w_star_emp": self.w_star_emp,
                       "w_upper_emp": self.w_upper_emp},
            "minimizers": {"p_star_under": self.p_star_under, "p_star_over": self.p_star_over},
            "tolerance": self.tolerance,
            "verdict": "pass" if self.verdict else "fail",
            "checks": self.checks,
            "slopes": {str(k): v for k, v in self.slopes.items()},
            "provenance": self.provenance,
            "notes": self.notes,
        }


def speed_report(medium: Medium, speed: SpeedResult | None, empirical: FrontSpeedEstimate | None,
                 tolerance: float = 0.10, *, provenance: Mapping | None = None,
                 extra_checks: Mapping | None = None) -> SpeedReport:
    """Assemble theory and experiment and judge the sandwich
    w_under (1 - tol) <= w_star_emp <= w_upper_emp <= w_over (1 + tol)."""
    checks = {}
    notes = []
    if speed is not None:
        checks["theory_ordered"] = bool(speed.w_under <= speed.w_over * (1 + 1e-9) + 1e-12)
    if speed is not None and empirical is not None:
        ws, wu = empirical.w_star_emp, empirical.w_upper_emp
        checks["lower_sandwich"] = ws is not None and ws >= speed.w_under * (1 - tolerance)
        checks["upper_sandwich"] = wu is not None and wu <= speed.w_over * (1 + tolerance)
        checks["empirical_ordered"] = ws is not None and wu is not None and ws <= wu + 1e-12
        notes.extend(empirical.flags)
    for k, v in (extra_checks or {}).items():
        checks[k] = bool(v)
    verdict = all(checks.values()) if checks else True
    return SpeedReport(
        medium={"id": medium.medium_id, "class": medium.class_tag, "description": medium.description,
                "params": _plain(dict(medium.params)), "seed": medium.seed},
        engine=speed.method if speed else "none",
        w_under=speed.w_under if speed else math.nan,
        w_over=speed.w_over if speed else math.nan,
        p_star_under=speed.p_star_under if speed else math.nan,
        p_star_over=speed.p_star_over if speed else math.nan,
        w_star_emp=empirical.w_star_emp if empirical else None,
        w_upper_emp=empirical.w_upper_emp if empirical else None,
        tolerance=tolerance, verdict=verdict, checks=checks,
        slopes=empirical.slopes if empirical else {},
        provenance=dict(provenance or {}), notes=notes,
    )


def _plain(obj):
    if isinstance(obj, Mapping):
        return {str(k): _plain(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_plain(v) for v in obj]
    if isinstance(obj, (np.floating, np.integer)):
        return obj.item()
    if isinstance(obj, (int, float, str, bool)) or obj is None:
        return obj
    return str(obj)
