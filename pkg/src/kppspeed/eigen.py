"""Principal-eigenvalue engines for the conjugated operators L_p.

``L_p phi = a phi'' + (2 p a + q) phi' + (a p**2 + q p + c) phi`` is
``e^{-px} L (e^{px} phi)``.  Four structural engines evaluate its principal
eigenvalue quantities:

* ``periodic``: spectral problem on one period (inverse power iteration);
* ``dirichlet_window``: zero boundary values on a bounded interval;
* ``corrector``: damped Newton on ``a w'' + a (w'+p)^2 + q (w'+p) + c = eps w``
  with periodic wrap, then Richardson extrapolation in ``eps``;
* ``riccati``: Lyapunov exponent of the decaying solution of
  ``(a u')' + c u = gamma u`` (divergence-form media only), inverted in gamma.

The constant test function gives the cheap bracket ``inf/sup (a p^2 + q p + c)``.
"""

from __future__ import annotations

import math
import weakref
from collections.abc import Sequence
from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import eigh_tridiagonal
from scipy.optimize import brentq

from kppspeed import _backend
from kppspeed.errors import BracketError, ConvergenceError, DomainError
from kppspeed.media import Medium

EPS = np.finfo(float).eps

METHODS = ("periodic", "dirichlet_window", "corrector", "riccati", "const_testfn_lower", "const_testfn_upper")


@dataclass(frozen=True, eq=False)
class OperatorLp:
    medium: Medium
    p: float

    def second(self, x) -> np.ndarray:
        return self.medium.a(x)

    def first(self, x) -> np.ndarray:
        return 2.0 * self.p * self.medium.a(x) + self.medium.q(x)

    def zeroth(self, x) -> np.ndarray:
        a, q, c = self.medium.coefficients(x)
        return a * self.p ** 2 + q * self.p + c

    def coefficients(self, x):
        a, q, c = self.medium.coefficients(x)
        p = self.p
        return a, 2.0 * p * a + q, a * p * p + q * p + c


def assemble_Lp(medium: Medium, p: float) -> OperatorLp:
    return OperatorLp(medium, float(p))


@dataclass
class EigenEstimate:
    value: float
    method: str
    window: tuple[float, float] | str
    residual: float = 0.0
    eigenfunction: np.ndarray | None = None
    p: float = math.nan
    iterations: int = 0
    info: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.method not in METHODS:
            raise ValueError(f"unknown method {self.method!r}")
        if self.eigenfunction is not None and not np.all(self.eigenfunction > 0):
            raise ConvergenceError(f"{self.method}: eigenfunction is not strictly positive")


# --------------------------------------------------------------------- inverse iteration

def _tridiag_apply(lower, diag, upper, v, periodic):
    out = diag * v
    out[1:] += lower[1:] * v[:-1]
    out[:-1] += upper[:-1] * v[1:]
    if periodic:
        out[0] += lower[0] * v[-1]
        out[-1] += upper[-1] * v[0]
    return out


def _discretize(op: OperatorLp, x: np.ndarray, dx: float):
    a, b, z = op.coefficients(x)
    lower = a / dx ** 2 - b / (2 * dx)
    upper = a / dx ** 2 + b / (2 * dx)
    diag = -2.0 * a / dx ** 2 + z
    if min(lower.min(), upper.min()) < 0:
        raise DomainError(
            f"central differences lose positivity at p={op.p:g}: need |2pa+q| dx <= 2a; refine the grid")
    return lower, diag, upper, a, z


def perron_eigenpair(lower, diag, upper, *, periodic: bool, sigma0: float, v0=None,
                     tol: float = 1e-12, max_iter: int = 500):
    """Principal eigenpair of a tridiagonal Metzler matrix by shifted inverse iteration.

    The shift starts at ``sigma0`` and then tracks the Collatz-Wielandt
    upper bound ``max (Av)_i / v_i`` plus the current spread, so ``sigma - A``
    stays a nonsingular M-matrix and the iterate stays positive.
    Returns ``(value, vector, spread, iterations)``.
    """
    n = diag.shape[0]
    solve = _backend.cyclic_tridiag_solve if periodic else _backend.tridiag_solve
    scale = float(np.max(np.abs(diag) + np.abs(lower) + np.abs(upper)))
    floor = 64 * EPS * scale
    v = np.ones(n) if v0 is None else np.asarray(v0, dtype=float).copy()
    sigma = float(sigma0)
    best = (math.inf, None, None)
    stall = 0
    for it in range(1, max_iter + 1):
        v = solve(-lower, sigma - diag, -upper, v)
        if not np.all(v > 0):
            raise ConvergenceError(f"inverse iteration lost positivity at iteration {it} (sigma={sigma:.6g})")
        v /= v.max()
        ratios = _tridiag_apply(lower, diag, upper, v, periodic) / v
        lb, ub = float(ratios.min()), float(ratios.max())
        spread = ub - lb
        if spread < best[0]:
            best = (spread, 0.5 * (lb + ub), v.copy())
            stall = 0
        else:
            stall += 1
        if spread <= max(tol * (1.0 + abs(ub)), floor):
            return 0.5 * (lb + ub), v, spread, it
        if stall >= 5 and best[0] <= 1e3 * floor:
            return best[1], best[2], best[0], it
        sigma = ub + max(spread, floor)
    raise ConvergenceError(f"inverse iteration did not converge in {max_iter} iterations (spread {best[0]:.3g})")


def periodic_principal_eigenvalue(op: OperatorLp, n: int = 256, *, tol: float = 1e-12,
                                  max_iter: int = 500) -> EigenEstimate:
    """Principal periodic eigenvalue k_p of L_p on one period."""
    L = op.medium.period
    if L is None:
        raise DomainError("periodic engine needs a medium with a known period")
    if n < 16:
        raise ValueError("n must be at least 16")
    dx = L / n
    x = np.arange(n) * dx
    lower, diag, upper, a, z = _discretize(op, x, dx)
    sigma0 = float(z.max() + 4.0 * a.max() / dx ** 2)
    value, v, spread, its = perron_eigenpair(lower, diag, upper, periodic=True, sigma0=sigma0,
                                             tol=tol, max_iter=max_iter)
    return EigenEstimate(value, "periodic", (0.0, L), spread, v, op.p, its, {"n": n, "x": x})


def dirichlet_principal_eigenvalue(medium: Medium, interval: tuple[float, float], n: int = 512, *,
                                   p: float = 0.0, tol: float = 1e-12, max_iter: int = 500) -> EigenEstimate:
    """Principal eigenvalue of L_p with zero boundary values; ``n`` interior nodes.

    With zero boundary values the tridiagonal matrix has positive
    off-diagonals on both sides, so a diagonal similarity makes it symmetric
    and LAPACK bisection gives the top eigenvalue directly.  Inverse
    iteration is not used here: on long random windows the principal
    eigenfunction is exponentially localized, the spectral gap is tiny and
    the vector underflows.  The eigenfunction is returned only when it stays
    representable; ``tol`` and ``max_iter`` are accepted for call
    compatibility.
    """
    lo, hi = map(float, interval)
    if not lo < hi:
        raise ValueError("interval must be nonempty")
    if n < 16:
        raise ValueError("n must be at least 16")
    op = assemble_Lp(medium, p)
    dx = (hi - lo) / (n + 1)
    x = lo + dx * np.arange(1, n + 1)
    lower, diag, upper, a, z = _discretize(op, x, dx)
    prod = upper[:-1] * lower[1:]
    if np.any(prod <= 0):
        raise DomainError("off-diagonal entries vanish; refine the grid")
    off = np.sqrt(prod)
    w, y = eigh_tridiagonal(diag, off, select="i", select_range=(n - 1, n - 1), lapack_driver="stebz")
    value = float(w[0])
    y = y[:, 0] * np.sign(y[np.argmax(np.abs(y[:, 0])), 0])
    sym_res = np.abs(diag * y + np.concatenate([[0.0], off * y[:-1]]) + np.concatenate([off * y[1:], [0.0]])
                     - value * y).max()
    # undo the similarity: v_i = y_i / d_i with log d_{i+1} = log d_i + log(upper_i / lower_{i+1}) / 2
    logd = np.concatenate([[0.0], np.cumsum(0.5 * np.log(upper[:-1] / lower[1:]))])
    with np.errstate(divide="ignore", over="ignore", under="ignore"):
        logv = np.log(np.where(y > 0, y, np.nan)) - logd
        v = np.exp(logv - np.nanmax(logv))
    info = {"n": n, "x": x, "symmetric_residual": float(sym_res)}
    if np.all(np.isfinite(v)) and np.all(v > 1e-250):
        ratios = _tridiag_apply(lower, diag, upper, v, False) / v
        return EigenEstimate(value, "dirichlet_window", (lo, hi), float(np.abs(ratios - value).max()), v, p,
                             1, info)
    return EigenEstimate(value, "dirichlet_window", (lo, hi), float(sym_res), None, p, 1, info)


def const_testfn_bounds(op: OperatorLp, window: tuple[float, float], samples: int = 20_001
                        ) -> tuple[EigenEstimate, EigenEstimate]:
    """inf and sup of the zeroth-order coefficient of L_p over a sampled window."""
    lo, hi = map(float, window)
    if not lo < hi:
        raise ValueError("window must be nonempty")
    x = np.linspace(lo, hi, samples)
    z = op.zeroth(x)
    return (EigenEstimate(float(z.min()), "const_testfn_lower", (lo, hi), p=op.p),
            EigenEstimate(float(z.max()), "const_testfn_upper", (lo, hi), p=op.p))


# --------------------------------------------------------------------- approximate corrector

@dataclass
class CorrectorSolution:
    epsilon: float
    p: float
    u_samples: np.ndarray
    lambda_band: tuple[float, float]
    newton_residual: float
    window: tuple[float, float] = (0.0, 0.0)
    iterations: int = 0
    medium_id: str = ""

    @property
    def midpoint(self) -> float:
        return 0.5 * (self.lambda_band[0] + self.lambda_band[1])

    @property
    def band_width(self) -> float:
        return self.lambda_band[1] - self.lambda_band[0]


def approximate_corrector(medium: Medium, p: float, epsilon: float, window: tuple[float, float] | None = None,
                          n: int | None = None, *, core: float | None = None, tol: float = 1e-10,
                          max_iter: int = 100, w0: np.ndarray | None = None) -> CorrectorSolution:
    """Solve the momentum-shifted corrector equation on a periodic-wrap window.

    ``window`` defaults to one period for periodic media.  ``core`` is the
    central fraction of the window over which the band of ``eps * w`` is
    taken (whole window for periodic media, middle half otherwise).
    """
    eps_ = float(epsilon)
    if eps_ <= 0:
        raise ValueError("epsilon must be positive")
    if window is None:
        if medium.period is None:
            raise ValueError("non-periodic media need an explicit window")
        window = (0.0, medium.period)
    lo, hi = map(float, window)
    length = hi - lo
    if n is None:
        n = max(64, int(math.ceil(length / 0.02)))
    dx = length / n
    if dx > 0.05 + 1e-12:
        raise DomainError(f"corrector grid too coarse: dx={dx:.3g} > 0.05")
    if core is None:
        core = 1.0 if medium.period is not None and abs(length / medium.period - round(length / medium.period)) < 1e-9 \
            else 0.5
    x = lo + dx * np.arange(n)
    a, q, c = medium.coefficients(x)
    p = float(p)
    w = np.zeros(n) if w0 is None else np.asarray(w0, dtype=float).copy()

    def residual(w):
        wp = (np.roll(w, -1) - np.roll(w, 1)) / (2 * dx)
        wpp = (np.roll(w, -1) - 2 * w + np.roll(w, 1)) / dx ** 2
        return a * wpp + a * (wp + p) ** 2 + q * (wp + p) + c - eps_ * w, wp

    F, wp = residual(w)
    norm = float(np.abs(F).max())
    its = 0
    while norm > tol:
        if its >= max_iter:
            raise ConvergenceError(f"corrector Newton stalled at residual {norm:.3g} (eps={eps_:g}, p={p:g})")
        its += 1
        b = 2 * a * (wp + p) + q
        lower = a / dx ** 2 - b / (2 * dx)
        upper = a / dx ** 2 + b / (2 * dx)
        diag = -2 * a / dx ** 2 - eps_
        delta = _backend.cyclic_tridiag_solve(lower, diag, upper, -F)
        step = 1.0
        while True:
            w_try = w + step * delta
            F_try, wp_try = residual(w_try)
            norm_try = float(np.abs(F_try).max())
            if norm_try < norm or step < 1e-6:
                break
            step *= 0.5
        if norm_try >= norm:
            # round-off floor reached; accept if already small
            if norm < 1e3 * tol * max(1.0, float(np.abs(eps_ * w).max())):
                break
            raise ConvergenceError(f"corrector Newton diverged (residual {norm:.3g}, eps={eps_:g}, p={p:g})")
        w, F, wp, norm = w_try, F_try, wp_try, norm_try
    k0 = int(round(n * (1 - core) / 2))
    ew = eps_ * w[k0:n - k0] if k0 > 0 else eps_ * w
    return CorrectorSolution(eps_, p, w, (float(ew.min()), float(ew.max())), norm, (lo, hi), its,
                             medium.medium_id)


def corrector_sequence(medium: Medium, p: float, epsilons: Sequence[float], window=None, n=None, **kw
                       ) -> list[CorrectorSolution]:
    """Correctors for decreasing eps, each Newton warm-started from the previous one."""
    out = []
    w0 = None
    for eps_ in sorted(map(float, epsilons), reverse=True):
        if w0 is not None:
            w0 = w0 * (out[-1].epsilon / eps_)
        sol = approximate_corrector(medium, p, eps_, window, n, w0=w0, **kw)
        out.append(sol)
        w0 = sol.u_samples
    return out


def richardson_lambda(solutions: Sequence[CorrectorSolution], order: int = 1, which: str = "midpoint",
                      monotone_tol: float = 1e-6) -> EigenEstimate:
    """Extrapolate ``eps * w`` band values to eps = 0 by a polynomial fit in eps.

    ``which`` selects the band statistic (midpoint, lower or upper).
    """
    if len(solutions) < 3:
        raise ValueError("need at least three corrector solutions")
    ps = {s.p for s in solutions}
    if len(ps) != 1:
        raise ValueError(f"solutions mix momenta {sorted(ps)}")
    if len({s.medium_id for s in solutions}) != 1 or len({s.window for s in solutions}) != 1:
        raise ValueError("solutions come from different media or windows")
    sols = sorted(solutions, key=lambda s: -s.epsilon)
    eps_ = np.array([s.epsilon for s in sols])
    if np.any(np.diff(eps_) >= 0):
        raise ValueError("epsilons must be distinct")
    pick = {"midpoint": lambda s: s.midpoint, "lower": lambda s: s.lambda_band[0],
            "upper": lambda s: s.lambda_band[1]}[which]
    vals = np.array([pick(s) for s in sols])
    d = np.diff(vals)
    slack = monotone_tol * (1.0 + float(np.abs(vals).max()))
    if np.any(d > slack) and np.any(d < -slack):
        raise ConvergenceError(f"band {which} values are not monotone in eps: {vals}")
    order = min(order, len(sols) - 1)
    coef = np.polyfit(eps_, vals, order)
    value = float(coef[-1])
    return EigenEstimate(value, "corrector", sols[-1].window, sols[-1].band_width, None, sols[0].p,
                         info={"epsilons": eps_.tolist(), "values": vals.tolist(), "order": order,
                               "bands": [s.lambda_band for s in sols]})


# --------------------------------------------------------------------- Riccati / Lyapunov

@dataclass
class RiccatiTrace:
    gamma: float
    r_samples: np.ndarray
    mu: float
    averaging_window: tuple[float, float]
    x: np.ndarray | None = None
    side: str = "right"


_sample_cache: weakref.WeakKeyDictionary = weakref.WeakKeyDictionary()
_lambda_cache: weakref.WeakKeyDictionary = weakref.WeakKeyDictionary()


def _half_samples(medium: Medium, span, h):
    per = _sample_cache.setdefault(medium, {})
    key = (float(span[0]), float(span[1]), float(h))
    hit = per.get(key)
    if hit is None:
        lo, hi = key[:2]
        m = int(round((hi - lo) / h))
        xh = np.linspace(lo, hi, 2 * m + 1)
        hit = (np.ascontiguousarray(medium.a(xh)), np.ascontiguousarray(medium.c(xh)), hi - lo, m)
        if len(per) > 8:
            per.clear()
        per[key] = hit
    return hit


def riccati_mu(medium: Medium, gamma: float, span: tuple[float, float] = (0.0, 2000.0), *, h: float = 0.01,
               burn_in: float = 0.2, side: str = "right", lambda1: float | None = None) -> RiccatiTrace:
    """Decay rate of the positive solution of (a u')' + c u = gamma u.

    ``side="right"`` integrates s = a u'/u leftward from the right end (the
    decaying branch is attracting that way); ``side="left"`` mirrors it for
    decay toward -infinity.  The first ``burn_in`` fraction of the integration
    is discarded and mu = -(mean of u'/u) over the rest (sign flipped on the
    left side).
    """
    if not medium.divergence_form:
        raise DomainError("the Riccati engine needs a divergence-form medium (q = a')")
    gamma = float(gamma)
    if lambda1 is not None and gamma <= lambda1:
        raise DomainError(f"gamma={gamma:.6g} <= Lambda1 estimate {lambda1:.6g}: no decaying solution")
    a_h, c_h, length, m = _half_samples(medium, span, h)
    lo, hi = float(span[0]), float(span[1])
    h_eff = length / m
    direction = -1 if side == "right" else 1
    j = -1 if side == "right" else 0
    s0 = direction * math.sqrt(a_h[j] * max(gamma - c_h[j], 1e-12))
    a_sup, a_inf = float(a_h.max()), float(a_h.min())
    c_inf, c_sup = float(c_h.min()), float(c_h.max())
    bound = 10.0 * (math.sqrt(max(abs(gamma - c_inf), abs(gamma - c_sup)) / a_inf) + 1.0)
    r, bad = _backend.riccati_rk4(a_h, c_h, h_eff, gamma, s0, direction, bound)
    if bad >= 0:
        raise DomainError(f"Riccati blow-up at x={lo + bad * h_eff:.6g} (gamma={gamma:.6g}); "
                          "gamma is below the threshold for a decaying solution")
    x = np.linspace(lo, hi, m + 1)
    keep = int(round(m * (1.0 - burn_in)))
    period = medium.period
    if period is not None and period * 2 < keep * h_eff:
        keep = int(round(math.floor(keep * h_eff / period) * period / h_eff))
    if side == "right":
        seg, xs = r[:keep + 1], x[:keep + 1]
        sign = -1.0
    else:
        seg, xs = r[m - keep:], x[m - keep:]
        sign = 1.0
    # trapezoid mean over the retained span
    mean = float((seg[1:] + seg[:-1]).sum() * 0.5 / keep)
    return RiccatiTrace(gamma, r, sign * mean, (float(xs[0]), float(xs[-1])), x, side)


def lambda1_estimate(medium: Medium, span: tuple[float, float] = (0.0, 2000.0), dx: float = 0.05) -> float:
    """Dirichlet principal eigenvalue of the operator on ``span`` (cached per medium)."""
    per = _lambda_cache.setdefault(medium, {})
    key = (float(span[0]), float(span[1]), float(dx))
    if key not in per:
        n = max(16, int(round((span[1] - span[0]) / dx)) - 1)
        per[key] = dirichlet_principal_eigenvalue(medium, span, n, tol=1e-11, max_iter=2000).value
    return per[key]


def _mu_or_zero(medium, gamma, span, h, side):
    try:
        return riccati_mu(medium, gamma, span, h=h, side=side).mu
    except DomainError:
        return 0.0


def plateau_edge(medium: Medium, span=(0.0, 2000.0), *, h: float = 0.01, side: str = "right",
                 lambda1: float | None = None, deltas=(4e-3, 1e-3, 2.5e-4)) -> float:
    """Estimate rho = lim mu(gamma) as gamma decreases to the Lambda1 estimate.

    mu is sampled at Lambda1 + delta and fitted as rho + beta sqrt(delta); a
    blow-up just above Lambda1 (the finite-span estimate undershoots) counts
    as mu = 0.
    """
    lam = lambda1_estimate(medium, span) if lambda1 is None else lambda1
    d = np.asarray(deltas, dtype=float)
    mus = np.array([_mu_or_zero(medium, lam + di, span, h, side) for di in d])
    A = np.column_stack([np.ones_like(d), np.sqrt(d)])
    rho = float(np.linalg.lstsq(A, mus, rcond=None)[0][0])
    return max(rho, 0.0)


PLATEAU_THRESHOLD = 1e-3


def lyapunov_inverse_k(medium: Medium, p: float, span: tuple[float, float] = (0.0, 2000.0), *,
                       h: float = 0.01, side: str = "right", xtol: float = 1e-12) -> EigenEstimate:
    """k(p): the gamma at which the Lyapunov exponent mu(gamma) equals p.

    For p at or below the plateau edge rho the Lambda1 estimate is returned and
    ``info["plateau"]`` is set.
    """
    p = float(p)
    if p <= 0:
        raise ValueError("p must be positive")
    lam = lambda1_estimate(medium, span)
    rho = plateau_edge(medium, span, h=h, side=side, lambda1=lam)
    info = {"lambda1": lam, "rho": rho, "plateau": False, "side": side, "span": tuple(span)}
    if rho > PLATEAU_THRESHOLD and p <= rho:
        info["plateau"] = True
        return EigenEstimate(lam, "riccati", tuple(span), 0.0, None, -p if side == "right" else p, info=info)

    def g(gamma):
        return _mu_or_zero(medium, gamma, span, h, side) - p

    lo = lam + 1e-12 * max(1.0, abs(lam))
    x = np.linspace(span[0], span[1], 20_001)
    a, q, c = medium.coefficients(x)
    hi = float(np.max(a * p * p + np.abs(q) * p + c)) + 1.0
    for _ in range(60):
        if g(hi) > 0:
            break
        hi = lam + 2.0 * (hi - lam)
    else:
        raise BracketError(f"no upper bracket for mu(gamma) = {p:g}")
    if g(lo) > 0:
        # mu already exceeds p at the threshold: plateau regime below the detection level
        info["plateau"] = True
        return EigenEstimate(lam, "riccati", tuple(span), 0.0, None, -p if side == "right" else p, info=info)
    gamma, res = brentq(g, lo, hi, xtol=xtol, rtol=4 * EPS, full_output=True)
    info["function_calls"] = res.function_calls
    return EigenEstimate(float(gamma), "riccati", tuple(span), abs(g(gamma)), None,
                         -p if side == "right" else p, res.iterations, info)


# --------------------------------------------------------------------- windows

@dataclass
class WindowDiagnostics:
    R: list[float]
    lower_raw: list[float]
    upper_raw: list[float]
    lower: list[float]
    upper: list[float]
    engine: str
    window_width: float
    extra: list[dict] = field(default_factory=list)


ENGINE_TOL = {"const_testfn": 1e-12, "dirichlet_window": 1e-8, "corrector": 1e-3, "periodic": 1e-8}


def window_H(medium: Medium, p: float, R_sequence: Sequence[float], engine: str = "const_testfn",
             window_width: float = 1000.0, *, epsilons=(0.2, 0.1, 0.05), n_per_unit: int = 50,
             richardson_order: int = 2, samples: int = 20_001) -> tuple[float, float, WindowDiagnostics]:
    """Windowed estimates of H_under(p), H_over(p) on (R, R + window_width).

    The generalized eigenvalues on (R, inf) are inf/sup-type over every
    window inside it, so the lower (upper) value at R is the minimum
    (maximum) of the raw window values over the tail of the R-sequence.
    """
    R_seq = [float(r) for r in R_sequence]
    if any(b <= a for a, b in zip(R_seq, R_seq[1:])):
        raise ValueError("R_sequence must be increasing")
    lows, ups, extra = [], [], []
    op = assemble_Lp(medium, p)
    for R in R_seq:
        win = (R, R + window_width)
        if engine == "const_testfn":
            lo, up = const_testfn_bounds(op, win, samples=samples)
            lows.append(lo.value)
            ups.append(up.value)
        elif engine == "dirichlet_window":
            n = int(window_width * n_per_unit)
            est = dirichlet_principal_eigenvalue(medium, win, n, p=p)
            lows.append(est.value)
            ups.append(est.value)
            extra.append({"residual": est.residual})
        elif engine == "corrector":
            sols = corrector_sequence(medium, p, epsilons, win, int(window_width * n_per_unit))
            # band edges need not move monotonically in eps; only the midpoint is checked
            lo = richardson_lambda(sols, order=richardson_order, which="lower", monotone_tol=math.inf)
            up = richardson_lambda(sols, order=richardson_order, which="upper", monotone_tol=math.inf)
            mid = richardson_lambda(sols, order=richardson_order)
            lows.append(min(lo.value, up.value))
            ups.append(max(lo.value, up.value))
            extra.append({"midpoint": mid.value, "band": sols[-1].lambda_band})
        else:
            raise ValueError(f"engine {engine!r} has no windowed form")
    lower = [min(lows[i:]) for i in range(len(lows))]
    upper = [max(ups[i:]) for i in range(len(ups))]
    tol = 10 * ENGINE_TOL.get(engine, 1e-8)
    for i in range(len(lower) - 1):
        if lower[i + 1] < lower[i] - tol or upper[i + 1] > upper[i] + tol:
            raise ConvergenceError("window estimates violate the monotone trend in R")
    diag = WindowDiagnostics(R_seq, lows, ups, lower, upper, engine, float(window_width), extra)
    return lower[-1], upper[-1], diag
