"""Pure-Python/scipy twins of the kernels in ``_core.pyx``.

Same signatures and conventions; used when the extension is not built or
when ``KPPSPEED_BACKEND=python`` is set.
"""

import math

import numpy as np
from scipy.linalg import lapack, solve_banded


def _banded(lower, diag, upper):
    n = diag.shape[0]
    ab = np.zeros((3, n))
    ab[0, 1:] = upper[:-1]
    ab[1] = diag
    ab[2, :-1] = lower[1:]
    return ab


def tridiag_solve(lower, diag, upper, rhs):
    lower, diag, upper = (np.asarray(v, dtype=float) for v in (lower, diag, upper))
    return solve_banded((1, 1), _banded(lower, diag, upper), np.asarray(rhs, dtype=float))


def cyclic_tridiag_solve(lower, diag, upper, rhs):
    lower, diag, upper = (np.asarray(v, dtype=float) for v in (lower, diag, upper))
    rhs = np.asarray(rhs, dtype=float)
    n = diag.shape[0]
    alpha = upper[n - 1]
    beta = lower[0]
    gamma = -diag[0]
    bb = diag.copy()
    bb[0] = diag[0] - gamma
    bb[n - 1] = diag[n - 1] - alpha * beta / gamma
    ab = _banded(lower, bb, upper)
    u = np.zeros(n)
    u[0] = gamma
    u[n - 1] = alpha
    sol = solve_banded((1, 1), ab, np.column_stack([rhs, u]))
    x, z = sol[:, 0], sol[:, 1]
    fact = (x[0] + beta * x[n - 1] / gamma) / (1.0 + z[0] + beta * z[n - 1] / gamma)
    return x - fact * z


def imex_run(u, react_coef, lower, diag, upper, theta, dt, nsteps,
             ghost_threshold, clip_tol, fail_tol):
    n = u.shape[0]
    im = theta * dt
    dl, d, du, du2, ipiv, info = lapack.dgttrf(-im * lower[1:], 1.0 - im * diag, -im * upper[:-1])
    if info != 0:
        raise np.linalg.LinAlgError(f"dgttrf failed with info={info}")
    worst = 0.0
    for k in range(nsteps):
        gl = 1.0 if u[0] >= ghost_threshold else 0.0
        gr = 1.0 if u[n - 1] >= ghost_threshold else 0.0
        # increment form: (I - im*A) du = dt*(f(u) + A u), so steady states give du = 0 exactly
        left = np.empty(n)
        left[0] = gl
        left[1:] = u[:-1]
        right = np.empty(n)
        right[-1] = gr
        right[:-1] = u[1:]
        rhs = dt * (react_coef * u * (1.0 - u) + ((lower * left + upper * right) + diag * u))
        x, info = lapack.dgttrs(dl, d, du, du2, ipiv, rhs)
        u += x
        low = u < 0.0
        high = u > 1.0
        if low.any() or high.any():
            over = max(float(-u[low].min()) if low.any() else 0.0,
                       float(u[high].max() - 1.0) if high.any() else 0.0)
            worst = max(worst, over)
            u[low & (u >= -clip_tol)] = 0.0
            u[high & (u <= 1.0 + clip_tol)] = 1.0
            if worst > fail_tol:
                return k + 1, worst
    return nsteps, worst


def riccati_rk4(a_half, c_half, h, gamma, s_start, direction, bound):
    a_half = np.asarray(a_half, dtype=float).tolist()
    c_half = np.asarray(c_half, dtype=float).tolist()
    m = (len(a_half) - 1) // 2
    r = np.empty(m + 1)
    hs = h * direction
    s = s_start
    j0 = 2 * m if direction < 0 else 0
    r[j0 // 2] = s / a_half[j0]
    for k in range(m):
        if direction < 0:
            j0 = 2 * (m - k)
            j1, j2 = j0 - 1, j0 - 2
        else:
            j0 = 2 * k
            j1, j2 = j0 + 1, j0 + 2
        a0, a1, a2 = a_half[j0], a_half[j1], a_half[j2]
        g0 = gamma - c_half[j0]
        g1 = gamma - c_half[j1]
        k1 = g0 - s * s / a0
        t = s + 0.5 * hs * k1
        k2 = g1 - t * t / a1
        t = s + 0.5 * hs * k2
        k3 = g1 - t * t / a1
        t = s + hs * k3
        k4 = gamma - c_half[j2] - t * t / a2
        s = s + hs * (k1 + 2.0 * k2 + 2.0 * k3 + k4) / 6.0
        val = s / a2
        r[j2 // 2] = val
        if not abs(val) <= bound or math.isnan(val):
            return r, j2 // 2
    return r, -1
