# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled kernels: tridiagonal solves, the IMEX time loop and Riccati RK4.

Every function here has a drop-in twin in :mod:`kppspeed._fallback`; the two
are checked against each other in ``tests/test_backends.py``.

Tridiagonal convention used throughout: three arrays of length ``n``;
``lower[i]`` multiplies ``x[i-1]``, ``upper[i]`` multiplies ``x[i+1]``.
``lower[0]`` and ``upper[n-1]`` are ignored by the plain solver and are the
wrap-around couplings in the cyclic solver.
"""

import numpy as np

from libc.math cimport fabs


cdef void _thomas(const double[::1] lower, const double[::1] diag,
                  const double[::1] upper, const double[::1] rhs,
                  double[::1] cp, double[::1] out) noexcept nogil:
    cdef Py_ssize_t n = diag.shape[0]
    cdef Py_ssize_t i
    cdef double m
    m = diag[0]
    cp[0] = upper[0] / m
    out[0] = rhs[0] / m
    for i in range(1, n):
        m = diag[i] - lower[i] * cp[i - 1]
        if i < n - 1:
            cp[i] = upper[i] / m
        out[i] = (rhs[i] - lower[i] * out[i - 1]) / m
    for i in range(n - 2, -1, -1):
        out[i] -= cp[i] * out[i + 1]


def tridiag_solve(const double[::1] lower, const double[::1] diag,
                  const double[::1] upper, const double[::1] rhs):
    """Solve a tridiagonal system by the Thomas algorithm (no pivoting)."""
    cdef Py_ssize_t n = diag.shape[0]
    out = np.empty(n)
    cp = np.empty(n)
    cdef double[::1] o = out
    cdef double[::1] c = cp
    with nogil:
        _thomas(lower, diag, upper, rhs, c, o)
    return out


def cyclic_tridiag_solve(const double[::1] lower, const double[::1] diag,
                         const double[::1] upper, const double[::1] rhs):
    """Solve a periodic tridiagonal system by Sherman-Morrison on Thomas."""
    cdef Py_ssize_t n = diag.shape[0]
    cdef Py_ssize_t i
    cdef double alpha = upper[n - 1]   # row n-1 -> column 0
    cdef double beta = lower[0]        # row 0 -> column n-1
    cdef double gamma = -diag[0]
    cdef double fact
    bb_arr = np.array(diag, dtype=np.float64)
    u_arr = np.zeros(n)
    x_arr = np.empty(n)
    z_arr = np.empty(n)
    cp_arr = np.empty(n)
    cdef double[::1] bb = bb_arr
    cdef double[::1] u = u_arr
    cdef double[::1] x = x_arr
    cdef double[::1] z = z_arr
    cdef double[::1] cp = cp_arr
    with nogil:
        bb[0] = diag[0] - gamma
        bb[n - 1] = diag[n - 1] - alpha * beta / gamma
        _thomas(lower, bb, upper, rhs, cp, x)
        u[0] = gamma
        u[n - 1] = alpha
        _thomas(lower, bb, upper, u, cp, z)
        fact = (x[0] + beta * x[n - 1] / gamma) / (1.0 + z[0] + beta * z[n - 1] / gamma)
        for i in range(n):
            x[i] -= fact * z[i]
    return x_arr


cdef inline double _ghost(double edge, double threshold) noexcept nogil:
    return 1.0 if edge >= threshold else 0.0


def imex_run(double[::1] u, const double[::1] react_coef,
             const double[::1] lower, const double[::1] diag,
             const double[::1] upper, double theta, double dt,
             Py_ssize_t nsteps, double ghost_threshold,
             double clip_tol, double fail_tol):
    """Advance ``u`` in place by ``nsteps`` theta-IMEX steps with logistic reaction.

    ``lower/diag/upper`` hold the spatial operator A (diffusion + upwind
    drift) on the nodes; the ghost value beyond each edge is 1 when the edge
    node is at least ``ghost_threshold`` and 0 otherwise.  The reaction is
    ``react_coef * u * (1 - u)``, treated explicitly.

    Returns ``(steps_done, worst_overshoot)``; ``steps_done < nsteps`` means
    an overshoot beyond ``fail_tol`` stopped the loop.
    """
    cdef Py_ssize_t n = u.shape[0]
    cdef Py_ssize_t i, k
    cdef double im = theta * dt
    cdef double gl, gr, v, m, over, worst = 0.0
    cdef Py_ssize_t done = nsteps
    rhs_arr = np.empty(n)
    cp_arr = np.empty(n)
    den_arr = np.empty(n)
    cdef double[::1] rhs = rhs_arr
    cdef double[::1] cp = cp_arr
    cdef double[::1] den = den_arr
    with nogil:
        # factor (I - im*A) once; it does not change between steps
        m = 1.0 - im * diag[0]
        den[0] = m
        cp[0] = (-im * upper[0]) / m
        for i in range(1, n):
            m = (1.0 - im * diag[i]) - (-im * lower[i]) * cp[i - 1]
            den[i] = m
            if i < n - 1:
                cp[i] = (-im * upper[i]) / m
        for k in range(nsteps):
            gl = _ghost(u[0], ghost_threshold)
            gr = _ghost(u[n - 1], ghost_threshold)
            # increment form: (I - im*A) du = dt*(f(u) + A u), so steady states give du = 0 exactly
            for i in range(n):
                v = lower[i] * (u[i - 1] if i > 0 else gl) + upper[i] * (u[i + 1] if i < n - 1 else gr)
                v += diag[i] * u[i]
                rhs[i] = dt * (react_coef[i] * u[i] * (1.0 - u[i]) + v)
            rhs[0] = rhs[0] / den[0]
            for i in range(1, n):
                rhs[i] = (rhs[i] + im * lower[i] * rhs[i - 1]) / den[i]
            for i in range(n - 2, -1, -1):
                rhs[i] -= cp[i] * rhs[i + 1]
            for i in range(n):
                u[i] += rhs[i]
            for i in range(n):
                v = u[i]
                if v < 0.0:
                    over = -v
                elif v > 1.0:
                    over = v - 1.0
                else:
                    continue
                if over > worst:
                    worst = over
                if over <= clip_tol:
                    u[i] = 0.0 if v < 0.0 else 1.0
            if worst > fail_tol:
                done = k + 1
                break
    return done, worst


def riccati_rk4(const double[::1] a_half, const double[::1] c_half,
                double h, double gamma, double s_start, int direction,
                double bound):
    """RK4 for s' = gamma - c - s**2 / a, with s = a u'/u.

    ``a_half`` and ``c_half`` are sampled at spacing ``h/2`` (length 2m+1 for
    m steps).  ``direction=-1`` starts at the right end and integrates
    leftward.  Returns ``(r, bad)`` where ``r = s/a`` on the m+1 integer
    nodes in left-to-right order and ``bad`` is the node index where
    ``|r|`` first exceeded ``bound`` (-1 if never).
    """
    cdef Py_ssize_t nh = a_half.shape[0]
    cdef Py_ssize_t m = (nh - 1) // 2
    cdef Py_ssize_t k, j0, j1, j2
    cdef double s = s_start, k1, k2, k3, k4, hs, r
    r_arr = np.empty(m + 1)
    cdef double[::1] rr = r_arr
    cdef Py_ssize_t bad = -1
    hs = h * direction
    with nogil:
        j0 = 2 * m if direction < 0 else 0
        rr[j0 // 2] = s / a_half[j0]
        for k in range(m):
            if direction < 0:
                j0 = 2 * (m - k)
                j1 = j0 - 1
                j2 = j0 - 2
            else:
                j0 = 2 * k
                j1 = j0 + 1
                j2 = j0 + 2
            k1 = gamma - c_half[j0] - s * s / a_half[j0]
            k2 = gamma - c_half[j1] - (s + 0.5 * hs * k1) * (s + 0.5 * hs * k1) / a_half[j1]
            k3 = gamma - c_half[j1] - (s + 0.5 * hs * k2) * (s + 0.5 * hs * k2) / a_half[j1]
            k4 = gamma - c_half[j2] - (s + hs * k3) * (s + hs * k3) / a_half[j2]
            s = s + hs * (k1 + 2.0 * k2 + 2.0 * k3 + k4) / 6.0
            r = s / a_half[j2]
            rr[j2 // 2] = r
            if not (fabs(r) <= bound):
                bad = j2 // 2
                break
    return r_arr, bad
