"""Independent references built straight from numpy/scipy."""

import numpy as np


def dense_periodic_matrix(medium, p, n):
    """Central-difference matrix of L_p on one period with wrap-around."""
    L = medium.period
    dx = L / n
    x = dx * np.arange(n)
    a, q, c = medium.coefficients(x)
    b = 2 * p * a + q
    z = a * p * p + q * p + c
    A = np.zeros((n, n))
    for i in range(n):
        A[i, i] = -2 * a[i] / dx**2 + z[i]
        A[i, (i + 1) % n] += a[i] / dx**2 + b[i] / (2 * dx)
        A[i, (i - 1) % n] += a[i] / dx**2 - b[i] / (2 * dx)
    return A


def perron_value(A):
    """Eigenvalue of largest real part; for these matrices it is real and simple."""
    ev = np.linalg.eigvals(A)
    return float(ev[np.argmax(ev.real)].real)
