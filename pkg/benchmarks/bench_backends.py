"""Time the compiled kernels against the pure-Python fallback.

    python benchmarks/bench_backends.py [--repeat 3]

Prints one line per kernel with both timings, the speedup and the max
abs difference between the two outputs.
"""

import argparse
import time

import numpy as np

from kppspeed import _fallback

try:
    from kppspeed import _core
except ImportError:
    _core = None


def _best(fn, repeat):
    out, best = None, float("inf")
    for _ in range(repeat):
        t0 = time.perf_counter()
        out = fn()
        best = min(best, time.perf_counter() - t0)
    return out, best


def _imex_case(n=4000, steps=500):
    x = -50 + 0.1 * np.arange(n)
    u0 = (np.abs(x) <= 1).astype(float)
    dx2 = 0.01
    lower = np.full(n, 1 / dx2)
    upper = np.full(n, 1 / dx2)
    diag = np.full(n, -2 / dx2)

    def run(mod):
        u = u0.copy()
        mod.imex_run(u, np.ones(n), lower, diag, upper, 1.0, 0.02, steps, 0.999, 1e-12, 1e-9)
        return u
    return run


def _riccati_case(m=200_000):
    xs = 0.005 * np.arange(2 * m + 1)
    a = 1 + 0.3 * np.cos(np.pi * xs)
    c = 1 + 0.4 * np.cos(2 * np.pi * xs + 0.5)

    def run(mod):
        r, _ = mod.riccati_rk4(a, c, 0.01, 3.0, -np.sqrt(a[-1] * (3.0 - c[-1])), -1, 100.0)
        return r
    return run


def _tridiag_case(n=200_000, cyclic=False):
    rng = np.random.default_rng(0)
    lower, upper = rng.uniform(0.1, 1, n), rng.uniform(0.1, 1, n)
    diag = lower + upper + 1.0
    rhs = rng.normal(size=n)

    def run(mod):
        fn = mod.cyclic_tridiag_solve if cyclic else mod.tridiag_solve
        return fn(lower, diag, upper, rhs)
    return run


CASES = {
    "imex_run (n=4000, 500 steps)": _imex_case,
    "riccati_rk4 (2e5 steps)": _riccati_case,
    "tridiag_solve (n=2e5)": _tridiag_case,
    "cyclic_tridiag_solve (n=2e5)": lambda: _tridiag_case(cyclic=True),
}


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=3)
    args = ap.parse_args(argv)
    if _core is None:
        print("compiled extension not built; only the fallback is available")
    for name, make in CASES.items():
        run = make()
        ref, t_py = _best(lambda: run(_fallback), args.repeat)
        if _core is None:
            print(f"{name:32s} python {t_py * 1e3:9.2f} ms")
            continue
        out, t_c = _best(lambda: run(_core), args.repeat)
        diff = float(np.max(np.abs(np.asarray(out) - np.asarray(ref))))
        print(f"{name:32s} python {t_py * 1e3:9.2f} ms  compiled {t_c * 1e3:9.2f} ms  "
              f"x{t_py / t_c:6.1f}  maxdiff {diff:.1e}")


if __name__ == "__main__":
    main()
