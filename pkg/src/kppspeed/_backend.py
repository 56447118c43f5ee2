"""Kernel backend selection.

The compiled extension is preferred; ``KPPSPEED_BACKEND=python`` forces the
fallback (useful for benchmarks and for checking the two agree).
"""

import os

from kppspeed import _fallback

_requested = os.environ.get("KPPSPEED_BACKEND", "auto").lower()

if _requested == "python":
    kernels = _fallback
    BACKEND = "python"
else:
    try:
        from kppspeed import _core as kernels
        BACKEND = "compiled"
    except ImportError:
        if _requested == "compiled":
            raise
        kernels = _fallback
        BACKEND = "python"

tridiag_solve = kernels.tridiag_solve
cyclic_tridiag_solve = kernels.cyclic_tridiag_solve
imex_run = kernels.imex_run
riccati_rk4 = kernels.riccati_rk4

__all__ = ["BACKEND", "kernels", "tridiag_solve", "cyclic_tridiag_solve", "imex_run", "riccati_rk4"]
