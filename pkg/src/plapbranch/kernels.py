"""Backend selection for the hot flux kernels.

The compiled extension is used when it was built; otherwise the numpy
fallback. Set ``PLAPBRANCH_PURE=1`` to force the fallback, or call
``set_backend`` at runtime (callers look the kernels up through this
module, so the switch takes effect immediately).
"""
import os

import numpy as np

from . import _pykernels

try:
    from . import _ckernels
except ImportError:
    _ckernels = None

BACKENDS = {"python": _pykernels}
if _ckernels is not None:
    BACKENDS["cython"] = _ckernels

BACKEND = None
flux_divergence = flux_jacobian = _solve_tridiagonal = None


def set_backend(name):
    """Switch to ``"cython"`` or ``"python"``; returns the previous backend name."""
    global BACKEND, flux_divergence, flux_jacobian, _solve_tridiagonal
    if name not in BACKENDS:
        raise ValueError(f"backend {name!r} is not available (have {sorted(BACKENDS)})")
    prev, impl = BACKEND, BACKENDS[name]
    BACKEND = name
    flux_divergence = impl.flux_divergence
    flux_jacobian = impl.flux_jacobian
    _solve_tridiagonal = impl.solve_tridiagonal
    return prev


def solve_tridiagonal(lower, diag, upper, rhs):
    x = _solve_tridiagonal(lower, diag, upper, rhs)
    if BACKEND == "cython" and not np.all(np.isfinite(x)):
        # the compiled Thomas solver does not pivot
        x = _pykernels.solve_tridiagonal(lower, diag, upper, rhs)
    return x


if os.environ.get("PLAPBRANCH_PURE", "") not in ("", "0") or _ckernels is None:
    set_backend("python")
else:
    set_backend("cython")
