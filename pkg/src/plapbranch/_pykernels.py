"""Pure-numpy fallback for the flux kernels.

Same call signatures as the compiled ``_ckernels`` module. All arrays are
float64; ``sh`` holds the half-node metric factors r^{N-1} (ones on an
interval), one per cell.
"""
import numpy as np
from scipy.linalg import solve_banded


def flux_divergence(u, p, sh, h):
    """Return A(u)_i = -(sh F)_{i+1/2} + (sh F)_{i-1/2}, with F = |Du|^{p-2} Du."""
    du = np.diff(u) / h
    ad = np.abs(du)
    # flat edges carry zero flux (0^(p-2) is infinite for p < 2)
    flux = sh * np.where(ad > 0, ad, 1.0) ** (p - 2.0) * du
    out = np.zeros_like(u)
    out[:-1] -= flux
    out[1:] += flux
    return out


def flux_jacobian(u, p, sh, h):
    """Tridiagonal derivative of ``flux_divergence``.

    Returns ``(lower, diag, upper)``; lower[i] couples row i+1 to column i.
    The edge factor uses (p-1)(|Du|^2 + eps^2)^{(p-2)/2} with
    eps = 1e-10 (max|Du| + |Du|), floored at 1e-150 so that eps^2 does not
    underflow; a field without any gradient uses max|Du| = 1 instead.
    """
    du = np.diff(u) / h
    ad = np.abs(du)
    gmax = np.max(ad)
    eps = np.maximum(1e-10 * ((gmax if gmax > 0 else 1.0) + ad), 1e-150)
    k = sh * (p - 1.0) * (du * du + eps * eps) ** ((p - 2.0) / 2.0) / h
    diag = np.zeros_like(u)
    diag[:-1] += k
    diag[1:] += k
    return -k, diag, -k.copy()


def solve_tridiagonal(lower, diag, upper, rhs):
    ab = np.zeros((3, diag.size))
    ab[0, 1:] = upper
    ab[1] = diag
    ab[2, :-1] = lower
    return solve_banded((1, 1), ab, rhs, check_finite=False)
