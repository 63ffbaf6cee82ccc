"""First eigenpair of the H1-weighted p-Laplacian and the H2 torsion function."""
from dataclasses import dataclass
import warnings

import numpy as np

from .plap import Field, SolverError, newton, plap_apply


class InstructingCallerToUseTorsionOnly(ValueError):
    """H1 = min(a, b) vanishes on the mesh, so there is no weighted eigenpair."""


@dataclass(frozen=True, eq=False)
class EigenPair:
    lambda1: float
    phi1: Field
    weight_H1: Field
    iterations: int = 0

    def rayleigh_residual(self, p):
        """sup |(-Delta_p phi) - lambda1 H1 phi^{p-1}| over free nodes."""
        m = self.phi1.mesh
        lhs = plap_apply(self.phi1, p).values
        rhs = self.lambda1 * self.weight_H1.values * np.abs(self.phi1.values) ** (p - 1)
        return float(np.max(np.abs(lhs - rhs)[m.interior]))

    def distance_ratio(self):
        """min of phi1 / d over interior nodes (the constant C in phi1 >= C d)."""
        m = self.phi1.mesh
        d = m.boundary_distance[m.interior]
        return float(np.min(self.phi1.values[m.interior] / d))


@dataclass(frozen=True, eq=False)
class TorsionField:
    e_field: Field
    weight_H2: Field


def _fixed_source(f):
    zero = np.zeros_like(f)
    return lambda u: (f, zero)


def rayleigh_quotient(u, p, weight):
    """Discrete sum sh h |Du|^p / sum V w |u|^p."""
    m = u.mesh
    du = np.diff(u.values) / m.h
    num = np.sum(m.half_metric * m.h * np.abs(du) ** p)
    den = np.sum(m.cell_measure * weight * np.abs(u.values) ** p)
    return num / den


def first_eigenpair(spec, mesh, tol=1e-8, max_iters=1000, newton_tol=1e-10):
    """Normalized inverse iteration for -Delta_p u = lambda H1 |u|^{p-2} u.

    Each sweep solves -Delta_p w = lam H1 u^{p-1}, then sets
    lam <- lam (sup w)^{-(p-1)} and u <- w / sup w. Stops when lam moves
    by less than ``tol`` relative and u by at most 100 tol in sup norm (the
    eigenvalue alone can stall by accident on the first sweep).
    """
    p = spec.p
    H1 = np.where(mesh.dirichlet, 0.0, spec.h1(mesh))
    if not np.any(H1[mesh.interior] > 0):
        raise InstructingCallerToUseTorsionOnly(
            "H1 = min(a, b) vanishes identically; the lower barrier needs a and b "
            "positive on a common set, use the torsion function only")
    u = mesh.boundary_distance / np.max(mesh.boundary_distance)
    lam = rayleigh_quotient(Field(mesh, u), p, H1)
    for it in range(1, max_iters + 1):
        f = lam * H1 * u ** (p - 1)
        w, rep = newton(mesh, p, _fixed_source(f), u, tol=newton_tol)
        if not rep.converged:
            raise SolverError("inner solve of the inverse iteration failed", rep)
        s = np.max(w.values)
        new = lam * s ** (-(p - 1))
        du = float(np.max(np.abs(w.values / s - u)))
        u = w.values / s
        done = abs(new - lam) < tol * abs(new) and du <= 100 * tol
        lam = new
        if done:
            break
    else:
        raise SolverError(f"inverse iteration did not settle in {max_iters} sweeps")
    return EigenPair(float(lam), Field(mesh, u), Field(mesh, H1), it)


def torsion(spec, mesh, tol=1e-10):
    """Solve -Delta_p e = H2 = max(a, b) with zero boundary values."""
    H2 = np.where(mesh.dirichlet, 0.0, spec.h2(mesh))
    if not np.any(H2[mesh.interior] > 0):
        warnings.warn("H2 = max(a, b) vanishes identically; torsion function is zero")
        return TorsionField(Field(mesh, np.zeros(mesh.size)), Field(mesh, H2))
    init = mesh.boundary_distance * (np.max(mesh.boundary_distance) + 1e-3)
    e, rep = newton(mesh, spec.p, _fixed_source(H2), init, tol=tol)
    if not rep.converged:
        raise SolverError("torsion solve did not converge", rep)
    return TorsionField(e, Field(mesh, H2))
