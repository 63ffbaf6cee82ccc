"""Residual-sign classification of fields and the ordering check between them."""
from dataclasses import dataclass

import numpy as np

from .plap import plap_apply


class ComparisonPreconditionError(ValueError):
    pass


@dataclass(frozen=True)
class SubSuperVerdict:
    is_sub: bool
    is_super: bool
    worst_violation: float
    violation_node: int
    worst_super_violation: float
    super_violation_node: int
    residual_sup: float
    sign_tol: float


def local_residual(u, spec, mesh, alpha, with_scale=False):
    """(-Delta_p u) - alpha (a u^-delta + b u^beta) at the free nodes."""
    if u.mesh is not mesh:
        raise ValueError("field lives on a different mesh")
    v = u.values[mesh.interior]
    if np.any(v <= 0):
        raise ComparisonPreconditionError(
            "field must be positive at interior nodes (singular term undefined)")
    a, b = spec.potentials(mesh)
    a, b = a[mesh.interior], b[mesh.interior]
    rhs = alpha * (np.where(a > 0, a * v ** (-spec.delta), 0.0) + b * v**spec.beta)
    R = plap_apply(u, spec.p).values[mesh.interior] - rhs
    if with_scale:
        return R, float(np.max(np.abs(rhs)))
    return R


def classify_subsolution(u, spec, mesh, alpha):
    """Classify ``u`` as discrete sub- and/or supersolution of the local problem.

    is_sub iff max R <= tol and is_super iff min R >= -tol, with
    tol = 1e-8 (1 + alpha) + 1e-10 sup|rhs|; the second term is the solver's
    relative tolerance and only matters for large fields.
    ``worst_violation`` is max R - tol (<= 0 exactly when is_sub).
    """
    R, rhs_sup = local_residual(u, spec, mesh, alpha, with_scale=True)
    tol = 1e-8 * (1.0 + alpha) + 1e-10 * rhs_sup
    idx = np.flatnonzero(mesh.interior)
    i_max, i_min = int(np.argmax(R)), int(np.argmin(R))
    return SubSuperVerdict(
        is_sub=bool(R[i_max] <= tol),
        is_super=bool(R[i_min] >= -tol),
        worst_violation=float(R[i_max] - tol),
        violation_node=int(idx[i_max]),
        worst_super_violation=float(-R[i_min] - tol),
        super_violation_node=int(idx[i_min]),
        residual_sup=float(np.max(np.abs(R))),
        sign_tol=tol,
    )


@dataclass(frozen=True)
class Ordering:
    holds: bool
    node: int
    excess: float

    def __bool__(self):
        return self.holds


def ordering_slack(u):
    return 1e-8 + 1e-4 * float(np.max(np.abs(u)))


def assert_comparison(sub, sup, spec, mesh, alpha):
    """Check the conclusion sub <= sup of the comparison principle.

    Raises ComparisonPreconditionError if the inputs are not a classified
    sub/supersolution pair; returns a falsy Ordering, with the offending
    node, when they are but the ordering fails.
    """
    a, b = spec.potentials(mesh)
    if not np.all((a + b)[mesh.interior] > 0):
        raise ComparisonPreconditionError("a + b > 0 must hold at interior nodes")
    if np.any(sub.values[mesh.dirichlet] != 0):
        raise ComparisonPreconditionError("subsolution must vanish on boundary nodes")
    vs = classify_subsolution(sub, spec, mesh, alpha)
    if not vs.is_sub:
        raise ComparisonPreconditionError(
            f"first field is not a subsolution (violation {vs.worst_violation:.3g} "
            f"at node {vs.violation_node})")
    vp = classify_subsolution(sup, spec, mesh, alpha)
    if not vp.is_super:
        raise ComparisonPreconditionError(
            f"second field is not a supersolution (violation {vp.worst_super_violation:.3g} "
            f"at node {vp.super_violation_node})")
    diff = sub.values - sup.values - ordering_slack(sup.values)
    i = int(np.argmax(diff))
    return Ordering(bool(diff[i] <= 0), i, float(diff[i] + ordering_slack(sup.values)))
