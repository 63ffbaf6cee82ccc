"""Discrete p-Laplacian in flux form and the damped Newton solver.

The operator is the finite-volume divergence
    (-Delta_p u)_i = -[(r^{N-1} F)_{i+1/2} - (r^{N-1} F)_{i-1/2}] / V_i,
    F = |Du|^{p-2} Du,  Du = (u_{i+1} - u_i)/h,
with V_i the dual-cell measure (h on an interval, ~ h r_i^{N-1} on a ball)
and zero flux through r = 0.
"""
from dataclasses import dataclass, field
import math

import numpy as np

from . import kernels


@dataclass(frozen=True, eq=False)
class Field:
    mesh: object
    values: np.ndarray

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float)
        if v.shape != (self.mesh.size,):
            raise ValueError(f"field has {v.size} values for a mesh of {self.mesh.size} nodes")
        object.__setattr__(self, "values", v)

    @property
    def sup(self):
        return float(np.max(np.abs(self.values)))

    def scaled(self, c):
        return Field(self.mesh, c * self.values)


@dataclass
class SolveReport:
    iterations: int = 0
    final_residual: float = math.inf
    converged: bool = False
    damping_events: int = 0
    floor_activations: int = 0
    tolerance: float = 0.0
    level: float = 0.0
    ladder_gaps: tuple = field(default_factory=tuple)

    def summary(self):
        return {
            "iterations": self.iterations,
            "final_residual": self.final_residual,
            "converged": self.converged,
            "damping_events": self.damping_events,
            "floor_activations": self.floor_activations,
            "tolerance": self.tolerance,
            "level": self.level if math.isfinite(self.level) else "inf",
            "ladder_gaps": list(self.ladder_gaps),
        }


class SolverError(RuntimeError):
    def __init__(self, msg, report=None, iterates=()):
        super().__init__(msg)
        self.report = report
        self.iterates = iterates


def _divergence(u, p, mesh):
    return kernels.flux_divergence(np.ascontiguousarray(u), float(p), mesh.half_metric, mesh.h)


def plap_apply(u, p):
    """Discrete -Delta_p u at the nodes.

    Dirichlet rows are identity placeholders: they return ``u`` itself.
    """
    if not p > 1:
        raise ValueError(f"p must exceed 1, got {p}")
    mesh = u.mesh
    out = _divergence(u.values, p, mesh) / mesh.cell_measure
    out[mesh.dirichlet] = u.values[mesh.dirichlet]
    return Field(mesh, out)


_EPS = float(np.finfo(float).eps)


def _roundoff_floor(lo, dg, up, u, V, free):
    v = np.abs(u)
    ju = np.abs(dg) * v
    ju[1:] += np.abs(lo) * v[:-1]
    ju[:-1] += np.abs(up) * v[1:]
    return 2.0 * _EPS * float(np.max((ju / V)[free])) if np.any(free) else 0.0


def newton(mesh, p, source, init, tol=1e-10, max_iters=200, positive_floor=False,
           extra_steps=3):
    """Damped Newton for -Delta_p u = source(u) with u = 0 on Dirichlet nodes.

    ``source(u)`` returns (f, df/du) nodewise. The strong residual
    sup_i |(-Delta_p u)_i - f_i| over free nodes is the merit function; a
    step is accepted only if it does not increase it (up to 30 halvings).
    Convergence: residual <= max(tol * (1 + sup |f|), floor), where
    floor = 2 eps_mach sup_i (|J| |u|)_i / V_i bounds the roundoff of the
    residual evaluation itself; after that up to ``extra_steps`` further
    steps are taken while each halves the residual. ``report.tolerance``
    holds the effective threshold.

    Trial iterates are projected onto u >= 0, or onto u >= u_old/10 when
    ``positive_floor`` is set (needed where f is singular at 0).
    """
    free = mesh.interior
    V = mesh.cell_measure
    u = np.array(init.values if isinstance(init, Field) else init, dtype=float)
    u[mesh.dirichlet] = 0.0
    if positive_floor:
        u[free] = np.maximum(u[free], 1e-300)
    else:
        u = np.maximum(u, 0.0)
    rep = SolveReport(tolerance=tol)

    def evaluate(v):
        f, df = source(v)
        A = _divergence(v, p, mesh)
        R = A[free] / V[free] - f[free]
        scale = 1.0 + np.max(np.abs(f[free]))
        res = np.max(np.abs(R)) if R.size else 0.0
        if not np.isfinite(res):
            res = math.inf
        return A, f, df, res, scale

    A, f, df, res, scale = evaluate(u)
    stall = 0
    polish = 0
    for it in range(max_iters + 1):
        lo, dg, up = kernels.flux_jacobian(u, float(p), mesh.half_metric, mesh.h)
        thr = max(tol * scale, _roundoff_floor(lo, dg, up, u, V, free))
        rep.tolerance = thr
        rep.iterations = it
        rep.final_residual = float(res)
        if res <= thr:
            rep.converged = True
            # a few more steps while they still pay off, down to roundoff
            if polish >= extra_steps or (polish and res > 0.5 * last):
                break
            polish += 1
            last = res
        elif polish:
            break
        if it == max_iters:
            break
        dg = dg - V * df
        rhs = -(A - V * f)
        d_idx = np.flatnonzero(mesh.dirichlet)
        dg[d_idx] = 1.0
        rhs[d_idx] = 0.0
        up[d_idx[d_idx < u.size - 1]] = 0.0
        lo[d_idx[d_idx > 0] - 1] = 0.0
        step = kernels.solve_tridiagonal(lo, dg, up, rhs)
        if not np.all(np.isfinite(step)):
            break
        t = 1.0
        accepted = False
        for _ in range(31):
            trial = u + t * step
            if positive_floor:
                floor = 0.1 * u
                clip = trial < floor
                trial = np.where(clip, floor, trial)
            else:
                clip = trial < 0.0
                trial = np.maximum(trial, 0.0)
            trial[mesh.dirichlet] = 0.0
            A2, f2, df2, res2, scale2 = evaluate(trial)
            if res2 <= res:
                accepted = True
                break
            t *= 0.5
            rep.damping_events += 1
        if not accepted:
            break
        if np.any(clip[free]):
            rep.floor_activations += 1
        stall = stall + 1 if res2 >= res * 0.999 else 0
        u, A, f, df, res, scale = trial, A2, f2, df2, res2, scale2
        if stall >= 5:
            lo, dg, up = kernels.flux_jacobian(u, float(p), mesh.half_metric, mesh.h)
            thr = max(tol * scale, _roundoff_floor(lo, dg, up, u, V, free))
            rep.tolerance = thr
            rep.final_residual = float(res)
            rep.iterations = it + 1
            rep.converged = bool(res <= thr)
            break
    return Field(mesh, u), rep


def regularized_source(spec, mesh, alpha, n):
    """Right-hand side alpha [a_n/(u + 1/n)^delta + b_n u^beta] and its derivative.

    ``n = inf`` gives the unregularized singular source.
    """
    a, b = spec.potentials(mesh)
    a = np.where(mesh.dirichlet, 0.0, a)
    b = np.where(mesh.dirichlet, 0.0, b)
    if math.isfinite(n):
        a = np.minimum(a, n)
        b = np.minimum(b, n)
        shift = 1.0 / n
    else:
        shift = 0.0
    delta, beta = spec.delta, spec.beta
    has_a = bool(np.any(a > 0))
    has_b = bool(np.any(b > 0))

    def source(u):
        f = np.zeros_like(u)
        df = np.zeros_like(u)
        if has_a:
            with np.errstate(divide="ignore", invalid="ignore"):
                w = (u + shift) ** (-delta)
                sa = np.where(a > 0, a * w, 0.0)
                f += sa
                df -= np.where(a > 0, delta * sa / (u + shift), 0.0)
        if has_b:
            ub = np.maximum(u, 0.0)
            f += b * ub**beta
            ueff = np.maximum(ub, 1e-12 * max(1.0, float(np.max(ub))))
            df += beta * b * ueff ** (beta - 1.0)
        return alpha * f, alpha * df

    return source


def solve_regularized(spec, mesh, alpha, n, init, tol=1e-10, max_iters=200):
    """Solve -Delta_p u = alpha [a_n/(u+1/n)^delta + b_n u^beta], u = 0 on the boundary.

    ``n`` may be ``math.inf`` for the singular problem itself; the iterate
    is then kept strictly positive at free nodes.
    """
    if not alpha > 0:
        raise ValueError(f"alpha must be positive, got {alpha}")
    if not n >= 1:
        raise ValueError(f"regularization level must be >= 1, got {n}")
    source = regularized_source(spec, mesh, alpha, n)
    u, rep = newton(mesh, spec.p, source, init, tol=tol, max_iters=max_iters,
                    positive_floor=not math.isfinite(n))
    rep.level = float(n)
    return u, rep
