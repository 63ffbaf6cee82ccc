"""Nonlocal layer: G(u), H(alpha) = alpha G(T(alpha)), branches and their shape.

Solutions of the nonlocal problem at lambda are exactly the fields T(alpha)
with H(alpha) = lambda, so the continuum of solutions is the graph of
alpha -> (H(alpha), T(alpha)).
"""
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
import math

import numpy as np
from scipy import optimize, special

from .localmap import T
from .mesh import RADIAL, unit_sphere_area
from .plap import SolverError, plap_apply

CASE_1A = "Case1a"
CASE_1B = "Case1b"
CASE_2A = "Case2a"
CASE_2B = "Case2b"
UNCLASSIFIED = "Unclassified"
LABELS = (CASE_1A, CASE_1B, CASE_2A, CASE_2B, UNCLASSIFIED)

SLOPE_THRESHOLD = 0.05
GOLDEN_XTOL = 1e-3
# contiguous alpha-chunks are warm-started by one worker each; the chunk size
# is fixed so results do not depend on the thread count
CHUNK = 8
_QUAD_POINTS = 8


class BranchError(RuntimeError):
    pass


class QuadratureError(ValueError):
    pass


# --- G ----------------------------------------------------------------------

def _measure(mesh, x):
    if mesh.kind == RADIAL:
        return unit_sphere_area(mesh.dimension) * x ** (mesh.dimension - 1)
    return np.ones_like(x)


def _interp(v, cells, lam):
    """u at x_c + lam h for each cell c, from the cubic through 4 nearby nodes."""
    M = v.size - 1
    j = np.clip(cells - 1, 0, M - 3)
    tau = (cells - j)[:, None] + lam[None, :]
    out = np.zeros_like(tau)
    for k in range(4):
        basis = np.ones_like(tau)
        for m in range(4):
            if m != k:
                basis *= (tau - m) / (k - m)
        out += v[j + k][:, None] * basis
    lin = v[cells, None] + (v[cells + 1] - v[cells])[:, None] * lam[None, :]
    return np.where(out > 0, out, lin)


def g_integral(spec, mesh, u):
    """Quadrature of g(x, u(x)) over the domain.

    u is interpolated by local cubics through four neighbouring nodes
    (linear where the cubic is not positive); cells use 8-point
    Gauss-Legendre. When g is singular at t = 0 the cells
    touching a Dirichlet node use Gauss-Jacobi with weight s^-theta2 (s the
    distance to that node), which integrates g(x, u) ~ s^-theta2 exactly
    up to a smooth factor.
    """
    v = u.values if hasattr(u, "values") else np.asarray(u, dtype=float)
    free = mesh.interior
    if np.any(v[free] <= 0):
        raise QuadratureError("u must be positive at interior nodes")
    gi = np.asarray(spec.g(mesh.nodes[free], v[free]), dtype=float)
    if not np.all(np.isfinite(gi)):
        i = int(np.flatnonzero(free)[np.argmax(~np.isfinite(gi))])
        raise QuadratureError(f"g(x, u) is not finite at interior node {i}")
    singular = spec.singular_kernel
    theta = spec.theta2 if singular else 0.0
    if singular and theta >= 1:
        raise QuadratureError(
            f"g blows up like t^-theta2 with theta2={theta:g} >= 1; G is infinite")

    x, h = mesh.nodes, mesh.h
    xi, wi = np.polynomial.legendre.leggauss(_QUAD_POINTS)
    lam = 0.5 * (1.0 + xi)
    cells = np.arange(mesh.M)
    special_cells = set()
    if singular:
        if mesh.dirichlet[0]:
            special_cells.add(0)
        if mesh.dirichlet[-1]:
            special_cells.add(mesh.M - 1)
    plain = np.array([c for c in cells if c not in special_cells], dtype=int)

    xq = x[plain, None] + h * lam[None, :]
    uq = _interp(v, plain, lam)
    vals = np.asarray(spec.g(xq, uq), dtype=float) * _measure(mesh, xq)
    total = 0.5 * h * float(np.sum(vals * wi[None, :]))

    if special_cells:
        xj, wj = special.roots_jacobi(_QUAD_POINTS, 0.0, -theta)
        s = 0.5 * h * (1.0 + xj)
        for c in sorted(special_cells):
            if c == 0:
                xs, us = x[0] + s, _interp(v, np.array([0]), s / h)[0]
            else:
                xs, us = x[-1] - s, _interp(v, np.array([c]), 1.0 - s / h)[0]
            psi = np.asarray(spec.g(xs, us), dtype=float) * _measure(mesh, xs) * s**theta
            total += (0.5 * h) ** (1.0 - theta) * float(np.sum(wj * psi))
    if not math.isfinite(total) or total <= 0:
        raise QuadratureError(f"integral of g(x, u) is not a positive number: {total}")
    return total


def eval_G(spec, mesh, u):
    """G(u) = (integral of g(x, u))^r."""
    return g_integral(spec, mesh, u) ** spec.r


# --- H ----------------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class BranchPoint:
    alpha: float
    H_value: float
    sup_norm: float
    G_value: float
    integral: float = math.nan
    report: dict = field(default_factory=dict)
    field: object = None
    converged: bool = True


def eval_H(spec, mesh, alpha, ladder_tol=1e-6, newton_tol=1e-10, init=None):
    """Solve the local problem at alpha and assemble (alpha, H(alpha), ...)."""
    if not alpha > 0:
        raise ValueError(f"alpha must be positive, got {alpha}")
    u, rep = T(spec, mesh, alpha, ladder_tol=ladder_tol, newton_tol=newton_tol, init=init)
    I = g_integral(spec, mesh, u)
    G = I**spec.r
    return BranchPoint(float(alpha), float(alpha * G), u.sup, float(G), float(I),
                       rep.summary(), u, bool(rep.converged))


def nonlocal_residual(spec, mesh, lam, u):
    """sup over interior nodes of |G_int^r (-Delta_p u) - lam (a u^-delta + b u^beta)|."""
    I = g_integral(spec, mesh, u)
    free = mesh.interior
    v = u.values[free]
    a, b = spec.potentials(mesh)
    a, b = a[free], b[free]
    rhs = np.where(a > 0, a * v ** (-spec.delta), 0.0) + b * v**spec.beta
    R = I**spec.r * plap_apply(u, spec.p).values[free] - lam * rhs
    return float(np.max(np.abs(R)))


# --- branch -----------------------------------------------------------------

@dataclass(eq=False)
class Branch:
    spec: object
    mesh: object
    points: tuple
    lambda_star: float = None
    case_label: str = UNCLASSIFIED
    multiplicity_table: tuple = ()
    ladder_tol: float = 1e-6
    newton_tol: float = 1e-10

    @property
    def good(self):
        return [pt for pt in self.points if pt.converged]

    @property
    def alphas(self):
        return np.array([pt.alpha for pt in self.points])

    @property
    def converged_fraction(self):
        return len(self.good) / max(len(self.points), 1)

    def evaluate(self, alpha):
        return eval_H(self.spec, self.mesh, alpha, self.ladder_tol, self.newton_tol)


def _sweep_chunk(spec, mesh, alphas, ladder_tol, newton_tol, warm):
    out = []
    prev = None
    for a in alphas:
        pt = None
        if warm and prev is not None:
            try:
                pt = eval_H(spec, mesh, a, ladder_tol, newton_tol, init=prev.values)
            except (SolverError, ValueError):
                pt = None
        if pt is None:
            try:
                pt = eval_H(spec, mesh, a, ladder_tol, newton_tol)
            except (SolverError, ValueError) as exc:
                pt = BranchPoint(float(a), math.nan, math.nan, math.nan,
                                 report={"error": str(exc)}, converged=False)
        out.append(pt)
        prev = pt.field if pt.converged else None
    return out


def _merge(points, extra):
    seen = {pt.alpha: pt for pt in points}
    for pt in extra:
        seen.setdefault(pt.alpha, pt)
    return tuple(seen[a] for a in sorted(seen))


def _golden(branch, i, maximize):
    """Golden-section search for the extremum of H bracketed by points i-1, i, i+1."""
    pts = branch.good
    sign = -1.0 if maximize else 1.0
    a, b = math.log(pts[i - 1].alpha), math.log(pts[i + 1].alpha)
    inv = (math.sqrt(5.0) - 1.0) / 2.0
    evaluated = []

    def f(la):
        pt = branch.evaluate(math.exp(la))
        evaluated.append(pt)
        return sign * math.log(pt.H_value)

    c, d = b - inv * (b - a), a + inv * (b - a)
    fc, fd = f(c), f(d)
    while b - a >= GOLDEN_XTOL:
        if fc < fd:
            b, d, fd = d, c, fc
            c = b - inv * (b - a)
            fc = f(c)
        else:
            a, c, fc = c, d, fd
            d = a + inv * (b - a)
            fd = f(d)
    return evaluated


def _log_arrays(points):
    la = np.log([pt.alpha for pt in points])
    lh = np.log([pt.H_value for pt in points])
    return la, lh


def _end_slopes(points):
    la, lh = _log_arrays(points)
    left = float(np.polyfit(la[:3], lh[:3], 1)[0])
    right = float(np.polyfit(la[-3:], lh[-3:], 1)[0])
    return left, right


def _extrema(points, eps=1e-9):
    """Interior extrema as (index, 'max'|'min') from sign changes of diff(log H)."""
    _, lh = _log_arrays(points)
    d = np.diff(lh)
    idx = np.flatnonzero(np.abs(d) > eps)
    out = []
    for j0, j1 in zip(idx[:-1], idx[1:]):
        if np.sign(d[j0]) != np.sign(d[j1]):
            # extremum sits at the point after the last rise (or fall)
            out.append((int(j0 + 1), "max" if d[j0] > 0 else "min"))
    return out


def _limits(points):
    """Read H's limits at the grid ends from the end slopes: 0, inf or None."""
    left, right = _end_slopes(points)
    lim0 = 0.0 if left > SLOPE_THRESHOLD else (math.inf if left < -SLOPE_THRESHOLD else None)
    liminf = math.inf if right > SLOPE_THRESHOLD else (0.0 if right < -SLOPE_THRESHOLD else None)
    return lim0, liminf


def classify(branch):
    """Case label from the end limits of H and its interior extrema."""
    pts = branch.good
    if len(pts) < 16:
        return UNCLASSIFIED
    if math.log10(pts[-1].alpha / pts[0].alpha) < 3 - 1e-9:
        return UNCLASSIFIED
    lim0, liminf = _limits(pts)
    kinds = [k for _, k in _extrema(pts)]
    if lim0 == 0.0 and liminf == math.inf and not kinds:
        return CASE_1A
    if lim0 == 0.0 and liminf == 0.0 and kinds == ["max"]:
        return CASE_1B
    if lim0 == math.inf and liminf == math.inf and kinds == ["min"]:
        return CASE_2A
    if lim0 == math.inf and liminf == 0.0 and not kinds:
        return CASE_2B
    return UNCLASSIFIED


def _extremal_point(branch):
    pts = branch.good
    if branch.case_label == CASE_1B:
        return max(pts, key=lambda pt: pt.H_value)
    if branch.case_label == CASE_2A:
        return min(pts, key=lambda pt: pt.H_value)
    raise BranchError(f"no lambda* for a branch of type {branch.case_label}")


def find_lambda_star(branch):
    """Extremal H (max for Case1b, min for Case2a) over the refined points."""
    return _extremal_point(branch).H_value


def _crossings(branch, lam):
    """Brackets (alpha_lo, alpha_hi) where H - lam changes sign.

    A bracket with ``None`` for one end means the crossing lies beyond the
    traced range, implied by the limit of H at that end.
    """
    pts = branch.good
    lh = np.array([pt.H_value for pt in pts]) - lam
    out = []
    for i in range(len(pts) - 1):
        if lh[i] == 0:
            out.append((pts[i].alpha, pts[i].alpha))
        elif lh[i] * lh[i + 1] < 0:
            out.append((pts[i].alpha, pts[i + 1].alpha))
    if lh[-1] == 0:
        out.append((pts[-1].alpha, pts[-1].alpha))
    lim0, liminf = _limits(pts)
    if lim0 is not None and np.sign(lim0 - lam) * np.sign(lh[0]) < 0:
        out.insert(0, (None, pts[0].alpha))
    if liminf is not None and np.sign(liminf - lam) * np.sign(lh[-1]) < 0:
        out.append((pts[-1].alpha, None))
    return out


def _is_tangential(branch, lam, rtol=1e-9):
    if branch.lambda_star is None:
        return False
    return abs(lam - branch.lambda_star) <= rtol * branch.lambda_star


def count_preimages(branch, lam):
    """Number of alpha with H(alpha) = lam, read off the traced grid."""
    if not lam > 0:
        raise ValueError(f"lambda must be positive, got {lam}")
    if _is_tangential(branch, lam):
        return 1
    return len(_crossings(branch, lam))


def invert_H(branch, lam, max_decades=12.0):
    """All alpha with H(alpha) = lam, sorted.

    Each grid bracket is refined by Brent's method on log H(alpha) - log lam
    in log alpha, to roundoff. Crossings implied beyond the grid ends are
    bracketed by stepping out a decade at a time, up to ``max_decades``.
    A lam equal to lambda* returns the single extremal alpha.
    """
    if not lam > 0:
        raise ValueError(f"lambda must be positive, got {lam}")
    if _is_tangential(branch, lam):
        return [_extremal_point(branch).alpha]
    target = math.log(lam)

    def f(la):
        return math.log(branch.evaluate(math.exp(la)).H_value) - target

    roots = []
    for lo, hi in _crossings(branch, lam):
        if lo is not None and lo == hi:
            roots.append(lo)
            continue
        if lo is None or hi is None:
            end = hi if lo is None else lo
            step = -math.log(10.0) if lo is None else math.log(10.0)
            la0, f0 = math.log(end), f(math.log(end))
            found = False
            for _ in range(int(max_decades)):
                la1 = la0 + step
                try:
                    f1 = f(la1)
                except (SolverError, ValueError):
                    break
                if f0 * f1 <= 0:
                    found = True
                    break
                la0, f0 = la1, f1
            if not found:
                continue
            a, b = sorted((la0, la1))
        else:
            a, b = math.log(lo), math.log(hi)
        roots.append(math.exp(optimize.brentq(f, a, b, xtol=1e-15, rtol=4 * np.finfo(float).eps)))
    return sorted(roots)


def _multiplicity_samples(branch):
    if branch.lambda_star is not None:
        ls = branch.lambda_star
        return [f * ls for f in (0.1, 0.25, 0.5, 0.75, 0.9, 1.0, 1.1, 2.0, 4.0, 10.0)]
    H = np.array([pt.H_value for pt in branch.good])
    return list(np.geomspace(H.min(), H.max(), 9))


def multiplicity_table(branch):
    return tuple((float(lam), count_preimages(branch, lam)) for lam in _multiplicity_samples(branch))


def trace_branch(spec, mesh, alpha_min, alpha_max, K, ladder_tol=1e-6, newton_tol=1e-10,
                 threads=1, refine=True, warm=True):
    """Sample H on K log-uniform alphas, refine extrema, classify.

    Points whose solve fails are kept as degraded (converged=False); the
    branch is returned only if at least 80% of the grid converged.
    """
    if not 0 < alpha_min < alpha_max:
        raise ValueError(f"need 0 < alpha_min < alpha_max, got {alpha_min}, {alpha_max}")
    if K < 16:
        raise ValueError(f"K must be at least 16, got {K}")
    grid = np.geomspace(alpha_min, alpha_max, K)
    chunks = [grid[i:i + CHUNK] for i in range(0, K, CHUNK)]
    args = (spec, mesh)
    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            parts = list(pool.map(lambda c: _sweep_chunk(*args, c, ladder_tol, newton_tol, warm),
                                  chunks))
    else:
        parts = [_sweep_chunk(*args, c, ladder_tol, newton_tol, warm) for c in chunks]
    points = tuple(pt for part in parts for pt in part)
    br = Branch(spec, mesh, points, ladder_tol=ladder_tol, newton_tol=newton_tol)
    if br.converged_fraction < 0.8:
        raise BranchError(
            f"only {len(br.good)} of {K} branch points converged (need 80%)")
    if refine and len(br.good) >= 3:
        extra = []
        for i, kind in _extrema(br.good):
            if 0 < i < len(br.good) - 1:
                extra.extend(_golden(br, i, kind == "max"))
        br.points = _merge(br.points, extra)
    br.case_label = classify(br)
    if br.case_label in (CASE_1B, CASE_2A):
        br.lambda_star = find_lambda_star(br)
    br.multiplicity_table = multiplicity_table(br)
    return br


def predict_case(spec):
    """Case label implied by the exponent hypotheses, or None if not decidable.

    r = 0 is the local diagram lambda = alpha (Case1a). Otherwise the
    declared theta1 is needed; a singular kernel (theta2 > 0) selects the
    second family.
    """
    p, d, b, r = spec.p, spec.delta, spec.beta, spec.r
    if r == 0:
        return CASE_1A
    t1, t2 = spec.theta1, spec.theta2
    if t1 is None:
        return None
    if not spec.singular_kernel:
        if t1 * r < p - 1 - b:
            return CASE_1A
        if t1 * r > p - 1 - b and t1 < 1:
            return CASE_1B
        return None
    if t2 * r > p - 1 + d and t2 < 1:
        if t1 * r < p - 1 - b:
            return CASE_2A
        if t1 * r > p - 1 - b and t1 < 1:
            return CASE_2B
    return None
