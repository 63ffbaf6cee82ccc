"""The solution map alpha -> T(alpha) of the local problem, and its barriers.

T(alpha) runs the regularization ladder n = 1, 2, 4, ... until two
consecutive levels agree, then polishes the last level on the singular
problem itself (n = inf) so that the returned field is an exact discrete
solution.
"""
from collections import OrderedDict
from dataclasses import dataclass
import functools
import threading

import numpy as np

from .comparison import classify_subsolution, ordering_slack
from .plap import Field, SolverError, solve_regularized
from .spectral import torsion

SMALL = "SmallAlpha"
LARGE = "LargeAlpha"

CACHE_CAPACITY = 256
_cache = OrderedDict()
_cache_lock = threading.Lock()


class LadderError(SolverError):
    pass


def clear_cache():
    with _cache_lock:
        _cache.clear()


@functools.lru_cache(maxsize=64)
def _validated_torsion(spec, mesh):
    spec.validate(mesh)
    return torsion(spec, mesh)


def supersolution_guess(spec, tor, alpha):
    """c e with c^{p-1} = alpha (1 + (c sup e)^beta).

    Since a_1/(u+1)^delta <= H2 and b <= H2, this is a supersolution of the
    first ladder level; Newton started above the solution of a sublinear
    problem does not fall onto the trivial branch.
    """
    p, beta = spec.p, spec.beta
    E = max(tor.e_field.sup, 1e-300)
    lc = np.log(alpha) / (p - 1)
    for _ in range(200):
        rhs = np.log(alpha) + np.logaddexp(0.0, beta * (lc + np.log(E)))
        new = rhs / (p - 1)
        if abs(new - lc) < 1e-12:
            break
        lc = new
    return np.exp(lc) * tor.e_field.values


def ladder_start(scale):
    """First ladder exponent k with 1/2^k <= scale (0 for scale >= 1).

    Below that level the shift 1/n dominates u and the gaps grow with n
    instead of shrinking.
    """
    if not scale > 0 or scale >= 1:
        return 0
    return int(np.ceil(-np.log2(scale)))


def T(spec, mesh, alpha, ladder_tol=1e-6, newton_tol=1e-10, k_max=30, init=None,
      use_cache=True):
    """Discrete solution of the local problem at ``alpha``.

    Returns (field, report); ``report.ladder_gaps`` lists
    sup |u_{2^k} - u_{2^{k-1}}| along the ladder. The ladder starts at the
    level matching the scale of the initial guess (see ``ladder_start``)
    and converges when gap <= ladder_tol * max(1, sup u).
    """
    if not alpha > 0:
        raise ValueError(f"alpha must be positive, got {alpha}")
    key = (spec, mesh, float(alpha), ladder_tol, newton_tol)
    if use_cache:
        with _cache_lock:
            hit = _cache.get(key)
            if hit is not None:
                _cache.move_to_end(key)
                return hit
    tor = _validated_torsion(spec, mesh)
    if init is None:
        init = supersolution_guess(spec, tor, alpha)
    prev = None
    gaps = []
    u = Field(mesh, init) if not isinstance(init, Field) else init
    k0 = ladder_start(u.sup)
    for k in range(k0, k0 + k_max + 1):
        u, rep = solve_regularized(spec, mesh, alpha, 2.0**k, u, tol=newton_tol)
        if not rep.converged:
            raise LadderError(f"regularized solve failed at n=2^{k}", rep,
                              () if prev is None else (prev, u))
        if prev is not None:
            gap = float(np.max(np.abs(u.values - prev.values)))
            gaps.append(gap)
            if gap <= ladder_tol * max(1.0, u.sup):
                break
        prev = u
    else:
        raise LadderError(f"ladder did not converge in {k_max} doublings", rep, (prev, u))
    final, prep = solve_regularized(spec, mesh, alpha, np.inf, u, tol=newton_tol)
    if prep.converged:
        prep.iterations += rep.iterations
        result_field, result_rep = final, prep
    else:
        result_field, result_rep = u, rep
    result_rep.ladder_gaps = tuple(gaps)
    out = (result_field, result_rep)
    if use_cache:
        with _cache_lock:
            _cache[key] = out
            _cache.move_to_end(key)
            while len(_cache) > CACHE_CAPACITY:
                _cache.popitem(last=False)
    return out


# --- barriers ------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class BarrierSet:
    alpha: float
    lower: Field
    upper: Field
    q: float
    l: float
    t: float
    regime: str
    alpha0: float = None
    alpha_inf: float = None
    valid: bool = False
    sub_ok: bool = False
    super_ok: bool = False
    ordered: bool = False


def exponent_windows(spec, regime):
    """Admissible open windows for (q, l) and the torsion power t.

    SmallAlpha: q in (s0, s_inf), l in (0, s0); LargeAlpha: q in (s0, s_inf),
    l in (s_inf, 2 s_inf), with s0 = 1/(p-1+delta), s_inf = 1/(p-1-beta).
    """
    p, d, b = spec.p, spec.delta, spec.beta
    s0, sinf = 1.0 / (p - 1 + d), 1.0 / (p - 1 - b)
    t = (p - 1) / (p - 1 + d)
    if regime == SMALL:
        return (s0, sinf), (0.0, s0), t
    if regime == LARGE:
        return (s0, sinf), (sinf, 2 * sinf), t
    raise ValueError(f"unknown regime {regime!r}")


def _barrier_checks(spec, mesh, phi, et, alpha, q, l):
    lower = Field(mesh, alpha**q * phi)
    upper = Field(mesh, alpha**l * et)
    sub_ok = classify_subsolution(lower, spec, mesh, alpha).is_sub
    super_ok = classify_subsolution(upper, spec, mesh, alpha).is_super
    ordered = bool(np.all(lower.values <= upper.values + ordering_slack(upper.values)))
    return lower, upper, sub_ok, super_ok, ordered


def default_scan():
    return np.logspace(-8, 8, 97)


def barriers(spec, mesh, eig, tor, alpha, regime, frac=0.5, invert=False, scan=None):
    """Build lower = alpha^q Phi1 and upper = alpha^l e^t and sign-check them.

    q and l sit at fraction ``frac`` of their windows (0.5: midpoint); q is
    then clamped inside its window so that alpha^q sup Phi1 <= alpha^l (sup e)^t
    at this alpha when possible. ``invert`` swaps q and l (a deliberately
    wrong construction). The validity threshold alpha0 (SmallAlpha) or
    alpha_inf (LargeAlpha) is read off a log scan of alpha with the unclamped
    exponents: the end of the run of passing scan points that starts at
    the small (resp. large) end of the scan.
    """
    if eig.phi1.mesh is not mesh or tor.e_field.mesh is not mesh:
        raise ValueError("eigenpair and torsion must live on the given mesh")
    if not alpha > 0:
        raise ValueError(f"alpha must be positive, got {alpha}")
    (q0, q1), (l0, l1), t = exponent_windows(spec, regime)
    q = q0 + frac * (q1 - q0)
    l = l0 + frac * (l1 - l0)
    if invert:
        q, l = l, q
    phi = eig.phi1.values
    et = tor.e_field.values ** t
    sup_phi, sup_et = float(np.max(phi)), float(np.max(et))

    scan = default_scan() if scan is None else np.asarray(scan)
    passing = np.array([all(_barrier_checks(spec, mesh, phi, et, s, q, l)[2:]) for s in scan])
    alpha0 = alpha_inf = None
    if regime == SMALL and passing[0]:
        stop = np.argmin(passing) if not passing.all() else len(scan)
        alpha0 = float(scan[stop - 1])
    if regime == LARGE and passing[-1]:
        rev = passing[::-1]
        stop = np.argmin(rev) if not rev.all() else len(scan)
        alpha_inf = float(scan[len(scan) - stop])

    qc = q
    la = np.log(alpha)
    if not invert and la != 0 and sup_phi > 0:
        need = l + np.log(sup_et / sup_phi) / la
        width = q1 - q0
        if la < 0 and q < need:
            qc = min(max(need + 1e-3 * width, q0), q1 - 1e-3 * width)
        elif la > 0 and q > need:
            qc = max(min(need - 1e-3 * width, q1), q0 + 1e-3 * width)
    lower, upper, sub_ok, super_ok, ordered = _barrier_checks(spec, mesh, phi, et, alpha, qc, l)
    return BarrierSet(alpha, lower, upper, qc, l, t, regime, alpha0, alpha_inf,
                      bool(sub_ok and super_ok and ordered), sub_ok, super_ok, ordered)


def check_membership(u, bars):
    """lower - slack <= u <= upper + slack, slack = 1e-8 + 1e-4 sup u."""
    if u.mesh is not bars.lower.mesh:
        raise ValueError("field and barriers live on different meshes")
    slack = ordering_slack(u.values)
    return bool(np.all(bars.lower.values - slack <= u.values)
                and np.all(u.values <= bars.upper.values + slack))
