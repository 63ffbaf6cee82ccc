"""Invariant suites run by ``plapbranch verify``.

Each suite returns a dict with at least ``status`` ("pass", "fail" or
"skipped") and the measurements behind it.
"""
import numpy as np

from .branch import g_integral, predict_case, trace_branch
from .comparison import assert_comparison, classify_subsolution
from .localmap import LARGE, SMALL, T, barriers, check_membership
from .plap import Field
from .problem import ZERO, PowerKernel, TabulatedPotential
from .spectral import InstructingCallerToUseTorsionOnly, first_eigenpair, torsion

SCALING_RANGE = (1e-2, 1e2)
SCALING_K = 24
SCALING_TOL = 1e-2


def _status(ok):
    return "pass" if ok else "fail"


def _solve(cfg, spec, alpha):
    return T(spec, cfg.mesh, alpha, ladder_tol=cfg.ladder_tol, newton_tol=cfg.newton_tol)[0]


def monotonicity(cfg, n=24):
    """T(alpha) nodewise non-decreasing along a log grid; interior floor non-decreasing."""
    m = cfg.mesh
    grid = np.geomspace(cfg.sweep.alpha_min, cfg.sweep.alpha_max, n)
    fields = [_solve(cfg, cfg.spec, a) for a in grid]
    d = m.boundary_distance
    middle = d >= 0.5 * d.max()
    worst, bad, floors = 0.0, 0, []
    for u0, u1 in zip(fields[:-1], fields[1:]):
        slack = cfg.ladder_tol * max(1.0, u1.sup)
        excess = float(np.max(u0.values - u1.values))
        worst = max(worst, excess)
        bad += excess > slack
    for u in fields:
        floors.append(float(np.min(u.values[middle])))
    floor_ok = all(f > 0 for f in floors) and all(
        f1 >= f0 - cfg.ladder_tol * max(1.0, f1) for f0, f1 in zip(floors[:-1], floors[1:]))
    return {"status": _status(bad == 0 and floor_ok), "alphas": len(grid), "violations": int(bad),
            "worst_excess": worst, "floor_monotone": floor_ok, "min_floor": min(floors)}


def _sandwich_side(cfg, eig, tor, regime):
    spec, m = cfg.spec, cfg.mesh
    ref = barriers(spec, m, eig, tor, 1.0, regime, invert=cfg.invert_barriers)
    thr = ref.alpha0 if regime == SMALL else ref.alpha_inf
    if thr is None:
        return {"threshold": None, "tested": 0, "violations": 0,
                "note": "no alpha in the scan passes both sign checks"}
    tested = (np.geomspace(thr * 1e-6, thr, 6) if regime == SMALL
              else np.geomspace(thr, thr * 1e3, 6))
    bad = []
    for a in tested:
        bars = barriers(spec, m, eig, tor, a, regime, invert=cfg.invert_barriers)
        u = _solve(cfg, spec, a)
        if not (bars.valid and check_membership(u, bars)):
            bad.append(float(a))
    return {"threshold": thr, "tested": len(tested), "violations": len(bad),
            "violating_alphas": bad}


def sandwich(cfg):
    """Barrier validity and lower <= T(alpha) <= upper below alpha0 and above alpha_inf."""
    try:
        eig = first_eigenpair(cfg.spec, cfg.mesh)
    except InstructingCallerToUseTorsionOnly as exc:
        return {"status": "skipped", "reason": str(exc)}
    tor = torsion(cfg.spec, cfg.mesh)
    small = _sandwich_side(cfg, eig, tor, SMALL)
    large = _sandwich_side(cfg, eig, tor, LARGE)
    ok = all(s["threshold"] is not None and s["violations"] == 0 for s in (small, large))
    return {"status": _status(ok), "small_alpha": small, "large_alpha": large,
            "inverted": cfg.invert_barriers}


def random_profiles(mesh, rng, count, modes=4):
    """Smooth positive profiles with values in [0.1, 1]."""
    xi = (mesh.nodes - mesh.nodes[0]) / (mesh.nodes[-1] - mesh.nodes[0])
    out = []
    for _ in range(count):
        c = rng.normal(size=modes)
        ph = rng.uniform(0, 2 * np.pi, size=modes)
        k = np.arange(1, modes + 1)
        s = np.sum(c[:, None] * np.sin(np.pi * k[:, None] * xi[None, :] + ph[:, None]), axis=0)
        s = (s - s.min()) / max(s.max() - s.min(), 1e-300)
        out.append(0.1 + 0.9 * s)
    return out


def _reweighted(cfg, weight):
    """T(alpha) of the problem with a and b multiplied by the nodal profile ``weight``."""
    spec, m = cfg.spec, cfg.mesh
    a, b = spec.potentials(m)
    x = tuple(m.nodes)
    var = spec.with_(a=TabulatedPotential(x, tuple(a * weight)),
                     b=TabulatedPotential(x, tuple(b * weight)))
    return _solve(cfg, var, cfg.alpha)


def comparison(cfg, trials=100):
    """Seeded no-counterexample search for the comparison principle.

    Two candidate families per profile pair (psi1, psi2):
    ``perturbed``: T(alpha)(1 - 0.1 psi1) against T(alpha)(1 + 0.1 psi2);
    ``reweighted``: solutions with a, b scaled by (1 - 0.1 psi1) resp.
    (1 + 0.1 psi2), which are strict sub/supersolutions by construction.
    Pairs that classify as sub/super must be ordered; a counterexample is a
    failure, and so is a run in which no pair classifies at all.
    """
    spec, m, alpha = cfg.spec, cfg.mesh, cfg.alpha
    u = _solve(cfg, spec, alpha)
    rng = np.random.default_rng(cfg.seed)
    psi_lo = random_profiles(m, rng, trials)
    psi_hi = random_profiles(m, rng, trials)
    counts = {"perturbed": 0, "reweighted": 0}
    counter = []
    for i, (p1, p2) in enumerate(zip(psi_lo, psi_hi)):
        pairs = {
            "perturbed": (Field(m, u.values * (1 - 0.1 * p1)), Field(m, u.values * (1 + 0.1 * p2))),
            "reweighted": (_reweighted(cfg, 1 - 0.1 * p1), _reweighted(cfg, 1 + 0.1 * p2)),
        }
        for family, (sub, sup) in pairs.items():
            if not (classify_subsolution(sub, spec, m, alpha).is_sub
                    and classify_subsolution(sup, spec, m, alpha).is_super):
                continue
            counts[family] += 1
            res = assert_comparison(sub, sup, spec, m, alpha)
            if not res:
                counter.append({"trial": i, "family": family, "node": res.node,
                                "excess": res.excess})
    nonvacuous = sum(counts.values()) > 0
    return {"status": _status(nonvacuous and not counter), "trials": trials, "seed": cfg.seed,
            "alpha": alpha, "classified_pairs": counts, "counterexamples": counter}


def _pure_variants(cfg):
    spec, m = cfg.spec, cfg.mesh
    a, b = spec.potentials(m)
    inner = m.interior
    a_zero, b_zero = np.all(a[inner] == 0), np.all(b[inner] == 0)
    theta = getattr(spec.g, "theta", None) if isinstance(spec.g, PowerKernel) else None
    if theta is None:
        t1 = spec.theta1
        theta = t1 if t1 is not None and 0 < t1 < 1 else 0.5
    g = PowerKernel(theta)
    out = []
    if np.all(a[inner] > 0) and not a_zero:
        s = 1.0 / (spec.p - 1 + spec.delta)
        variant = spec if b_zero and isinstance(spec.g, PowerKernel) else spec.with_(
            b=ZERO, g=g, theta1=None, theta2=None)
        out.append(("b_zero", variant, s, theta))
    if np.all(b[inner] > 0) and not b_zero:
        s = 1.0 / (spec.p - 1 - spec.beta)
        variant = spec if a_zero and isinstance(spec.g, PowerKernel) else spec.with_(
            a=ZERO, g=g, theta1=None, theta2=None)
        out.append(("a_zero", variant, s, theta))
    return out


def scaling(cfg):
    """log-log slopes of sup T and H against their pure-power predictions."""
    rows = {}
    ok = True
    grid = np.geomspace(*SCALING_RANGE, SCALING_K)
    for name, spec, s, theta in _pure_variants(cfg):
        sup, H = [], []
        for a in grid:
            u = _solve(cfg, spec, a)
            sup.append(u.sup)
            H.append(a * g_integral(spec, cfg.mesh, u) ** spec.r)
        la = np.log(grid)
        t_slope = float(np.polyfit(la, np.log(sup), 1)[0])
        h_slope = float(np.polyfit(la, np.log(H), 1)[0])
        h_exact = 1.0 - theta * spec.r * s
        row = {"theta": theta, "r": spec.r, "T_slope_measured": t_slope, "T_slope_analytic": s,
               "H_slope_measured": h_slope, "H_slope_analytic": h_exact}
        row["pass"] = bool(abs(t_slope - s) <= SCALING_TOL and abs(h_slope - h_exact) <= SCALING_TOL)
        ok &= row["pass"]
        rows[name] = row
    if not rows:
        return {"status": "skipped", "reason": "no pure-power variant of this problem is admissible"}
    return {"status": _status(ok), "alpha_range": list(SCALING_RANGE), "K": SCALING_K, **rows}


def classification(cfg, threads=1):
    """Case label stable under K -> 2K and consistent with the exponent hypotheses."""
    sw = cfg.sweep
    kw = dict(ladder_tol=cfg.ladder_tol, newton_tol=cfg.newton_tol, threads=threads)
    b1 = trace_branch(cfg.spec, cfg.mesh, sw.alpha_min, sw.alpha_max, sw.K, **kw)
    b2 = trace_branch(cfg.spec, cfg.mesh, sw.alpha_min, sw.alpha_max, 2 * sw.K, **kw)
    predicted = predict_case(cfg.spec)
    stable = b1.case_label == b2.case_label
    agrees = predicted is None or predicted == b1.case_label
    return {"status": _status(stable and agrees), "label_K": b1.case_label,
            "label_2K": b2.case_label, "predicted": predicted,
            "prediction_available": predicted is not None}


SUITES = ("monotonicity", "sandwich", "comparison", "scaling", "classification")


def run_all(cfg, threads=1):
    results = {
        "monotonicity": monotonicity(cfg),
        "sandwich": sandwich(cfg),
        "comparison": comparison(cfg),
        "scaling": scaling(cfg),
        "classification": classification(cfg, threads),
    }
    results["passed"] = all(r["status"] != "fail" for r in results.values())
    return results
