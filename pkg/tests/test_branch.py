import math

import numpy as np
import pytest
from scipy.integrate import quad

from conftest import load_config
from plapbranch import branch as br_mod
from plapbranch.branch import (
    CASE_1A, CASE_1B, CASE_2A, CASE_2B, UNCLASSIFIED, Branch, BranchError, BranchPoint,
    QuadratureError, classify, count_preimages, eval_G, eval_H, find_lambda_star,
    g_integral, invert_H, nonlocal_residual, predict_case, trace_branch,
)
from plapbranch.plap import Field, SolverError
from plapbranch.problem import ConstantKernel, PowerKernel, ProblemSpec, ShiftedPowerKernel
from plapbranch.spectral import torsion

SPEC = ProblemSpec(2.0, 1.0, 0.5)


@pytest.fixture(scope="module")
def traced():
    out = {}
    for name in ("case1a", "case1b", "case2a", "case2b", "local_r0"):
        cfg = load_config(name)
        sw = cfg.sweep
        out[name] = trace_branch(cfg.spec, cfg.mesh, sw.alpha_min, sw.alpha_max, sw.K,
                                 ladder_tol=cfg.ladder_tol, newton_tol=cfg.newton_tol)
    return out


# --- G ----------------------------------------------------------------------

@pytest.mark.parametrize("r", [1.0, -2.0])
def test_constant_kernel_on_unit_interval(unit256, r):
    spec = SPEC.with_(r=r, g=ConstantKernel(1.0))
    u = Field(unit256, 0.1 + unit256.boundary_distance)
    assert eval_G(spec, unit256, u) == pytest.approx(1.0, rel=1e-13)


def test_singular_kernel_against_adaptive_quadrature(unit256):
    spec = SPEC.with_(r=1.0, g=PowerKernel(0.5))
    e = torsion(spec, unit256).e_field
    oracle, _ = quad(lambda x: (x * (1 - x) / 2) ** -0.5, 0, 1, limit=200)
    assert oracle == pytest.approx(math.sqrt(2) * math.pi, rel=1e-10)
    assert eval_G(spec, unit256, e) == pytest.approx(oracle, rel=1e-4)


def test_radial_measure_in_g():
    from plapbranch.mesh import build_radial
    m = build_radial(1.0, 3, 64)
    u = Field(m, 0.5 + m.boundary_distance)
    assert g_integral(SPEC, m, u) == pytest.approx(4 * math.pi / 3, rel=1e-12)


def test_g_rejects_non_positive_field(unit256):
    spec = SPEC.with_(r=1.0, g=PowerKernel(0.5))
    v = unit256.boundary_distance.copy()
    v[10] = 0.0
    with pytest.raises(QuadratureError):
        g_integral(spec, unit256, Field(unit256, v))


def test_g_rejects_non_integrable_singularity(unit256):
    spec = SPEC.with_(r=1.0, g=PowerKernel(1.2))
    with pytest.raises(QuadratureError):
        g_integral(spec, unit256, Field(unit256, unit256.boundary_distance))


# --- H ----------------------------------------------------------------------

@pytest.mark.parametrize("alpha", [1e-3, 1.0, 1e3])
def test_local_problem_has_identity_h(unit256, alpha):
    assert eval_H(SPEC, unit256, alpha).H_value == alpha


def test_defining_identity(unit256):
    spec = SPEC.with_(r=1.5, g=ShiftedPowerKernel(0.8))
    for alpha in (1e-2, 1.0, 1e2):
        pt = eval_H(spec, unit256, alpha)
        G = eval_G(spec, unit256, pt.field)
        assert abs(pt.H_value - alpha * G) <= 1e-12 * pt.H_value
        assert pt.H_value > 0 and pt.converged
        assert pt.sup_norm == pytest.approx(pt.field.sup)


def test_eval_h_rejects_bad_alpha(unit256):
    with pytest.raises(ValueError):
        eval_H(SPEC, unit256, -1.0)


# --- tracing ------------------------------------------------------------------

def test_r0_points_on_diagonal(traced):
    b = traced["local_r0"]
    assert len(b.points) == 16
    assert all(pt.H_value == pt.alpha for pt in b.points)
    assert b.case_label == CASE_1A and b.lambda_star is None
    with pytest.raises(BranchError):
        find_lambda_star(b)


@pytest.mark.parametrize("lam", [1e-4, 0.3, 50.0, 1e5])
def test_r0_inverse_is_identity(traced, lam):
    roots = invert_H(traced["local_r0"], lam)
    assert len(roots) == 1 and roots[0] == pytest.approx(lam, rel=1e-12)


def test_case1a_increasing(traced):
    b = traced["case1a"]
    H = np.array([pt.H_value for pt in b.points])
    assert b.case_label == CASE_1A
    assert np.all(np.diff(H) > 0)
    assert b.points[-1].sup_norm >= 10 * b.points[0].sup_norm
    assert H[0] < 1e-2 and H[-1] > 1e2


def test_case1b_shape_and_lambda_star(traced):
    b = traced["case1b"]
    H = np.array([pt.H_value for pt in b.points])
    assert b.case_label == CASE_1B
    i = int(np.argmax(H))
    assert 0 < i < len(H) - 1
    assert np.all(np.diff(H[:i + 1]) > 0) and np.all(np.diff(H[i:]) < 0)
    assert b.lambda_star == H.max()


def test_case1b_lambda_star_refined(traced):
    b = traced["case1b"]
    a = b.alphas
    i = int(np.argmax([pt.H_value for pt in b.points]))
    # refinement leaves neighbours within the golden-section tolerance in log alpha
    assert min(math.log(a[i + 1] / a[i]), math.log(a[i] / a[i - 1])) < 2e-3


def test_case1b_multiplicity(traced):
    b = traced["case1b"]
    ls = b.lambda_star
    assert len(invert_H(b, ls / 2)) == 2
    assert invert_H(b, 2 * ls) == []
    assert count_preimages(b, ls) == 1
    assert len(invert_H(b, ls)) == 1
    table = dict(b.multiplicity_table)
    assert table[0.5 * ls] == 2 and table[2.0 * ls] == 0


def test_case2a_min(traced):
    b = traced["case2a"]
    H = [pt.H_value for pt in b.points]
    assert b.case_label == CASE_2A
    assert b.lambda_star == min(H)
    assert all(b.lambda_star <= h for h in H)


def test_case2b_decreasing(traced):
    b = traced["case2b"]
    assert b.case_label == CASE_2B
    sup = np.array([pt.sup_norm for pt in b.points])
    H = np.array([pt.H_value for pt in b.points])
    order = np.argsort(H)
    assert np.all(np.diff(sup[order]) < 0)


def test_preimages_solve_nonlocal_problem(traced):
    b = traced["case1b"]
    lam = 0.3 * b.lambda_star
    for a in invert_H(b, lam):
        pt = b.evaluate(a)
        assert pt.H_value == pytest.approx(lam, rel=1e-10)
        assert nonlocal_residual(b.spec, b.mesh, lam, pt.field) <= 1e-6 * lam


def test_invert_rejects_non_positive(traced):
    with pytest.raises(ValueError):
        invert_H(traced["case1b"], 0.0)


def test_trace_preconditions(unit256):
    with pytest.raises(ValueError):
        trace_branch(SPEC, unit256, 1e-2, 1e2, 8)
    with pytest.raises(ValueError):
        trace_branch(SPEC, unit256, 1e2, 1e-2, 16)


def test_threads_and_warm_start_do_not_change_results():
    cfg = load_config("case1b")
    args = (cfg.spec, cfg.mesh, 1e-2, 1e2, 16)
    ref = trace_branch(*args, threads=1)
    par = trace_branch(*args, threads=3)
    cold = trace_branch(*args, warm=False)
    assert [pt.H_value for pt in par.points] == [pt.H_value for pt in ref.points]
    np.testing.assert_allclose([pt.H_value for pt in cold.points],
                               [pt.H_value for pt in ref.points], rtol=1e-9)


def _failing(fail_alphas):
    real = br_mod.eval_H

    def fake(spec, mesh, alpha, *args, **kw):
        if any(abs(alpha / f - 1) < 1e-9 for f in fail_alphas):
            raise SolverError("injected")
        return real(spec, mesh, alpha, *args, **kw)
    return fake


def test_degraded_points_are_kept(unit256, monkeypatch):
    grid = np.geomspace(1e-2, 1e2, 16)
    monkeypatch.setattr(br_mod, "eval_H", _failing(grid[[3, 9]]))
    b = trace_branch(SPEC, unit256, 1e-2, 1e2, 16)
    assert [pt.converged for pt in b.points].count(False) == 2
    assert b.converged_fraction == pytest.approx(14 / 16)


def test_too_many_failures_abort(unit256, monkeypatch):
    grid = np.geomspace(1e-2, 1e2, 16)
    monkeypatch.setattr(br_mod, "eval_H", _failing(grid[:4]))
    with pytest.raises(BranchError):
        trace_branch(SPEC, unit256, 1e-2, 1e2, 16)


# --- classification on synthetic branches ---------------------------------------

def _synthetic(H_of_alpha, n=24, lo=1e-3, hi=1e3):
    pts = tuple(BranchPoint(a, H_of_alpha(a), 1.0, 1.0) for a in np.geomspace(lo, hi, n))
    return Branch(None, None, pts)


@pytest.mark.parametrize("H,label", [
    (lambda a: a**0.7, CASE_1A),
    (lambda a: a**0.5 / (1 + a), CASE_1B),
    (lambda a: a**-0.5 + a**0.5, CASE_2A),
    (lambda a: a**-0.3, CASE_2B),
    (lambda a: 2 + np.sin(np.log(a)), UNCLASSIFIED),
    (lambda a: 3.0 + 0 * a, UNCLASSIFIED),
])
def test_classify_synthetic(H, label):
    assert classify(_synthetic(H)) == label


def test_classify_needs_enough_points_and_range():
    assert classify(_synthetic(lambda a: a, n=12)) == UNCLASSIFIED
    assert classify(_synthetic(lambda a: a, lo=1.0, hi=100.0)) == UNCLASSIFIED


def test_synthetic_case1b_lambda_star_is_grid_max():
    b = _synthetic(lambda a: a**0.5 / (1 + a))
    b.case_label = classify(b)
    assert find_lambda_star(b) == max(pt.H_value for pt in b.points)


@pytest.mark.parametrize("name,label", [("case1a", CASE_1A), ("case1b", CASE_1B),
                                        ("case2a", CASE_2A), ("case2b", CASE_2B),
                                        ("local_r0", CASE_1A)])
def test_predicted_case(name, label):
    assert predict_case(load_config(name).spec) == label


def test_prediction_unavailable_without_theta():
    from plapbranch.problem import TabulatedKernel
    spec = SPEC.with_(r=1.0, g=TabulatedKernel((0.1, 1.0, 10.0), (2.0, 1.0, 0.5)))
    assert spec.theta1 is None
    assert predict_case(spec) is None
