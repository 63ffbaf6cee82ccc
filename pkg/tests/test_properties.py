"""Property-based checks of the discrete invariants."""
import math

import numpy as np
from hypothesis import HealthCheck, given, settings, strategies as st

from plapbranch import io, kernels
from plapbranch.branch import g_integral
from plapbranch.comparison import classify_subsolution
from plapbranch.localmap import T
from plapbranch.mesh import build_interval, build_radial
from plapbranch.plap import Field, plap_apply
from plapbranch.problem import ConstantKernel, ProblemSpec

SETTINGS = settings(max_examples=40, deadline=None,
                    suppress_health_check=[HealthCheck.function_scoped_fixture])

finite = st.floats(-1e3, 1e3, allow_nan=False)


@SETTINGS
@given(a=finite, length=st.floats(1e-2, 1e2), M=st.integers(8, 400))
def test_interval_weights_sum_to_length(a, length, M):
    m = build_interval(a, a + length, M)
    assert abs(m.quad_weights.sum() - length) <= 1e-10 * length
    d = m.boundary_distance
    assert d[0] == d[-1] == 0 and np.all(d[1:-1] > 0)
    # d is computed from the coordinates, so roundoff scales with |x|
    slack = 8 * np.finfo(float).eps * max(1.0, np.max(np.abs(m.nodes)))
    assert np.all(np.abs(np.diff(d)) <= m.h + slack)


@SETTINGS
@given(R=st.floats(0.1, 10), N=st.integers(2, 6), M=st.integers(8, 300))
def test_radial_weights_sum_to_volume(R, N, M):
    m = build_radial(R, N, M)
    assert abs(m.quad_weights.sum() / m.measure - 1) <= 1e-10


@st.composite
def smooth_fields(draw, mesh):
    c = draw(st.lists(st.floats(-1, 1), min_size=3, max_size=3))
    x = (mesh.nodes - mesh.lo) / (mesh.hi - mesh.lo)
    v = sum(ck * np.sin((k + 1) * np.pi * x) for k, ck in enumerate(c))
    return v + 2.0 * np.sin(np.pi * x)


MESH = build_interval(0, 1, 64)


@SETTINGS
@given(u=smooth_fields(MESH), p=st.floats(1.2, 5), s=st.floats(0.05, 20))
def test_operator_is_homogeneous_of_degree_p_minus_1(u, p, s):
    a = plap_apply(Field(MESH, s * u), p).values[MESH.interior]
    b = s ** (p - 1) * plap_apply(Field(MESH, u), p).values[MESH.interior]
    assert np.allclose(a, b, rtol=1e-9, atol=1e-9 * np.max(np.abs(b)))


@SETTINGS
@given(u=smooth_fields(MESH), p=st.floats(1.2, 5), c=finite)
def test_operator_ignores_constants(u, p, c):
    a = plap_apply(Field(MESH, u + c), p).values[MESH.interior]
    b = plap_apply(Field(MESH, u), p).values[MESH.interior]
    assert np.allclose(a, b, rtol=1e-7, atol=1e-7 * max(1.0, np.max(np.abs(b))))


@SETTINGS
@given(u=smooth_fields(MESH), p=st.floats(1.2, 5))
def test_operator_is_odd(u, p):
    a = plap_apply(Field(MESH, -u), p).values[MESH.interior]
    b = plap_apply(Field(MESH, u), p).values[MESH.interior]
    np.testing.assert_array_equal(a, -b)


@SETTINGS
@given(u=smooth_fields(MESH), p=st.floats(1.2, 5))
def test_discrete_divergence_theorem(u, p):
    # interior fluxes telescope: the node sum of the divergence vanishes
    A = kernels.flux_divergence(u, p, MESH.half_metric, MESH.h)
    du = np.diff(u) / MESH.h
    F = np.abs(du) ** (p - 2) * du
    assert math.isclose(A.sum(), 0.0, abs_tol=1e-9 * np.max(np.abs(F)) * 10)


SMALL = build_interval(0, 1, 64)


@settings(max_examples=12, deadline=None)
@given(p=st.floats(1.5, 3.5), dfrac=st.floats(0.1, 2.0), bfrac=st.floats(0.1, 0.9),
       la=st.floats(-3, 3))
def test_local_solution_classifies_as_solution(p, dfrac, bfrac, la):
    spec = ProblemSpec(p, dfrac, bfrac * (p - 1))
    alpha = 10.0**la
    u, rep = T(spec, SMALL, alpha, use_cache=False)
    assert rep.converged
    v = classify_subsolution(u, spec, SMALL, alpha)
    assert v.is_sub and v.is_super
    # scaling the solution down makes it a strict subsolution
    assert classify_subsolution(u.scaled(0.8), spec, SMALL, alpha).is_sub
    assert not classify_subsolution(u.scaled(0.8), spec, SMALL, alpha).is_super


@settings(max_examples=10, deadline=None)
@given(p=st.floats(1.5, 3.0), la=st.floats(-2, 2), ratio=st.floats(1.1, 10))
def test_solution_map_is_monotone(p, la, ratio):
    spec = ProblemSpec(p, 1.0, 0.5 * (p - 1))
    lo = T(spec, SMALL, 10.0**la, use_cache=False)[0].values
    hi = T(spec, SMALL, ratio * 10.0**la, use_cache=False)[0].values
    assert np.all(lo <= hi + 1e-6 * max(1, hi.max()))


@SETTINGS
@given(c=st.floats(0.01, 100), r=st.floats(-3, 3))
def test_constant_kernel_integral_is_measure(c, r):
    spec = ProblemSpec(2.0, 1.0, 0.5, r=r, g=ConstantKernel(c))
    u = Field(SMALL, 0.5 + SMALL.boundary_distance)
    assert math.isclose(g_integral(spec, SMALL, u), c, rel_tol=1e-12)


@SETTINGS
@given(v=st.floats(allow_nan=False))
def test_csv_float_round_trip(v):
    assert float(io.fmt(v)) == v
