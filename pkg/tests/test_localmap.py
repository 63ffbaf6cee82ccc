import numpy as np
import pytest

from plapbranch import localmap
from plapbranch.localmap import (
    LARGE, SMALL, LadderError, T, barriers, check_membership, exponent_windows, ladder_start,
)
from plapbranch.mesh import build_interval
from plapbranch.plap import Field
from plapbranch.problem import ZERO, ProblemSpec
from plapbranch.spectral import first_eigenpair, torsion

SPEC = ProblemSpec(2.0, 1.0, 0.5)


@pytest.fixture(scope="module")
def aux(unit256):
    return first_eigenpair(SPEC, unit256), torsion(SPEC, unit256)


def test_monotone_in_alpha(unit256):
    fields = [T(SPEC, unit256, a)[0].values for a in np.geomspace(1e-3, 1e3, 12)]
    for lo, hi in zip(fields, fields[1:]):
        assert np.all(lo <= hi + 1e-6 * max(1, hi.max()))


@pytest.mark.parametrize("which,expo", [("b", lambda s: 1 / (s.p - 1 + s.delta)),
                                        ("a", lambda s: 1 / (s.p - 1 - s.beta))])
@pytest.mark.parametrize("p,delta,beta", [(2.0, 1.0, 0.5), (3.0, 0.5, 1.0)])
def test_pure_power_scaling_identity(unit256, which, expo, p, delta, beta):
    spec = ProblemSpec(p, delta, beta, **{which: ZERO})
    base = T(spec, unit256, 1.0)[0].values
    inner = unit256.interior
    for alpha in (1e-2, 10.0):
        u = T(spec, unit256, alpha)[0].values
        pred = alpha ** expo(spec) * base
        assert np.max(np.abs(u[inner] / pred[inner] - 1)) <= 1e-4


def test_ladder_gaps_shrink(unit256):
    for alpha in (1e-4, 1.0, 1e4):
        gaps = T(SPEC, unit256, alpha, use_cache=False)[1].ladder_gaps
        assert len(gaps) >= 1
        assert all(b <= a for a, b in zip(gaps, gaps[1:]))


def test_interior_floor_positive_and_increasing(unit256):
    d = unit256.boundary_distance
    middle = d >= 0.5 * d.max()
    floors = [T(SPEC, unit256, a)[0].values[middle].min() for a in np.geomspace(1e-3, 1e3, 8)]
    assert floors[0] > 0
    assert all(b >= a for a, b in zip(floors, floors[1:]))


def test_continuity_in_alpha(unit256):
    base = T(SPEC, unit256, 1.0)[0].sup
    diffs = [abs(T(SPEC, unit256, 1.0 + eps)[0].sup - base) for eps in (1e-1, 1e-2, 1e-3)]
    assert diffs[0] > diffs[1] > diffs[2]
    # Lipschitz-like: a tenfold smaller step moves sup T at least fivefold less
    assert diffs[1] < diffs[0] / 5 and diffs[2] < diffs[1] / 5


def test_ladder_non_convergence_attaches_iterates(unit256):
    with pytest.raises(LadderError) as info:
        T(SPEC, unit256, 1.0, k_max=0, use_cache=False)
    assert len(info.value.iterates) == 2


def test_rejects_non_positive_alpha(unit256):
    with pytest.raises(ValueError):
        T(SPEC, unit256, 0.0)


def test_cache_hit_and_capacity(unit256, fresh_cache, monkeypatch):
    first = T(SPEC, unit256, 2.0)
    assert T(SPEC, unit256, 2.0) is first
    monkeypatch.setattr(localmap, "CACHE_CAPACITY", 3)
    for a in (3.0, 4.0, 5.0):
        T(SPEC, unit256, a)
    assert len(localmap._cache) == 3
    assert T(SPEC, unit256, 2.0) is not first


@pytest.mark.parametrize("scale,k", [(2.0, 0), (1.0, 0), (0.5, 1), (0.3, 2), (1e-3, 10)])
def test_ladder_start(scale, k):
    assert ladder_start(scale) == k


def test_torsion_exponent_p2_delta1():
    assert exponent_windows(SPEC, SMALL)[2] == pytest.approx(0.5)


def test_large_alpha_window_p3_beta1():
    (q0, q1), (l0, l1), _ = exponent_windows(ProblemSpec(3.0, 1.0, 1.0), LARGE)
    assert q1 == pytest.approx(1.0) and l0 == pytest.approx(1.0)


def test_small_alpha_window_bounds():
    (q0, q1), (l0, l1), _ = exponent_windows(SPEC, SMALL)
    assert q0 == pytest.approx(0.5) and l1 == pytest.approx(0.5)


def test_small_alpha_sandwich(unit256, aux):
    eig, tor = aux
    alpha = 1e-4
    bars = barriers(SPEC, unit256, eig, tor, alpha, SMALL)
    assert bars.valid and bars.regime == SMALL
    assert bars.alpha0 is not None and bars.alpha0 >= alpha
    u = T(SPEC, unit256, alpha)[0]
    assert check_membership(u, bars)
    assert np.all(bars.lower.values <= bars.upper.values + 1e-12)


def test_large_alpha_sandwich(unit256, aux):
    eig, tor = aux
    bars = barriers(SPEC, unit256, eig, tor, 1e6, LARGE)
    assert bars.valid and bars.alpha_inf is not None and bars.alpha_inf <= 1e6
    assert check_membership(T(SPEC, unit256, 1e6)[0], bars)


def test_membership_examples(unit256, aux):
    eig, tor = aux
    bars = barriers(SPEC, unit256, eig, tor, 1e-3, SMALL)
    assert check_membership(bars.lower, bars)
    assert not check_membership(bars.upper.scaled(2.0), bars)
    other = build_interval(0, 1, 256)
    with pytest.raises(ValueError):
        check_membership(Field(other, bars.lower.values), bars)


def test_inverted_exponents_are_not_valid(unit256, aux):
    eig, tor = aux
    bars = barriers(SPEC, unit256, eig, tor, 1e-4, SMALL, invert=True)
    assert not bars.valid


def test_barriers_need_matching_mesh(aux):
    eig, tor = aux
    with pytest.raises(ValueError):
        barriers(SPEC, build_interval(0, 1, 256), eig, tor, 1.0, SMALL)
