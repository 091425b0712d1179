import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from drawstring.certifier import certify, closed_form_curvature
from drawstring.cutoff_construction import (CutoffParams, PsiState, c1_objective, choose_c1, choose_c2, choose_r1,
                                            debug_profile, lemma_r1_checks, profile_from_params, psi, solve_r2)
from drawstring.params import DrawstringSpec
from drawstring.radial_metric import scalar_curvature
from drawstring.space_forms import sn

# a parameter set whose r2 is a normal double, so psi can be sampled directly
R1, C1, C2, DELTA = 1e-3, 0.01, 0.01, 0.99


@pytest.fixture(scope="module")
def shallow():
    root = solve_r2(C1, C2, R1, DELTA)
    cp = CutoffParams(0.0, 0.1, DELTA, 1e-2, R1, root.r2, root.ell2, root.w2, C1, C2)
    return root, PsiState(R1, root.ell2, C1, C2), profile_from_params(cp)


def test_r1_for_default_radius():
    r1, info = choose_r1(0.0, 1e-3)
    assert r1 <= 1e-3
    assert all(info["checks"].values())
    assert np.log(1 / r1) > 4


@settings(max_examples=15, deadline=None)
@given(k=st.floats(-4, 4), r0=st.floats(1e-6, 1e-2))
def test_r1_sine_ratio(k, r0):
    r1, _ = choose_r1(k, r0, n=2000)
    r = np.geomspace(r1 * 1e-8, r1, 500)
    ratio = np.asarray(sn(k, r)) / r
    assert np.all((0.5 <= ratio) & (ratio <= 2.0))


def test_r1_checks_reject_large_radius():
    checks, _ = lemma_r1_checks(0.0, 0.1, 1.0)
    assert not all(checks.values())


def test_r1_respects_cap():
    r1, _ = choose_r1(0.0, 1e-3, r1_max=1e-9)
    assert r1 <= 1e-9


def test_psi_inner_quadratic(shallow):
    _, st_, _ = shallow
    assert psi(st_.r2 / 4, st_) == pytest.approx(st_.r2 / 32, rel=1e-12)


def test_psi_bounds(shallow):
    _, st_, _ = shallow
    r = np.geomspace(st_.r2 * 1e-3, R1, 20_000)
    v = psi(r, st_)
    assert np.all(v <= 0.5)
    assert np.all(v <= 1 / np.log(1 / r) + st_.r2 / 2)


def test_objective_vanishes_at_zero():
    assert c1_objective(0.0, 0.0, 1e-3) == 0.0


def test_c1_below_r1_and_grid_feasible():
    r1, _ = choose_r1(0.0, 1e-3)
    c1, info = choose_c1(0.0, 0.1, r1)
    assert c1 < r1
    assert info["grid_min"] >= -0.1
    assert c1_objective(c1, 0.0, r1) >= -0.1


def test_c2_inequality_holds():
    c2, info = choose_c2(0.01, 1e-3, 0.1)
    assert c2 <= 0.01 and info["holds"]


@pytest.mark.parametrize("delta", [0.5, 0.9, 0.99])
def test_r2_root_hits_target(delta):
    root = solve_r2(C1, 0.05, R1, delta)
    L = np.log(1 / delta)
    assert abs(root.value - L) <= 1e-10 * L
    assert root.bracket[0] < root.ell2 < root.bracket[1]


def test_r2_integral_grows_without_bound():
    # smaller delta forces a smaller r2
    a, b = solve_r2(C1, C2, R1, 0.9), solve_r2(C1, C2, R1, 0.5)
    assert b.ell2 > a.ell2


def test_axis_warp_equals_delta(profile_b):
    st_ = profile_b.meta["state"]
    assert np.exp(st_.u0) == pytest.approx(0.1, rel=1e-10)
    assert np.exp(st_.u0) <= 0.1


def test_warp_bound_and_monotone(shallow):
    _, st_, p = shallow
    r = np.geomspace(st_.r2 * 1e-2, R1 * 0.999, 4000)
    u = np.concatenate([np.atleast_1d(p.segments[p.segment_index(x)].jet(x)[3]) for x in r])
    assert np.all(np.diff(u) >= -1e-15)
    assert np.all(-u <= C2 * np.log(np.log(1 / r)) + 1e-15)


def test_default_drawstring_certifies(profile_b, spec_b):
    rep = certify(profile_b, spec_b, n=2000)
    assert rep.passed, rep.to_dict()


def test_uncut_core_matches_closed_form():
    p = debug_profile(0.1, 0.1)
    for r in np.exp(-np.linspace(4, 60, 25)):
        assert scalar_curvature(p, r) == pytest.approx(closed_form_curvature(0.1, 0.1, r), rel=1e-8)


def test_invariants_recorded(profile_b):
    inv = profile_b.meta["params"].checks["invariants"]
    assert all(bool(v) for v in inv.values()), inv
