import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from drawstring.space_forms import DomainError, arctn, cn, make_cutoffs, sn, tn
from drawstring.space_forms import SERIES_SWITCH


def series_sn(k, r, terms=30):
    # sum_j (-k)^j r^{2j+1} / (2j+1)!
    out, term = 0.0, r
    for j in range(terms):
        out += term
        term *= -k * r * r / ((2 * j + 2) * (2 * j + 3))
    return out


def test_flat_branch_is_identity():
    assert sn(0, 0.7) == 0.7
    assert arctn(0, 0.3) == 0.3
    assert cn(0, 5.0) == 1.0


def test_sphere_quarter_values():
    assert sn(1, np.pi / 2) == pytest.approx(1.0, abs=1e-15)
    assert cn(1, np.pi / 2) == pytest.approx(0.0, abs=1e-15)


def test_hyperbolic_sine_against_power_series():
    assert sn(-1, 1.0) == pytest.approx(series_sn(-1.0, 1.0), rel=1e-14)
    assert sn(-1, 1.0) == pytest.approx(1.1752012, abs=1e-7)


@settings(max_examples=200, deadline=None)
@given(k=st.floats(-10, 10), x=st.floats(0, 1))
def test_pythagorean_identity(k, x):
    r = x * (min(np.pi / np.sqrt(k), 3.0) if k > 0 else 3.0)
    assert abs(k * sn(k, r) ** 2 + cn(k, r) ** 2 - 1.0) <= 1e-12 * max(1.0, cn(k, r) ** 2)


@settings(max_examples=100, deadline=None)
@given(k=st.floats(-5, 5), r=st.floats(0.05, 1.0))
def test_cn_derivative_is_minus_k_sn(k, r):
    h = 1e-6
    d = (cn(k, r + h) - cn(k, r - h)) / (2 * h)
    assert d == pytest.approx(-k * sn(k, r), abs=1e-7 * (1 + abs(k)))


@pytest.mark.parametrize("k", [-3.0, -0.5, 0.5, 4.0])
def test_series_and_closed_form_agree_at_switch(k):
    r = np.sqrt(SERIES_SWITCH / abs(k))
    s = np.sqrt(abs(k))
    closed = np.sin(s * r) / s if k > 0 else np.sinh(s * r) / s
    for rr in (r * (1 - 1e-9), r * (1 + 1e-9)):
        assert sn(k, rr) == pytest.approx(closed * rr / r, rel=1e-12)
    assert cn(k, r * (1 - 1e-9)) == pytest.approx(np.cos(s * r) if k > 0 else np.cosh(s * r), rel=1e-12)


@settings(max_examples=100, deadline=None)
@given(k=st.floats(-4, 4), x=st.floats(0.01, 0.95))
def test_arctn_inverts_tn(k, x):
    r = x * (np.pi / (2 * np.sqrt(k)) if k > 0 else 1.0)
    assert arctn(k, tn(k, r)) == pytest.approx(r, rel=1e-12)


def test_arctn_round_trip_by_bisection():
    target = tn(-0.5, 0.2)
    lo, hi = 0.0, 1.0
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        lo, hi = (mid, hi) if tn(-0.5, mid) < target else (lo, mid)
    assert arctn(-0.5, target) == pytest.approx(0.5 * (lo + hi), rel=1e-12)
    assert arctn(-0.5, target) == pytest.approx(0.2, rel=1e-12)


def test_domain_errors():
    with pytest.raises(DomainError):
        tn(1.0, np.pi / 2)
    with pytest.raises(DomainError):
        arctn(-1.0, 1.0)


def test_cutoff_plateaus():
    ker = make_cutoffs()
    assert ker.zeta(0.25) == 0.0 and ker.zeta(2.0) == 1.0
    assert ker.eta(0.25) == 1.0 and ker.eta(2.0) == 0.0


def test_cutoff_measured_bounds_within_slack():
    b = make_cutoffs().measured_bounds
    assert b["sup_zeta_d1"] <= 4 * 1.05
    assert b["sup_abs_zeta_d2"] <= 16 * 1.05
    assert b["grid_points"] == 100_000


def test_cutoff_monotone_on_transition():
    ker = make_cutoffs()
    x = np.linspace(0.5, 1.0, 20_001)
    assert np.all(np.diff(ker.zeta(x)) >= 0)
    assert np.all(np.diff(ker.eta(x)) <= 0)
