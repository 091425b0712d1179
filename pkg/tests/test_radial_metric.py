import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from drawstring.certifier import fd_oracle
from drawstring.radial_metric import (FlatReference, ProfileError, RadialProfile, Stations, axis_distance,
                                      mean_curvature, one_sided_curvatures, product_profile, product_segment,
                                      profile_csv_rows, prototype_profile, scalar_curvature, tube_volume,
                                      w1p_deviation)
from drawstring.space_forms import DomainError


def test_round_sphere_times_line_has_curvature_two():
    assert scalar_curvature(product_profile(1.0, 1.0), 0.3) == pytest.approx(2.0, rel=1e-12)


def test_flat_profile_is_flat():
    p = product_profile(0.0, 1.0)
    for r in (1e-3, 0.2, 0.9):
        assert scalar_curvature(p, r) == 0.0


def test_prototype_value_at_e_minus_ten():
    # bracket 0.1 * 2.1 / 9.9 + 0.1 - 0.01
    p = prototype_profile(0.1, 0.1)
    r = np.exp(-10.0)
    bracket = 0.1 * 2.1 / 9.9 + 0.1 - 0.01
    assert bracket == pytest.approx(0.11121, abs=1e-5)
    R = scalar_curvature(p, r)
    assert R == pytest.approx(2.0 / (r * r * 10.0 ** 2.2) * bracket, rel=1e-12)
    assert R == pytest.approx(6.81e5, rel=2e-3)


def test_mean_curvature_examples():
    assert mean_curvature(product_profile(0.0, 1.0), 0.5) == pytest.approx(2.0)
    assert mean_curvature(product_profile(1.0, 1.0), np.pi / 4) == pytest.approx(1.0, rel=1e-12)


def test_mean_curvature_positive_on_drawstrings(profile_a, profile_b):
    for p in (profile_a, profile_b):
        for seg in p.segments:
            if seg.b == 0.0:
                continue
            H = seg.mean_curv(seg.stations(500))
            assert np.all(np.asarray(H.mant) > 0) or np.all(H.value() > 0)


def test_axis_distance_and_volume_of_flat_disc():
    r1 = 1e-3
    assert axis_distance(product_profile(0.0, 2 * r1)) == pytest.approx(2 * r1, rel=1e-12)
    assert tube_volume(product_profile(0.0, 0.7), 1.0) == pytest.approx(np.pi * 0.49, rel=1e-12)


def test_drawstring_distance_and_volume_bounds(profile_a, profile_b, spec_a):
    r1b = profile_b.meta["params"].values["r1"]
    assert axis_distance(profile_b) <= 3 * r1b
    assert tube_volume(profile_b, 1.0) <= 2 * np.pi * 6 * r1b ** 2
    r1a = profile_a.meta["params"].values["r1"]
    assert axis_distance(profile_a) < spec_a.r0
    assert tube_volume(profile_a, 1.0) < 100 * 4 * np.pi * r1a ** 2


def test_identical_profile_has_zero_deviation():
    assert w1p_deviation(product_profile(0.0, 0.5), FlatReference(0.0, 2 * np.pi), 1.5) == 0.0


@settings(max_examples=40, deadline=None)
@given(k=st.floats(-3, 3), u0=st.floats(-1, 1), alpha=st.floats(0.5, 1.0))
def test_product_segment_curvature_is_constant(k, u0, alpha):
    p = RadialProfile([product_segment(k, 0.0, 0.5, alpha, u0)], k=k)
    for r in (0.01, 0.2, 0.45):
        assert scalar_curvature(p, r) == pytest.approx(2 * k * np.exp(2 * u0), abs=1e-10 * (1 + abs(k)))


def test_finite_difference_oracle_on_prototype():
    res = fd_oracle(prototype_profile(0.1, 0.1), n=1000)
    assert res["resolved_points"] > 100
    assert res["max_relative_residual"] <= 1e-4


def test_enlarging_exp_minus_u_enlarges_distance_and_volume():
    lo, hi = product_profile(0.0, 0.3, u0=0.2), product_profile(0.0, 0.3, u0=-0.1)
    assert axis_distance(hi) > axis_distance(lo)
    assert tube_volume(hi, 1.0) > tube_volume(lo, 1.0)


@pytest.mark.parametrize("make", [lambda: prototype_profile(0.1, 0.1),
                                  lambda: product_profile(0.0, 0.4, u0=0.1),
                                  lambda: prototype_profile(0.3, 0.05)])
def test_normalized_deviation_nondecreasing_in_p(make):
    p = make()
    ref = FlatReference(0.0, 2 * np.pi)
    # two copies of the tube measure (value and gradient terms)
    V = 2 * (2 * np.pi * ref.period_t) * p.r_max ** 2 / 2
    ps = [1.0, 1.25, 1.5, 1.75, 1.9]
    vals = [w1p_deviation(p, ref, q) / V ** (1 / q) for q in ps]
    assert all(b >= a * (1 - 1e-9) for a, b in zip(vals, vals[1:]))


def test_segments_must_abut():
    with pytest.raises(ProfileError):
        RadialProfile([product_segment(0.0, 0.0, 0.1), product_segment(0.0, 0.2, 0.3)])


def test_evaluation_outside_domain_raises():
    with pytest.raises(DomainError):
        scalar_curvature(product_profile(0.0, 0.5), 0.6)


def test_junction_needs_a_side():
    p = RadialProfile([product_segment(0.0, 0.0, 0.1), product_segment(0.0, 0.1, 0.3)])
    with pytest.raises(DomainError):
        scalar_curvature(p, 0.1)
    assert one_sided_curvatures(p, 0.1) == (0.0, 0.0)


def test_csv_dump_sorted_and_unique(profile_b):
    rows = profile_csv_rows(profile_b, 400)
    r = [row[0] for row in rows]
    assert all(b > a for a, b in zip(r, r[1:]))
    assert all(len(row) == 9 for row in rows)


def test_deep_stations_keep_curvature_finite(profile_b):
    core = profile_b.segments[1]
    S = Stations.from_w(np.array([50.0, 500.0]))
    assert np.all(np.asarray(core.curvature(S).mant) > 0)
