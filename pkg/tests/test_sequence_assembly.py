import numpy as np
import pytest

from drawstring.radial_metric import ClosedFormSegment, RadialProfile, product_segment
from drawstring.sequence_assembly import (CIRCLE, TOPOLOGIES, PulledStringSpace, build_sequence, member_spec,
                                          mina_certificate, pulled_string_distance, scrunch_report,
                                          sequence_rows, torus_distance)


@pytest.fixture(scope="module")
def t3():
    return build_sequence("T3", 5, n=2000)


@pytest.fixture(scope="module")
def s2s1():
    return build_sequence("S2xS1", 4, n=2000)


def test_ambient_circles():
    assert CIRCLE == 2 * np.pi
    assert TOPOLOGIES["T3"]["ambient_volume"] == pytest.approx((2 * np.pi) ** 3)


def test_round_factor_uses_unit_curvature():
    spec = member_spec("S2xS1", 3)
    assert spec.k == 1.0
    assert 2 * (spec.k - spec.epsilon) >= 2 - 1 / 3


def test_first_member_certifies(t3):
    m = t3[0]
    assert m.i == 2 and m.eps_i == 0.5
    assert m.report.passed


def test_records_decrease_and_obey_bounds(t3):
    recs = scrunch_report(t3, (1.0, 1.5, 1.9))
    for a, b in zip(recs, recs[1:]):
        assert b.eps_i < a.eps_i and b.delta_i < a.delta_i and b.H_i < a.H_i
        assert b.diam_bound <= a.diam_bound
        for q in (1.0, 1.5, 1.9):
            assert b.w1p[q] < a.w1p[q]
    for r in recs:
        assert all(r.checks.values()), (r.i, r.checks)
        assert r.H_i <= 3 / r.i
        assert r.vol_Ui <= 2 * np.pi / r.i ** 2 + 50 / r.i ** 4
        assert 2 * r.delta_i < r.H_i


def test_round_sequence_checks(s2s1):
    for r in scrunch_report(s2s1, (1.5,)):
        assert all(r.checks.values()), (r.i, r.checks)


def test_gamma_length_read_from_profile(t3):
    for r, m in zip(scrunch_report(t3, (1.5,)), t3):
        assert r.gamma_length <= CIRCLE * m.spec.delta * (1 + 1e-9)


def test_rows_have_csv_shape(t3):
    rows = sequence_rows(scrunch_report(t3, (1.5,)), 1.5)
    assert [row[0] for row in rows] == [2, 3, 4, 5]
    assert all(len(row) == 6 for row in rows)


def test_r1_nonincreasing(t3):
    r1 = [m.profile.meta["params"].values["r1"] for m in t3]
    assert all(b <= a for a, b in zip(r1, r1[1:]))


def test_bad_topology():
    with pytest.raises(ValueError):
        build_sequence("RP3", 3)


def _torus_space(rng, n=60):
    pts = rng.random((n, 3)) * CIRCLE
    sig = np.stack([np.linspace(0, CIRCLE, 200, endpoint=False), np.zeros(200), np.zeros(200)], 1)
    pts[:5] = sig[::40]
    return PulledStringSpace(pts, sig, torus_distance((CIRCLE,) * 3))


def test_point_on_string():
    sp = _torus_space(np.random.default_rng(1))
    for y in range(5, 20):
        assert pulled_string_distance(sp, 0, y) == pytest.approx(sp.d_sigma(sp.points[y]), abs=1e-12)


def test_far_string_is_not_used():
    sig = np.array([[3.0, 3.0, 3.0]])
    pts = np.array([[0.1, 0.1, 0.1], [0.2, 0.1, 0.1]])
    sp = PulledStringSpace(pts, sig, torus_distance((CIRCLE,) * 3))
    assert pulled_string_distance(sp, 0, 1) == pytest.approx(0.1)


def test_triangle_inequality_on_triples():
    rng = np.random.default_rng(7)
    sp = _torus_space(rng)
    n = len(sp.points)
    for _ in range(1000):
        x, y, z = (int(v) for v in rng.integers(0, n, 3))
        dxz = pulled_string_distance(sp, x, z)
        assert dxz <= pulled_string_distance(sp, x, y) + pulled_string_distance(sp, y, z) + 1e-12


def test_unknown_point():
    sp = _torus_space(np.random.default_rng(2))
    with pytest.raises(KeyError):
        pulled_string_distance(sp, 0, 10_000)


def test_mina_bounds(t3, s2s1):
    c = mina_certificate(t3[-1].profile, "T3", t3[-1].report)
    assert c["valid"] and c["area_lower_bound"] == pytest.approx(np.pi / 4)
    c = mina_certificate(s2s1[-1].profile, "S2xS1", s2s1[-1].report)
    assert c["valid"] and "comparison geometry" in c["bound_tag"]


def test_mina_voided_by_folded_band():
    # f decreasing on (0.01, 0.015): the level tori there are mean-concave
    fold = ClosedFormSegment(0.01, 0.015, lambda r: 0.02 - np.asarray(r, dtype=float),
                             lambda r: -np.ones_like(np.asarray(r, dtype=float)),
                             lambda r: np.zeros_like(np.asarray(r, dtype=float)), label="fold")
    p = RadialProfile([product_segment(0.0, 0.0, 0.01), fold, product_segment(0.0, 0.015, 0.04)])
    c = mina_certificate(p, "T3")
    assert not c["valid"] and c["area_lower_bound"] is None
