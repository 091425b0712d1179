"""Exit-gate checks, one per criterion; each records a PASS/FAIL line.

Run with pytest (lines are repeated in the terminal summary) or directly:
    python3 tests/test_acceptance.py
"""
import time
from functools import lru_cache

import numpy as np
import pytest

import conftest
from _instances import smoothing_f_instance, smoothing_u_instance
from drawstring.certifier import certify, closed_form_curvature, reference_volume
from drawstring.cutoff_construction import build_drawstring_B
from drawstring.flat_torus_analysis import (FITTED, SAMPLE_ALPHA, SAMPLE_P, SAMPLE_Z, FlatTorus, GreenEvaluator,
                                            _sample_densities, brezis_merle_check, extremal_length_check, fit_C1,
                                            w1p_green_check)
from drawstring.gluing_construction import build_drawstring_A, smooth_f, smooth_u
from drawstring.params import DrawstringSpec
from drawstring.radial_metric import axis_distance, prototype_profile, scalar_curvature, tube_volume
from drawstring.sequence_assembly import build_sequence, mina_certificate, scrunch_report

SPEC_I = (2, 4, 8, 16)
SEQ_P = (1.0, 1.5, 1.9)


def record(n, ok, detail):
    line = f"CRITERION {n}: {'PASS' if ok else 'FAIL'} {detail}"
    conftest.ACCEPTANCE_LINES.append(line)
    print(line)
    assert ok, line


@lru_cache(maxsize=None)
def sequence(topology):
    seq = build_sequence(topology, 32)
    return seq, scrunch_report(seq, SEQ_P)


def test_criterion_1_closed_form():
    t0 = time.perf_counter()
    p = prototype_profile(0.1, 0.1)
    r = np.exp(-np.linspace(3.0, 30.0, 1000))
    R = np.array([scalar_curvature(p, x) for x in r])
    rel = float(np.max(np.abs(R / closed_form_curvature(0.1, 0.1, r) - 1)))
    dt = time.perf_counter() - t0
    record(1, rel <= 1e-8 and dt < 1.0, f"max rel dev {rel:.2e} (tol 1e-8) at 1000 pts, {dt:.2f} s (limit 1 s)")


def _certify_members(method, builder):
    out = []
    for i in SPEC_I:
        t0 = time.perf_counter()
        spec = DrawstringSpec(k=0.0, epsilon=1 / i, delta=1 / i, r0=1e-3, method=method)
        p = builder(spec)
        rep = certify(p, spec, n=10_000)
        out.append((i, p, rep, time.perf_counter() - t0))
    return out


def test_criterion_2_proof_b():
    rows = _certify_members("B", build_drawstring_B)
    ok = all(rep.passed and rep.conditions["I"].worst_margin >= -1e-7 and dt < 10 for _, _, rep, dt in rows)
    worst = min(rep.conditions["I"].worst_margin for _, _, rep, _ in rows)
    slow = max(dt for *_, dt in rows)
    record(2, ok, f"i={SPEC_I}: all 7 conditions {'pass' if ok else 'FAIL'}; min (I)-margin {worst:.3e}; "
                  f"slowest member {slow:.2f} s (limit 10 s)")


def test_criterion_3_proof_a():
    rows = _certify_members("A", build_drawstring_A)
    ok, notes = True, []
    for i, p, rep, dt in rows:
        tg = p.meta["params"].checks["piece_targets"]
        eps_w = p.meta["params"].values["eps_work"]
        cone = tg["cone"]["max_deviation"]
        good = (rep.passed and rep.conditions["I"].worst_margin >= -1e-7 and dt < 10 and cone <= 1e-9
                and tg["core"]["grid_min"] >= 90 and tg["cap"]["grid_min"] >= 100)
        ok &= good
        notes.append(f"i={i}: {dt:.1f}s cone dev {cone:.1e} from 2(k-{eps_w:g}), core min {tg['core']['grid_min']:.2e}, "
                     f"cap min {tg['cap']['grid_min']:.2e}")
    record(3, ok, "; ".join(notes))


def test_criterion_4_cross_construction():
    ok, notes = True, []
    for i in SPEC_I:
        spec = DrawstringSpec(k=0.0, epsilon=1 / i, delta=1 / i, r0=1e-3, method="A")
        pa = build_drawstring_A(spec)
        r1a = pa.meta["params"].values["r1"]
        pb_free = build_drawstring_B(DrawstringSpec(k=0.0, epsilon=1 / i, delta=1 / i, r0=1e-3, method="B"))
        # both r1 values are admissible "sufficiently small" choices; compare at A's
        pb = build_drawstring_B(DrawstringSpec(k=0.0, epsilon=1 / i, delta=1 / i, r0=1e-3, method="B", r1_max=r1a))
        vals = []
        for p in (pa, pb):
            r1 = p.meta["params"].values["r1"]
            d, v = axis_distance(p), tube_volume(p, 1.0)
            ok &= d < spec.r0 and v < 100 * reference_volume(0.0, r1)
            vals.append(v)
        ratio = vals[0] / vals[1]
        free = vals[0] / tube_volume(pb_free, 1.0)
        ok &= 1 / 20 <= ratio <= 20
        notes.append(f"i={i}: vol A/B {ratio:.3f} (B with uncapped r1: {free:.1e})")
    record(4, ok, "; ".join(notes))


def test_criterion_5_smoothing():
    rng = np.random.default_rng(2024)
    u_ok = f_ok = 0
    for _ in range(50):
        c = smooth_u(n=10_000, **smoothing_u_instance(rng)).certificate
        u_ok += c["conclusion_1"] and c["conclusion_2"] and c["conclusion_3"]
    for _ in range(50):
        c = smooth_f(n=10_000, **smoothing_f_instance(rng)).certificate
        f_ok += c["conclusion_1"] and c["conclusion_2"]
    record(5, u_ok == 50 and f_ok == 50, f"u-smoothing {u_ok}/50, f-smoothing {f_ok}/50 at 10^4 grid points")


def test_criterion_6_scrunching():
    ok, notes = True, []
    for topo in ("T3", "S2xS1"):
        seq, recs = sequence(topo)
        exact = all(r.eps_i == 1 / r.i and r.delta_i == 1 / r.i for r in recs)
        H = all(r.H_i <= 3 / r.i for r in recs)
        vol = all(r.vol_Ui <= 2 * np.pi / r.i ** 2 + 50 / r.i ** 4 for r in recs)
        defn = all(r.checks["definition_conditions"] for r in recs)
        curv = all(m.report.conditions["I"].passed and 2 * (m.spec.k - m.spec.epsilon) >= 2 * m.spec.k - 1 / m.i - 1e-15
                   for m in seq)
        ok &= exact and H and vol and defn and curv
        notes.append(f"{topo} i=2..32: eps=delta=1/i {exact}, H<=3/i {H}, volU bound {vol}, "
                     f"definition {defn}, R>=2k-1/i {curv}")
    record(6, ok, "; ".join(notes))


def test_criterion_7_w1p():
    _, recs = sequence("T3")
    ok, notes = True, []
    for q in SEQ_P:
        w = [r.w1p[q] for r in recs]
        dec = all(b < a for a, b in zip(w, w[1:]))
        ratio = w[-1] / w[0]
        ok &= dec and ratio < 0.25
        notes.append(f"p={q}: strictly decreasing {dec}, w(32)/w(2)={ratio:.3f}")
    record(7, ok, "; ".join(notes))


def test_criterion_8_mina():
    ok, notes = True, []
    for topo in ("T3", "S2xS1"):
        seq, _ = sequence(topo)
        certs = [mina_certificate(m.profile, topo, m.report) for m in seq]
        valid = sum(c["valid"] for c in certs)
        ok &= valid == len(certs)
        if topo == "T3":
            ok &= all(c["area_lower_bound"] == np.pi / 4 for c in certs)
        notes.append(f"{topo}: {valid}/{len(certs)} valid, bound {certs[0]['bound_tag']}")
    record(8, ok, "; ".join(notes))


def test_criterion_9_green_constants():
    evs = [GreenEvaluator(FlatTorus(z)) for z in SAMPLE_Z]
    # fresh pairs and densities, not the ones the constants were fitted on
    c1 = fit_C1(evs, npairs=1000, seed=12345)["C1"]
    bm = max(a * brezis_merle_check(ev, f, a, n=128, C2=1.0)[0]
             for ev in evs for f in _sample_densities(ev.torus, seed=777) for a in SAMPLE_ALPHA)
    c3 = max(w1p_green_check(ev, f, p, n=128)[1]
             for ev in evs for f in _sample_densities(ev.torus, seed=777) for p in SAMPLE_P)
    ok = c1 <= FITTED["C1"] and bm <= FITTED["C2"] and c3 <= FITTED["C3"]
    record(9, ok, f"fresh sup C1 {c1:.4f} <= {FITTED['C1']}, alpha*integral {bm:.3f} <= C2 {FITTED['C2']}, "
                  f"ratio {c3:.4f} <= C3 {FITTED['C3']}")


def test_criterion_10_extremal_length():
    res = extremal_length_check(FlatTorus(1j))
    others = all(extremal_length_check(FlatTorus(z), levels=(2, 4, 8))["all_below"] for z in SAMPLE_Z[1:])
    ok = res["all_below"] and res["finest_rel_gap"] <= 0.05 and others
    record(10, ok, f"z=i sups {[round(s, 6) for s in res['sups']]} <= {res['exact']}, finest gap "
                   f"{res['finest_rel_gap']:.1e} (tol 0.05); other sample tori below: {others}")


if __name__ == "__main__":
    raise SystemExit(pytest.main([__file__, "-q", "-s"]))
