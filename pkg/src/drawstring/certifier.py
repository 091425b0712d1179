"""Grid certification of the seven drawstring conditions for a radial profile."""
import json
from dataclasses import asdict, dataclass, field

import numpy as np
from scipy.optimize import minimize_scalar

from .params import DrawstringSpec
from .radial_metric import Stations, axis_distance, tube_volume
from .space_forms import DomainError, cn, sn

TOL_CLOSED = 1e-7
TOL_FD = 1e-4
TOL_BAND = 1e-10
CONDITIONS = ("I", "II", "III", "IV", "V", "VI", "VII")


@dataclass
class ConditionResult:
    status: str
    worst_margin: float
    r: float
    grid_size: int
    tol_abs: float
    where: str = ""
    detail: dict = field(default_factory=dict)

    @property
    def passed(self):
        return self.status == "pass"


def _jsonable(x):
    if isinstance(x, dict):
        return {str(k): _jsonable(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_jsonable(v) for v in x]
    if isinstance(x, (np.bool_, bool)):
        return bool(x)
    if isinstance(x, (np.integer,)):
        return int(x)
    if isinstance(x, (float, np.floating)):
        x = float(x)
        return x if np.isfinite(x) else repr(x)
    if isinstance(x, np.ndarray):
        return _jsonable(x.tolist())
    if hasattr(x, "to_dict"):
        return _jsonable(x.to_dict())
    return x if isinstance(x, (str, int, type(None))) else repr(x)


@dataclass
class CertificationReport:
    conditions: dict
    V0: float
    tol_abs: float
    oracle: dict = field(default_factory=dict)
    params: dict = field(default_factory=dict)
    method: str = ""

    @property
    def passed(self):
        return all(c.passed for c in self.conditions.values())

    def to_dict(self):
        return _jsonable(dict(schema=1, method=self.method, passed=self.passed, V0=self.V0, tol_abs=self.tol_abs,
                              conditions={k: asdict(v) for k, v in self.conditions.items()},
                              oracle=self.oracle, params=self.params))

    def to_json(self, **kw):
        return json.dumps(self.to_dict(), **kw)


def reference_volume(k, r1):
    """Volume of the radius-2r1 geodesic ball in the model surface of curvature k."""
    if k == 0:
        return 4.0 * np.pi * r1 * r1
    # 1 - cn(k, 2 r1) = 2 k sn(k, r1)^2 avoids cancellation
    return float(4.0 * np.pi * float(sn(k, r1)) ** 2)


# ---------------------------------------------------------------------------
# grid minimisation with a local polish


def _chart(S, j, seg):
    """Map a station to a 1-d chart parameter and its inverse."""
    x, r, w, ell = S.x[j], S.r[j], S.w[j], S.ell[j]
    if np.isfinite(x):
        if np.isfinite(w):
            wa = w + np.log(x)
            la = np.log(wa)
        else:
            wa, la = np.inf, ell
        same = np.isfinite(S.x) & (np.isfinite(S.w) == np.isfinite(w))
        return "x", np.log(S.x), same, lambda t: Stations.near(wa, la, np.exp([t]))
    if r > 1e-300:
        same = ~np.isfinite(S.x) & (S.r > 1e-300)
        with np.errstate(divide="ignore"):
            tt = np.log(S.r)
        return "r", tt, same, lambda t: Stations.from_r([np.clip(np.exp(t), seg.a if seg.a > 0 else 0, seg.b)])
    if np.isfinite(w):
        same = ~np.isfinite(S.x) & ~(S.r > 1e-300) & np.isfinite(S.w)
        return "w", np.log(S.w), same, lambda t: Stations.from_w([np.exp(t)])
    same = ~np.isfinite(S.x) & ~np.isfinite(S.w)
    return "ell", S.ell, same, lambda t: Stations.from_ell([t])


def segment_min(seg, S, values_fn, polish=True):
    """Minimum of values_fn over the segment's stations, refined between neighbouring stations."""
    vals = np.asarray(values_fn(S), dtype=float)
    bad = np.isnan(vals)
    if np.all(bad):
        return np.nan, 0
    j = int(np.nanargmin(vals))
    best = float(vals[j])
    if bad.any():
        return float("nan"), j
    if not polish or not np.isfinite(best):
        return best, j
    kind, t_all, same, make = _chart(S, j, seg)
    t0 = t_all[j]
    ts = t_all[same]
    lo = ts[ts < t0]
    hi = ts[ts > t0]
    if lo.size == 0 and hi.size == 0:
        return best, j
    a = lo.max() if lo.size else t0
    b = hi.min() if hi.size else t0

    def g(t):
        try:
            v = float(np.asarray(values_fn(make(t)))[0])
        except (DomainError, ValueError):
            return np.inf
        return v if np.isfinite(v) else np.inf
    if b > a:
        res = minimize_scalar(g, bounds=(a, b), method="bounded",
                              options=dict(xatol=max(1e-13 * abs(t0), 1e-15 * (b - a) + 1e-300), maxiter=200))
        if res.fun < best:
            best = float(res.fun)
    return best, j


def _station_r(S, j):
    return float(S.r[j]) if j < len(S) else float("nan")


# ---------------------------------------------------------------------------
# conditions


def _curvature_condition(p, k_target, n, polish):
    worst, where, r_at, total = np.inf, "", np.nan, 0
    per = {}
    for seg in p.segments:
        S = seg.stations(n)
        total += len(S)
        m, j = segment_min(seg, S, lambda T: seg.curvature(T).value() - k_target, polish)
        per[seg.label] = m
        if not (m >= worst):
            worst, where, r_at = m, seg.label, _station_r(S, j)
    return worst, where, r_at, total, per


def _mean_condition(p, n, polish):
    worst, where, r_at, total = np.inf, "", np.nan, 0
    per = {}
    for seg in p.segments:
        S = seg.stations(n)
        total += len(S)
        m, j = segment_min(seg, S, lambda T: seg.mean_curv(T).value(), polish)
        per[seg.label] = m
        if not (m >= worst):
            worst, where, r_at = m, seg.label, _station_r(S, j)
    return worst, where, r_at, total, per


def _outer_band(p, r1, weak, n):
    """Condition (II): the outer band is a product annulus, possibly translated."""
    seg = p.segments[-1]
    b = p.r_max
    if weak:
        lo = b - 0.5 * r1
        offset = b - 2.0 * r1
    else:
        lo, offset = r1, 0.0
    if lo < seg.a:
        return -np.inf, lo, 0, dict(reason="band leaves the outermost segment")
    r = np.linspace(lo, b, n)
    f, f1, _, u, _ = (np.asarray(v, dtype=float) for v in seg.jet(r))
    loc = r - offset
    s, c = np.asarray(sn(p.k, loc)), np.asarray(cn(p.k, loc))
    dev = np.maximum.reduce([np.abs(f - s) / np.abs(s), np.abs(f1 - c), np.abs(u)])
    j = int(np.argmax(dev))
    return TOL_BAND - float(dev[j]), float(r[j]), n, dict(band=[lo, b], offset=offset, weak_form=weak,
                                                           max_deviation=float(dev[j]))


def _u_extreme(seg, n, mode):
    S = seg.stations(n)
    u = np.asarray(seg.u_values(S), dtype=float)
    j = int(np.argmax(np.abs(u) if mode == "abs" else u))
    return float(u[j]), _station_r(S, j), len(S)


def fd_oracle(p, n=64, h_rel=1e-3):
    """Closed-form scalar curvature against central differences of f' and u.

    Only stations where the stencil moves f' by at least 1e-10 relative count;
    elsewhere f'' is below what a difference quotient of f' can resolve.
    """
    worst, where, used = 0.0, "", 0
    for seg in p.segments:
        try:
            S = seg.stations(n)
        except (DomainError, ValueError):
            continue
        keep = np.nonzero((S.r > 1e-250) & ~np.isfinite(S.x) & (S.r > seg.a) & (S.r < seg.b))[0]
        if keep.size == 0:
            continue
        r = S.r[keep]
        h = h_rel * np.minimum(np.minimum(r - seg.a, seg.b - r), r)
        r, h = r[h > 0], h[h > 0]
        if r.size == 0:
            continue
        try:
            f, f1, f2, u, u1 = (np.asarray(v, dtype=float) for v in seg.jet(r))
            _, f1p, _, up, _ = (np.asarray(v, dtype=float) for v in seg.jet(r + h))
            _, f1m, _, um, _ = (np.asarray(v, dtype=float) for v in seg.jet(r - h))
        except (DomainError, NotImplementedError, ValueError):
            continue
        with np.errstate(all="ignore"):
            f2_fd = (f1p - f1m) / (2 * h)
            u1_fd = (up - um) / (2 * h)
            R_fd = 2 * np.exp(2 * u) * (-f2_fd / f - u1_fd ** 2)
            R = seg.curvature(Stations.from_r(r)).value()
            scale = np.abs(2 * np.exp(2 * u)) * (np.abs(f2 / f) + u1 ** 2)
            rel = np.abs(R - R_fd) / scale
            resolved = np.abs(f1p - f1m) >= 1e-10 * np.abs(f1)
            unres_u = (np.abs(u1) > 0) & (np.abs(up - um) < 1e-10 * np.maximum(np.abs(u), 1e-300))
        good = resolved & ~unres_u & np.isfinite(rel) & np.isfinite(R_fd) & (np.abs(R) < 1e250)
        used += int(good.sum())
        if np.any(good) and rel[good].max() > worst:
            worst, where = float(rel[good].max()), seg.label
    return dict(max_relative_residual=worst, segment=where, resolved_points=used, tol=TOL_FD,
                ok=bool(worst <= TOL_FD))


def closed_form_curvature(c1, c2, r):
    """2/(r^2 w^{2+2 c2}) [c1 (c1+2)/(w - c1) + c1 - c2^2] at representable r."""
    w = -np.log(np.asarray(r, dtype=float))
    return 2.0 / (r * r * w ** (2 + 2 * c2)) * (c1 * (c1 + 2) / (w - c1) + c1 - c2 * c2)


def closed_form_cross_check(p, n=2000):
    """Max relative deviation between the profile's curvature and the prototype closed form.

    Where R overflows, both sides share the factor 1/(r^2 w^2) (or 1/r^2), so
    the bracket mantissa and e^{2u} are compared instead.
    """
    c1 = p.meta.get("c1")
    c2 = p.meta.get("c2")
    st = p.meta.get("state")
    if c1 is None and st is not None and getattr(st, "debug", False):
        c1, c2 = st.c1, st.c2
    if c1 is None or len(p.segments) != 1 or p.k != 0:
        raise ValueError("closed-form check needs a single prototype-form core segment")
    seg = p.segments[0]
    S = seg.stations(n)
    R = seg.curvature(S).value()
    B = seg.bracket(S)
    u = np.asarray(seg.u_values(S), dtype=float)
    w = np.asarray(S.w, dtype=float)
    ell = np.asarray(S.ell, dtype=float)
    with np.errstate(all="ignore"):
        direct = np.isfinite(R) & (R > 0) & (S.r > 1e-150)
        ref = closed_form_curvature(c1, c2, S.r)
        rel_direct = np.abs(R / ref - 1.0)
        # 1/(r^2 w^2) chart: brackets written with log-scale 2w - 2 ell
        ls = np.asarray(B.logscale)
        chart_wl = np.isclose(ls, 2 * w - 2 * ell, rtol=1e-14, atol=0) | ~np.isfinite(w)
        chart_w = np.isclose(ls, 2 * w, rtol=1e-14, atol=0) & ~chart_wl
        mant_ref = np.where(np.isfinite(w), c1 * (c1 + 2) / (w - c1), 0.0) + c1 - c2 * c2
        mant = np.asarray(B.mant) * np.where(chart_w, w * w, 1.0)
        rel_deep = np.abs(np.exp(2 * (u + c2 * ell)) * mant / mant_ref - 1.0)
    if np.any(~direct & ~chart_wl & ~chart_w):
        raise ValueError("core bracket uses an unknown log-scale chart")
    rel = np.where(direct, rel_direct, rel_deep)
    return float(np.max(rel))


# ---------------------------------------------------------------------------


def _param_values(p, params):
    if params is None:
        params = p.meta.get("params")
    if params is None:
        return {}
    return dict(params.values) if hasattr(params, "values") else dict(params)


def certify(p, spec=None, params=None, n=4000, polish=True):
    """Evaluate conditions (I)-(VII) on the profile's station grids."""
    spec = spec or p.meta.get("spec") or DrawstringSpec(k=p.k)
    if isinstance(spec, dict):
        spec = DrawstringSpec(**spec)
    vals = _param_values(p, params)
    method = p.meta.get("method", "")
    k = spec.k
    r1 = float(vals.get("r1", 0.5 * p.r_max))
    V0 = reference_volume(k, r1)
    C = {}

    m, where, r_at, total, per = _curvature_condition(p, 2 * (k - spec.epsilon), n, polish)
    C["I"] = ConditionResult("pass" if m >= -TOL_CLOSED else "fail", m, r_at, total, TOL_CLOSED, where,
                             dict(target=2 * (k - spec.epsilon), per_segment=per))

    m, r_at, g, det = _outer_band(p, r1, method == "A", 2001)
    C["II"] = ConditionResult("pass" if m >= 0 else "fail", m, r_at, g, TOL_BAND, p.segments[-1].label, det)

    u, r_at, g = _u_extreme(p.segments[-1], n, "abs")
    m = TOL_BAND - abs(u)
    C["III"] = ConditionResult("pass" if m >= 0 else "fail", m, r_at, g, TOL_BAND, p.segments[-1].label,
                               dict(max_abs_u=abs(u)))

    u, r_at, g = _u_extreme(p.segments[0], n, "max")
    m = spec.delta - float(np.exp(u))
    C["IV"] = ConditionResult("pass" if m >= 0 else "fail", m, r_at, g, 0.0, p.segments[0].label,
                              dict(max_exp_u=float(np.exp(u)), delta=spec.delta))

    m, where, r_at, total, per = _mean_condition(p, n, polish)
    C["V"] = ConditionResult("pass" if m > 0 else "fail", m, r_at, total, 0.0, where, dict(per_segment=per))

    d, de, dt = axis_distance(p, details=True)
    m = spec.r0 - (d + de + dt)
    C["VI"] = ConditionResult("pass" if m > 0 else "fail", m, 0.0, 0, 0.0, "axis",
                              dict(distance=d, quad_error=de, tail_bound=dt, r0=spec.r0))

    v, ve, vt = tube_volume(p, 1.0, details=True)
    m = 100 * V0 - (v + ve + vt)
    C["VII"] = ConditionResult("pass" if m > 0 else "fail", m, p.r_max, 0, 0.0, "tube",
                               dict(volume=v, quad_error=ve, tail_bound=vt, V0=V0, ratio=(v + ve + vt) / V0))

    oracle = dict(fd=fd_oracle(p))
    jr = p.junction_residuals()
    oracle["junctions"] = dict(max_df_rel=max((j["df_rel"] for j in jr), default=0.0),
                               max_df1=max((j["df1"] for j in jr), default=0.0),
                               max_du=max((j["du"] for j in jr), default=0.0))
    return CertificationReport(C, V0, TOL_CLOSED, oracle, vals, method)
