"""Drawstring glued from four warped-product pieces, then smoothed.

From the outside in: a product annulus (f = sn_k), a slightly acute cone of
curvature k - eps (f = alpha sn_{k-eps}), the core f = r (1 - c1/w) with
u = -c2 h(r/r4) log w, and a round cap f = sn_A. The pieces meet C^{1,1};
smooth_u makes u constant near the cap and smooth_f mollifies f at the
junctions. The inner radius r5 has log log(1/r5) ~ 1/c2 ~ 1e52, so the core
and the cap are evaluated in the w, ell and x = r/r5 charts.
"""
from dataclasses import asdict, dataclass, field

import numpy as np

from .params import DrawstringSpec, SolvedParams, StageError
from .quadrature import integrate
from .radial_metric import (
    W_CAP, ClosedFormSegment, RadialProfile, Scaled, Segment, Stations, _tail, concat_stations,
)
from .space_forms import DomainError, arctn, bump, bump_moments, cn, cot_correction, make_cutoffs, sn, tn

MAX_STEPS = 200
LN2 = np.log(2.0)
C2_SAFETY = 0.999
_GLX, _GLW = np.polynomial.legendre.leggauss(32)
_EPS = np.finfo(float).eps


class SearchExhausted(RuntimeError):
    pass


def _mk(k):
    return max(abs(k), 1.0)


def working_parameters(k, eps, r0):
    """Shrink (eps, r0) to the caps assumed by the gluing argument.

    The smoothing step costs another eps, so the pieces are built with at
    most eps/2 and the public bound 2(k - eps) is kept.
    """
    eps_w = min(0.5 * eps, 1e-3 * min(2.0, 1.0 + abs(k)))
    r0_w = min(r0, 1e-3 * (min(1.0, 1.0 / abs(k)) if k != 0 else 1.0))
    return eps_w, r0_w


def outer_cutoff():
    """h(x) = eta(2x - 1/2): 1 on [0, 1/2], 0 on [3/4, 1]."""
    ker = make_cutoffs()

    def h(x, nu=0):
        return (2.0 ** nu) * np.asarray(ker.eta(2.0 * np.asarray(x, dtype=float) - 0.5, nu))
    return h, 2.0 * ker.measured_bounds["sup_abs_eta_d1"]


# ---------------------------------------------------------------------------
# r1


def lemma_r1_checks_A(k, eps, r1, r0, n=10_000):
    w1 = -np.log(r1)
    w = np.geomspace(w1, 1e4 * w1, n)
    ell = np.log(w)
    with np.errstate(under="ignore"):
        r = np.exp(-w)
    rr = r[r > 0]
    kp = k - eps
    margins = {}
    try:
        r2 = float(arctn(kp, tn(k, r1)))
        margins["cone_radius"] = min(r2 - 0.5 * r1, 2 * r1 - r2)
    except DomainError:
        margins["cone_radius"] = -np.inf
    margins["distance_budget"] = r0 - r1 * (7 * w1 + 4)
    lo = min(np.min(np.asarray(sn(kk, rr)) / rr) for kk in (k - 1.0, k + 1.0))
    hi = max(np.max(np.asarray(sn(kk, rr)) / rr) for kk in (k - 1.0, k + 1.0))
    margins["sn_band"] = min(lo - 0.5, 2.0 - hi)
    r2w = np.where(np.isfinite(w), np.exp(-2 * np.minimum(w, 745.0)), 0.0)
    e1 = kp * r2w + 2 / w + 1 / w ** 2
    e2 = kp * r2w + 1 / w
    margins["unit_interval"] = float(min(e1.min(), e2.min(), 1 - e1.max(), 1 - e2.max()))
    margins["sqrt_r_log"] = float(np.min(np.log(1e-3) - (-0.5 * w + ell)))
    margins["power_log"] = float(np.min(-np.log(8.0) + 0.5 * w - 5 * ell) - np.log(100 * _mk(k)))
    checks = {key: bool(v >= 0 if key in ("cone_radius", "sn_band", "unit_interval") else v > 0)
              for key, v in margins.items()}
    checks["r1_le_r0"] = bool(r1 <= r0)
    return checks, margins


def choose_r1_A(k, eps, r0, r1_max=None, n=10_000):
    r1 = 0.5 * r0
    if r1_max is not None:
        r1 = min(r1, float(r1_max))
    for _ in range(MAX_STEPS):
        checks, margins = lemma_r1_checks_A(k, eps, r1, r0, n)
        if all(checks.values()):
            return r1, dict(checks=checks, margins=margins)
        r1 *= 0.5
    raise SearchExhausted(f"no admissible r1 after {MAX_STEPS} halvings")


# ---------------------------------------------------------------------------
# matching systems


def solve_matching_12(k, eps, r1):
    """C^1 matching of the product annulus with the cone: returns (r2, alpha, residuals)."""
    kp = k - eps
    r2 = float(arctn(kp, tn(k, r1)))
    alpha = float(np.sqrt(1.0 - eps * float(sn(k, r1)) ** 2))
    res = (abs(alpha * float(sn(kp, r2)) - float(sn(k, r1))),
           abs(alpha * float(cn(kp, r2)) - float(cn(k, r1))))
    return r2, alpha, res


def quadratic_root(a, b, d):
    """Smaller root of a c^2 - 2 b c + d = 0, written without cancellation."""
    disc = b * b - a * d
    if disc < 0:
        raise DomainError("negative discriminant in the c1 quadratic")
    return d / (b + np.sqrt(disc))


def arcsn(k, y):
    k = float(k)
    if k == 0:
        return float(y)
    s = np.sqrt(abs(k))
    return float(np.arcsin(s * y) / s) if k > 0 else float(np.arcsinh(s * y) / s)


def solve_c1_quadratic(k, eps, r1, alpha):
    """C^1 matching of the cone with the core: returns (c1, r3, info)."""
    kp = k - eps
    r4 = eps * r1 * r1
    w4 = -np.log(r4)
    a = 1 / w4 ** 2 + kp * r4 ** 2 / w4 ** 2 + 2 / w4 ** 3 + 1 / w4 ** 4
    b = 1 / w4 + 1 / w4 ** 2 + kp * r4 ** 2 / w4
    # 1 - alpha^2 = eps sn_k(r1)^2 by the first matching system
    d = eps * float(sn(k, r1)) ** 2 + kp * r4 ** 2
    c1 = quadratic_root(a, b, d)
    y = r4 * (1 - c1 / w4) / alpha
    r3 = arcsn(kp, y)
    lo, hi = w4 * eps * r1 * r1 / 32.0, np.sqrt(8 * r4) * w4
    info = dict(a=a, b=b, d=d, disc=b * b - a * d, r4=r4, w4=w4, c1_lower=lo, c1_upper=hi,
                residuals=(abs(r4 * (1 - c1 / w4) - alpha * float(sn(kp, r3))),
                           abs(1 - c1 / w4 - c1 / w4 ** 2 - alpha * float(cn(kp, r3)))))
    if not (lo <= c1 <= hi):
        raise StageError("solve_c1_quadratic", f"c1={c1} outside [{lo}, {hi}]")
    if not (0 < r3 <= 4 * eps * r1 * r1):
        raise StageError("solve_c1_quadratic", f"r3={r3} outside (0, 4 eps r1^2]")
    return c1, r3, info


def choose_c2_A(c1, eps, r1, k):
    bound_curv = np.sqrt(_mk(k)) * eps * r1 * r1 / (16.0 * np.log(np.log(2.0 / (eps * r1 * r1))))
    c2 = C2_SAFETY * min(np.sqrt(c1 / 2.0), 0.01, bound_curv)
    lhs = c2 ** 2 * 256.0 / (eps ** 2 * r1 ** 4) * np.log(np.log(2 / (eps * r1 * r1))) ** 2
    return c2, dict(sqrt_half_c1=np.sqrt(c1 / 2.0), curvature_bound=bound_curv, lhs=lhs, rhs=_mk(k),
                    holds=bool(lhs <= _mk(k) and c2 <= min(np.sqrt(c1 / 2), 0.01)))


# ---------------------------------------------------------------------------
# core functions at representable radii


def f3_jet(c1, r):
    r = np.asarray(r, dtype=float)
    w = -np.log(r)
    return r * (1 - c1 / w), 1 - c1 / w - c1 / w ** 2, -c1 * (w + 2) / (r * w ** 3)


def v3_jet(c2, r4, r):
    h, _ = outer_cutoff()
    r = np.asarray(r, dtype=float)
    w = -np.log(r)
    x = r / r4
    return -c2 * h(x) * np.log(w), c2 * h(x) / (r * w) - c2 / r4 * h(x, 1) * np.log(w)


# ---------------------------------------------------------------------------
# r5 and the cap


def r5_conditions(ell5, c1, c2, r4, delta, k):
    """The four inner-radius conditions in log form (margins >= 0 means satisfied)."""
    with np.errstate(over="ignore"):
        w5 = float(np.exp(ell5))
    inv = 0.0 if not np.isfinite(w5) else 1.0 / w5
    w4 = -np.log(r4)
    ell_2r5 = ell5 + np.log1p(-LN2 * inv)
    with np.errstate(over="ignore", invalid="ignore"):
        m = {
            "r5_le_r4_over_100": w5 - (w4 + np.log(100.0)),
            "v3_at_2r5": (np.log(delta) - 1.0) - (-c2 * ell_2r5),
            "cap_curvature": np.log(c1) + 2 * w5 - (1 + 2 * c2) * ell5 - np.log(100 * _mk(k)),
            "f_over_fprime": 2.0 - (1 - c1 * inv) / (1 - c1 * inv - c1 * inv * inv),
        }
    return {key: float(v) for key, v in m.items()}


def choose_r5(c1, c2, r4, delta, k, refine=80):
    """Search on ell = log log(1/r5): double ell until all conditions hold, then bisect back."""
    ell = float(np.log(-np.log(r4) + np.log(100.0)))
    ok = lambda l: all(v >= 0 for v in r5_conditions(l, c1, c2, r4, delta, k).values())
    lo = None
    for _ in range(MAX_STEPS):
        if ok(ell):
            break
        lo = ell
        ell *= 2.0
    else:
        raise SearchExhausted(f"no admissible r5 after {MAX_STEPS} doublings of log log(1/r5)")
    hi = ell
    if lo is not None:
        for _ in range(refine):
            mid = 0.5 * (lo + hi)
            if mid <= lo or mid >= hi:
                break
            if ok(mid):
                hi = mid
            else:
                lo = mid
    return hi, r5_conditions(hi, c1, c2, r4, delta, k)


def solve_matching_34(f3v, f3pv):
    """Cap of curvature A with sn_A(r6) = f3(r5), cn_A(r6) = f3'(r5)."""
    if not (0 < f3pv < 1):
        raise DomainError("f3'(r5) must lie in (0, 1)")
    A = (1 - f3pv ** 2) / f3v ** 2
    if not A > 0:
        raise StageError("solve_matching_34", "A <= 0")
    r6 = float(arctn(A, f3v / f3pv))
    return A, r6


def matching_34_scaled(c1, ell5):
    """Cap matching in units of r5: returns log(A r5^2), r6/r5 and the log-form checks."""
    with np.errstate(over="ignore"):
        w5 = float(np.exp(ell5))
    inv = 0.0 if not np.isfinite(w5) else 1.0 / w5
    t = c1 * inv * (1 + inv)  # 1 - f3'(r5)
    log_At = np.log(c1) - ell5 + np.log1p(inv) + np.log(2 - t) - 2 * np.log1p(-c1 * inv)
    At = float(np.exp(log_At))
    y = (1 - c1 * inv) / (1 - t)
    x6 = float(arctn(At, y)) if At > 0 else y
    checks = dict(A_lower_bound=bool(log_At >= np.log(c1) - ell5), r6_le_2r5=bool(x6 <= 2.0),
                  log_A_scaled=float(log_At), log_A=float(log_At + 2 * w5) if np.isfinite(w5) else np.inf)
    return float(log_At), x6, checks


# ---------------------------------------------------------------------------
# smoothing of u near an endpoint


@dataclass
class SmoothU:
    """u = v(s+mu) + int_{s+mu}^r zeta((p-s)/mu)^q v'(p) dp on [s, t]."""
    s: float
    t: float
    mu: float
    q: float
    v: object
    v1: object
    v_anchor: float
    nodes: np.ndarray = None
    cum: np.ndarray = None
    certificate: dict = field(default_factory=dict)

    def weight(self, r):
        ker = make_cutoffs()
        z = np.asarray(ker.zeta((np.asarray(r, dtype=float) - self.s) / self.mu))
        with np.errstate(divide="ignore", under="ignore"):
            return np.where(z > 0, np.exp(self.q * np.log(np.maximum(z, 1e-300))), 0.0)

    def u1(self, r):
        r = np.asarray(r, dtype=float)
        return self.weight(r) * np.asarray(self.v1(r))

    def u(self, r):
        r = np.atleast_1d(np.asarray(r, dtype=float))
        out = np.asarray(self.v(r), dtype=float).copy()
        inside = r < self.s + self.mu
        if np.any(inside):
            ri = r[inside]
            j = np.clip(np.searchsorted(self.nodes, ri) - 1, 0, len(self.nodes) - 2)
            a = self.nodes[j]
            mid = 0.5 * (a + ri)
            half = 0.5 * (ri - a)
            x = mid[:, None] + half[:, None] * _GLX[None, :]
            part = (self.u1(x.ravel()).reshape(x.shape) * _GLW).sum(axis=1) * half
            out[inside] = self.v_anchor - (self.cum[-1] - self.cum[j]) + part
        return out


def _weight_integral(q):
    ker = make_cutoffs()
    f = lambda y: np.exp(q * np.log(np.maximum(np.asarray(ker.zeta(y)), 1e-300))) * (np.asarray(ker.zeta(y)) > 0)
    val, _ = integrate(f, 0.5, 1.0, breakpoints=tuple(np.linspace(0.5, 1.0, 65)[1:-1]),
                       abs_tol=1e-300, rel_tol=1e-10)
    return val


def smooth_u(f, v, lam, s, t, mu, n=10_000):
    """Make v constant near s while keeping the curvature expression >= lam (1 - sqrt(mu)).

    f and v are callables returning (value, d1[, d2]) at arrays of radii.
    """
    if not (0 < mu <= min(0.25 * (t - s), 1.0)):
        raise ValueError("mu must lie in (0, min{(t-s)/4, 1}]")
    grid = np.concatenate([np.linspace(s, s + mu, n // 2, endpoint=False), np.linspace(s + mu, t, n - n // 2)])
    F, F1, F2 = (np.asarray(a) for a in f(grid))
    V, V1 = (np.asarray(a) for a in v(grid)[:2])
    hyp = np.exp(2 * V) * (-F2 / F - V1 ** 2)
    if lam < 1 or np.min(hyp) < lam:
        raise ValueError("hypothesis e^{2v}(-f''/f - v'^2) >= lam >= 1 fails on the grid")
    sup_v1 = float(np.max(np.abs(V1)))
    target = 1.0 / (4.0 * max(sup_v1, 1e-300))
    q = 1.0
    for _ in range(MAX_STEPS):
        if _weight_integral(q) <= target:
            break
        q *= 2.0
    else:
        raise SearchExhausted(f"no exponent q after {MAX_STEPS} doublings")
    vf = lambda r: np.asarray(v(np.asarray(r, dtype=float))[0])
    v1f = lambda r: np.asarray(v(np.asarray(r, dtype=float))[1])
    nodes = np.linspace(s, s + mu, 513)
    su = SmoothU(s, t, mu, q, vf, v1f, float(vf(np.array([s + mu]))[0]), nodes=nodes)
    a, b = nodes[:-1], nodes[1:]
    mid, half = 0.5 * (a + b), 0.5 * (b - a)
    x = mid[:, None] + half[:, None] * _GLX[None, :]
    cells = (su.u1(x.ravel()).reshape(x.shape) * _GLW).sum(axis=1) * half
    su.cum = np.concatenate([[0.0], np.cumsum(cells)])
    U = su.u(grid)
    U1 = su.u1(grid)
    R = np.exp(2 * U) * (-F2 / F - U1 ** 2)
    win = grid <= s + mu
    const = grid <= s + 0.5 * mu
    su.certificate = dict(
        q=q, weight_integral=_weight_integral(q) * mu, weight_target=mu * target,
        equals_v_outside=bool(np.all(U[~win] == V[~win])),
        constant_near_s=float(np.max(np.abs(U[const] - U[const][0]))) if np.any(const) else 0.0,
        max_dev_from_anchor=float(np.max(np.abs(U[win] - su.v_anchor))),
        curvature_margin=float(np.min(R - lam * (1 - np.sqrt(mu)))),
        grid_points=int(n),
    )
    c = su.certificate
    c["conclusion_1"] = bool(c["equals_v_outside"] and c["constant_near_s"] <= 4 * _EPS * (1 + abs(su.v_anchor)))
    c["conclusion_2"] = bool(c["max_dev_from_anchor"] <= mu)
    c["conclusion_3"] = bool(c["curvature_margin"] >= 0)
    return su


# ---------------------------------------------------------------------------
# smoothing of f across a junction


def _kernel_G(t, em):
    """G0, G1 and eta_em at offsets t for the bump of half-width em."""
    z = np.abs(t) / em
    cdf, m1, _ = bump_moments(np.minimum(z, 1.0))
    tail = 1.0 - cdf
    G0 = em * (-m1 - z * tail)
    G0 = np.where(z >= 1.0, 0.0, G0)
    G1 = np.sign(t) * np.where(z >= 1.0, 0.0, tail)
    return G0, G1, np.asarray(bump(t / em)) / em


class SmoothF:
    """f = fbar + h D0 near a C^{1,1} junction at relative coordinate x = 0.

    D0 = fbar_e - fbar, D1 = fbar_e' - fbar', E = fbar_e'' - fbar'' are written
    as kernel integrals of the one-sided fbar'' (plus the f' jump, if any), so
    the small corrections are computed directly instead of by cancellation.
    """

    def __init__(self, left, right, u, lam, mu, em):
        self.left, self.right, self.uf = left, right, u
        self.lam, self.mu, self.em = float(lam), float(mu), float(em)
        fl = left(np.array([0.0]))
        fr = right(np.array([0.0]))
        self.jump1 = float(fr[1][0] - fl[1][0])
        self.jump0 = float(fr[0][0] - fl[0][0])
        self.certificate = {}

    def fbar(self, x):
        x = np.asarray(x, dtype=float)
        L = self.left(np.minimum(x, 0.0))
        R = self.right(np.maximum(x, 0.0))
        return tuple(np.where(x < 0, a, b) for a, b in zip(L, R))

    def _f2(self, y):
        y = np.asarray(y, dtype=float)
        return np.where(y < 0, self.left(np.minimum(y, 0.0))[2], self.right(np.maximum(y, 0.0))[2])

    def corrections(self, x):
        x = np.atleast_1d(np.asarray(x, dtype=float))
        em = self.em
        near = np.abs(x) < self.mu
        D0 = np.zeros_like(x)
        D1 = np.zeros_like(x)
        E = np.zeros_like(x)
        if not np.any(near):
            return D0, D1, E
        xn = x[near]
        cut = np.clip(-xn, -em, em)
        b = np.stack([np.full_like(xn, -em), np.minimum(cut, 0.0), np.maximum(cut, 0.0), np.full_like(xn, em)], 1)
        b = np.sort(b, axis=1)
        lo, hi = b[:, :-1], b[:, 1:]
        mid, half = 0.5 * (lo + hi), 0.5 * (hi - lo)
        t = mid[..., None] + half[..., None] * _GLX
        wts = half[..., None] * _GLW
        G0, G1, eta = _kernel_G(t, em)
        y = xn[:, None, None] + t
        f2y = self._f2(y)
        f2x = self._f2(xn)[:, None, None]
        D0[near] = (f2y * G0 * wts).sum(axis=(1, 2))
        D1[near] = (f2y * G1 * wts).sum(axis=(1, 2))
        E[near] = ((f2y - f2x) * eta * wts).sum(axis=(1, 2))
        if self.jump1 != 0.0:
            g0, g1, e = _kernel_G(-xn, em)
            D0[near] += self.jump1 * g0
            D1[near] += self.jump1 * g1
            E[near] += self.jump1 * e
        return D0, D1, E

    def cutoff(self, x):
        ker = make_cutoffs()
        x = np.asarray(x, dtype=float)
        z = np.abs(x) / self.mu
        return (np.asarray(ker.eta(z)), np.sign(x) * np.asarray(ker.eta(z, 1)) / self.mu,
                np.asarray(ker.eta(z, 2)) / self.mu ** 2)

    def jet(self, x):
        x = np.atleast_1d(np.asarray(x, dtype=float))
        F, F1, F2 = self.fbar(x)
        D0, D1, E = self.corrections(x)
        h, h1, h2 = self.cutoff(x)
        return F + h * D0, F1 + h1 * D0 + h * D1, F2 + h * E + h2 * D0 + 2 * h1 * D1

    def bracket(self, x):
        f, _, f2 = self.jet(x)
        u, u1 = self.uf(np.asarray(x, dtype=float))
        e2u = np.exp(2 * np.asarray(u))
        val = e2u * (-f2 / f - np.asarray(u1) ** 2)
        allowance = 64 * _EPS * e2u * (np.abs(f2 / f) + np.asarray(u1) ** 2)
        return val, allowance


def _smooth_grid(mu, t, n):
    inner = np.linspace(-mu, mu, int(0.8 * n))
    outer = np.concatenate([np.linspace(-t, -mu, n // 10, endpoint=False), np.linspace(mu, t, n // 10)[1:]])
    return np.unique(np.concatenate([inner, outer, [-t, t]]))


def certify_smooth_f(sf, t, n=10_000):
    x = _smooth_grid(sf.mu, t, n)
    f, f1, _ = sf.jet(x)
    F, F1, _ = sf.fbar(x)
    outside = np.abs(x) >= sf.mu
    c1 = float(np.max(np.abs(f - F)) + np.max(np.abs(f1 - F1)))
    R, allow = sf.bracket(x)
    margin = R - (sf.lam - sf.mu) + allow
    j = int(np.argmin(margin))
    return dict(c1_distance=c1, equals_outside=bool(np.all(f[outside] == F[outside]) and np.all(f1[outside] == F1[outside])),
                curvature_margin=float(margin[j]), worst_x=float(x[j]), grid_points=int(x.size),
                conclusion_1=bool(c1 <= sf.mu and np.all(f[outside] == F[outside])),
                conclusion_2=bool(margin[j] >= 0), positive=bool(np.all(f > 0)))


def smooth_f(left, right, u, lam, mu, t, n=10_000, require_certificate=True):
    """Mollify fbar near x = 0, backtracking the mollifier width until both conclusions hold."""
    if not (0 < mu < t / 2):
        raise ValueError("mu must lie in (0, t/2)")
    em = 0.25 * mu
    cert = None
    for step in range(MAX_STEPS):
        sf = SmoothF(left, right, u, lam, mu, em)
        if not require_certificate:
            sf.certificate = dict(backtracking_steps=0, mollifier_width=em)
            return sf
        cert = certify_smooth_f(sf, t, n)
        if cert["conclusion_1"] and cert["conclusion_2"] and cert["positive"]:
            cert.update(backtracking_steps=step, mollifier_width=em)
            sf.certificate = cert
            return sf
        em *= 0.5
    raise SearchExhausted(f"smooth_f backtracking exhausted; last certificate {cert}")


# ---------------------------------------------------------------------------
# profile segments


class _TranslatedSegment(ClosedFormSegment):
    """Closed-form piece whose local radius is s - offset."""

    def __init__(self, a, b, offset, f, f1, f2, k, label, u=None, u1=None):
        off = float(offset)
        sh = lambda g: (lambda s: g(np.asarray(s, dtype=float) - off))
        super().__init__(a, b, sh(f), sh(f1), sh(f2), sh(u) if u else None, sh(u1) if u1 else None, k=k, label=label)
        self.offset = off


class JunctionSegment(Segment):
    """Mollified window [J - mu, J + mu] around a former junction."""

    def __init__(self, J, sf, k, label):
        super().__init__(J - sf.mu, J + sf.mu, k, label)
        self.J = float(J)
        self.sf = sf

    def jet(self, r):
        x = np.asarray(r, dtype=float) - self.J
        f, f1, f2 = self.sf.jet(x)
        u, u1 = self.sf.uf(x)
        return f, f1, f2, np.asarray(u) + 0 * x, np.asarray(u1) + 0 * x

    def stations(self, n):
        x = np.linspace(-self.sf.mu, self.sf.mu, max(int(n), 16))
        return Stations.from_r(self.J + x)

    def w_breakpoints(self):
        return (-np.log(self.J),)


class CoreSegment(Segment):
    """f = r (1 - c1/w), u = -c2 h(r/r4) log w, with u frozen on [r5, 2 r5)."""
    tail_is_rigorous = True

    def __init__(self, a, b, k, P):
        super().__init__(a, b, k, "core")
        self.P = P
        self.h, _ = outer_cutoff()

    def _x(self, S):
        P = self.P
        x = np.asarray(S.x, dtype=float)
        have = np.isfinite(x)
        if np.isfinite(P.w5):
            with np.errstate(over="ignore"):
                alt = np.exp(P.w5 - np.asarray(S.w, dtype=float))
        else:
            if np.any(~have & ~(np.asarray(S.ell) < P.ell5)):
                raise ValueError("core station at or below r5 needs an explicit ratio")
            alt = np.full_like(x, np.inf)
        return np.where(have, x, alt)

    def _state(self, S):
        P = self.P
        r = np.asarray(S.r, dtype=float)
        w = np.asarray(S.w, dtype=float)
        ell = np.asarray(S.ell, dtype=float)
        x = self._x(S)
        with np.errstate(divide="ignore", invalid="ignore"):
            iw = np.where(np.isfinite(w), 1.0 / w, 0.0)
        y = r / P.r4
        hv = self.h(y)
        h1 = self.h(y, 1)
        frozen = x < 2.0
        u = np.where(frozen, P.u_cap, -P.c2 * hv * ell)
        # w * r u' (bounded in every chart)
        with np.errstate(invalid="ignore"):
            bend = np.where(h1 != 0, y * h1 * ell * w, 0.0)
        wru1 = np.where(frozen, 0.0, P.c2 * (hv - bend))
        kap = np.asarray(cot_correction(self.k, r))
        with np.errstate(divide="ignore", invalid="ignore"):
            snr = np.where(r > 0, np.asarray(sn(self.k, r)) / r, 1.0)
        return dict(iw=iw, u=u, wru1=wru1, kappa=kap, snr=snr, x=x, ell=ell)

    def sjet(self, S):
        P = self.P
        T = self._state(S)
        iw, snr, kap = T["iw"], T["snr"], T["kappa"]
        g = 1 - P.c1 * iw
        return dict(q=g / snr, rq1=(-P.c1 * iw * iw - g * kap) / snr, f1=g - P.c1 * iw * iw,
                    rf2=-P.c1 * (1 + 2 * iw) * iw * iw, u=T["u"], ru1=T["wru1"] * iw, snr=snr)

    def jet(self, r):
        r = np.atleast_1d(np.asarray(r, dtype=float))
        J = self.sjet(Stations.from_r(r))
        return J["q"] * J["snr"] * r, J["f1"], J["rf2"] / r, J["u"], J["ru1"] / r

    def u_values(self, S):
        return self._state(S)["u"]

    def bracket(self, S):
        P = self.P
        T = self._state(S)
        iw = T["iw"]
        mant = P.c1 * (1 + 2 * iw) / (1 - P.c1 * iw) - T["wru1"] ** 2
        w = np.asarray(S.w, dtype=float)
        return Scaled(np.zeros_like(mant), mant, 2 * w - 2 * T["ell"])

    def mean_curv(self, S):
        P = self.P
        T = self._state(S)
        iw = T["iw"]
        mant = np.exp(T["u"]) * (1 - P.c1 * iw - P.c1 * iw * iw) / (1 - P.c1 * iw)
        return Scaled(np.zeros_like(mant), mant, np.asarray(S.w, dtype=float))

    def stations(self, n):
        P = self.P
        n = max(int(n), 60)
        b = self.b
        parts = [Stations.from_r(np.unique(np.concatenate([
            np.linspace(0.4 * P.r4, b, n // 4), np.geomspace(max(1e-280, b * 1e-300), 0.4 * P.r4, n // 6)]))),
                 Stations.from_w(np.geomspace(-np.log(1e-280), 1e300, n // 8))]
        if P.w5 > 1e300:
            ells = np.geomspace(np.log(1e300), P.ell5, n // 8)
            parts.append(Stations.from_ell(ells[ells < P.ell5]))
        xs = np.unique(np.concatenate([np.linspace(1.0, 2.2, n // 4), np.geomspace(2.2, 64.0, n // 8)]))
        parts.append(Stations.near(P.w5, P.ell5, xs))
        return concat_stations(parts)

    def w_breakpoints(self):
        return (-np.log(0.75 * self.P.r4), -np.log(0.5 * self.P.r4))

    def tail_bounds(self, W):
        P = self.P
        em = np.exp(-2 * P.u_cap)
        rg = np.sqrt((2 * P.c2 * em) ** 2 + (em * (4 * P.c1 + 2 * P.c2 + 1e-3)) ** 2 + (2 * P.c2) ** 2)
        return dict(exp_neg_u=float(np.exp(-P.u_cap)), fr=1.01, dev=float(np.sqrt(2) * em + 1), rgrad=float(rg),
                    rigorous=True)

    def integrate(self, kind, p=1.0, ref=None):
        w_lo = -np.log(self.b)
        bps = [w for w in self.w_breakpoints() if w_lo < w < W_CAP]
        val, err = integrate(self.integrand_w(kind, p, ref), w_lo, W_CAP, breakpoints=bps,
                             abs_tol=1e-300)
        return val, err, _tail(kind, self.tail_bounds(W_CAP), W_CAP, p)


class CapSegment(Segment):
    """Round cap f = sn_A on [0, r6], evaluated at x = r/r5."""
    tail_is_rigorous = True

    def __init__(self, k, P):
        super().__init__(0.0, P.r6, k, "cap")
        self.P = P

    def _xs(self, S):
        x = np.asarray(S.x, dtype=float)
        if np.any(~np.isfinite(x)):
            raise ValueError("cap stations need the ratio to r5")
        return x

    def sjet(self, S):
        P = self.P
        x = self._xs(S)
        s = np.asarray(sn(P.A_scaled, x))
        c = np.asarray(cn(P.A_scaled, x))
        return dict(q=s / x, rq1=c - s / x, f1=c, rf2=-P.A_scaled * x * s, u=np.full_like(x, P.u_cap),
                    ru1=np.zeros_like(x), snr=np.ones_like(x))

    def jet(self, r):
        raise DomainError("the cap lies below double precision; use stations with ratios to r5")

    def u_values(self, S):
        return np.full(len(S), self.P.u_cap)

    def bracket(self, S):
        n = len(S)
        return Scaled(np.zeros(n), np.ones(n), np.full(n, self.P.log_A))

    def mean_curv(self, S):
        P = self.P
        x = self._xs(S)
        mant = np.exp(P.u_cap) * np.asarray(cn(P.A_scaled, x)) / np.asarray(sn(P.A_scaled, x))
        return Scaled(np.zeros_like(mant), mant, np.full_like(mant, P.w5))

    def stations(self, n):
        return Stations.near(self.P.w5, self.P.ell5, np.geomspace(1e-6, self.P.x6, max(int(n), 8)))

    def integrate(self, kind, p=1.0, ref=None):
        return 0.0, 0.0, 0.0  # inside the analytic tail of the core


# ---------------------------------------------------------------------------
# deep certificates


def deep_smooth_u_certificate(P, n=4000):
    """Certificate for freezing u on [r5, 2 r5) with mu = r5.

    The required exponent q is of order (r5 log(1/r5))^-2, beyond any float, so
    the smoothed u is represented by its limit: u = v(2 r5) on [r5, 2 r5) and
    |u'| <= |v'| in the boundary layer. Everything is checked in log form.
    """
    x = np.linspace(1.0, 2.0, n)
    mant_lower = P.c1 * 1.0 - P.c2 ** 2  # worst case |u'| = |v'| everywhere in the window
    # e^{2u}(-f''/f - u'^2) >= e^{2u} c1-ish / (r^2 w^2): log lower bound at the worst window point
    with np.errstate(over="ignore"):
        log_lower = np.log(2 * mant_lower) + 2 * P.u_cap + 2 * P.w5 - 2 * np.log(2.0) - 2 * P.ell5
    lam = 49 * _mk(P.k)
    return dict(
        mu="r5", window_ratio=[1.0, 2.0], grid_points=int(n),
        u_anchor=P.u_cap, conclusion_1="u = v(2 r5) on [r5, 2 r5) to double precision, constant on [r5, 1.5 r5]",
        conclusion_2="|u - v(2 r5)| <= sup|v'| * int zeta^q <= mu/4 by the choice of q",
        log_required_q=float(2 * P.w5 - 2 * P.ell5 + np.log(16 * P.c2 ** 2)) if np.isfinite(P.w5) else np.inf,
        bracket_mantissa_lower=float(mant_lower), log_curvature_lower=float(log_lower),
        conclusion_3=bool(mant_lower > 0 and log_lower >= np.log(lam)),
        stations=int(x.size),
    )


def deep_smooth_f_certificate(P):
    """Certificate for mollifying f at the cap junction (width mu = 1e-3 r6).

    Both one-sided values of -f''/f are of order c1/(r5^2 log(1/r5)^2) or larger;
    in the h-transition the corrections are bounded by (em/mu)^2 and em/mu times
    the larger side, and inside the window f'' is an average of negative values.
    """
    log_em_over_mu = -P.w5 + P.ell5 - np.log(P.c1) - np.log(1e3) if np.isfinite(P.w5) else -np.inf
    ratio = float(np.exp(log_em_over_mu))
    rel = 8.0 * ratio ** 2 + 16.2 * ratio
    log_left = P.log_A
    with np.errstate(over="ignore"):
        log_right = np.log(P.c1) + 2 * P.w5 - 2 * P.ell5
    return dict(
        mu_over_r6=1e-3, log_mollifier_ratio=float(log_em_over_mu), relative_perturbation=rel,
        log_one_sided_left=float(log_left), log_one_sided_right=float(log_right),
        conclusion_1="|f - fbar| + |f' - fbar'| <= (c1/(r5 w5)) em (1 + em/mu) <= mu",
        conclusion_2=bool(rel < 0.5 and min(log_left, log_right) > np.log(abs(P.k) + 1.0)),
    )


# ---------------------------------------------------------------------------
# assembly


def piece_targets(prof, P, n=4000):
    """Curvature of the cone, the core and the cap against their design values."""
    out = {}
    m = _mk(P.k)
    for seg in prof.segments:
        R = seg.curvature(seg.stations(n)).value()
        if seg.label == "cone":
            dev = float(np.max(np.abs(R - 2 * (P.k - P.eps_work))))
            out["cone"] = dict(target=2 * (P.k - P.eps_work), max_deviation=dev, ok=bool(dev <= 1e-9))
        elif seg.label == "core":
            out["core"] = dict(target=90 * m, grid_min=float(np.min(R)), ok=bool(np.min(R) >= 90 * m))
        elif seg.label == "cap":
            out["cap"] = dict(target=100 * m, grid_min=float(np.min(R)), ok=bool(np.min(R) >= 100 * m))
    return out


@dataclass
class GlueParams:
    k: float
    eps: float
    eps_work: float
    delta: float
    r0: float
    r0_work: float
    r1: float
    r2: float
    r3: float
    r4: float
    w4: float
    alpha: float
    c1: float
    c2: float
    ell5: float
    w5: float
    r5: float
    x6: float
    r6: float
    log_A: float
    A_scaled: float
    u_cap: float
    mu12: float = 0.0
    mu23: float = 0.0

    @property
    def A(self):
        with np.errstate(over="ignore"):
            return float(np.exp(self.log_A))

    @property
    def mu(self):
        return dict(annulus_cone=self.mu12, cone_core=self.mu23, core_cap=1e-3 * self.r6)

    def as_solved(self, checks, notes=()):
        return SolvedParams("A", asdict(self), checks, list(notes))


def build_drawstring_A(spec, n_grid=10_000):
    if isinstance(spec, dict):
        spec = DrawstringSpec(**spec)
    k, delta = spec.k, spec.delta
    eps_w, r0_w = working_parameters(k, spec.epsilon, spec.r0)
    kp = k - eps_w
    try:
        r1, r1_info = choose_r1_A(k, eps_w, r0_w, spec.r1_max, n_grid)
    except SearchExhausted as exc:
        raise StageError("choose_r1", str(exc)) from exc
    try:
        r2, alpha, res12 = solve_matching_12(k, eps_w, r1)
        c1, r3, c1_info = solve_c1_quadratic(k, eps_w, r1, alpha)
    except DomainError as exc:
        raise StageError("matching", str(exc)) from exc
    r4, w4 = c1_info["r4"], c1_info["w4"]
    c2, c2_info = choose_c2_A(c1, eps_w, r1, k)
    try:
        ell5, r5_margins = choose_r5(c1, c2, r4, delta, k)
    except SearchExhausted as exc:
        raise StageError("choose_r5", str(exc)) from exc
    log_At, x6, m34 = matching_34_scaled(c1, ell5)
    with np.errstate(over="ignore", under="ignore"):
        w5 = float(np.exp(ell5))
        r5 = float(np.exp(-w5))
    u_cap = float(-c2 * (ell5 + np.log1p(-LN2 / w5)))  # v3(2 r5)
    P = GlueParams(k=k, eps=spec.epsilon, eps_work=eps_w, delta=delta, r0=spec.r0, r0_work=r0_w,
                   r1=r1, r2=r2, r3=r3, r4=r4, w4=w4, alpha=alpha, c1=c1, c2=c2, ell5=ell5, w5=w5, r5=r5,
                   x6=x6, r6=r5 * x6, log_A=m34["log_A"], A_scaled=float(np.exp(log_At)), u_cap=u_cap)

    # junction positions in the profile coordinate; the core starts at r6 ~ 0
    J23 = P.r6 + (r4 - r5)
    J12 = J23 + (r2 - r3)
    rho = J12 + r1
    P.mu23 = 1e-3 * min(spec.epsilon, r4 - r5, r2 - r3)
    P.mu12 = 1e-3 * min(spec.epsilon, r2 - r3, r1)

    zero = lambda x: (np.zeros_like(np.asarray(x, dtype=float)), np.zeros_like(np.asarray(x, dtype=float)))
    piece2 = lambda r: (alpha * np.asarray(sn(kp, r)), alpha * np.asarray(cn(kp, r)), -kp * alpha * np.asarray(sn(kp, r)))
    piece1 = lambda r: (np.asarray(sn(k, r)), np.asarray(cn(k, r)), -k * np.asarray(sn(k, r)))
    core_f = lambda r: f3_jet(c1, r)
    try:
        sf23 = smooth_f(lambda x: core_f(r4 + x), lambda x: piece2(r3 + x), zero, kp, P.mu23,
                        t=min(0.5 * r4, 0.5 * (r2 - r3)), n=2000)
        sf12 = smooth_f(lambda x: piece2(r2 + x), lambda x: piece1(r1 + x), zero, kp, P.mu12,
                        t=min(0.5 * (r2 - r3), 0.5 * r1), n=2000)
    except SearchExhausted as exc:
        raise StageError("smooth_f", str(exc)) from exc

    off2 = J23 - r3
    off1 = J12 - r1
    segs = [
        CapSegment(k, P),
        CoreSegment(P.r6, J23 - P.mu23, k, P),
        JunctionSegment(J23, sf23, k, "junction cone/core"),
        _TranslatedSegment(J23 + P.mu23, J12 - P.mu12, off2, lambda r: piece2(r)[0], lambda r: piece2(r)[1],
                           lambda r: piece2(r)[2], k, "cone"),
        JunctionSegment(J12, sf12, k, "junction annulus/cone"),
        _TranslatedSegment(J12 + P.mu12, rho, off1, lambda r: piece1(r)[0], lambda r: piece1(r)[1],
                           lambda r: piece1(r)[2], k, "exterior"),
    ]
    prof = RadialProfile(segs, k=k, name="drawstring-A", meta=dict(method="A"))
    f3r4 = f3_jet(c1, r4)
    with np.errstate(over="ignore"):
        inv5 = 0.0 if not np.isfinite(w5) else 1.0 / w5
    residuals = {
        "annulus/cone": [abs(float(piece1(r1)[0]) - float(piece2(r2)[0])) / r1,
                         abs(float(piece1(r1)[1]) - float(piece2(r2)[1]))],
        "cone/core": [abs(float(f3r4[0]) - float(piece2(r3)[0])) / r4, abs(float(f3r4[1]) - float(piece2(r3)[1]))],
        # at the cap both sides are evaluated in units of r5
        "core/cap": [abs((1 - c1 * inv5) - float(sn(P.A_scaled, x6))),
                     abs((1 - c1 * inv5 - c1 * inv5 ** 2) - float(cn(P.A_scaled, x6)))],
    }
    checks_targets = piece_targets(prof, P)
    checks = dict(
        r1=r1_info["checks"], r1_margins=r1_info["margins"],
        matching_12=dict(residuals=list(res12), alpha_gt_half=bool(alpha > 0.5), r2_in_band=bool(0.5 * r1 <= r2 <= 2 * r1)),
        matching_23=dict(residuals=list(c1_info["residuals"]), disc_positive=bool(c1_info["disc"] > 0),
                         c1_bounds=[c1_info["c1_lower"], c1_info["c1_upper"]]),
        c2=c2_info, r5=r5_margins, matching_34=m34,
        cutoff_h_d1_bound=outer_cutoff()[1],
        junction_residuals=residuals, junction_residuals_ok=bool(max(max(v) for v in residuals.values()) <= 1e-10),
        piece_targets=checks_targets,
        smooth_u=deep_smooth_u_certificate(P),
        smooth_f={"junction annulus/cone": sf12.certificate, "junction cone/core": sf23.certificate,
                  "junction core/cap": deep_smooth_f_certificate(P)},
        invariants=dict(c2_le_sqrt_half_c1=bool(c2 <= min(np.sqrt(c1 / 2), 0.01)),
                        r5_order=bool(r5 <= r4 / 100), r6_le_2r5=bool(x6 <= 2.0)),
    )
    notes = [f"pieces built with eps_work={eps_w:.6g}; public curvature bound uses eps={spec.epsilon:.6g}"]
    prof.meta.update(params=P.as_solved(checks, notes), glue=P, spec=spec,
                     offsets=dict(J23=J23, J12=J12, rho=rho, exterior_offset=off1))
    return prof
