"""Drawstring built from one explicit formula with cutoffs.

    f = sn_k(r) h(r),  h = 1 - c1 eta(r/r1) psi(r),
    u = -c2 int_r^inf eta(4s/r1) zeta(s/(4 r2)) ds / (s log(1/s)).

The constants are tiny (r1 ~ e^-48, c1 ~ eps r1^2) and log log(1/r2) is of
order 1/c1, so r2 is far below double precision. The profile is therefore
evaluated in charts: plain r near r1, w = log(1/r) further in, ell = log w
deeper still, and the ratio x = r/r2 around r2 itself.
"""
from dataclasses import dataclass

import numpy as np

from . import _core
from .params import DrawstringSpec, SolvedParams, StageError
from .quadrature import integrate
from .radial_metric import (
    W_CAP, RadialProfile, Scaled, Segment, Stations, _tail, concat_stations, product_segment,
)
from .space_forms import cn, cot_correction, make_cutoffs, sn

LN2 = np.log(2.0)
LN4 = np.log(4.0)
LN8 = np.log(8.0)
MAX_HALVINGS = 200
C1_SAFETY = 0.999
C2_FRACTION = 0.5
_GLX, _GLW = np.polynomial.legendre.leggauss(10)


class SearchExhausted(RuntimeError):
    pass


# ---------------------------------------------------------------------------
# cumulative integral tables


class CumulativeTable:
    """int_lo^y g on [lo, hi], stored with g and g' for quintic Hermite lookup.

    The node count doubles until the table and its refinement agree to
    `tol` (relative to the total) at the coarse cell midpoints.
    """

    def __init__(self, g, g1, lo, hi, tol=1e-11, n0=256, n_max=1 << 15):
        self.lo, self.hi = float(lo), float(hi)
        n = n0
        coarse = self._build(g, g1, n)
        while True:
            fine = self._build(g, g1, 2 * n)
            mids = self.lo + (np.arange(n) + 0.5) * (self.hi - self.lo) / n
            a = self._eval(coarse, mids)
            b = self._eval(fine, mids)
            scale = max(1.0, abs(fine[0][-1]))
            self.check = float(np.max(np.abs(a - b)) / scale)
            if self.check <= tol or 2 * n >= n_max:
                break
            n *= 2
            coarse = fine
        self._tab = fine
        self.nodes = 2 * n
        self.total = float(fine[0][-1])

    def _build(self, g, g1, n):
        grid = np.linspace(self.lo, self.hi, n + 1)
        h = grid[1] - grid[0]
        mids = 0.5 * (grid[:-1] + grid[1:])
        x = mids[:, None] + 0.5 * h * _GLX[None, :]
        cells = (np.asarray(g(x.ravel())).reshape(x.shape) * _GLW).sum(axis=1) * 0.5 * h
        F = np.ascontiguousarray(np.concatenate([[0.0], np.cumsum(cells)]))
        D1 = np.ascontiguousarray(np.asarray(g(grid), dtype=float))
        D2 = np.ascontiguousarray(np.asarray(g1(grid), dtype=float))
        return F, D1, D2, h

    def _eval(self, tab, y):
        F, D1, D2, h = tab
        y = np.clip(np.asarray(y, dtype=float), self.lo, self.hi)
        return np.asarray(_core.hermite5(np.ravel(y), self.lo, h, F, D1, D2)).reshape(y.shape)

    def __call__(self, y):
        return self._eval(self._tab, y)


# ---------------------------------------------------------------------------
# parameter lemmas


def lemma_r1_checks(k, r1, r0, n=10_000):
    """Smallness conditions on r1, checked on a w-geometric grid of (0, r1]."""
    cap = 1.0 / (100.0 * (1.0 + abs(k)))
    w1 = -np.log(r1)
    w = np.geomspace(w1, 1e4 * w1, n)
    ell = np.log(w)
    with np.errstate(under="ignore"):
        r = np.exp(-w)
    r = r[r > 0]
    ratio = np.asarray(sn(k, r)) / r
    kap = np.abs(np.asarray(cot_correction(k, r)))
    target = np.log(100.0 * (abs(k) + 1.0))
    corners = {}
    for a, b in ((0.5, 5.0), (2.0, 1.0), (0.5, 1.0), (2.0, 5.0)):
        corners[f"a={a},b={b}"] = float(np.min(a * w - b * ell) - target)
    checks = {
        "r1_below_r0": bool(r1 < r0),
        "r1_below_cap": bool(r1 < cap),
        "log_inv_r1_above_4": bool(w1 > 4.0),
        "sn_between_half_and_double": bool(np.all((ratio >= 0.5) & (ratio <= 2.0))),
        "cot_deviation_bounded": bool(np.all(kap <= abs(k) * r * r * (1 + 1e-12) + 1e-300)),
        "power_log_bound": all(v > 0 for v in corners.values()),
    }
    return checks, corners


def choose_r1(k, r0, r1_max=None, n=10_000):
    """Largest r1 in the halving sequence from min{r0, 1/(100(1+|k|))}/2 passing all checks."""
    if not r0 > 0:
        raise ValueError("r0 must be positive")
    r1 = 0.5 * min(r0, 1.0 / (100.0 * (1.0 + abs(k))))
    if r1_max is not None:
        r1 = min(r1, float(r1_max))
    for _ in range(MAX_HALVINGS):
        checks, corners = lemma_r1_checks(k, r1, r0, n)
        if all(checks.values()):
            return r1, dict(checks=checks, corner_margins=corners)
        r1 *= 0.5
    raise SearchExhausted(f"no admissible r1 after {MAX_HALVINGS} halvings")


def _outer_h_terms(k, r1, n=10_000, ker=None):
    """On [r1/4, r1] with psi = 1/w: h' = -c1 P, h'' = -c1 Q, so the target
    expression equals c1 N / (1 - c1 eta psi) with N returned here."""
    ker = ker or make_cutoffs()
    r = np.linspace(0.25 * r1, r1, n)
    y = r / r1
    w = -np.log(r)
    psi = 1.0 / w
    p1 = 1.0 / (r * w * w)
    p2 = (2.0 - w) / (r * r * w ** 3)
    e0, e1, e2 = (np.asarray(ker.eta(y, j)) for j in range(3))
    P = e1 * psi / r1 + e0 * p1
    Q = e2 * psi / r1 ** 2 + 2.0 * e1 * p1 / r1 + e0 * p2
    N = Q + 2.0 * P / r - 2.0 * abs(k) * r * np.abs(P)
    return r, N, e0 * psi


def c1_objective(c1, k, r1, n=10_000, ker=None):
    """Grid minimum over [r1/4, r1] of -h''/h - 2h'/(rh) - 2|k| r |h'|/h."""
    _, N, etapsi = _outer_h_terms(k, r1, n, ker)
    return float(np.min(c1 * N / (1.0 - c1 * etapsi)))


def choose_c1(k, eps, r1, n=10_000):
    """Halving search for c1, then the grid-exact threshold scaled by C1_SAFETY."""
    cap = min(r1, 1.0 / (100.0 * (1.0 + abs(k))))
    _, N, etapsi = _outer_h_terms(k, r1, n)
    G = lambda c: float(np.min(c * N / (1.0 - c * etapsi)))
    c = 0.5 * cap
    for _ in range(MAX_HALVINGS):
        if G(c) >= -eps:
            break
        c *= 0.5
    else:
        raise SearchExhausted(f"no admissible c1 after {MAX_HALVINGS} halvings")
    halving = c
    neg = N < 0
    # c N/(1 - c eta psi) >= -eps  <=>  c (|N| + eps eta psi) <= eps at every N < 0 node
    exact = float(np.min(eps / (np.abs(N[neg]) + eps * etapsi[neg]))) if np.any(neg) else np.inf
    c1 = min(C1_SAFETY * exact, C1_SAFETY * cap)
    c1 = max(c1, halving)
    g = G(c1)
    if g < -eps:
        raise SearchExhausted("refined c1 fails the grid check")
    return c1, dict(halving_value=halving, grid_threshold=exact, grid_min=g, cap=cap)


def loglog(x):
    return np.log(np.log(x))


def choose_c2(c1, r1, delta):
    """Half the equality value of the c2 inequality, capped by c1."""
    L = np.log(1.0 / delta)
    rbar = min(r1 / 64.0, c1 * c1)
    span = loglog(1.0 / rbar) - loglog(1.0 / r1)
    c2 = min(c1, C2_FRACTION * L / span)
    return c2, dict(rbar=rbar, equality_value=L / span, lhs=c2 * span, rhs=L, holds=bool(c2 * span < L))


# ---------------------------------------------------------------------------
# psi, u and their caches


class PsiState:
    """Cached pieces of psi and u for fixed (r1, r2, c1, c2).

    r2 is carried as ell2 = log log(1/r2); inv = 1/log(1/r2) may be 0.
    """

    def __init__(self, r1, ell2, c1, c2, ker=None, debug=False):
        self.ker = ker or make_cutoffs()
        self.r1 = float(r1)
        self.w1 = -np.log(self.r1) if r1 > 0 else np.inf
        self.ell2 = float(ell2)
        self.c1, self.c2 = float(c1), float(c2)
        self.debug = debug
        with np.errstate(over="ignore", under="ignore"):
            self.w2 = float(np.exp(self.ell2))
            self.r2 = float(np.exp(-self.w2))
        self.inv = 0.0 if not np.isfinite(self.w2) else 1.0 / self.w2
        ker = self.ker
        inv = self.inv
        z = lambda t, j=0: np.asarray(ker.zeta(t, j))
        e = lambda t, j=0: np.asarray(ker.eta(t, j))
        # int (1 - zeta) y and int zeta / (y (1 - log y / w2)^2) over [1/2, x]
        self.A = CumulativeTable(lambda y: (1 - z(y)) * y, lambda y: -z(y, 1) * y + 1 - z(y), 0.5, 1.0)

        def gB(y):
            W = 1.0 - inv * np.log(y)
            return z(y) / (y * W * W)

        def gB1(y):
            W = 1.0 - inv * np.log(y)
            return z(y, 1) / (y * W * W) - z(y) / (y * y * W * W) + 2 * inv * z(y) / (y * y * W ** 3)
        self.B = CumulativeTable(gB, gB1, 0.5, 1.0)

        def gZ(t):
            V = 1.0 - inv * (LN4 + np.log(t))
            return z(t) / (t * V)

        def gZ1(t):
            V = 1.0 - inv * (LN4 + np.log(t))
            return z(t, 1) / (t * V) - z(t) / (t * t * V) + inv * z(t) / (t * t * V * V)
        self.Z = CumulativeTable(gZ, gZ1, 0.5, 1.0)
        if debug:
            self.E = 0.0
            self.ell18 = 0.0
            self.Etab = None
        else:
            w1 = self.w1

            def gE(t):
                return e(t) / (t * (w1 + LN4 - np.log(t)))

            def gE1(t):
                V = w1 + LN4 - np.log(t)
                return e(t, 1) / (t * V) - e(t) / (t * t * V) + e(t) / (t * t * V * V)
            self.Etab = CumulativeTable(gE, gE1, 0.5, 1.0)
            self.E = self.Etab.total
            self.ell18 = float(np.log(w1 + LN8))
        self.psi_r2 = self.r2 * (0.125 + self.A.total) + self.B.total * inv * inv
        self.C_psi = 0.0 if debug else self.psi_r2 - inv
        self.ell_4r2 = self.ell2 + np.log1p(-LN4 * inv) if np.isfinite(self.ell2) else np.inf
        self.J_total = self.E + self.ell_4r2 - self.ell18 + inv * self.Z.total
        self.u0 = -self.c2 * self.J_total

    # -- psi --------------------------------------------------------------
    def psi_x(self, x, w):
        """psi at r = x r2 (w = log(1/r) used for x >= 1)."""
        x = np.asarray(x, dtype=float)
        w = np.asarray(w, dtype=float)
        with np.errstate(divide="ignore", invalid="ignore"):
            outer = 1.0 / w + self.C_psi
        mid = self.r2 * (0.125 + self.A(x)) + self.B(x) * self.inv ** 2
        inner = 0.5 * self.r2 * x * x
        return np.where(x >= 1.0, outer, np.where(x > 0.5, mid, inner))

    def J_core(self, x, ell):
        """int_r^inf of the u-integrand for r <= r1/8, r = x r2."""
        x = np.asarray(x, dtype=float)
        c = self.E + np.asarray(ell, dtype=float) - self.ell18
        d = self.E + self.ell_4r2 - self.ell18 + self.inv * (self.Z.total - self.Z(np.minimum(x, 4.0) / 4.0))
        return np.where(x >= 4.0, c, np.where(x >= 2.0, d, self.J_total))

    def J_outer(self, y4):
        """Same integral for r1/8 <= r, with y4 = 4 r / r1."""
        y4 = np.asarray(y4, dtype=float)
        v = self.Etab.total - self.Etab(y4)
        return np.where(y4 >= 1.0, 0.0, v)


# ---------------------------------------------------------------------------
# segments


def _snr(k, r):
    r = np.asarray(r, dtype=float)
    with np.errstate(divide="ignore", invalid="ignore"):
        v = np.asarray(sn(k, r)) / r
    return np.where(r > 0, v, 1.0)


class _CutoffSegment(Segment):
    tail_is_rigorous = True

    def __init__(self, a, b, k, state, label):
        super().__init__(a, b, k, label)
        self.st = state

    def _state(self, S):
        raise NotImplementedError

    def sjet(self, S):
        T = self._state(S)
        h, rh1, r2h2, kap, snr = T["h"], T["rh1"], T["r2h2"], T["kappa"], T["snr"]
        r = np.asarray(S.r, dtype=float)
        return dict(q=h, rq1=rh1, f1=snr * ((1 + kap) * h + rh1),
                    rf2=snr * (-self.k * r * r * h + 2 * (1 + kap) * rh1 + r2h2),
                    u=T["u"], ru1=T["ru1"], snr=snr)

    def jet(self, r):
        r = np.atleast_1d(np.asarray(r, dtype=float))
        J = self.sjet(Stations.from_r(r))
        f = J["q"] * J["snr"] * r
        return f, J["f1"], J["rf2"] / r, J["u"], J["ru1"] / r

    def u_values(self, S):
        return self._state(S)["u"]

    def mean_curv(self, S):
        T = self._state(S)
        mant = np.exp(T["u"]) * ((1 + T["kappa"]) + T["rh1"] / T["h"])
        return Scaled(np.zeros_like(mant), mant, np.asarray(S.w, dtype=float))

    def tail_bounds(self, W):
        em = np.exp(-2.0 * self.st.u0)
        c1, c2 = self.st.c1, self.st.c2
        rg = np.sqrt((2 * c2 * em) ** 2 + (em * (4 * c1 + 2 * c2)) ** 2 + (2 * c2) ** 2)
        return dict(exp_neg_u=float(np.exp(-self.st.u0)), fr=1.01,
                    dev=float(np.sqrt(2.0) * em + 1.0), rgrad=float(rg), rigorous=True)

    def _w_range(self):
        raise NotImplementedError

    def integrate(self, kind, p=1.0, ref=None):
        w_lo, w_hi = self._w_range()
        val = err = tail = 0.0
        top = min(w_hi, W_CAP)
        if top > w_lo:
            bps = [w for w in self.w_breakpoints() if w_lo < w < top]
            val, err = integrate(self.integrand_w(kind, p, ref), w_lo, top, breakpoints=bps, abs_tol=1e-300)
        if w_hi > W_CAP:
            W = max(W_CAP, w_lo)
            tail = _tail(kind, self.tail_bounds(W), W, p)
        return val, err, tail


class CoreSegment(_CutoffSegment):
    """r in [r2/2, r1/8] (or the innermost piece [0, r2/2] when inner=True)."""

    def __init__(self, a, b, k, state, label="core", inner=False, w_top=None):
        super().__init__(a, b, k, state, label)
        self.inner = inner
        self.w_top = w_top  # outer boundary in w when b is below double range

    def _x2(self, S):
        st = self.st
        x = np.asarray(S.x, dtype=float)
        have = np.isfinite(x)
        if np.isfinite(st.w2):
            with np.errstate(over="ignore"):
                alt = np.exp(st.w2 - np.asarray(S.w, dtype=float))
            alt = np.where(np.isfinite(S.w), alt, 0.0)
        else:
            if np.any(~have & ~(np.asarray(S.ell) < st.ell2)):
                raise ValueError("station at or beyond ell2 needs an explicit ratio to r2")
            alt = np.full_like(x, np.inf)
        return np.where(have, x, alt)

    def _state(self, S):
        st, ker = self.st, self.st.ker
        x2 = self._x2(S)
        xc = np.minimum(x2, 8.0)
        w = np.asarray(S.w, dtype=float)
        r = np.asarray(S.r, dtype=float)
        z2 = np.asarray(ker.zeta(xc))
        z2p = np.asarray(ker.zeta(xc, 1))
        z4 = np.asarray(ker.zeta(xc / 4.0))
        with np.errstate(divide="ignore", invalid="ignore"):
            iw = np.where(np.isfinite(w), 1.0 / w, 0.0)
        psi = np.where(x2 >= 1.0, iw + st.C_psi, st.psi_x(xc, w))
        r2 = st.r2
        rpsi1 = z2 * iw * iw + (1 - z2) * xc * xc * r2
        r2psi2 = xc * z2p * iw * iw + z2 * (-1 + 2 * iw) * iw * iw - z2p * xc ** 3 * r2 + (1 - z2) * xc * xc * r2
        h = 1.0 - st.c1 * psi
        kap = np.asarray(cot_correction(self.k, r))
        J = st.J_core(x2, S.ell)
        return dict(h=h, rh1=-st.c1 * rpsi1, r2h2=-st.c1 * r2psi2, u=-st.c2 * J,
                    ru1=st.c2 * z4 * iw, kappa=kap, snr=_snr(self.k, r),
                    x2=x2, z2=z2, z2p=z2p, z4=z4, xc=xc, iw=iw)

    def bracket(self, S):
        st = self.st
        T = self._state(S)
        h, kap, z2, z2p, z4, xc, iw = (T[n] for n in ("h", "kappa", "z2", "z2p", "z4", "xc", "iw"))
        a1 = (st.c1 / h) * (z2 * (1 + 2 * iw + 2 * kap) + xc * z2p) - st.c2 ** 2 * z4 ** 2
        a2 = (st.c1 / h) * ((1 - z2) * (3 + 2 * kap) - xc * z2p)
        w = np.asarray(S.w, dtype=float)
        ell = np.asarray(S.ell, dtype=float)
        with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
            lr = 2 * np.log(T["x2"]) - st.w2 + 2 * ell
            extra = np.where(a2 != 0.0, a2 * np.exp(np.minimum(lr, 700.0)), 0.0)
            ls1 = 2 * w - 2 * ell
        use2 = a1 == 0.0
        mant = np.where(use2, a2, a1 + extra)
        logscale = np.where(use2, st.w2, ls1)
        return Scaled(np.full_like(mant, self.k), mant, logscale)

    def stations(self, n):
        st = self.st
        n = max(int(n), 40)
        if self.inner:
            return Stations.near(st.w2, st.ell2, np.geomspace(1e-6, 0.5, n))
        parts = []
        w_out = self.w_top if self.w_top is not None else -np.log(self.b)
        # x-chart around r2: both cutoff transitions, densely
        xhi = 64.0
        if np.isfinite(st.w2) and st.w2 - w_out < np.log(xhi):
            xhi = float(np.exp(st.w2 - w_out))
        nx = n // 3
        xs = np.concatenate([np.geomspace(0.5, xhi, nx // 3),
                             np.linspace(0.5, min(1.0, xhi), nx // 3),
                             np.linspace(min(2.0, xhi), min(4.0, xhi), nx - 2 * (nx // 3))])
        if not st.debug:  # the uncut core has no r2
            parts.append(Stations.near(st.w2, st.ell2, np.unique(xs)))
        w_in = min(st.w2 - np.log(xhi), 1e300)
        nrest = n - nx
        if w_in > w_out:
            w_r = min(w_in, 640.0)
            parts.append(Stations.from_w(np.geomspace(w_out, w_r, nrest // 3)))
            if w_in > w_r:
                parts.append(Stations.from_w(np.geomspace(w_r, w_in, nrest // 3)))
            if st.w2 > 1e300:
                l_lo = np.log(1e300)
                l_hi = st.ell2 if np.isfinite(st.ell2) else 1e6
                ells = np.geomspace(l_lo, l_hi, nrest - 2 * (nrest // 3))
                ells = ells[ells < st.ell2]
                parts.append(Stations.from_ell(ells))
        return concat_stations(parts)

    def w_breakpoints(self):
        st = self.st
        if not np.isfinite(st.w2):
            return ()
        return (st.w2 - LN4, st.w2 - LN2, st.w2, st.w2 + LN2)

    def _w_range(self):
        st = self.st
        w_cut = st.w2 + LN2 if np.isfinite(st.w2) else np.inf
        if self.inner:
            return w_cut, np.inf
        w_out = self.w_top if self.w_top is not None else -np.log(self.b)
        return w_out, w_cut


class TransitionSegment(_CutoffSegment):
    """r in [r1/8, r1]: the outer cutoff of h and the start of u."""

    def _state(self, S):
        st, ker = self.st, self.st.ker
        r = np.asarray(S.r, dtype=float)
        w = np.asarray(S.w, dtype=float)
        y1 = r / st.r1
        y4 = 4.0 * y1
        psi = 1.0 / w + st.C_psi
        rpsi1 = 1.0 / (w * w)
        r2psi2 = (-1.0 + 2.0 / w) / (w * w)
        e0, e1, e2 = (np.asarray(ker.eta(y1, j)) for j in range(3))
        c1 = st.c1
        h = 1.0 - c1 * e0 * psi
        rh1 = -c1 * (y1 * e1 * psi + e0 * rpsi1)
        r2h2 = -c1 * (y1 * y1 * e2 * psi + 2 * y1 * e1 * rpsi1 + e0 * r2psi2)
        u = -st.c2 * st.J_outer(y4)
        ru1 = st.c2 * np.asarray(ker.eta(y4)) / w
        return dict(h=h, rh1=rh1, r2h2=r2h2, u=u, ru1=ru1,
                    kappa=np.asarray(cot_correction(self.k, r)), snr=_snr(self.k, r))

    def bracket(self, S):
        T = self._state(S)
        mant = -2 * (1 + T["kappa"]) * T["rh1"] / T["h"] - T["r2h2"] / T["h"] - T["ru1"] ** 2
        return Scaled(np.full_like(mant, self.k), mant, 2.0 * np.asarray(S.w, dtype=float))

    def stations(self, n):
        n = max(int(n), 30)
        r1 = self.st.r1
        r = np.concatenate([np.linspace(r1 / 8, r1 / 4, n // 3), np.linspace(r1 / 4, r1 / 2, n // 6),
                            np.linspace(r1 / 2, r1, n - n // 3 - n // 6)])
        return Stations.from_r(np.unique(r))

    def w_breakpoints(self):
        w1 = self.st.w1
        return (w1 + LN2, w1 + LN4)

    def _w_range(self):
        return -np.log(self.b), -np.log(self.a)


# ---------------------------------------------------------------------------
# r2 and the full pipeline


@dataclass(frozen=True)
class R2Root:
    ell2: float
    w2: float
    r2: float
    value: float
    target: float
    bracket: tuple
    iterations: int


def u_integral(ell2, c2, r1, ker=None):
    """c2 times the u-integrand over (0, inf) for r2 = exp(-exp(ell2))."""
    st = PsiState(r1, ell2, 1.0, c2, ker)
    return c2 * st.J_total


def _u_integral_fast(ell2, c2, r1, E, zeta_over_t):
    with np.errstate(over="ignore"):
        w2 = np.exp(ell2)
    inv = 1.0 / w2
    ell18 = np.log(-np.log(r1) + LN8)
    if inv < 1e-8:
        Z = inv * zeta_over_t
    else:
        ker = make_cutoffs()
        Z, _ = integrate(lambda t: np.asarray(ker.zeta(t)) / (t * (w2 - LN4 - np.log(t))), 0.5, 1.0,
                         breakpoints=(0.505, 0.75, 0.995), abs_tol=1e-15, rel_tol=1e-13)
    return c2 * (E + ell2 + np.log1p(-LN4 * inv) - ell18 + Z)


U0_SLACK = 1e-12


def solve_r2(c1, c2, r1, delta, max_iter=400):
    """Bisection in ell2 = log log(1/r2) for the u-integral equal to log(1/delta).

    The target is raised by a relative 1e-12 so that e^{u(0)} <= delta survives
    rounding in the full evaluation of u(0).
    """
    ker = make_cutoffs()
    L = np.log(1.0 / delta) * (1.0 + U0_SLACK)
    base = PsiState(r1, np.inf, c1, c2, ker)
    E = base.E
    zt, _ = integrate(lambda t: np.asarray(ker.zeta(t)) / t, 0.5, 1.0, breakpoints=(0.505, 0.75, 0.995),
                      abs_tol=1e-15, rel_tol=1e-13)
    I = lambda l2: _u_integral_fast(l2, c2, r1, E, zt)
    rbar = min(r1 / 64.0, c1 * c1)
    lo = float(loglog(1.0 / rbar))
    hi = lo + 2.0 * L / c2 + 10.0
    if not I(lo) < L:
        raise StageError("solve_r2", "I at the upper radius bracket is not below log(1/delta)")
    if not I(hi) > L:
        raise StageError("solve_r2", "I at the lower radius bracket does not exceed log(1/delta)")
    it = 0
    for it in range(max_iter):
        mid = 0.5 * (lo + hi)
        if mid <= lo or mid >= hi:
            break
        if I(mid) < L:
            lo = mid
        else:
            hi = mid
    ell2 = hi
    with np.errstate(over="ignore", under="ignore"):
        w2 = float(np.exp(ell2))
        r2 = float(np.exp(-w2))
    return R2Root(ell2=ell2, w2=w2, r2=r2, value=float(I(ell2)), target=L,
                  bracket=(float(loglog(1.0 / rbar)), float(lo + 2.0 * L / c2 + 10.0)), iterations=it + 1)


@dataclass(frozen=True)
class CutoffParams:
    k: float
    epsilon: float
    delta: float
    r0: float
    r1: float
    r2: float
    ell2: float
    w2: float
    c1: float
    c2: float

    def as_solved(self, checks=None, notes=None):
        return SolvedParams("B", dict(self.__dict__), checks or {}, notes or [])


def psi(r, params):
    """psi at representable radii r (params: CutoffParams or PsiState)."""
    st = params if isinstance(params, PsiState) else PsiState(params.r1, params.ell2, params.c1, params.c2)
    r = np.asarray(r, dtype=float)
    with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
        x = r / st.r2 if st.r2 > 0 else np.full_like(r, np.inf)
        w = -np.log(r)
    out = st.psi_x(np.minimum(x, 8.0), w)
    return float(out) if out.ndim == 0 else out


def profile_from_params(cp, ker=None):
    st = PsiState(cp.r1, cp.ell2, cp.c1, cp.c2, ker)
    r1, r2, k = cp.r1, cp.r2, cp.k
    segs = [
        CoreSegment(0.0, 0.5 * r2, k, st, label="axis cap", inner=True),
        CoreSegment(0.5 * r2, r1 / 8.0, k, st, label="core"),
        TransitionSegment(r1 / 8.0, r1, k, st, label="outer cutoff"),
        product_segment(k, r1, 2.0 * r1, label="exterior"),
    ]
    return RadialProfile(segs, k=k, name="drawstring-B", meta=dict(method="B", state=st))


def build_drawstring_B(spec, n_grid=10_000):
    """Run the parameter lemmas and assemble the profile on [0, 2 r1]."""
    if isinstance(spec, dict):
        spec = DrawstringSpec(**spec)
    k, eps, delta, r0 = spec.k, spec.epsilon, spec.delta, spec.r0
    try:
        r1, r1_info = choose_r1(k, r0, spec.r1_max, n_grid)
    except (SearchExhausted, ValueError) as exc:
        raise StageError("choose_r1", str(exc)) from exc
    try:
        c1, c1_info = choose_c1(k, eps, r1, n_grid)
    except SearchExhausted as exc:
        raise StageError("choose_c1", str(exc)) from exc
    c2, c2_info = choose_c2(c1, r1, delta)
    if not c2_info["holds"]:
        raise StageError("choose_c2", "c2 inequality fails")
    root = solve_r2(c1, c2, r1, delta)
    cp = CutoffParams(k, eps, delta, r0, r1, root.r2, root.ell2, root.w2, c1, c2)
    prof = profile_from_params(cp)
    st = prof.meta["state"]
    rbar_proof = min(r1 * r1 / 64.0, c1 * c1)
    checks = dict(
        r1=r1_info["checks"],
        r1_corner_margins=r1_info["corner_margins"],
        c1=c1_info,
        c2=c2_info,
        r2_root=dict(value=root.value, target=root.target, rel_residual=abs(root.value - root.target) / root.target,
                     bracket_ell=list(root.bracket), iterations=root.iterations,
                     below_rbar=bool(root.ell2 > loglog(1.0 / min(r1 / 64.0, c1 * c1))),
                     alt_bracket_ok=bool(_u_integral_fast(float(loglog(1.0 / rbar_proof)), c2, r1, st.E,
                                                          st.Z.total) < root.target)),
        tables=dict(A=st.A.check, B=st.B.check, Z=st.Z.check, E=st.Etab.check),
        invariants=dict(c2_le_c1=bool(c2 <= c1), c1_below_cap=bool(c1 < min(r1, 1 / (100 * (1 + abs(k))))),
                        r1_below_r0=bool(r1 < r0)),
    )
    prof.meta["params"] = cp.as_solved(checks)
    prof.meta["spec"] = spec
    return prof


def debug_profile(c1, c2, r_hi=np.exp(-3.0)):
    """k = 0 and both cutoffs replaced by 1: f = r (1 - c1/w), u = -c2 log w."""
    st = PsiState(1.0, np.inf, c1, c2, debug=True)
    seg = CoreSegment(0.0, r_hi, 0.0, st, label="uncut core")
    return RadialProfile([seg], k=0.0, name="drawstring-B-debug", meta=dict(state=st))
