"""Radial profiles (f, u) of the warped product e^{-2u}(dr^2 + f^2 dtheta^2) + e^{2u} dt^2.

Profiles are ordered lists of segments. Every segment can be evaluated at a
set of stations; a station carries r together with w = log(1/r) and
ell = log(w), so that points far below the double-precision range of r can
still be addressed through w or ell. Quantities that overflow (curvatures of
order 1/r^2) are returned as Scaled arrays: value = const + mant * exp(logscale).
"""
from dataclasses import dataclass, field

import numpy as np

from .quadrature import integrate
from .space_forms import DomainError, cn, sn

R_SWITCH = 1e-6     # below this radius integrals run in the w coordinate
# absolute floor for segment integrals; the relative tolerance governs
INTEGRAL_FLOOR = 1e-300
W_CAP = 2000.0      # w-quadrature stops here, the remainder is bounded analytically
LOG_MAX = 700.0


class ProfileError(ValueError):
    pass


# ---------------------------------------------------------------------------
# scaled numbers and stations


@dataclass(frozen=True)
class Scaled:
    """Arrays representing const + mant * exp(logscale) without overflow."""
    const: np.ndarray
    mant: np.ndarray
    logscale: np.ndarray

    @staticmethod
    def plain(v):
        v = np.asarray(v, dtype=float)
        return Scaled(v, np.zeros_like(v), np.zeros_like(v))

    def times(self, c):
        c = np.asarray(c, dtype=float)
        return Scaled(self.const * c, self.mant * c, self.logscale)

    def value(self):
        const = np.asarray(self.const, dtype=float)
        mant = np.asarray(self.mant, dtype=float)
        ls = np.asarray(self.logscale, dtype=float)
        with np.errstate(over="ignore", invalid="ignore"):
            small = ls <= LOG_MAX
            direct = const + mant * np.exp(np.where(small, ls, 0.0))
            huge = np.where(mant > 0, np.inf, np.where(mant < 0, -np.inf, const))
        return np.where(small, direct, huge)

    def log10_abs(self):
        """log10 |value| (uses the dominant term when the value overflows)."""
        v = self.value()
        with np.errstate(divide="ignore", invalid="ignore"):
            out = np.log10(np.abs(v))
            big = ~np.isfinite(v) & (np.asarray(self.mant) != 0)
            alt = (np.asarray(self.logscale) + np.log(np.abs(np.asarray(self.mant)))) / np.log(10.0)
        return np.where(big, alt, out)


@dataclass(frozen=True)
class Stations:
    """Struct of arrays: r, w = log(1/r), ell = log(w), optional local ratio x."""
    r: np.ndarray
    w: np.ndarray
    ell: np.ndarray
    x: np.ndarray

    def __len__(self):
        return int(np.size(self.r))

    @staticmethod
    def from_r(r):
        r = np.atleast_1d(np.asarray(r, dtype=float))
        with np.errstate(divide="ignore", invalid="ignore"):
            w = -np.log(r)
            ell = np.log(w)
        return Stations(r, w, ell, np.full_like(r, np.nan))

    @staticmethod
    def from_w(w):
        w = np.atleast_1d(np.asarray(w, dtype=float))
        with np.errstate(divide="ignore", invalid="ignore", under="ignore"):
            r = np.exp(-w)
            ell = np.log(w)
        return Stations(r, w, ell, np.full_like(w, np.nan))

    @staticmethod
    def from_ell(ell):
        ell = np.atleast_1d(np.asarray(ell, dtype=float))
        with np.errstate(over="ignore", under="ignore"):
            w = np.exp(ell)
            r = np.exp(-w)
        return Stations(r, w, ell, np.full_like(ell, np.nan))

    @staticmethod
    def near(w_anchor, ell_anchor, x):
        """Stations at r = x * r_anchor where r_anchor = exp(-w_anchor) may underflow."""
        x = np.atleast_1d(np.asarray(x, dtype=float))
        with np.errstate(divide="ignore", invalid="ignore", under="ignore", over="ignore"):
            lx = np.log(x)
            w = w_anchor - lx
            if np.isfinite(w_anchor) and w_anchor < 1e15:
                ell = np.log(w)
            elif np.isfinite(w_anchor):
                ell = ell_anchor + np.log1p(-lx / w_anchor)
            else:
                ell = np.full_like(x, ell_anchor)
            r = np.exp(-w_anchor) * x if np.isfinite(w_anchor) else np.zeros_like(x)
        return Stations(r, w, ell, x)

    def take(self, idx):
        return Stations(self.r[idx], self.w[idx], self.ell[idx], self.x[idx])


def concat_stations(parts):
    parts = [p for p in parts if len(p)]
    if not parts:
        e = np.zeros(0)
        return Stations(e, e, e, e)
    return Stations(*(np.concatenate([getattr(p, f) for p in parts]) for f in ("r", "w", "ell", "x")))


# ---------------------------------------------------------------------------
# segments


class Segment:
    """One analytic piece of a profile on [a, b] (profile coordinate).

    Subclasses implement jet(r) for representable r; deep segments override
    sjet/bracket/mean_curv/stations to work from w or local charts.
    """
    tail_is_rigorous = False

    def __init__(self, a, b, k=0.0, label=""):
        self.a = float(a)
        self.b = float(b)
        self.k = float(k)
        self.label = label

    # --- evaluation -------------------------------------------------------
    def jet(self, r):
        raise NotImplementedError

    def sjet(self, S):
        """Scale-free jet: q=f/sn_k, rq1=r q', f1=f', rf2=r f'', u, ru1=r u', snr=sn_k(r)/r."""
        r = S.r
        f, f1, f2, u, u1 = (np.asarray(v, dtype=float) for v in self.jet(r))
        s = np.asarray(sn(self.k, r))
        c = np.asarray(cn(self.k, r))
        q = f / s
        return dict(q=q, rq1=(f1 - q * c) * (r / s), f1=f1, rf2=r * f2,
                    u=u, ru1=r * u1, snr=s / r)

    def bracket(self, S):
        """-f''/f - u'^2 as a Scaled array."""
        J = self.sjet(S)
        fr = J["q"] * J["snr"]
        mant = -J["rf2"] / fr - J["ru1"] ** 2
        return Scaled(np.zeros_like(mant), mant, 2.0 * S.w)

    def mean_curv(self, S):
        J = self.sjet(S)
        fr = J["q"] * J["snr"]
        mant = np.exp(J["u"]) * J["f1"] / fr
        return Scaled(np.zeros_like(mant), mant, np.asarray(S.w, dtype=float))

    def u_values(self, S):
        return self.sjet(S)["u"]

    def curvature(self, S):
        B = self.bracket(S)
        u = np.asarray(self.u_values(S), dtype=float)
        # fold e^{2u} into the log-scale so that it cannot underflow against a huge scale
        return Scaled(2.0 * np.exp(2.0 * u) * B.const, 2.0 * B.mant, B.logscale + 2.0 * u)

    # --- grids ------------------------------------------------------------
    def stations(self, n):
        n = max(int(n), 8)
        lo, hi = self.a, self.b
        if lo <= 0.0:
            w_mid = -np.log(hi) + 28.0
            return concat_stations([
                Stations.from_r(np.geomspace(np.exp(-w_mid), hi, n // 2, endpoint=False)),
                Stations.from_w(np.geomspace(w_mid, max(self.w_cap(), 2.0 * w_mid), n - n // 2)),
            ])
        if hi / lo > 4.0:
            return Stations.from_r(np.geomspace(lo, hi, n))
        return Stations.from_r(np.linspace(lo, hi, n))

    # --- integrals ----------------------------------------------------------
    def integrand_r(self, kind, p, ref=None):
        def g(r):
            J = self.sjet(Stations.from_r(r))
            return _integrand(kind, J, r, None, p, ref)
        return g

    def integrand_w(self, kind, p, ref=None):
        def g(w):
            S = Stations.from_w(w)
            J = self.sjet(S)
            return _integrand(kind, J, S.r, S.w, p, ref)
        return g

    def breakpoints(self):
        return ()

    def w_breakpoints(self):
        return ()

    def w_cap(self):
        """Deepest w at which sjet is still accurate."""
        return 690.0

    def w_limit(self):
        """Largest w reached by this segment (inf for segments touching the axis)."""
        return np.inf if self.a <= 0.0 else -np.log(self.a)

    def tail_bounds(self, W):
        """Sup bounds on (0, e^{-W}) for e^{-u}, f/r, |Delta g|, |r grad Delta g|."""
        S = Stations.from_w(np.geomspace(0.5 * W, W, 64))
        J = self.sjet(S)
        e = np.exp(-J["u"])
        fr = J["q"] * J["snr"]
        dev, rgrad = _deviation(J)
        return dict(exp_neg_u=float(e.max()), fr=float(fr.max()),
                    dev=float(dev.max()), rgrad=float(rgrad.max()), rigorous=False)

    def integrate(self, kind, p=1.0, ref=None):
        """Return (value, quadrature error, tail bound) of this segment's contribution."""
        a, b = self.a, self.b
        val = 0.0
        err = 0.0
        tail = 0.0
        split = max(a, min(b, R_SWITCH))
        if b > split:
            v, e = integrate(self.integrand_r(kind, p, ref), split, b,
                             breakpoints=self.breakpoints(), abs_tol=INTEGRAL_FLOOR)
            val += v
            err += e
        if split > a:
            w_lo = -np.log(split)
            cap = self.w_cap()
            w_hi = min(self.w_limit(), cap)
            if w_hi > w_lo:
                v, e = integrate(self.integrand_w(kind, p, ref), w_lo, w_hi,
                                 breakpoints=[w for w in self.w_breakpoints() if w_lo < w < w_hi],
                                 abs_tol=INTEGRAL_FLOOR)
                val += v
                err += e
            if self.w_limit() > cap:
                tail = _tail(kind, self.tail_bounds(cap), cap, p)
        return val, err, tail


def _deviation(J):
    u = J["u"]
    q = J["q"]
    ru1 = J["ru1"]
    rq1 = J["rq1"]
    em = np.exp(-2.0 * u)
    ep = np.exp(2.0 * u)
    d = np.stack([em - 1.0, em * q * q - 1.0, ep - 1.0])
    g = np.stack([-2.0 * ru1 * em, em * (2.0 * q * rq1 - 2.0 * ru1 * q * q), 2.0 * ru1 * ep])
    return np.sqrt((d * d).sum(axis=0)), np.sqrt((g * g).sum(axis=0))


def _integrand(kind, J, r, w, p, ref):
    e = np.exp(-J["u"])
    if kind == "dist":
        out = e
        return out if w is None else out * r
    if kind == "vol":
        fr = J["q"] * J["snr"]
        return e * fr * r if w is None else e * fr * r * r
    if kind == "w1p":
        dev, rgrad = _deviation(J)
        with np.errstate(divide="ignore", invalid="ignore", under="ignore"):
            if w is None:
                return (dev ** p + (rgrad / r) ** p) * J["snr"] * r
            return (dev ** p * r * r + rgrad ** p * np.exp(-(2.0 - p) * w)) * J["snr"]
    raise ValueError(kind)


def _tail(kind, bd, W, p):
    rho = np.exp(-W)
    if kind == "dist":
        return bd["exp_neg_u"] * rho
    if kind == "vol":
        return bd["exp_neg_u"] * bd["fr"] * rho * rho / 2.0
    snr = 1.01
    return snr * (bd["dev"] ** p * rho * rho / 2.0 + bd["rgrad"] ** p * np.exp(-(2.0 - p) * W) / (2.0 - p))


class ClosedFormSegment(Segment):
    """Segment given by vectorized callables f, f', f'', u, u' of r."""

    def __init__(self, a, b, f, f1, f2, u=None, u1=None, k=0.0, label="", sjet_w=None):
        super().__init__(a, b, k, label)
        self._f, self._f1, self._f2 = f, f1, f2
        zero = lambda r: np.zeros_like(np.asarray(r, dtype=float))
        self._u = u or zero
        self._u1 = u1 or zero
        self._sjet_w = sjet_w

    def jet(self, r):
        r = np.asarray(r, dtype=float)
        return self._f(r), self._f1(r), self._f2(r), self._u(r), self._u1(r)

    def w_cap(self):
        return W_CAP if self._sjet_w is not None else 690.0

    def sjet(self, S):
        if self._sjet_w is None:
            return super().sjet(S)
        deep = ~(S.r > 1e-280)
        if not np.any(deep):
            return super().sjet(S)
        out = {key: np.asarray(v, dtype=float).copy() for key, v in self._sjet_w(S.w).items()}
        if not np.all(deep):
            idx = np.nonzero(~deep)[0]
            shallow = super().sjet(S.take(idx))
            for key in out:
                out[key][idx] = shallow[key]
        return out


# ---------------------------------------------------------------------------
# profiles


@dataclass(frozen=True)
class FlatReference:
    """Comparison metric dr^2 + sn_k(r)^2 dtheta^2 + dt^2 with t-period period_t."""
    k: float = 0.0
    period_t: float = 2.0 * np.pi

    def __post_init__(self):
        if not self.period_t > 0:
            raise ValueError("period_t must be positive")


@dataclass
class RadialProfile:
    segments: list
    k: float = 0.0
    name: str = ""
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        if not self.segments:
            raise ProfileError("profile needs at least one segment")
        for s0, s1 in zip(self.segments[:-1], self.segments[1:]):
            if abs(s1.a - s0.b) > 1e-14 * max(1.0, abs(s0.b)) and not (s0.b == 0.0 and s1.a == 0.0):
                raise ProfileError(f"segments {s0.label!r} and {s1.label!r} do not abut")

    @property
    def r_min(self):
        return self.segments[0].a

    @property
    def r_max(self):
        return self.segments[-1].b

    def junctions(self):
        return [s.b for s in self.segments[:-1]]

    def segment_index(self, r, side=None):
        r = float(r)
        if not (self.r_min < r <= self.r_max) and not (r == self.r_min == 0.0 and False):
            raise DomainError(f"r={r} outside ({self.r_min}, {self.r_max}]")
        for i, s in enumerate(self.segments):
            if r == s.b and i + 1 < len(self.segments):
                if side is None:
                    raise DomainError(f"r={r} is a junction; pass side='left' or 'right'")
                return i if side == "left" else i + 1
            if s.a < r <= s.b or (r == s.a and side == "right"):
                return i
        return len(self.segments) - 1

    def junction_residuals(self):
        out = []
        for s0, s1 in zip(self.segments[:-1], self.segments[1:]):
            r = s0.b
            if not r > 1e-280:
                continue
            a = s0.jet(np.array([r]))
            b = s1.jet(np.array([r]))
            scale = max(abs(float(a[0][0])), 1e-300)
            out.append(dict(r=r, df=abs(float(a[0][0] - b[0][0])), df_rel=abs(float(a[0][0] - b[0][0])) / scale,
                            df1=abs(float(a[1][0] - b[1][0])), du=abs(float(a[3][0] - b[3][0]))))
        return out


def _eval_one(p, r, side, what):
    i = p.segment_index(r, side)
    S = Stations.from_r([r])
    seg = p.segments[i]
    if what == "R":
        return float(seg.curvature(S).value()[0])
    return float(seg.mean_curv(S).value()[0])


def scalar_curvature(p, r, side=None):
    """2 e^{2u} (-f''/f - u'^2) at radius r (one side must be chosen at junctions)."""
    return _eval_one(p, r, side, "R")


def one_sided_curvatures(p, r):
    return scalar_curvature(p, r, "left"), scalar_curvature(p, r, "right")


def mean_curvature(p, r, side=None):
    """e^u f'/f: mean curvature of the level set {r = const} w.r.t. the outward normal."""
    return _eval_one(p, r, side, "H")


def _total(p, kind, pexp=1.0, ref=None):
    val = err = tail = 0.0
    for seg in p.segments:
        v, e, t = seg.integrate(kind, pexp, ref)
        val += v
        err += e
        tail += t
    return val, err, tail


def axis_distance(p, details=False):
    """Length of a radial segment from the axis to r_max: integral of e^{-u}."""
    if p.r_min != 0.0:
        raise ProfileError("axis distance needs a profile reaching r = 0")
    v, e, t = _total(p, "dist")
    return (v, e, t) if details else v


def tube_volume(p, height, details=False):
    """2 pi height * integral of e^{-u} f."""
    if not height > 0:
        raise ValueError("height must be positive")
    v, e, t = _total(p, "vol")
    c = 2.0 * np.pi * height
    return (c * v, c * e, c * t) if details else c * v


def w1p_deviation(p, ref, pexp, details=False):
    """W^{1,p} norm of the metric difference to the reference over the tube.

    Components are taken in the reference orthonormal coframe (dr, sn_k dtheta, dt);
    gradients are radial derivatives; dV = 2 pi T sn_k(r) dr.
    """
    if not 1.0 <= pexp:
        raise ValueError("pexp must be >= 1")
    if p.r_min != 0.0:
        raise ProfileError("deviation integral needs a profile reaching r = 0")
    unreliable = pexp >= 2.0
    v, e, t = _total(p, "w1p", pexp, ref)
    c = 2.0 * np.pi * ref.period_t
    val = (c * v) ** (1.0 / pexp)
    if details:
        return dict(value=val, quad_error=c * e, tail_bound=c * t, unreliable=unreliable,
                    upper=(c * (v + e + t)) ** (1.0 / pexp))
    return val


# ---------------------------------------------------------------------------
# simple closed-form profiles


def product_segment(k, a, b, alpha=1.0, u0=0.0, label="product"):
    """f = alpha sn_k, u = u0: constant curvature 2 k e^{2 u0}."""
    return ClosedFormSegment(
        a, b,
        lambda r: alpha * sn(k, r),
        lambda r: alpha * cn(k, r),
        lambda r: -k * alpha * sn(k, r),
        lambda r: np.full_like(r, u0),
        None, k=k, label=label,
    )


def product_profile(k, r_max, alpha=1.0, u0=0.0):
    return RadialProfile([product_segment(k, 0.0, r_max, alpha, u0)], k=k, name="product")


def prototype_sjet(c1, c2):
    def sjet_w(w):
        w = np.asarray(w, dtype=float)
        with np.errstate(divide="ignore", invalid="ignore"):
            return dict(q=1.0 - c1 / w, rq1=c1 / (w * w), f1=1.0 - c1 / w - c1 / (w * w),
                        rf2=-c1 * (w + 2.0) / w ** 3, u=-c2 * np.log(w), ru1=c2 / w,
                        snr=np.ones_like(w))
    return sjet_w


def prototype_segment(c1, c2, a, b, label="prototype"):
    """f = r (1 - c1/log(1/r)), u = -c2 log log(1/r)."""
    W = lambda r: -np.log(r)
    return ClosedFormSegment(
        a, b,
        lambda r: r * (1.0 - c1 / W(r)),
        lambda r: 1.0 - c1 / W(r) - c1 / W(r) ** 2,
        lambda r: -c1 * (W(r) + 2.0) / (r * W(r) ** 3),
        lambda r: -c2 * np.log(W(r)),
        lambda r: c2 / (r * W(r)),
        k=0.0, label=label, sjet_w=prototype_sjet(c1, c2),
    )


def prototype_profile(c1, c2, r_lo=0.0, r_hi=np.exp(-3.0)):
    return RadialProfile([prototype_segment(c1, c2, r_lo, r_hi)], k=0.0, name="prototype",
                         meta=dict(c1=c1, c2=c2))


def profile_csv_rows(p, n=2000):
    """Rows (r, w, f, f', f'', u, u', R, H) on representable grid stations."""
    rows = []
    for seg in p.segments:
        S = seg.stations(max(n // len(p.segments), 8))
        keep = S.r > 1e-300
        S = S.take(np.nonzero(keep)[0])
        if not len(S):
            continue
        J = seg.sjet(S)
        R = seg.curvature(S).value()
        H = seg.mean_curv(S).value()
        f = J["q"] * J["snr"] * S.r
        with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
            f2 = J["rf2"] / S.r
            u1 = J["ru1"] / S.r
        for j in range(len(S)):
            rows.append((S.r[j], S.w[j], f[j], J["f1"][j], f2[j], J["u"][j], u1[j], R[j], H[j]))
    rows.sort(key=lambda t: t[0])
    return [row for j, row in enumerate(rows) if j == 0 or row[0] != rows[j - 1][0]]
