"""Space-form trigonometry (sn_k, cn_k, tn_k, arctn_k) and the fixed cutoff kernels.

sn_k is the solution of y'' = -k y with y(0)=0, y'(0)=1 and cn_k = sn_k'.
A power series is used when |k| r^2 is tiny so that the k -> 0 limit is exact.
"""
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np

from . import _core

SERIES_SWITCH = 1e-8


class DomainError(ValueError):
    """Argument outside the domain of a space-form function."""


def _out(x, like):
    return float(x) if np.ndim(like) == 0 else x


def sn(k, r):
    r = np.asarray(r, dtype=float)
    k = float(k)
    if k == 0.0:
        return _out(r.copy(), r)
    x = k * r * r
    series = r * (1.0 - x / 6.0 * (1.0 - x / 20.0 * (1.0 - x / 42.0)))
    s = np.sqrt(abs(k))
    with np.errstate(over="ignore", invalid="ignore"):
        closed = np.sin(s * r) / s if k > 0 else np.sinh(s * r) / s
    return _out(np.where(np.abs(x) < SERIES_SWITCH, series, closed), r)


def cn(k, r):
    r = np.asarray(r, dtype=float)
    k = float(k)
    if k == 0.0:
        return _out(np.ones_like(r), r)
    x = k * r * r
    series = 1.0 - x / 2.0 * (1.0 - x / 12.0 * (1.0 - x / 30.0))
    s = np.sqrt(abs(k))
    with np.errstate(over="ignore", invalid="ignore"):
        closed = np.cos(s * r) if k > 0 else np.cosh(s * r)
    return _out(np.where(np.abs(x) < SERIES_SWITCH, series, closed), r)


def tn(k, r):
    """sn_k / cn_k; for k > 0 only on [0, pi/(2 sqrt k))."""
    r = np.asarray(r, dtype=float)
    if k > 0 and np.any(r >= np.pi / (2.0 * np.sqrt(k))):
        raise DomainError("tn_k requested at or beyond the zero of cn_k")
    return _out(np.asarray(sn(k, r)) / np.asarray(cn(k, r)), r)


def arctn(k, y):
    """Inverse of tn_k on its principal branch."""
    y = np.asarray(y, dtype=float)
    k = float(k)
    if k == 0.0:
        return _out(y.copy(), y)
    s = np.sqrt(abs(k))
    if k < 0 and np.any(np.abs(s * y) >= 1.0):
        raise DomainError("arctn_k argument outside the range of tn_k (|y| >= 1/sqrt(-k))")
    x = k * y * y
    series = y * (1.0 - x / 3.0 + x * x / 5.0 - x * x * x / 7.0)
    with np.errstate(divide="ignore", invalid="ignore"):
        closed = np.arctan(s * y) / s if k > 0 else np.arctanh(s * y) / s
    return _out(np.where(np.abs(x) < SERIES_SWITCH, series, closed), y)


def cot_correction(k, r):
    """r * cn_k(r) / sn_k(r) - 1, accurate when k r^2 is small."""
    r = np.asarray(r, dtype=float)
    x = float(k) * r * r
    series = -x / 3.0 - x * x / 45.0 - 2.0 * x ** 3 / 945.0 - x ** 4 / 4725.0
    with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
        closed = r * np.asarray(cn(k, r)) / np.asarray(sn(k, r)) - 1.0
    return _out(np.where(np.abs(x) < 1e-3, series, closed), r)


# ---------------------------------------------------------------------------
# unit bump exp(-1/(1-y^2)) on (-1, 1), normalized, and its tabulated moments

_TABLE_N = 4096
_GL_X, _GL_W = np.polynomial.legendre.leggauss(10)


def _raw_bump(y):
    y = np.asarray(y, dtype=float)
    out = np.zeros_like(y)
    inside = np.abs(y) < 1.0
    yi = y[inside]
    out[inside] = np.exp(-1.0 / (1.0 - yi * yi))
    return out


def _raw_bump_d1(y):
    y = np.asarray(y, dtype=float)
    out = np.zeros_like(y)
    inside = np.abs(y) < 1.0
    yi = y[inside]
    q = 1.0 - yi * yi
    out[inside] = np.exp(-1.0 / q) * (-2.0 * yi / (q * q))
    return out


@dataclass(frozen=True)
class _BumpTables:
    norm: float
    m2: float
    grid: np.ndarray
    h: float
    F: tuple  # (values, first, second) for the CDF, first and second moments


@lru_cache(maxsize=1)
def _bump_tables():
    grid = np.linspace(-1.0, 1.0, _TABLE_N + 1)
    h = grid[1] - grid[0]
    mids = 0.5 * (grid[:-1] + grid[1:])
    nodes = mids[:, None] + 0.5 * h * _GL_X[None, :]
    phi = _raw_bump(nodes)
    cells0 = (phi * _GL_W).sum(axis=1) * 0.5 * h
    cells1 = (phi * nodes * _GL_W).sum(axis=1) * 0.5 * h
    cells2 = (phi * nodes * nodes * _GL_W).sum(axis=1) * 0.5 * h
    C = cells0.sum()
    cdf = np.concatenate([[0.0], np.cumsum(cells0)]) / C
    m1 = np.concatenate([[0.0], np.cumsum(cells1)]) / C
    m2 = np.concatenate([[0.0], np.cumsum(cells2)]) / C
    p = _raw_bump(grid) / C
    dp = _raw_bump_d1(grid) / C
    y = grid
    tables = (
        (cdf, p, dp),
        (m1, y * p, p + y * dp),
        (m2, y * y * p, 2 * y * p + y * y * dp),
    )
    tables = tuple(tuple(np.ascontiguousarray(a) for a in t) for t in tables)
    return _BumpTables(norm=C, m2=float(m2[-1]), grid=grid, h=h, F=tables)


def bump(y):
    """Normalized even bump supported in [-1, 1]."""
    return _out(_raw_bump(y) / _bump_tables().norm, np.asarray(y))


def bump_moments(y):
    """(CDF, first moment, second moment) of the unit bump integrated over [-1, y]."""
    y = np.asarray(y, dtype=float)
    T = _bump_tables()
    yc = np.clip(y, -1.0, 1.0)
    out = []
    for j, (F, D1, D2) in enumerate(T.F):
        v = np.asarray(_core.hermite5(np.ravel(yc), -1.0, T.h, F, D1, D2)).reshape(y.shape)
        v = np.where(y <= -1.0, 0.0, v)
        v = np.where(y >= 1.0, (1.0, 0.0, T.m2)[j], v)
        out.append(v)
    return out


def bump_second_moment():
    return _bump_tables().m2


def bump_antiderivatives(z):
    """Phi(z), Psi1(z) = int (z - y) bump, Psi2(z) = int (z - y)^2/2 bump, all over y <= z."""
    z = np.asarray(z, dtype=float)
    cdf, m1, m2 = bump_moments(z)
    psi1 = z * cdf - m1
    psi2 = 0.5 * (z * z * cdf - 2.0 * z * m1 + m2)
    hi = z >= 1.0
    psi1 = np.where(hi, z, psi1)
    psi2 = np.where(hi, 0.5 * (z * z + bump_second_moment()), psi2)
    return cdf, psi1, psi2


# ---------------------------------------------------------------------------
# cutoff kernel: zeta = 0 on [0, 1/2], 1 on [1, inf)


@dataclass(frozen=True)
class CutoffKernel:
    """Mollified piecewise-quadratic ramp.

    The ramp accelerates with zeta'' = +a on [1/2 + beta, 3/4] and decelerates
    with -a on [3/4, 1 - beta]; convolving with the bump of half-width beta
    makes it smooth with plateaus exactly on [0, 1/2] and [1, inf).
    """
    beta: float
    accel: float
    measured_bounds: dict = field(default_factory=dict)

    def _half(self, x, nu):
        # direct formula, valid for x <= 3/4
        b = self.beta
        p0 = 0.5 + b
        cdf0, psi10, psi20 = bump_antiderivatives((x - p0) / b)
        cdf1, psi11, psi21 = bump_antiderivatives((x - 0.75) / b)
        if nu == 0:
            return self.accel * b * b * (psi20 - 2.0 * psi21)
        if nu == 1:
            return self.accel * b * (psi10 - 2.0 * psi11)
        return self.accel * (cdf0 - 2.0 * cdf1)

    def zeta(self, x, nu=0):
        x = np.asarray(x, dtype=float)
        lo = np.minimum(x, 0.75)
        hi = np.minimum(1.5 - x, 0.75)
        a = self._half(lo, nu)
        b = self._half(hi, nu)
        if nu == 0:
            v = np.where(x <= 0.75, a, 1.0 - b)
            v = np.where(x <= 0.5, 0.0, np.where(x >= 1.0, 1.0, v))
        elif nu == 1:
            v = np.where(x <= 0.75, a, b)
            v = np.where((x <= 0.5) | (x >= 1.0), 0.0, v)
        elif nu == 2:
            v = np.where(x <= 0.75, a, -b)
            v = np.where((x <= 0.5) | (x >= 1.0), 0.0, v)
        else:
            raise ValueError("only derivatives up to order 2 are available")
        return _out(v, x)

    def eta(self, x, nu=0):
        """1 - zeta, computed without cancellation near x = 1."""
        x = np.asarray(x, dtype=float)
        if nu == 0:
            lo = np.minimum(x, 0.75)
            hi = np.minimum(1.5 - x, 0.75)
            v = np.where(x <= 0.75, 1.0 - self._half(lo, 0), self._half(hi, 0))
            v = np.where(x <= 0.5, 1.0, np.where(x >= 1.0, 0.0, v))
            return _out(v, x)
        return _out(-np.asarray(self.zeta(x, nu)), x)


NOMINAL_D1 = 4.0
NOMINAL_D2 = 16.0
SLACK = 1.05


@lru_cache(maxsize=4)
def make_cutoffs(beta=0.005, grid_points=100_000):
    """Build the cutoff kernel and record its derivative bounds measured on a grid."""
    accel = 4.0 / (0.5 - 2.0 * beta) ** 2
    ker = CutoffKernel(beta=beta, accel=accel)
    x = np.linspace(0.0, 1.5, grid_points)
    z0 = np.asarray(ker.zeta(x))
    z1 = np.asarray(ker.zeta(x, 1))
    z2 = np.asarray(ker.zeta(x, 2))
    e0 = np.asarray(ker.eta(x))
    if np.any(z0[x <= 0.5] != 0.0) or np.any(z0[x >= 1.0] != 1.0):
        raise ValueError("cutoff plateau structure violated")
    if np.any(e0[x <= 0.5] != 1.0) or np.any(e0[x >= 1.0] != 0.0):
        raise ValueError("cutoff plateau structure violated")
    if np.any(np.diff(z0) < -1e-15) or np.any(z1 < -1e-12):
        raise ValueError("zeta is not monotone")
    bounds = {
        "sup_zeta_d1": float(z1.max()),
        "sup_abs_zeta_d2": float(np.abs(z2).max()),
        "sup_abs_eta_d1": float(z1.max()),
        "sup_abs_eta_d2": float(np.abs(z2).max()),
        "grid_points": int(grid_points),
    }
    if bounds["sup_zeta_d1"] > NOMINAL_D1 * SLACK or bounds["sup_abs_zeta_d2"] > NOMINAL_D2 * SLACK:
        raise ValueError(f"cutoff derivative bounds exceed the allowed slack: {bounds}")
    return CutoffKernel(beta=beta, accel=accel, measured_bounds=bounds)
