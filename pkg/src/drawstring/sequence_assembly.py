"""Drawstring sequences on T^3 and S^2 x S^1 and their scrunching diagnostics."""
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field

import numpy as np

from .certifier import certify, reference_volume
from .cutoff_construction import build_drawstring_B
from .gluing_construction import build_drawstring_A
from .params import DrawstringSpec
from .radial_metric import FlatReference, axis_distance, tube_volume, w1p_deviation

CIRCLE = 2.0 * np.pi  # length of the t-circle and of each torus circle
TOPOLOGIES = {
    "T3": dict(k=0.0, ambient_volume=CIRCLE ** 3),
    "S2xS1": dict(k=1.0, ambient_volume=4.0 * np.pi * CIRCLE),
}
MAX_R0_HALVINGS = 60


def _builder(method):
    return build_drawstring_A if method == "A" else build_drawstring_B


def member_spec(topology, i, method="B", r0=None, r1_max=None):
    """Construction inputs for member i.

    Curvature is built with eps = 1/(2i) so that R >= 2k - 1/i; the warp uses
    delta = 1/(8i) so that 2 pi e^{u(0)} + 2/i stays below 3/i.
    """
    k = TOPOLOGIES[topology]["k"]
    return DrawstringSpec(k=k, epsilon=0.5 / i, delta=0.125 / i, r0=r0 if r0 is not None else 0.5 / i ** 2,
                          method=method, r1_max=r1_max)


@dataclass
class SequenceMember:
    i: int
    topology: str
    spec: DrawstringSpec
    profile: object
    reference: FlatReference
    report: object
    r0_halvings: int = 0

    @property
    def eps_i(self):
        return 1.0 / self.i

    @property
    def delta_i(self):
        return 1.0 / self.i

    def __iter__(self):
        return iter((self.profile, self.reference))


def build_member(topology, i, method="B", n=4000, r1_max=None):
    if topology not in TOPOLOGIES:
        raise ValueError(f"unknown topology {topology!r}")
    spec = member_spec(topology, i, method, r1_max=r1_max)
    for halvings in range(MAX_R0_HALVINGS):
        prof = _builder(method)(spec)
        r1 = prof.meta["params"].values["r1"]
        if 100.0 * reference_volume(spec.k, r1) < 1.0 / i ** 4:
            break
        spec = member_spec(topology, i, method, r0=0.5 * spec.r0, r1_max=r1_max)
    else:
        raise RuntimeError(f"member {i}: could not make 100 V0 < 1/i^4")
    rep = certify(prof, spec, n=n)
    return SequenceMember(i, topology, spec, prof, FlatReference(spec.k, CIRCLE), rep, halvings)


def build_sequence(topology, i_max, method="B", i_min=2, n=4000, workers=None):
    """Members i = i_min..i_max.

    Members are built independently, then any member whose r1 exceeds that of an
    earlier member is rebuilt with r1 capped at the running minimum, so r1 is
    non-increasing in i.
    """
    if topology not in TOPOLOGIES:
        raise ValueError(f"unknown topology {topology!r}")
    if i_max < 2 or i_min < 2 or i_min > i_max:
        raise ValueError("need 2 <= i_min <= i_max")
    idx = list(range(int(i_min), int(i_max) + 1))
    workers = workers or int(os.environ.get("DRAWSTRING_THREADS", "1"))
    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as ex:
            seq = list(ex.map(lambda i: build_member(topology, i, method, n), idx))
    else:
        seq = [build_member(topology, i, method, n) for i in idx]
    cap = np.inf
    for j, m in enumerate(seq):
        r1 = m.profile.meta["params"].values["r1"]
        if r1 > cap:
            m = seq[j] = build_member(topology, m.i, method, n, r1_max=cap)
            r1 = m.profile.meta["params"].values["r1"]
        cap = min(cap, r1)
    return seq


# ---------------------------------------------------------------------------
# scrunching


@dataclass
class ScrunchRecord:
    i: int
    eps_i: float
    delta_i: float
    H_i: float
    vol_Ui: float
    vol_Ni: float
    diam_bound: float
    gamma_length: float = 0.0
    axis_distance: float = 0.0
    vol_Ui_total: float = 0.0
    w1p: dict = field(default_factory=dict)
    checks: dict = field(default_factory=dict)

    def to_dict(self):
        return asdict(self)


def axis_warp(p):
    """u at the axis."""
    if "glue" in p.meta:
        return float(p.meta["glue"].u_cap)
    if "state" in p.meta:
        return float(p.meta["state"].u0)
    seg = p.segments[0]
    S = seg.stations(64)
    return float(np.asarray(seg.u_values(S))[int(np.argmin(S.r))])


def _disc_area(k, a, b):
    """Area of {a <= d <= b} in the model surface of curvature k (k in {0, 1})."""
    if k == 0:
        return np.pi * (b * b - a * a)
    return 2.0 * np.pi * (np.cos(a) - np.cos(b))


def scrunch_report(seq, p_list=(1.0, 1.5, 1.9)):
    out = []
    for m in seq:
        p, k, i = m.profile, m.spec.k, m.i
        eps_i = delta_i = 1.0 / i
        rho = p.r_max
        d, de, dt = axis_distance(p, details=True)
        dist = d + de + dt
        gamma = CIRCLE * np.exp(axis_warp(p))
        diam = gamma + 2.0 * (dist + (1.0 / i - rho))
        H = max(3.0 / i, diam)  # 3 delta_i with delta_i = 1/i
        v, ve, vt = tube_volume(p, 1.0, details=True)
        tube = v + ve + vt
        # per unit t-length, the normalization of the volume condition
        vol_U = _disc_area(k, rho, 1.0 / i) + tube
        vol_U_total = CIRCLE * vol_U
        ball = CIRCLE * _disc_area(k, 0.0, delta_i)
        annulus = CIRCLE * _disc_area(k, rho, 1.0 / i)
        amb = TOPOLOGIES[m.topology]["ambient_volume"]
        vol_N = amb - CIRCLE * _disc_area(k, 0.0, rho) + CIRCLE * tube
        rep = m.report
        checks = dict(
            isometric_outside=bool(rep.conditions["II"].passed and rep.conditions["III"].passed and rho <= 1.0 / i),
            volume_U=bool(vol_U_total <= ball * (1 + eps_i)),
            volume_U_annulus=bool(vol_U_total <= (annulus + CIRCLE * _disc_area(k, 0.0, rho)) * (1 + eps_i)),
            volume_N=bool(vol_N <= amb * (1 + eps_i)),
            diameter=bool(diam <= H),
            H_le_3_over_i=bool(H <= 3.0 / i),
            vol_U_bound=bool(vol_U <= 2 * np.pi / i ** 2 + 50.0 / i ** 4),
            curvature_target=bool(rep.conditions["I"].passed),
            certified=bool(rep.passed),
        )
        checks["definition_conditions"] = bool(checks["isometric_outside"] and checks["volume_U"]
                                               and checks["volume_N"] and checks["diameter"])
        w = {float(q): float(w1p_deviation(p, m.reference, q)) for q in p_list}
        out.append(ScrunchRecord(i, eps_i, delta_i, H, vol_U, vol_N, diam, gamma, dist, vol_U_total, w, checks))
    return out


def sequence_rows(records, pexp=1.5):
    """CSV rows (i, eps, delta, H, volU, w1p_<p>)."""
    return [(r.i, r.eps_i, r.delta_i, r.H_i, r.vol_Ui, r.w1p.get(float(pexp), float("nan"))) for r in records]


# ---------------------------------------------------------------------------
# pulled-string quotient


@dataclass
class PulledStringSpace:
    """Finite sample of a metric space with a curve sigma to be pulled to a point."""
    points: np.ndarray
    sigma: np.ndarray
    dist: object  # vectorized d^X(a, b) on arrays of points

    def d_sigma(self, x):
        x = np.asarray(x, dtype=float)
        return float(np.min(self.dist(np.broadcast_to(x, self.sigma.shape), self.sigma)))


def torus_distance(periods):
    per = np.asarray(periods, dtype=float)

    def d(a, b):
        diff = np.abs(np.asarray(a, dtype=float) - np.asarray(b, dtype=float)) % per
        diff = np.minimum(diff, per - diff)
        return np.sqrt((diff * diff).sum(axis=-1))
    return d


def pulled_string_distance(space, x, y):
    """min{d(x, y), d(x, sigma) + d(sigma, y)} for sample indices x, y."""
    n = len(space.points)
    for j in (x, y):
        if not (isinstance(j, (int, np.integer)) and 0 <= j < n):
            raise KeyError(f"unknown sample point {j!r}")
    a, b = space.points[x], space.points[y]
    direct = float(space.dist(a[None, :], b[None, :])[0])
    return min(direct, space.d_sigma(a) + space.d_sigma(b))


# ---------------------------------------------------------------------------
# minA


def mina_certificate(p, topology, report=None):
    """Mean-convexity sweep plus the monotonicity lower bound on minimal-surface area."""
    from .certifier import _mean_condition

    if topology not in TOPOLOGIES:
        raise ValueError(f"unknown topology {topology!r}")
    if report is not None:
        hmin = report.conditions["V"].worst_margin
    else:
        hmin = _mean_condition(p, 4000, True)[0]
    rho = p.r_max
    if topology == "T3":
        sweep = 1.0  # S must leave the unit tube; flat cylinders have H = 1/r there
        ext_h = 1.0 / sweep
        radius_ok = bool(rho < 0.5 and sweep < np.pi)
        bound, tag = np.pi / 4.0, "pi/4"
    else:
        sweep = 0.5
        ext_h = 1.0 / np.tan(sweep)  # cot r on the unit sphere
        radius_ok = bool(rho < 0.25 and sweep < np.pi / 2)
        bound, tag = None, "A0 from the monotonicity formula, depending only on the comparison geometry"
    valid = bool(hmin > 0 and ext_h > 0 and radius_ok)
    return dict(valid=valid, topology=topology, min_mean_curvature=float(hmin), exterior_min_mean_curvature=ext_h,
                sweep_radius=sweep, drawstring_radius=rho, area_lower_bound=bound if valid else None,
                bound_tag=tag if valid else "void: mean-convexity sweep failed")
