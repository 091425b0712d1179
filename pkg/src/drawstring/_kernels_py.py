"""Pure numpy versions of the hot kernels, used when the compiled core is absent."""
import numpy as np
from scipy.special import exp1

S_SKIP = 40.0  # real-space images beyond this contribute < 1e-19 each


def hermite5(z, x0, h, F, D1, D2):
    """Quintic Hermite interpolation of a table with first and second derivatives."""
    z = np.asarray(z, dtype=float)
    n = F.shape[0] - 1
    s = (z - x0) / h
    j = np.clip(np.floor(s), 0, n - 1).astype(np.int64)
    t = np.clip(s - j, 0.0, 1.0)
    t2 = t * t
    t3 = t2 * t
    t4 = t3 * t
    t5 = t4 * t
    H0 = 1 - 10 * t3 + 15 * t4 - 6 * t5
    H1 = t - 6 * t3 + 8 * t4 - 3 * t5
    H2 = 0.5 * (t2 - 3 * t3 + 3 * t4 - t5)
    H3 = 0.5 * (t3 - 2 * t4 + t5)
    H4 = -4 * t3 + 7 * t4 - 3 * t5
    H5 = 10 * t3 - 15 * t4 + 6 * t5
    hh = h * h
    return (F[j] * H0 + h * D1[j] * H1 + hh * D2[j] * H2
            + hh * D2[j + 1] * H3 + h * D1[j + 1] * H4 + F[j + 1] * H5)


def ewald_green(dx, dy, t_re, t_im, sigma, nreal, nrec):
    """Green function (and gradient) of the torus R^2/span(1, t) at displacement (dx, dy).

    Normalized by Laplacian G = delta - 1/area and zero mean. Gaussian splitting
    at heat time sigma: real-space exponential integrals plus a dual-lattice
    cosine sum.
    """
    dx = np.asarray(dx, dtype=float).copy()
    dy = np.asarray(dy, dtype=float).copy()
    area = t_im
    nb = np.round(dy / t_im)
    dx -= nb * t_re
    dy -= nb * t_im
    dx -= np.round(dx)
    G = np.full(dx.shape, sigma / area)
    Gx = np.zeros_like(dx)
    Gy = np.zeros_like(dx)
    four_sigma = 4.0 * sigma
    for n in range(-nreal, nreal + 1):
        for m in range(-nreal, nreal + 1):
            ex = dx - (m + n * t_re)
            ey = dy - n * t_im
            d2 = ex * ex + ey * ey
            s = d2 / four_sigma
            live = s <= S_SKIP
            if not live.any():
                continue
            s = np.where(live, s, S_SKIP)
            G -= np.where(live, exp1(s), 0.0) / (4 * np.pi)
            c = np.where(live, np.exp(-s) / (2 * np.pi * d2), 0.0)
            Gx += c * ex
            Gy += c * ey
    two_pi = 2 * np.pi
    for p in range(0, nrec + 1):
        for q in range(-nrec, nrec + 1):
            if p == 0 and q <= 0:
                continue
            kx = p
            ky = (q - p * t_re) / t_im
            k2 = kx * kx + ky * ky
            wgt = 2.0 * np.exp(-two_pi * two_pi * k2 * sigma) / (two_pi * two_pi * k2 * area)
            ph = two_pi * (kx * dx + ky * dy)
            G -= wgt * np.cos(ph)
            Gx += wgt * two_pi * kx * np.sin(ph)
            Gy += wgt * two_pi * ky * np.sin(ph)
    return G, Gx, Gy
