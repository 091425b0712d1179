# cython: boundscheck=False, wraparound=False, cdivision=True, language_level=3
"""Compiled versions of the hot kernels; same signatures as _kernels_py."""
import numpy as np
cimport numpy as cnp
from libc.math cimport floor, exp, cos, sin, round, M_PI
from scipy.special.cython_special cimport exp1

cnp.import_array()

# real-space images with d^2/(4 sigma) above this contribute < 1e-19 each
cdef double S_SKIP = 40.0


def hermite5(z, double x0, double h, double[::1] F, double[::1] D1, double[::1] D2):
    cdef cnp.ndarray[double, ndim=1] zz = np.ascontiguousarray(np.ravel(np.asarray(z, dtype=float)))
    cdef Py_ssize_t N = zz.shape[0], i, j
    cdef Py_ssize_t n = F.shape[0] - 1
    cdef cnp.ndarray[double, ndim=1] out = np.empty(N)
    cdef double s, t, t2, t3, t4, t5, hh = h * h
    for i in range(N):
        s = (zz[i] - x0) / h
        j = <Py_ssize_t>floor(s)
        if j < 0:
            j = 0
        elif j > n - 1:
            j = n - 1
        t = s - j
        if t < 0.0:
            t = 0.0
        elif t > 1.0:
            t = 1.0
        t2 = t * t
        t3 = t2 * t
        t4 = t3 * t
        t5 = t4 * t
        out[i] = (F[j] * (1 - 10 * t3 + 15 * t4 - 6 * t5)
                  + h * D1[j] * (t - 6 * t3 + 8 * t4 - 3 * t5)
                  + hh * D2[j] * 0.5 * (t2 - 3 * t3 + 3 * t4 - t5)
                  + hh * D2[j + 1] * 0.5 * (t3 - 2 * t4 + t5)
                  + h * D1[j + 1] * (-4 * t3 + 7 * t4 - 3 * t5)
                  + F[j + 1] * (10 * t3 - 15 * t4 + 6 * t5))
    return out.reshape(np.shape(z))


def ewald_green(dx, dy, double t_re, double t_im, double sigma, int nreal, int nrec):
    shape = np.shape(dx)
    cdef cnp.ndarray[double, ndim=1] X = np.ascontiguousarray(np.ravel(np.asarray(dx, dtype=float)))
    cdef cnp.ndarray[double, ndim=1] Y = np.ascontiguousarray(np.ravel(np.asarray(dy, dtype=float)))
    cdef Py_ssize_t N = X.shape[0], i, j, K
    cdef int n, m, p, q
    cdef cnp.ndarray[double, ndim=1] G = np.empty(N)
    cdef cnp.ndarray[double, ndim=1] Gx = np.empty(N)
    cdef cnp.ndarray[double, ndim=1] Gy = np.empty(N)
    cdef double area = t_im, x, y, nb, ex, ey, d2, s, c, g, gx, gy, sn, cs
    cdef double two_pi = 2 * M_PI, kx, ky, k2, ph, inv4s = 1.0 / (4.0 * sigma)
    # dual-lattice weights do not depend on the point
    K = 0
    for p in range(0, nrec + 1):
        for q in range(-nrec, nrec + 1):
            if not (p == 0 and q <= 0):
                K += 1
    cdef cnp.ndarray[double, ndim=1] KX = np.empty(K)
    cdef cnp.ndarray[double, ndim=1] KY = np.empty(K)
    cdef cnp.ndarray[double, ndim=1] WG = np.empty(K)
    j = 0
    for p in range(0, nrec + 1):
        for q in range(-nrec, nrec + 1):
            if p == 0 and q <= 0:
                continue
            kx = p
            ky = (q - p * t_re) / t_im
            k2 = kx * kx + ky * ky
            KX[j] = kx
            KY[j] = ky
            WG[j] = 2.0 * exp(-two_pi * two_pi * k2 * sigma) / (two_pi * two_pi * k2 * area)
            j += 1
    for i in range(N):
        x = X[i]
        y = Y[i]
        nb = round(y / t_im)
        x -= nb * t_re
        y -= nb * t_im
        x -= round(x)
        g = sigma / area
        gx = 0.0
        gy = 0.0
        for n in range(-nreal, nreal + 1):
            for m in range(-nreal, nreal + 1):
                ex = x - (m + n * t_re)
                ey = y - n * t_im
                d2 = ex * ex + ey * ey
                s = d2 * inv4s
                if s > S_SKIP:
                    continue
                g -= exp1(s) / (4 * M_PI)
                c = exp(-s) / (2 * M_PI * d2)
                gx += c * ex
                gy += c * ey
        for j in range(K):
            ph = two_pi * (KX[j] * x + KY[j] * y)
            cs = cos(ph)
            sn = sin(ph)
            g -= WG[j] * cs
            gx += WG[j] * two_pi * KX[j] * sn
            gy += WG[j] * two_pi * KY[j] * sn
        G[i] = g
        Gx[i] = gx
        Gy[i] = gy
    return G.reshape(shape), Gx.reshape(shape), Gy.reshape(shape)
