"""Random instances satisfying the hypotheses of the two smoothing routines."""
import numpy as np


def smoothing_u_instance(rng):
    K = rng.uniform(2.0, 10.0)
    sk = np.sqrt(K)
    s = rng.uniform(0.05, 0.3) / sk
    t = s + rng.uniform(0.4, 1.0) / sk
    beta = rng.uniform(-0.3, 0.3)
    amp = rng.uniform(0.5, 2.0)

    def f(r):
        r = np.asarray(r, dtype=float)
        return amp * np.sin(sk * r), amp * sk * np.cos(sk * r), -K * amp * np.sin(sk * r)

    def v(r):
        r = np.asarray(r, dtype=float)
        return beta * np.sin(r - s), beta * np.cos(r - s)

    grid = np.linspace(s, t, 2001)
    V, V1 = v(grid)
    lam = max(1.0, 0.95 * float(np.min(np.exp(2 * V) * (K - V1 ** 2))))
    mu = rng.uniform(0.05, 1.0) * min(0.25 * (t - s), 1.0)
    return dict(f=f, v=v, lam=lam, s=s, t=t, mu=mu)


def smoothing_f_instance(rng):
    a = rng.uniform(0.5, 2.0)
    b = rng.uniform(-0.5, 0.5)
    K1, K2 = rng.uniform(1.0, 20.0, 2)
    gam = rng.uniform(-0.2, 0.2)

    def piece(K):
        sk = np.sqrt(K)

        def g(x):
            x = np.asarray(x, dtype=float)
            c, sn = np.cos(sk * x), np.sin(sk * x)
            val = a * c + b / sk * sn
            return val, -a * sk * sn + b * c, -K * val
        return g

    def u(x):
        x = np.asarray(x, dtype=float)
        return gam * x, np.full_like(x, gam)

    t = 0.2
    # sharp lambda: the one-sided curvature expression minimised over [-t, t]
    x = np.linspace(-t, t, 4001)
    lam = np.inf
    for g, side in ((piece(K1), x <= 0), (piece(K2), x >= 0)):
        F, _, F2 = g(x[side])
        U, U1 = u(x[side])
        lam = min(lam, float(np.min(np.exp(2 * U) * (-F2 / F - U1 ** 2))))
    mu = rng.uniform(0.01, 0.05)
    return dict(left=piece(K1), right=piece(K2), u=u, lam=lam, mu=mu, t=t)
