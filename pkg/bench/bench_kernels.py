"""Compiled vs pure-numpy kernels: timings and agreement.

    python3 bench/bench_kernels.py [--repeat 5]
"""
import argparse
import time

import numpy as np

from drawstring import _kernels_py as pure
from drawstring.flat_torus_analysis import ewald_parameters

try:
    from drawstring import _kernels as compiled
except ImportError:
    compiled = None


def best_of(fn, repeat):
    best = np.inf
    for _ in range(repeat):
        t = time.perf_counter()
        out = fn()
        best = min(best, time.perf_counter() - t)
    return best, out


def cases(rng):
    n = 200
    x0, h = 0.0, 1.0 / n
    xs = np.linspace(0, 1, n + 1)
    F, D1, D2 = np.sin(3 * xs), 3 * np.cos(3 * xs), -9 * np.sin(3 * xs)
    z = rng.random(200_000)
    yield "hermite5 (2e5 pts)", lambda m: m.hermite5(z, x0, h, F, D1, D2)

    t = 0.5 + 1j
    sigma, nr, nk, _, _ = ewald_parameters(t)
    w = rng.random(4000) + rng.random(4000) * t
    yield "ewald_green (4e3 pts)", lambda m: m.ewald_green(w.real, w.imag, t.real, t.imag, sigma, nr, nk)


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--repeat", type=int, default=5)
    args = ap.parse_args()
    rng = np.random.default_rng(0)
    print(f"{'kernel':24s} {'pure [s]':>10s} {'compiled [s]':>13s} {'speedup':>8s} {'max |diff|':>11s}")
    for name, call in cases(rng):
        tp, op = best_of(lambda: call(pure), args.repeat)
        if compiled is None:
            print(f"{name:24s} {tp:10.4f} {'n/a':>13s}")
            continue
        tc, oc = best_of(lambda: call(compiled), args.repeat)
        diff = max(float(np.max(np.abs(np.asarray(a) - np.asarray(b)))) for a, b in
                   zip(op if isinstance(op, tuple) else (op,), oc if isinstance(oc, tuple) else (oc,)))
        print(f"{name:24s} {tp:10.4f} {tc:13.4f} {tp / tc:8.1f} {diff:11.2e}")


if __name__ == "__main__":
    main()
