"""Independent reference computations used as test oracles.

None of these share code paths with the package: the CDF is integrated
numerically from the Gaussian densities, the SBC is found by enumerating
every pair/triple circle, and MPLE by a dense grid.
"""
import itertools
import math

import numpy as np
from scipy import integrate, optimize


def _components(env, theta, kappa):
    el = math.pi / 2 if kappa == 0 else math.atan(math.tan(theta) / kappa)
    deg = math.degrees(el)
    p = 1.0 / (1.0 + env.a * math.exp(-env.b * (deg - env.a)))
    s1 = env.d_los * math.exp(-env.c_los * deg)
    s0 = env.d_nlos * math.exp(-env.c_nlos * deg)
    shift = -20.0 * math.log10(math.sin(el))
    return p, s1, s0, shift


def _density(m, s):
    return lambda x: math.exp(-0.5 * ((x - m) / s) ** 2) / (s * math.sqrt(2 * math.pi))


def _integral(f, m, s, lo, hi):
    # split at the mean and +-8 sd so quad sees the peak
    pts = sorted({p for p in (m - 8 * s, m, m + 8 * s) if lo < p < hi})
    edges = [lo, *pts, hi]
    total = 0.0
    for a, b in zip(edges[:-1], edges[1:]):
        v, _ = integrate.quad(f, a, b, epsabs=1e-14, epsrel=1e-12, limit=200)
        total += v
    return total


def quad_cdf(env, theta, kappa, g):
    p, s1, s0, shift = _components(env, theta, kappa)
    u = g - shift
    out = 0.0
    for w, m, s in ((p, env.mu_los, s1), (1 - p, env.mu_nlos, s0)):
        lo = m - 40 * s
        if u > lo:
            out += w * _integral(_density(m, s), m, s, lo, u)
    return out


def quad_sf(env, theta, kappa, g):
    p, s1, s0, shift = _components(env, theta, kappa)
    u = g - shift
    out = 0.0
    for w, m, s in ((p, env.mu_los, s1), (1 - p, env.mu_nlos, s0)):
        hi = m + 40 * s
        if u < hi:
            out += w * _integral(_density(m, s), m, s, u, hi)
    return out


def quad_quantile(env, theta, kappa, prob):
    p, s1, s0, shift = _components(env, theta, kappa)
    lo = min(env.mu_los - 40 * s1, env.mu_nlos - 40 * s0) + shift
    hi = max(env.mu_los + 40 * s1, env.mu_nlos + 40 * s0) + shift
    if prob > 0.5:
        f = lambda g: (1 - prob) - quad_sf(env, theta, kappa, g)  # noqa: E731
    else:
        f = lambda g: quad_cdf(env, theta, kappa, g) - prob  # noqa: E731
    return optimize.brentq(f, lo, hi, xtol=1e-11, rtol=1e-14, maxiter=500)


def _circle2(a, b):
    cx, cy = (a[0] + b[0]) / 2, (a[1] + b[1]) / 2
    return cx, cy, math.dist(a, b) / 2


def _circle3(a, b, c):
    ax, ay = a
    bx, by = b
    cx, cy = c
    d = 2 * (ax * (by - cy) + bx * (cy - ay) + cx * (ay - by))
    if d == 0:
        return None
    ux = ((ax * ax + ay * ay) * (by - cy) + (bx * bx + by * by) * (cy - ay) + (cx * cx + cy * cy) * (ay - by)) / d
    uy = ((ax * ax + ay * ay) * (cx - bx) + (bx * bx + by * by) * (ax - cx) + (cx * cx + cy * cy) * (bx - ax)) / d
    return ux, uy, math.dist((ux, uy), a)


def brute_force_sbc(points):
    pts = [tuple(map(float, p)) for p in points]
    if len(pts) == 1:
        return pts[0][0], pts[0][1], 0.0
    best = None
    cands = [_circle2(a, b) for a, b in itertools.combinations(pts, 2)]
    cands += [c for t in itertools.combinations(pts, 3) if (c := _circle3(*t)) is not None]
    for cx, cy, r in cands:
        if best is not None and r >= best[2]:
            continue
        if all(math.dist((cx, cy), p) <= r * (1 + 1e-12) + 1e-9 for p in pts):
            best = (cx, cy, r)
    return best


def dense_grid_argmin(f, lo, hi, step=1e-3):
    grid = np.arange(lo, hi + step / 2, step)
    vals = np.array(f(grid))
    k = int(np.argmin(vals))
    return float(grid[k]), float(vals[k])


def truncated_poisson_pmf(k, mean):
    return math.exp(-mean + k * math.log(mean) - math.lgamma(k + 1)) / -math.expm1(-mean)
