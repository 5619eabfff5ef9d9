"""User fields on the cell disk and the smallest bounding circle (SBC).

Every Monte Carlo trial draws from its own generator seeded by
``(master seed, stream, trial index)``, so any trial can be rebuilt on its
own and trials can be farmed out in any order.

Points of a trial are drawn as a prefix-stable sequence of unit-disk
coordinates scaled by the cell radius.  Two cells that share a seed
therefore see coupled fields: the larger-count field contains the smaller
one, which keeps cross-radius comparisons low-noise.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import NamedTuple, Sequence

import numpy as np

GEOMETRY_STREAM = 0
RATE_STREAM = 1


@dataclass(frozen=True)
class CellSpec:
    radius_m: float
    density: float  # users per km^2

    def __post_init__(self):
        if not self.radius_m > 0:
            raise ValueError(f"cell radius must be positive, got {self.radius_m}")
        if not self.density > 0:
            raise ValueError(f"user density must be positive, got {self.density}")

    @property
    def expected_count(self) -> float:
        return math.pi * (self.radius_m / 1000.0) ** 2 * self.density


@dataclass
class UserField:
    points: np.ndarray  # (K, 2) meters, relative to cell centre

    @property
    def count(self) -> int:
        return len(self.points)


class Circle(NamedTuple):
    center: tuple[float, float]
    radius: float


def trial_rng(seed: int, stream: int, index: int) -> np.random.Generator:
    return np.random.default_rng([seed, stream, index])


def truncated_poisson_cdf(mean: float) -> np.ndarray:
    """CDF table of Poisson(mean) conditioned on K >= 1, entry k-1 is P(K <= k).

    The table runs until the remaining tail is below double precision.
    """
    norm = -math.expm1(-mean)  # P(K > 0)
    pmf = math.exp(-mean) * mean / norm  # P(K = 1 | K > 0)
    k = 1
    cdf = []
    total = 0.0
    while True:
        total += pmf
        cdf.append(total)
        if (k > mean and pmf < 1e-18) or k > 10 * mean + 100:
            break
        k += 1
        pmf *= mean / k
    table = np.array(cdf)
    table[-1] = 1.0
    return table


def draw_count(cdf_table: np.ndarray, rng: np.random.Generator) -> int:
    # inverse CDF: rejection sampling costs ~1/mean draws per trial for tiny cells
    return int(np.searchsorted(cdf_table, rng.random(), side="right")) + 1


def draw_points(count: int, radius: float, rng: np.random.Generator) -> np.ndarray:
    uv = rng.random((count, 2))
    r = radius * np.sqrt(uv[:, 0])
    phi = 2.0 * math.pi * uv[:, 1]
    return np.column_stack((r * np.cos(phi), r * np.sin(phi)))


def sample_user_field(cell: CellSpec, rng: np.random.Generator, cdf_table=None) -> UserField:
    """One PPP snapshot on the cell disk, conditioned on at least one user."""
    if cdf_table is None:
        cdf_table = truncated_poisson_cdf(cell.expected_count)
    k = draw_count(cdf_table, rng)
    return UserField(draw_points(k, cell.radius_m, rng))


# --- smallest enclosing circle -------------------------------------------

_REL_EPS = 1e-12


def _contains(c, p):
    return math.hypot(p[0] - c[0], p[1] - c[1]) <= c[2] * (1 + _REL_EPS) + _REL_EPS


def _diameter(a, b):
    cx, cy = (a[0] + b[0]) / 2.0, (a[1] + b[1]) / 2.0
    return (cx, cy, max(math.hypot(a[0] - cx, a[1] - cy), math.hypot(b[0] - cx, b[1] - cy)))


def _circumcircle(a, b, c):
    # shift to a's frame for conditioning
    bx, by = b[0] - a[0], b[1] - a[1]
    cx, cy = c[0] - a[0], c[1] - a[1]
    d = 2.0 * (bx * cy - by * cx)
    scale = max(abs(bx), abs(by), abs(cx), abs(cy))
    if abs(d) <= 1e-14 * scale * scale:
        # collinear: the farthest pair spans the others
        pairs = ((a, b), (a, c), (b, c))
        far = max(pairs, key=lambda pq: math.hypot(pq[0][0] - pq[1][0], pq[0][1] - pq[1][1]))
        return _diameter(*far)
    b2 = bx * bx + by * by
    c2 = cx * cx + cy * cy
    ux = (cy * b2 - by * c2) / d
    uy = (bx * c2 - cx * b2) / d
    ox, oy = a[0] + ux, a[1] + uy
    r = max(math.hypot(ox - p[0], oy - p[1]) for p in (a, b, c))
    return (ox, oy, r)


def _circle_two_fixed(pts, p, q):
    c = _diameter(p, q)
    for r in pts:
        if not _contains(c, r):
            c = _circumcircle(p, q, r)
    return c


def _circle_one_fixed(pts, p):
    c = (p[0], p[1], 0.0)
    for i, q in enumerate(pts):
        if not _contains(c, q):
            c = _circle_two_fixed(pts[:i], p, q)
    return c


def smallest_bounding_circle(points: Sequence[Sequence[float]], seed: int = 0) -> Circle:
    """Exact minimal enclosing circle (randomised incremental construction).

    Duplicates are dropped and the points are shuffled with ``seed`` first,
    so the result is deterministic.
    """
    pts = list(dict.fromkeys((float(x), float(y)) for x, y in points))
    if not pts:
        raise ValueError("smallest bounding circle of an empty point set")
    if len(pts) > 3:
        order = np.random.default_rng(seed).permutation(len(pts))
        pts = [pts[i] for i in order]
    c = None
    for i, p in enumerate(pts):
        if c is None or not _contains(c, p):
            c = _circle_one_fixed(pts[:i], p)
    return Circle((c[0], c[1]), c[2])


def normalized_distance(point, drone_xy, cell: CellSpec):
    """Horizontal drone-to-point distance over the cell radius, in [0, 2]."""
    point = np.asarray(point, dtype=float)
    drone_xy = np.asarray(drone_xy, dtype=float)
    return np.hypot(point[..., 0] - drone_xy[..., 0], point[..., 1] - drone_xy[..., 1]) / cell.radius_m


def trial(cell: CellSpec, seed: int, index: int, stream: int = GEOMETRY_STREAM, cdf_table=None):
    """Rebuild trial ``index``: returns (field, SBC, generator positioned after the field draws)."""
    rng = trial_rng(seed, stream, index)
    field = sample_user_field(cell, rng, cdf_table)
    return field, smallest_bounding_circle(field.points), rng


def kappa_sbc_samples(cell: CellSpec, trials: int, seed: int, stream: int = GEOMETRY_STREAM) -> np.ndarray:
    """Normalised SBC radius of ``trials`` independent snapshots."""
    if trials < 1:
        raise ValueError("need at least one trial")
    table = truncated_poisson_cdf(cell.expected_count)
    out = np.empty(trials)
    for i in range(trials):
        rng = trial_rng(seed, stream, i)
        k = draw_count(table, rng)
        if k == 1:
            out[i] = 0.0
            continue
        pts = draw_points(k, cell.radius_m, rng)
        out[i] = smallest_bounding_circle(pts).radius / cell.radius_m
    return np.minimum(out, 1.0)


def empirical_cdf(samples: np.ndarray, grid: np.ndarray) -> np.ndarray:
    """Fraction of samples <= each grid value."""
    s = np.sort(samples)
    return np.searchsorted(s, grid, side="right") / len(s)
