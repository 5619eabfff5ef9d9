"""Air-to-ground propagation for a drone cell.

Everything here works in the "path loss equivalent" domain: the
frequency / cell-size constant ``C = (4 pi f D_max / c)^2`` is factored out,
so losses are expressed per meter of cell radius.  Angles are radians on
every public function; the degree conversion needed by the sigmoid LoS model
and the excess-loss spread is done internally.

Functions are vectorised over numpy arrays where it makes sense.
"""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass

import numpy as np
from scipy.special import ndtr

SPEED_OF_LIGHT = 2.998e8  # m/s
RAD2DEG = 180.0 / math.pi
HALF_PI = math.pi / 2

_MAX_BISECTION_ITER = 200


class Group(enum.IntEnum):
    NLOS = 0
    LOS = 1


@dataclass(frozen=True)
class Environment:
    """Topology constants of one deployment class.

    ``a``/``b`` drive the LoS sigmoid, ``mu_*`` are mean excess losses in dB,
    ``d_*``/``c_*`` give the elevation-dependent spread of the excess loss.
    """

    a: float
    b: float
    mu_los: float
    mu_nlos: float
    d_los: float
    d_nlos: float
    c_los: float
    c_nlos: float
    label: str = "custom"

    def __post_init__(self):
        for name in ("a", "b", "mu_los", "mu_nlos", "d_los", "d_nlos", "c_los", "c_nlos"):
            value = getattr(self, name)
            if not (isinstance(value, (int, float)) and math.isfinite(value) and value > 0):
                raise ValueError(f"{self.label}: {name} must be a positive finite number, got {value!r}")
        if self.mu_nlos <= self.mu_los:
            raise ValueError(f"{self.label}: mu_nlos must exceed mu_los")


SUBURBAN = Environment(4.88, 0.43, 0.1, 21.0, 11.25, 32.17, 0.06, 0.03, "suburban")
URBAN = Environment(9.61, 0.16, 1.0, 20.0, 10.39, 29.6, 0.05, 0.03, "urban")
HIGH_URBAN = Environment(12.08, 0.11, 1.6, 23.0, 8.96, 35.97, 0.04, 0.04, "high_urban")

PRESETS = {env.label: env for env in (SUBURBAN, URBAN, HIGH_URBAN)}


@dataclass(frozen=True)
class AntennaConfig:
    efficiency: float
    reference_angle: float

    def __post_init__(self):
        if not 0 < self.efficiency < 1:
            raise ValueError(f"antenna efficiency must lie in (0, 1), got {self.efficiency}")
        if not 0 < self.reference_angle < HALF_PI:
            raise ValueError(f"reference angle must lie in (0, pi/2), got {self.reference_angle}")

    @property
    def gain_db(self) -> float:
        return float(antenna_gain(self.reference_angle, self.efficiency))


@dataclass(frozen=True)
class GainParams:
    mean: float
    std: float
    group: Group


def user_elevation(theta, kappa):
    """Elevation angle seen by a user at normalised distance ``kappa``.

    ``kappa = 0`` (directly below the drone) maps to pi/2.
    """
    return np.arctan2(np.tan(theta), kappa)


def _check_elevation(el):
    el = np.asarray(el, dtype=float)
    if np.any(~(el > 0)) or np.any(el > HALF_PI + 1e-12):
        raise ValueError("user elevation must lie in (0, pi/2]")
    return el


def prob_los(env: Environment, elevation):
    el = _check_elevation(elevation)
    return 1.0 / (1.0 + env.a * np.exp(-env.b * (el * RAD2DEG - env.a)))


def _spread(env: Environment, el, group: Group):
    if group == Group.LOS:
        return env.d_los * np.exp(-env.c_los * el * RAD2DEG)
    return env.d_nlos * np.exp(-env.c_nlos * el * RAD2DEG)


def excess_loss_params(env: Environment, elevation, group: Group) -> GainParams:
    el = _check_elevation(elevation)
    group = Group(group)
    mean = env.mu_los if group == Group.LOS else env.mu_nlos
    return GainParams(mean=mean, std=_spread(env, el, group), group=group)


def antenna_gain(theta, efficiency):
    """Directional antenna gain in dB, uniform over the aperture."""
    theta = np.asarray(theta, dtype=float)
    if np.any(~(theta > 0)) or np.any(theta >= HALF_PI):
        raise ValueError("reference angle must lie in (0, pi/2)")
    return efficiency * 10.0 * np.log10(2.0 / (1.0 - np.sin(theta)))


def path_loss_equivalent(theta, efficiency, gain_db):
    """``-G_t(theta) + 20 log10(tan theta) + gain_db``.

    ``gain_db`` is a realised positioning gain or a quantile of it.
    """
    return -antenna_gain(theta, efficiency) + 20.0 * np.log10(np.tan(theta)) + gain_db


def free_space_constant_db(frequency_hz: float, d_max_m: float) -> float:
    """``10 log10 C``; adding it to a path loss equivalent yields absolute path loss."""
    return 20.0 * math.log10(4.0 * math.pi * frequency_hz * d_max_m / SPEED_OF_LIGHT)


def _mixture(env, theta, kappa):
    # (P(LoS), sigma_los, sigma_nlos, distance term in dB) for the geometry.
    el = user_elevation(theta, kappa)
    p = prob_los(env, el)
    dist = -20.0 * np.log10(np.sin(el))
    return p, _spread(env, el, Group.LOS), _spread(env, el, Group.NLOS), dist


def _cdf_sf(env, p, s1, s0, dist, g):
    u = g - dist
    x1 = (u - env.mu_los) / s1
    x0 = (u - env.mu_nlos) / s0
    cdf = p * ndtr(x1) + (1.0 - p) * ndtr(x0)
    sf = p * ndtr(-x1) + (1.0 - p) * ndtr(-x0)
    return cdf, sf


def positioning_gain_cdf(env: Environment, theta, kappa, g):
    """P(G_U(theta, kappa) < g) for the LoS/NLoS Gaussian mixture."""
    p, s1, s0, dist = _mixture(env, theta, kappa)
    return _cdf_sf(env, p, s1, s0, dist, g)[0]


def positioning_gain_sf(env: Environment, theta, kappa, g):
    """Upper tail ``1 - cdf``, computed without cancellation."""
    p, s1, s0, dist = _mixture(env, theta, kappa)
    return _cdf_sf(env, p, s1, s0, dist, g)[1]


def positioning_gain_mean(env: Environment, theta, kappa):
    p, _, _, dist = _mixture(env, theta, kappa)
    return p * env.mu_los + (1.0 - p) * env.mu_nlos + dist


def positioning_gain_quantile(env: Environment, theta, kappa, prob, tol=1e-10):
    """Inverse of :func:`positioning_gain_cdf` by bracketing and bisection.

    Upper-half probabilities are matched on the survival function so that
    tails down to 1e-12 stay accurate.
    """
    prob = np.asarray(prob, dtype=float)
    if np.any(~(prob > 0)) or np.any(~(prob < 1)):
        raise ValueError("probability must lie in (0, 1)")
    p, s1, s0, dist = _mixture(env, theta, kappa)
    p, s1, s0, dist, prob = np.broadcast_arrays(p, s1, s0, dist, prob)
    upper = prob > 0.5
    target = np.where(upper, 1.0 - prob, prob)

    def excess(g):
        # increasing in g, zero at the root
        cdf, sf = _cdf_sf(env, p, s1, s0, dist, g)
        return np.where(upper, target - sf, cdf - target)

    smax = np.maximum(s1, s0)
    lo = min(env.mu_los, env.mu_nlos) - 10.0 * smax + dist
    hi = max(env.mu_los, env.mu_nlos) + 10.0 * smax + dist
    for _ in range(60):
        bad_lo = excess(lo) > 0
        bad_hi = excess(hi) < 0
        if not (bad_lo.any() or bad_hi.any()):
            break
        width = hi - lo
        lo = np.where(bad_lo, lo - width, lo)
        hi = np.where(bad_hi, hi + width, hi)
    else:
        raise RuntimeError("could not bracket the positioning gain quantile")

    for _ in range(_MAX_BISECTION_ITER):
        mid = 0.5 * (lo + hi)
        below = excess(mid) < 0
        lo = np.where(below, mid, lo)
        hi = np.where(below, hi, mid)
        if np.all(hi - lo <= tol):
            break
    else:
        raise RuntimeError("quantile bisection did not converge")
    out = 0.5 * (lo + hi)
    return out if out.ndim else float(out)


def gain_from_draws(env: Environment, theta, kappa, uniform, normal):
    """Positioning gain from pre-drawn variates.

    ``uniform < P(LoS)`` selects the LoS group; ``normal`` is the standard
    normal innovation of the excess loss.  Used for common random numbers.
    """
    p, s1, s0, dist = _mixture(env, theta, kappa)
    los = uniform < p
    return np.where(los, env.mu_los + s1 * normal, env.mu_nlos + s0 * normal) + dist


def sample_positioning_gain(env: Environment, theta, kappa, rng: np.random.Generator, size=None):
    shape = np.broadcast_shapes(np.shape(theta), np.shape(kappa)) if size is None else size
    u = rng.random(shape)
    z = rng.standard_normal(shape)
    g = gain_from_draws(env, theta, kappa, u, z)
    return g if np.ndim(g) else float(g)
