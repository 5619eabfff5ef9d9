"""Static-LAP calibration and the two slice coverage constraints.

The power budget ``P_max / N`` is calibrated so that a static drone at the
cell centre meets the broadband reliability target at the cell edge.  The
constant ``C`` and the ``2^(R/w) - 1`` factor cancel from every constraint,
so both constraints reduce to comparisons of path loss equivalents against
``le_lap``.
"""
from __future__ import annotations

import functools
import logging
import math
from dataclasses import dataclass

import numpy as np

from .channel import (
    Environment,
    antenna_gain,
    positioning_gain_cdf,
    positioning_gain_quantile,
)

log = logging.getLogger(__name__)

DEFAULT_THETA_RANGE = (math.radians(1.0), math.radians(89.0))
GRID_STEP = math.radians(0.25)
INVPHI = (math.sqrt(5) - 1) / 2


class InfeasibleScenario(ValueError):
    pass


@dataclass(frozen=True)
class ServiceRequirements:
    rate_bb: float = 1.0
    eps_bb: float = 1e-4
    rate_mtc: float = 0.3
    eps_mtc: float = 0.1

    def __post_init__(self):
        if not (self.rate_bb > 0 and self.rate_mtc > 0):
            raise ValueError("required rates must be positive")
        if not (0 < self.eps_bb < 1 and 0 < self.eps_mtc < 1):
            raise ValueError("outage tolerances must lie in (0, 1)")
        if not self.eps_bb < self.eps_mtc:
            raise ValueError("broadband outage tolerance must be stricter than the MTC one")


@dataclass(frozen=True)
class MpleResult:
    theta: float
    le: float
    at_boundary: bool = False


@dataclass(frozen=True)
class LapBaseline:
    theta_lap: float
    le_lap: float
    snr_budget: float  # P_max / (N C), linear


@dataclass(frozen=True)
class SlicingBound:
    theta_rsr: float
    le_rsr: float
    omega_max: float


@dataclass(frozen=True)
class CoverageCheck:
    ok: bool
    reliability: float

    def __bool__(self):
        return self.ok


def reliability_ple(env: Environment, theta, efficiency, kappa, eps):
    """Path loss equivalent met with probability ``1 - eps`` at distance ``kappa``."""
    if not 0 < eps < 1:
        raise ValueError("eps must lie in (0, 1)")
    q = positioning_gain_quantile(env, theta, kappa, 1.0 - eps)
    return -antenna_gain(theta, efficiency) + 20.0 * np.log10(np.tan(theta)) + q


def golden_section_min(f, a, b, tol=1e-4):
    """Minimise a unimodal ``f`` on [a, b]; returns (x, f(x))."""
    c = b - INVPHI * (b - a)
    d = a + INVPHI * (b - a)
    fc, fd = f(c), f(d)
    while b - a > tol:
        if fc <= fd:
            b, d, fd = d, c, fc
            c = b - INVPHI * (b - a)
            fc = f(c)
        else:
            a, c, fc = c, d, fd
            d = a + INVPHI * (b - a)
            fd = f(d)
    return (c, fc) if fc <= fd else (d, fd)


@functools.lru_cache(maxsize=256)
def mple(env: Environment, efficiency: float, kappa: float, eps: float, theta_range=DEFAULT_THETA_RANGE) -> MpleResult:
    """Reference angle minimising the reliability path loss equivalent.

    Coarse 0.25 degree grid, then golden-section refinement to 1e-4 rad.
    """
    lo, hi = theta_range
    if not 0 < lo < hi < math.pi / 2:
        raise ValueError("theta range must sit inside (0, pi/2)")
    grid = np.arange(lo, hi + 0.5 * GRID_STEP, GRID_STEP)
    grid = grid[grid <= hi]
    values = reliability_ple(env, grid, efficiency, kappa, eps)
    k = int(np.argmin(values))
    at_boundary = k == 0 or k == len(grid) - 1
    if at_boundary:
        log.warning(
            "MPLE grid minimum at range boundary (%s, E_r=%g, kappa=%g, eps=%g); objective may not be unimodal",
            env.label, efficiency, kappa, eps,
        )
        return MpleResult(float(grid[k]), float(values[k]), True)
    a, b = grid[k - 1], grid[k + 1]
    theta, le = golden_section_min(lambda t: float(reliability_ple(env, t, efficiency, kappa, eps)), a, b)
    if le > values[k]:
        theta, le = grid[k], values[k]
    return MpleResult(float(theta), float(le), False)


def snr_budget(omega_b: float, rate_bb: float, le_lap: float) -> float:
    """Linear ``P_max / (N C)`` SNR budget of the reference static LAP."""
    return (2.0 ** (rate_bb / omega_b) - 1.0) * 10.0 ** (le_lap / 10.0)


def lap_baseline(env: Environment, efficiency: float, reqs: ServiceRequirements, omega_b: float = 0.5) -> LapBaseline:
    """Static centre-of-cell drone calibrated to the BB target at the cell edge.

    ``theta_lap``/``le_lap`` do not depend on ``omega_b``; only the SNR budget does.
    """
    if not 0 < omega_b < 1:
        raise ValueError("omega_b must lie in (0, 1)")
    res = mple(env, efficiency, 1.0, reqs.eps_bb)
    return LapBaseline(res.theta, res.le, snr_budget(omega_b, reqs.rate_bb, res.le))


def log_expm1(x):
    """``log(2^... - 1)`` helper: natural log of ``exp(x) - 1`` for x > 0, overflow-free."""
    x = np.asarray(x, dtype=float)
    return x + np.log(-np.expm1(-x))


def slicing_ratio_db(omega_b, reqs: ServiceRequirements):
    """``10 log10[(2^(R_m/(1-w)) - 1) / (2^(R_B/w) - 1)]``, strictly increasing in w."""
    omega_b = np.asarray(omega_b, dtype=float)
    ln2 = math.log(2.0)
    num = log_expm1(reqs.rate_mtc * ln2 / (1.0 - omega_b))
    den = log_expm1(reqs.rate_bb * ln2 / omega_b)
    return 10.0 / math.log(10.0) * (num - den)


def max_slicing_ratio(env: Environment, efficiency: float, reqs: ServiceRequirements) -> SlicingBound:
    """Largest BB share for which some reference angle still covers MTC at kappa = 2."""
    base = mple(env, efficiency, 1.0, reqs.eps_bb)
    rsr = mple(env, efficiency, 2.0, reqs.eps_mtc)
    margin = base.le - rsr.le

    lo, hi = 0.0, 1.0
    # slicing_ratio_db runs from -inf (w -> 0) to +inf (w -> 1), so a root exists
    # unless the margin sits beyond double range; check the extreme representable w
    if slicing_ratio_db(1e-300, reqs) > margin:
        raise InfeasibleScenario(f"no slicing ratio satisfies the MTC bound (margin {margin:.3f} dB)")
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if mid in (lo, hi):
            break
        if slicing_ratio_db(mid, reqs) <= margin:
            lo = mid
        else:
            hi = mid
    return SlicingBound(rsr.theta, rsr.le, lo)


def _bb_threshold(theta, efficiency, le_lap):
    # G_U below this value <=> L_e <= le_lap
    return le_lap + antenna_gain(theta, efficiency) - 20.0 * np.log10(np.tan(theta))


def compress_kappa(kappa_samples) -> tuple[np.ndarray, np.ndarray]:
    """Unique kappa values with their empirical weights."""
    values, counts = np.unique(np.asarray(kappa_samples, dtype=float), return_counts=True)
    return values, counts / counts.sum()


def bb_reliability(env: Environment, theta: float, efficiency: float, kappa, le_lap: float) -> float:
    """P(L_e(theta, kappa_SBC) <= le_lap) averaged over a compressed kappa sample."""
    values, weights = kappa
    g = _bb_threshold(theta, efficiency, le_lap)
    return float(np.dot(weights, positioning_gain_cdf(env, theta, values, g)))


def bb_coverage_ok(env, antenna_cfg, kappa_sbc_samples, baseline: LapBaseline, reqs: ServiceRequirements,
                   min_samples: int = 1000) -> CoverageCheck:
    """BB constraint: fading integrated exactly, SBC radius averaged over the samples."""
    samples = np.asarray(kappa_sbc_samples, dtype=float)
    if samples.size < min_samples:
        raise ValueError(f"need at least {min_samples} kappa_SBC samples, got {samples.size}")
    rel = bb_reliability(env, antenna_cfg.reference_angle, antenna_cfg.efficiency, compress_kappa(samples),
                         baseline.le_lap)
    return CoverageCheck(rel >= 1.0 - reqs.eps_bb, min(max(rel, 0.0), 1.0))


def mtc_threshold(omega_b, baseline: LapBaseline, reqs: ServiceRequirements):
    return baseline.le_lap - slicing_ratio_db(omega_b, reqs)


def mtc_reliability(env, theta, efficiency, omega_b, baseline, reqs) -> float:
    g = mtc_threshold(omega_b, baseline, reqs) + antenna_gain(theta, efficiency) - 20.0 * np.log10(np.tan(theta))
    return float(positioning_gain_cdf(env, theta, 2.0, g))


def mtc_coverage_ok(env, antenna_cfg, omega_b, baseline: LapBaseline, reqs: ServiceRequirements) -> CoverageCheck:
    """Worst-case MTC constraint with the drone at the far cell edge (kappa = 2)."""
    if not 0 < omega_b < 1:
        raise ValueError("omega_b must lie in (0, 1); omega_b = 1 leaves no MTC slice")
    rel = mtc_reliability(env, antenna_cfg.reference_angle, antenna_cfg.efficiency, omega_b, baseline, reqs)
    return CoverageCheck(rel >= 1.0 - reqs.eps_mtc, rel)


def mtc_theta_window(env, efficiency, omega_b, baseline, bound: SlicingBound, reqs, theta_range=DEFAULT_THETA_RANGE,
                     tol=1e-7):
    """Interval of reference angles satisfying the MTC constraint, or None.

    The kappa = 2 reliability loss is unimodal around ``theta_rsr``, so each
    edge is found by bisection on its own side.
    """
    thr = float(mtc_threshold(omega_b, baseline, reqs))

    def slack(t):
        return thr - float(reliability_ple(env, t, efficiency, 2.0, reqs.eps_mtc))

    center = bound.theta_rsr
    if slack(center) < 0:
        return None
    lo_end, hi_end = theta_range

    def edge(inside, outside):
        if slack(outside) >= 0:
            return outside
        while abs(outside - inside) > tol:
            mid = 0.5 * (inside + outside)
            if slack(mid) >= 0:
                inside = mid
            else:
                outside = mid
        return inside

    return edge(center, lo_end), edge(center, hi_end)
