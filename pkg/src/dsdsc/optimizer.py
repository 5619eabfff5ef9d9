"""Average rate increase (ARI) estimation and the (theta, omega_B) search.

ARI compares every BB user's rate under a drone hovering over the SBC centre
of the snapshot against the same user's rate under the static LAP at the
cell centre, both calibrated with the same power budget.  All candidate
designs are scored on one frozen ensemble of snapshots and fading draws
(common random numbers), which makes the noisy objective a deterministic
function of (theta, omega_B).
"""
from __future__ import annotations

import functools
import logging
import math
from dataclasses import dataclass, field

import numpy as np

from . import geometry
from .channel import AntennaConfig, Environment, gain_from_draws, path_loss_equivalent
from .coverage import (
    INVPHI,
    InfeasibleScenario,
    LapBaseline,
    ServiceRequirements,
    SlicingBound,
    bb_reliability,
    compress_kappa,
    golden_section_min,
    lap_baseline,
    log_expm1,
    max_slicing_ratio,
    mtc_reliability,
    mtc_theta_window,
)
from .geometry import CellSpec

log = logging.getLogger(__name__)

LN2 = math.log(2.0)
LN10 = math.log(10.0)


@dataclass(frozen=True)
class DesignPoint:
    theta: float
    omega_b: float


@dataclass
class OptimizationResult:
    best: DesignPoint | None
    ari: float
    ari_se: float
    bb_reliability: float
    mtc_reliability: float
    omega_max: float
    trials: int
    seed: int
    feasible: bool
    baseline: LapBaseline | None = None
    bound: SlicingBound | None = None
    message: str = ""


@dataclass(frozen=True)
class Budget:
    geometry_trials: int = 100_000
    rate_trials: int = 20_000
    omega_points: int = 40
    omega_floor: float = 0.01  # smallest grid value as a fraction of omega_max
    theta_points: int = 16
    theta_tol: float = 1e-4  # rad, golden-section stopping width
    boundary_tol: float = 1e-6  # rad, BB-feasibility edge bisection
    omega_refine: bool = True
    omega_tol: float = 1e-3  # relative to omega_max


def bb_rate(omega_b, le_lap: float, le, rate_req: float):
    """``w log2(1 + (2^(R/w) - 1) 10^((le_lap - le)/10))`` evaluated in log space."""
    omega_b = np.asarray(omega_b, dtype=float)
    a = log_expm1(rate_req * LN2 / omega_b) + (le_lap - np.asarray(le)) * LN10 / 10.0
    return omega_b * np.logaddexp(0.0, a) / LN2


def rate_dhop(cfg: AntennaConfig, omega_b, gain_sample, baseline: LapBaseline, reqs: ServiceRequirements):
    """BB rate under D-HOP; ``gain_sample`` is drawn at the user's distance to the SBC centre."""
    le = path_loss_equivalent(cfg.reference_angle, cfg.efficiency, gain_sample)
    return bb_rate(omega_b, baseline.le_lap, le, reqs.rate_bb)


def rate_static(efficiency: float, omega_b, gain_sample, baseline: LapBaseline, reqs: ServiceRequirements):
    """BB rate under the static LAP (angle fixed to theta_LAP, distance from the cell centre)."""
    le = path_loss_equivalent(baseline.theta_lap, efficiency, gain_sample)
    return bb_rate(omega_b, baseline.le_lap, le, reqs.rate_bb)


@dataclass
class RateEnsemble:
    """Flattened users of ``trials`` snapshots with their fading variates."""

    trials: int
    trial_of_user: np.ndarray
    kappa_d: np.ndarray  # distance to the SBC centre
    kappa_s: np.ndarray  # distance to the cell centre
    u_d: np.ndarray
    z_d: np.ndarray
    u_s: np.ndarray
    z_s: np.ndarray
    kappa_sbc: np.ndarray  # per trial
    _compressed: tuple | None = field(default=None, repr=False)

    @property
    def kappa_sbc_compressed(self):
        if self._compressed is None:
            self._compressed = compress_kappa(self.kappa_sbc)
        return self._compressed

    @property
    def users_per_trial(self) -> np.ndarray:
        return np.bincount(self.trial_of_user, minlength=self.trials)


@functools.lru_cache(maxsize=16)
def build_ensemble(cell: CellSpec, trials: int, seed: int) -> RateEnsemble:
    """Snapshots of the rate stream; trial ``i`` is rebuilt from (seed, i) alone."""
    table = geometry.truncated_poisson_cdf(cell.expected_count)
    parts = {k: [] for k in ("t", "kd", "ks", "ud", "zd", "us", "zs")}
    ksbc = np.empty(trials)
    for i in range(trials):
        fld, circle, rng = geometry.trial(cell, seed, i, geometry.RATE_STREAM, table)
        k = fld.count
        parts["t"].append(np.full(k, i))
        parts["kd"].append(geometry.normalized_distance(fld.points, np.array(circle.center), cell))
        parts["ks"].append(geometry.normalized_distance(fld.points, np.zeros(2), cell))
        parts["ud"].append(rng.random(k))
        parts["zd"].append(rng.standard_normal(k))
        parts["us"].append(rng.random(k))
        parts["zs"].append(rng.standard_normal(k))
        ksbc[i] = min(circle.radius / cell.radius_m, 1.0)
    cat = {k: np.concatenate(v) for k, v in parts.items()}
    return RateEnsemble(trials, cat["t"], cat["kd"], cat["ks"], cat["ud"], cat["zd"], cat["us"], cat["zs"], ksbc)


@functools.lru_cache(maxsize=16)
def geometry_kappas(cell: CellSpec, trials: int, seed: int):
    return compress_kappa(geometry.kappa_sbc_samples(cell, trials, seed))


@dataclass(frozen=True)
class AriEstimate:
    ari: float
    se: float
    bb_reliability: float


class AriEvaluator:
    """ARI of design points on a fixed ensemble.

    ``pin_center`` keeps the dynamic drone at the cell centre and
    ``share_fading`` reuses the static system's fading draws; both exist to
    check the estimator against the static system itself.
    """

    def __init__(self, env: Environment, efficiency: float, ensemble: RateEnsemble, baseline: LapBaseline,
                 reqs: ServiceRequirements, weighting: str = "user", pin_center: bool = False,
                 share_fading: bool = False):
        if weighting not in ("user", "snapshot"):
            raise ValueError("weighting must be 'user' or 'snapshot'")
        self.env = env
        self.efficiency = efficiency
        self.ens = ensemble
        self.baseline = baseline
        self.reqs = reqs
        self.weighting = weighting
        self._kd = ensemble.kappa_s if pin_center else ensemble.kappa_d
        self._ud, self._zd = (ensemble.u_s, ensemble.z_s) if share_fading else (ensemble.u_d, ensemble.z_d)
        g_s = gain_from_draws(env, baseline.theta_lap, ensemble.kappa_s, ensemble.u_s, ensemble.z_s)
        self._le_s = path_loss_equivalent(baseline.theta_lap, efficiency, g_s)
        self._static_cache: dict[float, np.ndarray] = {}
        self._dyn_cache: dict[float, np.ndarray] = {}
        self._counts = np.maximum(ensemble.users_per_trial, 1)
        self.evaluations = 0

    def le_dynamic(self, theta: float) -> np.ndarray:
        le = self._dyn_cache.get(theta)
        if le is None:
            g = gain_from_draws(self.env, theta, self._kd, self._ud, self._zd)
            le = path_loss_equivalent(theta, self.efficiency, g)
            if len(self._dyn_cache) > 64:
                self._dyn_cache.clear()
            self._dyn_cache[theta] = le
        return le

    def _per_trial(self, rates):
        sums = np.bincount(self.ens.trial_of_user, weights=rates, minlength=self.ens.trials)
        return sums / self._counts if self.weighting == "snapshot" else sums

    def static_per_trial(self, omega_b: float) -> np.ndarray:
        s = self._static_cache.get(omega_b)
        if s is None:
            s = self._per_trial(bb_rate(omega_b, self.baseline.le_lap, self._le_s, self.reqs.rate_bb))
            self._static_cache[omega_b] = s
        return s

    def user_rates(self, theta: float, omega_b: float):
        """Per-user (dynamic, static) rates."""
        rd = bb_rate(omega_b, self.baseline.le_lap, self.le_dynamic(theta), self.reqs.rate_bb)
        rs = bb_rate(omega_b, self.baseline.le_lap, self._le_s, self.reqs.rate_bb)
        return rd, rs

    def ari(self, theta: float, omega_b: float) -> float:
        self.evaluations += 1
        rd = bb_rate(omega_b, self.baseline.le_lap, self.le_dynamic(theta), self.reqs.rate_bb)
        return float(self._per_trial(rd).sum() / self.static_per_trial(omega_b).sum())

    def estimate(self, theta: float, omega_b: float) -> AriEstimate:
        """Ratio-of-sums ARI with its delta-method standard error."""
        rd = bb_rate(omega_b, self.baseline.le_lap, self.le_dynamic(theta), self.reqs.rate_bb)
        d = self._per_trial(rd)
        s = self.static_per_trial(omega_b)
        n = len(d)
        ratio = d.sum() / s.sum()
        resid = d - ratio * s
        se = math.sqrt(resid.var(ddof=1) / n) / s.mean() if n > 1 else math.nan
        rel = bb_reliability(self.env, theta, self.efficiency, self.ens.kappa_sbc_compressed, self.baseline.le_lap)
        return AriEstimate(float(ratio), float(se), rel)


def ari_estimate(env, antenna_cfg: AntennaConfig, omega_b: float, cell: CellSpec, trials: int, seed: int,
                 baseline: LapBaseline, reqs: ServiceRequirements, **kwargs) -> AriEstimate:
    """One-shot ARI estimate; see :class:`AriEvaluator` for the test hooks in ``kwargs``."""
    if trials < 1000:
        raise ValueError("ARI estimation needs at least 1000 trials")
    ens = build_ensemble(cell, trials, seed)
    return AriEvaluator(env, antenna_cfg.efficiency, ens, baseline, reqs, **kwargs).estimate(
        antenna_cfg.reference_angle, omega_b)


# --- search ---------------------------------------------------------------

def _golden_max(f, a, b, tol):
    c = b - INVPHI * (b - a)
    d = a + INVPHI * (b - a)
    fc, fd = f(c), f(d)
    while b - a > tol:
        # ties move toward smaller theta
        if fc >= fd:
            b, d, fd = d, c, fc
            c = b - INVPHI * (b - a)
            fc = f(c)
        else:
            a, c, fc = c, d, fd
            d = a + INVPHI * (b - a)
            fd = f(d)
    return (c, fc) if fc >= fd else (d, fd)


def bb_feasible_intervals(env, efficiency, kappa, le_lap, eps_bb, lo, hi, points=16, tol=1e-6):
    """Sub-intervals of [lo, hi] where the BB constraint holds, edges bisected to ``tol``."""

    def ok(t):
        return bb_reliability(env, t, efficiency, kappa, le_lap) >= 1.0 - eps_bb

    if hi - lo <= tol:
        return [(lo, hi)] if ok(lo) else []
    grid = np.linspace(lo, hi, points)
    mask = [ok(t) for t in grid]

    def edge(inside, outside):
        while abs(outside - inside) > tol:
            mid = 0.5 * (inside + outside)
            if ok(mid):
                inside = mid
            else:
                outside = mid
        return inside

    out = []
    i = 0
    while i < points:
        if not mask[i]:
            i += 1
            continue
        j = i
        while j + 1 < points and mask[j + 1]:
            j += 1
        a = grid[i] if i == 0 else edge(grid[i], grid[i - 1])
        b = grid[j] if j == points - 1 else edge(grid[j], grid[j + 1])
        out.append((float(a), float(b)))
        i = j + 1
    return out


def _better(cand, best):
    # ARI first, then larger omega_B, then smaller theta
    if best is None:
        return True
    return (cand[0], cand[2], -cand[1]) > (best[0], best[2], -best[1])


def omega_grid(omega_max: float, budget: Budget) -> np.ndarray:
    return omega_max * np.geomspace(budget.omega_floor, 1.0, budget.omega_points)


def optimize(env: Environment, efficiency: float, reqs: ServiceRequirements, cell: CellSpec,
             budget: Budget = Budget(), seed: int = 0, omega_b: float | None = None,
             weighting: str = "user") -> OptimizationResult:
    """Search the feasible (theta, omega_B) region for the largest ARI.

    Outer log-spaced grid on omega_B up to the slicing bound; for each value
    the MTC window in theta comes from bisection around theta_RSR, it is cut
    down to where the BB constraint holds, and ARI is maximised on each
    remaining interval by golden-section search.  ``omega_b`` pins the outer
    loop to one value.
    """
    baseline = lap_baseline(env, efficiency, reqs)
    try:
        bound = max_slicing_ratio(env, efficiency, reqs)
    except InfeasibleScenario as exc:
        return OptimizationResult(None, math.nan, math.nan, math.nan, math.nan, 0.0, budget.rate_trials, seed,
                                  False, baseline, None, str(exc))

    def fail(msg):
        log.info("%s", msg)
        return OptimizationResult(None, math.nan, math.nan, math.nan, math.nan, bound.omega_max, budget.rate_trials,
                                  seed, False, baseline, bound, msg)

    if omega_b is not None:
        if not 0 < omega_b < 1:
            return fail(f"omega_b={omega_b} outside (0, 1)")
        if omega_b > bound.omega_max:
            return fail(f"omega_b={omega_b:.6g} exceeds the MTC slicing bound omega_max={bound.omega_max:.6g}")
        omegas = np.array([omega_b])
    else:
        omegas = omega_grid(bound.omega_max, budget)

    kappa_geo = geometry_kappas(cell, budget.geometry_trials, seed)
    ensemble = build_ensemble(cell, budget.rate_trials, seed)
    evaluator = AriEvaluator(env, efficiency, ensemble, baseline, reqs, weighting=weighting)

    def best_for(w):
        w = float(w)
        window = mtc_theta_window(env, efficiency, w, baseline, bound, reqs)
        if window is None:
            return None
        best_w = None
        for a, b in bb_feasible_intervals(env, efficiency, kappa_geo, baseline.le_lap, reqs.eps_bb, *window,
                                          points=budget.theta_points, tol=budget.boundary_tol):
            cands = [(evaluator.ari(a, w), a, w), (evaluator.ari(b, w), b, w)]
            if b - a > budget.theta_tol:
                t, v = _golden_max(lambda t: evaluator.ari(t, w), a, b, budget.theta_tol)
                cands.append((v, t, w))
            for cand in cands:
                if _better(cand, best_w):
                    best_w = cand
        return best_w

    best = None  # (ari, theta, omega)
    results = [best_for(w) for w in omegas]
    for cand in results:
        if cand is not None and _better(cand, best):
            best = cand
    if best is not None and len(omegas) > 2 and budget.omega_refine:
        # local refinement between the grid neighbours of the best grid value
        k = int(np.flatnonzero(omegas == best[2])[0])
        lo, hi = omegas[max(k - 1, 0)], omegas[min(k + 1, len(omegas) - 1)]
        cache = {}

        def neg(w):
            cand = best_for(w)
            cache[w] = cand
            return -cand[0] if cand is not None else math.inf

        golden_section_min(neg, float(lo), float(hi), tol=budget.omega_tol * bound.omega_max)
        for cand in cache.values():
            if cand is not None and _better(cand, best):
                best = cand
    if best is None:
        return fail("no reference angle satisfies both coverage constraints")

    _, theta, w = best
    est = evaluator.estimate(theta, w)
    cfg = AntennaConfig(efficiency, theta)
    bb_rel = bb_reliability(env, theta, efficiency, kappa_geo, baseline.le_lap)
    mtc_rel = mtc_reliability(env, theta, efficiency, w, baseline, reqs)
    feasible = bb_rel >= 1 - reqs.eps_bb and mtc_rel >= 1 - reqs.eps_mtc and w <= bound.omega_max
    log.debug("%s E_r=%g D=%g: %d ARI evaluations", env.label, efficiency, cell.radius_m, evaluator.evaluations)
    return OptimizationResult(DesignPoint(cfg.reference_angle, w), est.ari, est.se, bb_rel, mtc_rel,
                              bound.omega_max, budget.rate_trials, seed, bool(feasible), baseline, bound,
                              "" if feasible else "post-hoc coverage re-check failed")
