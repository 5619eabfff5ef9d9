"""Sweep configuration, per-cell execution and CSV output."""
from __future__ import annotations

import csv
import io
import json
import logging
import math
import re
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from .channel import PRESETS, Environment
from .coverage import ServiceRequirements
from .geometry import CellSpec, empirical_cdf
from .optimizer import Budget, geometry_kappas, optimize

log = logging.getLogger(__name__)

RESULT_FIELDS = [
    "env", "d_max_m", "eps_bb", "e_r", "lambda", "theta_lap_deg", "le_lap_db", "omega_max",
    "theta_opt_deg", "omega_opt", "ari", "bb_rel", "mtc_rel", "trials", "seed", "feasible",
]
KAPPA_FIELDS = ["d_max_m", "kappa", "cdf"]
KAPPA_GRID_POINTS = 1000

DEFAULT_D_MAX = [10.0, 50.0, 100.0, 200.0, 500.0, 1000.0, 2000.0]
DEFAULT_EPS_BB = [1e-3, 1e-4, 1e-5]
ENV_KEYS = ("a", "b", "mu_los", "mu_nlos", "d_los", "d_nlos", "c_los", "c_nlos")


class ConfigError(ValueError):
    pass


@dataclass
class SweepConfig:
    master_seed: int
    environments: list[Environment] = field(default_factory=lambda: list(PRESETS.values()))
    d_max_list: list[float] = field(default_factory=lambda: list(DEFAULT_D_MAX))
    eps_bb_list: list[float] = field(default_factory=lambda: list(DEFAULT_EPS_BB))
    e_r_list: list[float] = field(default_factory=lambda: [0.6])
    density: float = 2.0
    frequency: float = 2e9
    rate_bb: float = 1.0
    rate_mtc: float = 0.3
    eps_mtc: float = 0.1
    geometry_trials: int = 100_000
    rate_trials: int = 20_000
    weighting: str = "user"
    output_dir: Path = Path("results")

    def budget(self) -> Budget:
        return Budget(geometry_trials=self.geometry_trials, rate_trials=self.rate_trials)

    def cells(self):
        for env in self.environments:
            for d in self.d_max_list:
                for eps in self.eps_bb_list:
                    for er in self.e_r_list:
                        yield env, d, eps, er


def _fmt(x) -> str:
    if isinstance(x, bool):
        return "true" if x else "false"
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    if isinstance(x, str):
        return x
    x = float(x)
    if math.isnan(x):
        return "nan"
    return format(x, ".9g")


def _line_of(text: str, key: str) -> int | None:
    m = re.search(r'"%s"\s*:' % re.escape(key), text)
    return text.count("\n", 0, m.start()) + 1 if m else None


def _err(text, key, msg):
    line = _line_of(text, key)
    where = f"line {line}: " if line else ""
    return ConfigError(f"{where}{key}: {msg}")


def parse_config(text: str, base_dir: Path | None = None) -> SweepConfig:
    """Validate a JSON sweep config; every problem is reported with its line."""
    try:
        raw = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"line {exc.lineno} column {exc.colno}: {exc.msg}") from None
    if not isinstance(raw, dict):
        raise ConfigError("line 1: top level must be a JSON object")

    known = {"master_seed", "environments", "d_max_list", "eps_bb_list", "e_r_list", "lambda", "frequency",
             "requirements", "trials", "output_dir", "weighting"}
    for key in raw:
        if key not in known:
            raise _err(text, key, "unknown key")
    if "master_seed" not in raw:
        raise ConfigError("master_seed is required (no wall-clock seeding)")
    seed = raw["master_seed"]
    if not isinstance(seed, int) or isinstance(seed, bool) or seed < 0:
        raise _err(text, "master_seed", "must be a non-negative integer")
    cfg = SweepConfig(master_seed=seed)

    def numbers(key, lo=0.0, hi=math.inf, inclusive_hi=False):
        val = raw[key]
        if not isinstance(val, list) or not val:
            raise _err(text, key, "must be a non-empty list of numbers")
        for v in val:
            if not isinstance(v, (int, float)) or isinstance(v, bool) or not (
                    lo < v < hi or (inclusive_hi and v == hi)):
                raise _err(text, key, f"invalid entry {v!r}")
        return [float(v) for v in val]

    if "environments" in raw:
        envs = []
        if not isinstance(raw["environments"], list) or not raw["environments"]:
            raise _err(text, "environments", "must be a non-empty list")
        for item in raw["environments"]:
            if isinstance(item, str):
                if item not in PRESETS:
                    raise _err(text, "environments", f"unknown preset {item!r} (choose from {sorted(PRESETS)})")
                envs.append(PRESETS[item])
            elif isinstance(item, dict):
                missing = [k for k in ENV_KEYS if k not in item]
                if missing:
                    raise _err(text, "environments", f"custom environment lacks {missing}")
                extra = set(item) - set(ENV_KEYS) - {"label"}
                if extra:
                    raise _err(text, "environments", f"unknown environment keys {sorted(extra)}")
                try:
                    envs.append(Environment(**{k: item[k] for k in ENV_KEYS}, label=str(item.get("label", "custom"))))
                except (TypeError, ValueError) as exc:
                    raise _err(text, "environments", str(exc)) from None
            else:
                raise _err(text, "environments", f"invalid entry {item!r}")
        cfg.environments = envs
    if "d_max_list" in raw:
        cfg.d_max_list = numbers("d_max_list")
    if "eps_bb_list" in raw:
        cfg.eps_bb_list = numbers("eps_bb_list", 0.0, 1.0)
    if "e_r_list" in raw:
        cfg.e_r_list = numbers("e_r_list", 0.0, 1.0)
    for key, attr in (("lambda", "density"), ("frequency", "frequency")):
        if key in raw:
            v = raw[key]
            if not isinstance(v, (int, float)) or isinstance(v, bool) or not v > 0:
                raise _err(text, key, "must be a positive number")
            setattr(cfg, attr, float(v))
    if "requirements" in raw:
        req = raw["requirements"]
        if not isinstance(req, dict):
            raise _err(text, "requirements", "must be an object")
        for key in req:
            if key not in ("rate_bb", "rate_mtc", "eps_mtc"):
                raise _err(text, key, "unknown requirement (eps_bb comes from eps_bb_list)")
            v = req[key]
            if not isinstance(v, (int, float)) or isinstance(v, bool) or not v > 0:
                raise _err(text, key, "must be a positive number")
            setattr(cfg, key, float(v))
    if "trials" in raw:
        tr = raw["trials"]
        if not isinstance(tr, dict):
            raise _err(text, "trials", "must be an object")
        for key, attr, floor in (("geometry", "geometry_trials", 1000), ("rate", "rate_trials", 1000)):
            if key in tr:
                v = tr[key]
                if not isinstance(v, int) or isinstance(v, bool) or v < floor:
                    raise _err(text, key, f"must be an integer >= {floor}")
                setattr(cfg, attr, v)
        extra = set(tr) - {"geometry", "rate"}
        if extra:
            raise _err(text, sorted(extra)[0], "unknown trials key")
    if "weighting" in raw:
        if raw["weighting"] not in ("user", "snapshot"):
            raise _err(text, "weighting", "must be 'user' or 'snapshot'")
        cfg.weighting = raw["weighting"]
    if "output_dir" in raw:
        if not isinstance(raw["output_dir"], str):
            raise _err(text, "output_dir", "must be a string")
        out = Path(raw["output_dir"])
        cfg.output_dir = out if out.is_absolute() or base_dir is None else base_dir / out

    for eps in cfg.eps_bb_list:
        try:
            ServiceRequirements(cfg.rate_bb, eps, cfg.rate_mtc, cfg.eps_mtc)
        except ValueError as exc:
            raise _err(text, "eps_bb_list", str(exc)) from None
    return cfg


def load_config(path: str | Path) -> SweepConfig:
    path = Path(path)
    return parse_config(path.read_text(encoding="utf-8"), base_dir=path.parent)


def run_cell(args) -> dict:
    """Baseline, slicing bound and optimum of one (env, D_max, eps_B, E_r) cell as a CSV row."""
    cfg, env, d_max, eps, er = args
    row = {"env": env.label, "d_max_m": d_max, "eps_bb": eps, "e_r": er, "lambda": cfg.density,
           "trials": cfg.rate_trials, "seed": cfg.master_seed}
    try:
        reqs = ServiceRequirements(cfg.rate_bb, eps, cfg.rate_mtc, cfg.eps_mtc)
        res = optimize(env, er, reqs, CellSpec(d_max, cfg.density), cfg.budget(), seed=cfg.master_seed,
                       weighting=cfg.weighting)
    except Exception as exc:  # recorded per cell, the sweep carries on
        log.exception("cell %s D=%g eps=%g E_r=%g failed", env.label, d_max, eps, er)
        row.update({k: math.nan for k in RESULT_FIELDS if k not in row})
        row["feasible"] = False
        row["error"] = f"{type(exc).__name__}: {exc}"
        return row
    row.update(
        theta_lap_deg=math.degrees(res.baseline.theta_lap),
        le_lap_db=res.baseline.le_lap,
        omega_max=res.omega_max,
        theta_opt_deg=math.degrees(res.best.theta) if res.best else math.nan,
        omega_opt=res.best.omega_b if res.best else math.nan,
        ari=res.ari,
        ari_se=res.ari_se,
        bb_rel=res.bb_reliability,
        mtc_rel=res.mtc_reliability,
        feasible=res.feasible,
        message=res.message,
    )
    log.info("%s D=%g eps=%g E_r=%g -> ARI %.4f (%s)", env.label, d_max, eps, er, res.ari,
             "feasible" if res.feasible else res.message)
    return row


def results_csv(rows: list[dict]) -> str:
    """CSV text; an ``error`` column is appended only when some cell raised."""
    fields = list(RESULT_FIELDS)
    if any(r.get("error") for r in rows):
        fields.append("error")
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(fields)
    for r in rows:
        w.writerow([_fmt(r.get(f, "")) for f in fields])
    return buf.getvalue()


def kappa_cdf_rows(d_max_list, density, trials, seed):
    grid = np.linspace(0.0, 1.0, KAPPA_GRID_POINTS)
    out = []
    for d in d_max_list:
        values, weights = geometry_kappas(CellSpec(d, density), trials, seed)
        cdf = np.cumsum(weights)[np.searchsorted(values, grid, side="right") - 1]
        cdf = np.where(grid < values[0], 0.0, cdf)
        out.extend((d, k, c) for k, c in zip(grid, cdf))
    return out


def kappa_cdf_csv(rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(KAPPA_FIELDS)
    for r in rows:
        w.writerow([_fmt(v) for v in r])
    return buf.getvalue()


def run_sweep(cfg: SweepConfig, jobs: int = 1) -> tuple[list[dict], int]:
    """Run every cell, write ``results.csv`` and ``kappa_cdf.csv``; returns (rows, exit code)."""
    cells = [(cfg, *c) for c in cfg.cells()]
    log.info("sweep: %d cells, seed %d, %d job(s)", len(cells), cfg.master_seed, jobs)
    if jobs > 1 and len(cells) > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            rows = list(pool.map(run_cell, cells))  # map keeps config order
    else:
        rows = [run_cell(c) for c in cells]
    cfg.output_dir.mkdir(parents=True, exist_ok=True)
    write_text(cfg.output_dir / "results.csv", results_csv(rows))
    kappa = kappa_cdf_rows(cfg.d_max_list, cfg.density, cfg.geometry_trials, cfg.master_seed)
    write_text(cfg.output_dir / "kappa_cdf.csv", kappa_cdf_csv(kappa))
    return rows, (1 if any(r.get("error") for r in rows) else 0)


def write_text(path: Path, text: str):
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(text)


def with_overrides(cfg: SweepConfig, **kw) -> SweepConfig:
    return replace(cfg, **{k: v for k, v in kw.items() if v is not None})
