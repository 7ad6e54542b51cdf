"""Parameter sweeps: coverage vs tau, optimal UAV count, (R, h) heatmaps.

Every grid point is an independent, pure evaluation; the result table is
assembled in grid order. The Monte-Carlo track reuses one seed across the
grid (common random numbers). Along a tau sweep the harvested energy is
linear in tau, so one set of slots drawn at tau = 1 serves every tau.
"""

from __future__ import annotations

import csv
import enum
import json
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Iterable, Optional, Sequence

import numpy as np
from scipy import optimize

from . import analysis, montecarlo
from .model import NetworkConfig

DEFAULT_TAU_GRID = tuple(round(0.025 * k, 3) for k in range(1, 21))
DEFAULT_N_RANGE = tuple(range(1, 31))
DEFAULT_R_GRID = tuple(float(r) for r in range(50, 501, 50))
DEFAULT_H_GRID = tuple(float(h) for h in range(50, 301, 50))


class SweepVariable(enum.Enum):
    TAU = "tau"
    N_UAVS = "n_uavs"
    GRID_RH = "grid_rh"


class Track(enum.Enum):
    ANALYTIC = "analytic"
    MONTE_CARLO = "monte_carlo"


@dataclass
class SweepSpec:
    variable: SweepVariable
    grid: Sequence = ()
    h_grid: Sequence = ()       # second axis of GRID_RH (grid holds R)
    fixed_overrides: dict = field(default_factory=dict)
    tracks: frozenset = frozenset({Track.ANALYTIC})
    mc_slots: int = 10 ** 6
    seed: int = 0

    def __post_init__(self):
        self.variable = SweepVariable(self.variable)
        self.tracks = frozenset(Track(t) for t in self.tracks)
        if not self.grid:
            self.grid = {SweepVariable.TAU: DEFAULT_TAU_GRID,
                         SweepVariable.N_UAVS: DEFAULT_N_RANGE,
                         SweepVariable.GRID_RH: DEFAULT_R_GRID}[self.variable]
        if self.variable is SweepVariable.GRID_RH and not self.h_grid:
            self.h_grid = DEFAULT_H_GRID
        axes = [self.grid] + ([self.h_grid] if self.variable is SweepVariable.GRID_RH else [])
        for axis in axes:
            if len(axis) == 0:
                raise ValueError("sweep grid is empty")
            if any(b <= a for a, b in zip(axis, axis[1:])):
                raise ValueError("sweep grid must be strictly increasing")

    @classmethod
    def from_dict(cls, data: dict) -> "SweepSpec":
        data = dict(data)
        data["tracks"] = frozenset(data.get("tracks", ["analytic"]))
        return cls(**data)

    def to_dict(self) -> dict:
        return {"variable": self.variable.value, "grid": list(self.grid),
                "h_grid": list(self.h_grid),
                "fixed_overrides": dict(self.fixed_overrides),
                "tracks": sorted(t.value for t in self.tracks),
                "mc_slots": self.mc_slots, "seed": self.seed}

    def points(self) -> list:
        if self.variable is SweepVariable.TAU:
            return [{"tau": float(t)} for t in self.grid]
        if self.variable is SweepVariable.N_UAVS:
            return [{"n_uavs": int(n)} for n in self.grid]
        return [{"radius_m": float(R), "altitude_m": float(h)}
                for h in self.h_grid for R in self.grid]


@dataclass
class SweepRow:
    params: dict
    p_h_exact: float = math.nan
    p_h_approx: float = math.nan
    p_c: float = math.nan
    p_jc: float = math.nan
    mc: Optional[montecarlo.McEstimate] = None
    error: str = ""

    def as_dict(self) -> dict:
        out = dict(self.params)
        out.update(p_h_exact=self.p_h_exact, p_h_approx=self.p_h_approx,
                   p_c=self.p_c, p_jc=self.p_jc)
        if self.mc is not None:
            out.update(mc_p_h=self.mc.p_h, mc_p_h_hw=self.mc.halfwidth_h,
                       mc_p_c=self.mc.p_c, mc_p_c_hw=self.mc.halfwidth_c,
                       mc_p_jc=self.mc.p_jc, mc_p_jc_hw=self.mc.halfwidth_jc)
        out["error"] = self.error
        return out


@dataclass
class Optimum:
    """Grid argmax with the runner-up kept so the claim can be audited."""

    point: dict
    value: float
    runner_up: Optional[dict]
    runner_up_value: float
    note: str = "ties broken toward the earlier grid point"

    @property
    def gap(self) -> float:
        return self.value - self.runner_up_value


@dataclass
class SweepResult:
    spec: SweepSpec
    config: NetworkConfig
    rows: list
    optima: dict = field(default_factory=dict)

    @property
    def degraded(self) -> bool:
        return any(r.error for r in self.rows)

    def column(self, name: str) -> np.ndarray:
        return np.array([r.as_dict()[name] for r in self.rows], dtype=float)


def argmax_record(points: Sequence[dict], values: Sequence[float]) -> Optimum:
    """First maximum wins, so with points ordered ascending ties go to the
    smaller parameter."""
    values = np.asarray(values, dtype=float)
    ok = np.where(np.isfinite(values), values, -np.inf)
    best = int(np.argmax(ok))
    rest = ok.copy()
    rest[best] = -np.inf
    if len(values) > 1 and np.isfinite(rest.max()):
        second = int(np.argmax(rest))
        return Optimum(points[best], float(values[best]), points[second],
                       float(values[second]))
    return Optimum(points[best], float(values[best]), None, math.nan)


# --------------------------------------------------------------------------
# threshold calibration
# --------------------------------------------------------------------------

def calibrate_thresholds(config: NetworkConfig, target_h: float = 0.8,
                         target_c: float = 0.6) -> tuple:
    """Thresholds (gamma_h, gamma_c) giving the requested exact energy
    coverage and SINR coverage at ``config``."""
    if not (0 < target_h < 1 and 0 < target_c < 1):
        raise ValueError("targets must lie in (0, 1)")
    mean_energy = (config.n_uavs * config.harvest_scale * config.shadow_mean
                   * config.path_loss_const * config.altitude_m ** -config.alpha)

    def energy_gap(log_g):
        c = config.replace(energy_threshold_j=math.exp(log_g))
        return analysis.energy_coverage_exact(c).value - target_h

    def comm_gap(log_g):
        c = config.replace(sinr_threshold=math.exp(log_g))
        return analysis.comm_coverage(c).value - target_c

    g_h = math.exp(_bracketed_root(energy_gap, math.log(mean_energy)))
    g_c = math.exp(_bracketed_root(comm_gap, 0.0))
    return g_h, g_c


def _bracketed_root(f, x0, step=1.0):
    lo, hi = x0 - step, x0 + step
    while f(lo) < 0:
        lo -= step
    while f(hi) > 0:
        hi += step
    return optimize.brentq(f, lo, hi, xtol=1e-10)


# --------------------------------------------------------------------------
# sweeps
# --------------------------------------------------------------------------

def _analytic_row(config: NetworkConfig, params: dict) -> SweepRow:
    row = SweepRow(params)
    try:
        c = config.replace(**params)
        row.p_h_exact = analysis.energy_coverage_exact(c).value
        prof = analysis.coverage_profile(c)
        row.p_h_approx, row.p_c, row.p_jc = prof.energy, prof.comm, prof.joint
    except (ArithmeticError, ValueError) as exc:
        row.error = f"{type(exc).__name__}: {exc}"
    return row


def _mc_rows(config: NetworkConfig, spec: SweepSpec, points: list) -> list:
    """Monte-Carlo estimates for each grid point, sharing slots across tau."""
    out = []
    cache = {}
    for params in points:
        c = config.replace(**params)
        if spec.variable is SweepVariable.TAU:
            key = "unit-tau"
            if key not in cache:
                cache[key] = montecarlo.sample_slots(
                    config.replace(tau=1.0), spec.mc_slots, spec.seed)
            base = cache[key]
            samples = montecarlo.SlotSamples(base.harvested_j * c.tau, base.sinr)
        else:
            samples = montecarlo.sample_slots(c, spec.mc_slots, spec.seed)
        out.append(montecarlo.estimate(samples, c.energy_threshold_j,
                                       c.sinr_threshold, spec.seed))
    return out


def run_sweep(spec: SweepSpec, config: Optional[NetworkConfig] = None,
              threads: int = 1) -> SweepResult:
    config = (config or NetworkConfig()).replace(**spec.fixed_overrides)
    points = spec.points()
    if Track.ANALYTIC in spec.tracks:
        if threads > 1:
            with ThreadPoolExecutor(threads) as pool:
                rows = list(pool.map(lambda p: _analytic_row(config, p), points))
        else:
            rows = [_analytic_row(config, p) for p in points]
    else:
        rows = [SweepRow(p) for p in points]
    if Track.MONTE_CARLO in spec.tracks:
        for row, est in zip(rows, _mc_rows(config, spec, points)):
            row.mc = est
    result = SweepResult(spec, config, rows)
    if Track.ANALYTIC in spec.tracks:
        result.optima["p_jc"] = argmax_record(points, [r.p_jc for r in rows])
    if Track.MONTE_CARLO in spec.tracks:
        result.optima["mc_p_jc"] = argmax_record(points, [r.mc.p_jc for r in rows])
    return result


@dataclass
class NOptimum:
    tau: float
    n_star: int
    analytic: Optimum
    p_jc: np.ndarray
    analytic_range: tuple = ()
    mc: Optional[Optimum] = None
    mc_p_jc: Optional[np.ndarray] = None

    @property
    def interior(self) -> bool:
        return self.n_star not in (self.analytic_range[0], self.analytic_range[-1])


def find_optimal_n(config: NetworkConfig, n_range: Iterable[int] = DEFAULT_N_RANGE,
                   tau_list: Iterable[float] = (0.125, 0.25, 0.5),
                   mc_slots: int = 0, seed: int = 0, threads: int = 1) -> list:
    """Exhaustive search over the UAV count for each tau.

    SINR coverage does not depend on tau, so each N is profiled once and
    reused across ``tau_list``; with ``mc_slots`` the MC argmax is reported
    as well.
    """
    n_range = tuple(int(n) for n in n_range)
    tau_list = tuple(float(t) for t in tau_list)
    points = [{"n_uavs": n} for n in n_range]

    def profile_row(n):
        c = config.replace(n_uavs=n)
        p_c_r = analysis.cond_comm_coverage(c, analysis._serving_nodes(c)[0])
        return [_joint_from(c.replace(tau=t), p_c_r) for t in tau_list]

    if threads > 1:
        with ThreadPoolExecutor(threads) as pool:
            table = np.array(list(pool.map(profile_row, n_range)))
    else:
        table = np.array([profile_row(n) for n in n_range])

    mc_table = None
    if mc_slots:
        mc_table = np.empty_like(table)
        for i, n in enumerate(n_range):
            base = montecarlo.sample_slots(config.replace(n_uavs=n, tau=1.0),
                                           mc_slots, seed, threads)
            for j, t in enumerate(tau_list):
                est = montecarlo.estimate(
                    montecarlo.SlotSamples(base.harvested_j * t, base.sinr),
                    config.energy_threshold_j, config.sinr_threshold, seed)
                mc_table[i, j] = est.p_jc

    out = []
    for j, t in enumerate(tau_list):
        opt = argmax_record(points, table[:, j])
        rec = NOptimum(t, opt.point["n_uavs"], opt, table[:, j],
                       analytic_range=n_range)
        if mc_table is not None:
            rec.mc = argmax_record(points, mc_table[:, j])
            rec.mc_p_jc = mc_table[:, j]
        out.append(rec)
    return out


def _joint_from(config: NetworkConfig, p_c_r: np.ndarray) -> float:
    r, w = analysis._serving_nodes(config)
    p_h_r = np.atleast_1d(analysis.cond_energy_coverage(config, r))
    return float(np.clip((p_h_r * p_c_r) @ w, 0.0, 1.0))


@dataclass
class RHOptimum:
    r_star: float
    h_star: float
    value: float
    r_grid: np.ndarray
    h_grid: np.ndarray
    heatmap: np.ndarray            # shape (len(h_grid), len(r_grid))
    optimum: Optimum
    mc_heatmap: Optional[np.ndarray] = None
    mc_optimum: Optional[Optimum] = None

    @property
    def on_boundary(self) -> bool:
        return (self.r_star in (self.r_grid[0], self.r_grid[-1])
                or self.h_star in (self.h_grid[0], self.h_grid[-1]))


def find_optimal_rh(config: NetworkConfig, r_grid: Sequence[float] = DEFAULT_R_GRID,
                    h_grid: Sequence[float] = DEFAULT_H_GRID, mc_slots: int = 0,
                    seed: int = 0, threads: int = 1) -> RHOptimum:
    """Grid search over corridor half-length and altitude.

    Ties go to the smaller R, then the smaller h.
    """
    r_grid = np.asarray(r_grid, dtype=float)
    h_grid = np.asarray(h_grid, dtype=float)
    # R-major so that the first maximum has the smallest R, then smallest h
    points = [{"radius_m": float(R), "altitude_m": float(h)}
              for R in r_grid for h in h_grid]

    def joint(p):
        return analysis.joint_coverage(config.replace(**p)).value

    if threads > 1:
        with ThreadPoolExecutor(threads) as pool:
            values = list(pool.map(joint, points))
    else:
        values = [joint(p) for p in points]
    heat = np.array(values).reshape(len(r_grid), len(h_grid)).T
    opt = argmax_record(points, values)
    res = RHOptimum(opt.point["radius_m"], opt.point["altitude_m"], opt.value,
                    r_grid, h_grid, heat, opt)
    if mc_slots:
        mc_vals = [montecarlo.simulate(config.replace(**p), mc_slots, seed, threads).p_jc
                   for p in points]
        res.mc_heatmap = np.array(mc_vals).reshape(len(r_grid), len(h_grid)).T
        res.mc_optimum = argmax_record(points, mc_vals)
    return res


# --------------------------------------------------------------------------
# output
# --------------------------------------------------------------------------

def _fmt(v):
    if isinstance(v, float):
        return f"{v:.12g}"
    return v


def header_lines(config: NetworkConfig, seed: Optional[int], extra: Optional[dict] = None):
    lines = [f"# config: {json.dumps(config.to_dict(), sort_keys=True)}",
             f"# seed: {seed}",
             f"# energy_threshold_j: {config.energy_threshold_j:.12g}",
             f"# sinr_threshold: {config.sinr_threshold:.12g}"]
    for k, v in (extra or {}).items():
        lines.append(f"# {k}: {json.dumps(v)}")
    return lines


def write_sweep_csv(result: SweepResult, path) -> None:
    rows = [r.as_dict() for r in result.rows]
    fields = list(rows[0].keys())
    with open(path, "w", newline="") as fh:
        for line in header_lines(result.config, result.spec.seed,
                                 {"sweep": result.spec.to_dict()}):
            fh.write(line + "\n")
        writer = csv.DictWriter(fh, fieldnames=fields, lineterminator="\n")
        writer.writeheader()
        for row in rows:
            writer.writerow({k: _fmt(v) for k, v in row.items()})


def write_heatmap_matrix(path, r_grid, h_grid, heat) -> None:
    """gnuplot ``nonuniform matrix`` layout: first row ``n R_1 ... R_n``,
    then one row per altitude ``h z_1 ... z_n``."""
    with open(path, "w") as fh:
        fh.write(" ".join([str(len(r_grid))] + [f"{r:.12g}" for r in r_grid]) + "\n")
        for h, row in zip(h_grid, heat):
            fh.write(" ".join([f"{h:.12g}"] + [f"{z:.12g}" for z in row]) + "\n")


def read_config_echo(path) -> NetworkConfig:
    """Recover the configuration echoed in a CSV header."""
    with open(path) as fh:
        for line in fh:
            if line.startswith("# config: "):
                return NetworkConfig.from_dict(json.loads(line[len("# config: "):]))
    raise ValueError(f"no configuration echo in {path}")
