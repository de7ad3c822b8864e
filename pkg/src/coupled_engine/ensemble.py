"""Reproducible trajectory ensembles, sweep-time scans and sweep-time optimisation."""

from __future__ import annotations

import json
import logging
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .dynamics import SimConfig, build_schedule, covariance_evolution, simulate_batch
from .model import BathSpec, CoupledSystem, MechanicalMode
from .protocol import TWIN, Protocol, with_sweep_time
from .thermo import (
    LOWER,
    UPPER,
    CycleThermo,
    NormalModeSeries,
    cycle_thermo,
    decompose_arrays,
    decompose_moments,
    heat_isochoric,
    per_trajectory_work,
)

log = logging.getLogger(__name__)

FORMAT_VERSION = 1
BLOCK = 64
SERIES_FIELDS = (
    "N1", "N2", "N_plus", "N_minus", "N1_plus", "N2_plus", "N_corr_plus", "N1_minus", "N2_minus", "N_corr_minus",
)


@dataclass
class EnsembleResult:
    n_trajectories: int
    base_seed: int
    times: np.ndarray
    mean: dict
    std: dict
    per_trajectory: dict
    coefficients: dict
    protocol: Protocol
    system: CoupledSystem
    bath: BathSpec
    b1: np.ndarray | None = field(default=None, repr=False)
    b2: np.ndarray | None = field(default=None, repr=False)

    @property
    def cycle_works(self) -> np.ndarray:
        """Net delivered work of the upper branch per trajectory (J)."""
        return self.per_trajectory["work_upper"]

    def mean_series(self) -> NormalModeSeries:
        c = self.coefficients
        return NormalModeSeries(
            self.times, *(self.mean[k] for k in SERIES_FIELDS),
            c["omega_plus"], c["omega_minus"], c["u11"], c["u21"], c["u12"], c["u22"],
        )

    def thermo(self, *, branch: str = UPPER, correlation: bool = True, strict: bool = True) -> CycleThermo:
        return cycle_thermo(self.mean_series(), self.protocol, self.system.omega_m, branch=branch,
                            correlation=correlation, strict=strict)

    def eta_n_stderr(self, *, branch: str = UPPER, correlation: bool = True) -> float:
        """Delta-method standard error of the ratio-of-means normalised efficiency."""
        tag = "" if correlation else "_nocorr"
        w = self.per_trajectory[f"work_{branch}{tag}"]
        q = self.per_trajectory[f"heat_{branch}{tag}"]
        n = w.size
        if n < 2 or not np.mean(q) > 0:
            return float("nan")
        th = self.thermo(branch=branch, correlation=correlation, strict=False)
        r = np.mean(w) / np.mean(q)
        return float(np.std(w - r * q, ddof=1) / math.sqrt(n) / np.mean(q) / th.eta_ideal)

    def save(self, directory) -> None:
        """Write ``summary.json``, ``timeseries.csv`` and ``per_trajectory.csv``."""
        d = Path(directory)
        d.mkdir(parents=True, exist_ok=True)
        summary = {
            "format_version": FORMAT_VERSION,
            "n_trajectories": self.n_trajectories,
            "base_seed": self.base_seed,
            "protocol": self.protocol.to_dict(),
            "system": system_to_dict(self.system),
            "bath": {"t_cold": self.bath.t_cold, "t_hot": self.bath.t_hot},
        }
        (d / "summary.json").write_text(json.dumps(summary, indent=2))
        cols = ["t"] + [f"{k}_mean" for k in SERIES_FIELDS] + [f"{k}_std" for k in SERIES_FIELDS]
        cols += list(self.coefficients)
        data = np.column_stack(
            [self.times] + [self.mean[k] for k in SERIES_FIELDS] + [self.std[k] for k in SERIES_FIELDS]
            + [self.coefficients[k] for k in self.coefficients]
        )
        np.savetxt(d / "timeseries.csv", data, delimiter=",", fmt="%.9g", header=",".join(cols), comments="")
        keys = list(self.per_trajectory)
        pt = np.column_stack([np.arange(self.n_trajectories)] + [self.per_trajectory[k] for k in keys])
        np.savetxt(d / "per_trajectory.csv", pt, delimiter=",", fmt="%.9g", header=",".join(["index"] + keys),
                   comments="")

    @classmethod
    def load(cls, directory) -> EnsembleResult:
        d = Path(directory)
        summary = json.loads((d / "summary.json").read_text())
        if summary.get("format_version") != FORMAT_VERSION:
            raise ValueError(f"unsupported format_version {summary.get('format_version')}")
        ts = np.genfromtxt(d / "timeseries.csv", delimiter=",", names=True)
        pt = np.genfromtxt(d / "per_trajectory.csv", delimiter=",", names=True, ndmin=1)
        mean = {k: ts[f"{k}_mean"] for k in SERIES_FIELDS}
        std = {k: ts[f"{k}_std"] for k in SERIES_FIELDS}
        coeff = {k: ts[k] for k in ("omega_plus", "omega_minus", "u11", "u21", "u12", "u22")}
        per = {k: np.atleast_1d(pt[k]) for k in pt.dtype.names if k != "index"}
        return cls(
            summary["n_trajectories"], summary["base_seed"], ts["t"], mean, std, per, coeff,
            Protocol.from_dict(summary["protocol"]), system_from_dict(summary["system"]),
            BathSpec(**summary["bath"]),
        )


def system_to_dict(system: CoupledSystem) -> dict:
    return {
        "omega1": system.mode1.omega0, "gamma1": system.gamma1,
        "omega2": system.mode2.omega0, "gamma2": system.gamma2, "lam": system.lam,
    }


def system_from_dict(d: dict) -> CoupledSystem:
    return CoupledSystem(
        MechanicalMode(d["omega1"], d["gamma1"], "M1"), MechanicalMode(d["omega2"], d["gamma2"], "M2"), d["lam"]
    )


def _per_trajectory(series: NormalModeSeries, protocol: Protocol, omega_m: float) -> dict:
    out = {}
    branches = (UPPER, LOWER) if protocol.kind == TWIN else (UPPER,)
    for br in branches:
        for corr, tag in ((True, ""), (False, "_nocorr")):
            out[f"work_{br}{tag}"] = per_trajectory_work(series, protocol, branch=br, correlation=corr)
            out[f"heat_{br}{tag}"] = heat_isochoric(series, protocol, "4->1", omega_m, branch=br, correlation=corr)
    out["N1_status1"] = series.N1[:, 0]
    out["N_plus_status1"] = series.N_plus[:, 0]
    return out


def _block(args):
    """Simulate one index block and reduce it to mean, sum of squared deviations
    and per-trajectory scalars."""
    system, protocol, config, bath, indices, warmup, schedule, keep = args
    times, b1, b2 = simulate_batch(system, protocol, config, indices, bath=bath, warmup_cycles=warmup,
                                   schedule=schedule)
    series = decompose_arrays(times, b1, b2, system, protocol)
    mean = {k: np.mean(getattr(series, k), axis=0) for k in SERIES_FIELDS}
    m2 = {k: np.sum((getattr(series, k) - mean[k]) ** 2, axis=0) for k in SERIES_FIELDS}
    coeff = {k: np.asarray(getattr(series, k)) for k in ("omega_plus", "omega_minus", "u11", "u21", "u12", "u22")}
    out = {"n": len(indices), "mean": mean, "m2": m2, "per": _per_trajectory(series, protocol, system.omega_m),
           "times": times, "coeff": coeff}
    if keep:
        out["b1"], out["b2"] = b1, b2
    return out


def _merge(acc: dict | None, part: dict) -> dict:
    """Pairwise (Chan et al.) update of count, mean and squared deviations."""
    if acc is None:
        return {"n": part["n"], "mean": dict(part["mean"]), "m2": dict(part["m2"])}
    na, nb = acc["n"], part["n"]
    n = na + nb
    for k in SERIES_FIELDS:
        d = part["mean"][k] - acc["mean"][k]
        acc["mean"][k] = acc["mean"][k] + d * (nb / n)
        acc["m2"][k] = acc["m2"][k] + part["m2"][k] + d * d * (na * nb / n)
    acc["n"] = n
    return acc


def run_ensemble(
    system: CoupledSystem,
    protocol: Protocol,
    config: SimConfig,
    n: int = 250,
    *,
    bath: BathSpec = BathSpec(),
    workers: int = 1,
    warmup_cycles: int = 1,
    keep_trajectories: bool = False,
) -> EnsembleResult:
    """Run ``n`` trajectories; trajectory ``i`` uses stream ``(config.seed, i)``.

    One unrecorded warm-up cycle precedes the recorded cycle by default.
    Trajectories are processed in fixed blocks of ``BLOCK`` indices and the
    block statistics are merged in index order, so results do not depend on
    ``workers``.
    """
    if n < 1:
        raise ValueError("n must be >= 1")
    if workers < 1:
        raise ValueError("workers must be >= 1")
    schedule = build_schedule(system, protocol, config, bath)
    blocks = [list(range(i, min(i + BLOCK, n))) for i in range(0, n, BLOCK)]
    tasks = [(system, protocol, config, bath, idx, warmup_cycles, schedule, keep_trajectories) for idx in blocks]
    acc, per, b1s, b2s = None, [], [], []
    if workers > 1 and len(blocks) > 1:
        with ProcessPoolExecutor(max_workers=min(workers, len(blocks))) as ex:
            parts = ex.map(_block, tasks)
            for part in parts:
                acc = _merge(acc, part)
                per.append(part["per"])
                times, coeff = part["times"], part["coeff"]
                if keep_trajectories:
                    b1s.append(part["b1"])
                    b2s.append(part["b2"])
    else:
        for task in tasks:
            part = _block(task)
            acc = _merge(acc, part)
            per.append(part["per"])
            times, coeff = part["times"], part["coeff"]
            if keep_trajectories:
                b1s.append(part["b1"])
                b2s.append(part["b2"])
    std = {k: np.sqrt(np.maximum(acc["m2"][k], 0.0) / n) for k in SERIES_FIELDS}
    per_traj = {k: np.concatenate([p[k] for p in per]) for k in per[0]}
    return EnsembleResult(
        n, config.seed, times, acc["mean"], std, per_traj, coeff, protocol, system, bath,
        np.concatenate(b1s) if keep_trajectories else None, np.concatenate(b2s) if keep_trajectories else None,
    )


def mean_cycle(
    system: CoupledSystem,
    protocol: Protocol,
    config: SimConfig,
    *,
    bath: BathSpec = BathSpec(),
    warmup_cycles: int = 2,
) -> NormalModeSeries:
    """Infinite-ensemble mean series from the exact second moments.

    Propagates ``<b b^H>`` with the same per-step maps as the stochastic
    integrator, so it is the expectation of ``run_ensemble(...).mean_series()``.
    Work and heat are linear in the populations, hence ``cycle_thermo`` of
    this series gives expected values free of sampling noise.
    """
    schedule = build_schedule(system, protocol, config, bath)
    cov = covariance_evolution(schedule, 1, warmup_cycles=warmup_cycles)
    times = np.arange(cov.shape[0]) * schedule.h
    return decompose_moments(times, cov[:, 0, 0].real, cov[:, 1, 1].real, 2.0 * cov[:, 0, 1].real, system, protocol)


@dataclass
class ScanPoint:
    sweep_time: float
    eta_N: float
    eta_N_nocorr: float
    eta_N_se: float
    eta_N_nocorr_se: float
    thermo: CycleThermo
    thermo_nocorr: CycleThermo


def evaluate_sweep_time(system, base_protocol, sweep_time, config, n, *, bath=BathSpec(), workers=1) -> ScanPoint:
    protocol = with_sweep_time(base_protocol, sweep_time)
    res = run_ensemble(system, protocol, config, n, bath=bath, workers=workers)
    th = res.thermo()
    th0 = res.thermo(correlation=False)
    return ScanPoint(sweep_time, th.eta_N, th0.eta_N, res.eta_n_stderr(), res.eta_n_stderr(correlation=False), th, th0)


def sweep_time_scan(
    system: CoupledSystem,
    base_protocol: Protocol,
    sweep_times,
    config: SimConfig,
    n: int = 250,
    *,
    bath: BathSpec = BathSpec(),
    workers: int = 1,
) -> list[ScanPoint]:
    """Normalised efficiency, with and without the cross term, per sweep time.

    Every point reuses the same base seed, so the scan is smooth in the
    sweep time (common random numbers).
    """
    if any(not t > 0 for t in sweep_times):
        raise ValueError("sweep times must be positive")
    return [evaluate_sweep_time(system, base_protocol, t, config, n, bath=bath, workers=workers) for t in sweep_times]


@dataclass
class OptimizeResult:
    sweep_time: float
    eta_N: float
    stderr: float
    warning: bool
    evaluations: dict = field(repr=False, default_factory=dict)


def _snap(t, h, lo, hi):
    k = min(max(round(t / h), math.ceil(lo / h - 1e-9)), math.floor(hi / h + 1e-9))
    return k * h


def optimize_sweep_time(
    system: CoupledSystem,
    base_protocol: Protocol,
    bounds: tuple[float, float],
    config: SimConfig,
    n: int = 100,
    *,
    bath: BathSpec = BathSpec(),
    grid_points: int = 7,
    workers: int = 1,
) -> OptimizeResult:
    """Maximise the normalised efficiency over the ramp duration.

    A coarse grid brackets the optimum; golden-section search refines it.
    If the grid is not unimodal beyond twice the standard error the best grid
    point is returned with ``warning=True``. Candidate times are snapped to the
    record grid so that stroke boundaries stay on samples.
    """
    lo, hi = bounds
    if not 0 < lo < hi:
        raise ValueError("bounds must be positive and ordered")
    h = config.record_interval
    cache: dict[float, ScanPoint] = {}

    def f(t):
        t = _snap(t, h, lo, hi)
        if t not in cache:
            cache[t] = evaluate_sweep_time(system, base_protocol, t, config, n, bath=bath, workers=workers)
        return cache[t].eta_N

    grid = sorted({_snap(t, h, lo, hi) for t in np.linspace(lo, hi, grid_points)})
    vals = [f(t) for t in grid]
    best = int(np.argmax(vals))
    ses = [cache[t].eta_N_se for t in grid]
    unimodal = True
    for i in range(len(grid)):
        for j in range(len(grid)):
            nearer = abs(j - best) < abs(i - best) and (j - best) * (i - best) > 0
            if nearer and vals[i] > vals[j] + 2 * math.hypot(ses[i], ses[j]):
                unimodal = False
    if not unimodal:
        log.warning("normalised efficiency is not unimodal over the sweep-time grid")
        p = cache[grid[best]]
        return OptimizeResult(p.sweep_time, p.eta_N, p.eta_N_se, True, dict(cache))

    a = grid[max(best - 1, 0)]
    b = grid[min(best + 1, len(grid) - 1)]
    g = (math.sqrt(5) - 1) / 2
    c, d = b - g * (b - a), a + g * (b - a)
    while b - a > 2 * h:
        if f(c) >= f(d):
            b, d = d, c
            c = b - g * (b - a)
        else:
            a, c = c, d
            d = a + g * (b - a)
    top = max(cache.values(), key=lambda p: p.eta_N)
    return OptimizeResult(top.sweep_time, top.eta_N, top.eta_N_se, False, dict(cache))
