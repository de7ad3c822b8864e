"""Command-line front end: JSON run configuration in, CSV/JSON data files out.

Exit codes: 0 success, 2 configuration error, 3 simulation/runtime error.
All files of a command are written to a staging directory first and moved
into ``--out`` only once every file is complete.
"""

from __future__ import annotations

import argparse
import json
import logging
import math
import os
import shutil
import sys
import tempfile
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path

import numpy as np

from .dynamics import SimConfig, check_dt
from .ensemble import optimize_sweep_time, run_ensemble, sweep_time_scan
from .model import TWO_PI, BathSpec, CoupledSystem
from .protocol import build_single_cylinder, build_twin
from .spectra import anticrossing_map, extract_splitting, map_peaks
from .thermo import LOWER, UPPER

log = logging.getLogger("coupled_engine")

EXIT_OK, EXIT_CONFIG, EXIT_RUNTIME = 0, 2, 3
COMMANDS = ("spectrum", "cycle", "twin", "sweep", "optimize")


class ConfigError(ValueError):
    pass


@dataclass
class RunConfig:
    """Flat run configuration; unit suffixes give the SI unit (``_hz`` means value / 2 pi)."""

    omega_m_hz: float = 400e3
    gamma1_hz: float = 6.0
    gamma2_hz: float = 12.0
    lambda_hz: float = 40.0
    t_cold_k: float = 295.0
    t_hot_k: float = 1.77e4
    frame: str = "single"
    delta_i_hz: float | None = None
    delta_f_hz: float | None = None
    sweep_time_s: float = 20e-3
    therm_cold_s: float = 0.4
    therm_hot_s: float = 0.365
    dt_s: float = 2e-5
    record_stride: int = 5
    n_trajectories: int = 250
    warmup_cycles: int = 1
    seed: int = 0
    detuning_min_hz: float = -400.0
    detuning_max_hz: float = 400.0
    detuning_step_hz: float = 40.0
    record_length_s: float = 40.0
    sample_rate_hz: float = 2000.0
    resolution_hz: float = 1.0
    sweep_times_s: list = field(default_factory=lambda: [0.015, 0.024, 0.033, 0.042, 0.051, 0.060])
    optimize_bounds_s: list = field(default_factory=lambda: [0.002, 0.060])
    optimize_n: int = 100
    optimize_grid_points: int = 7

    def __post_init__(self):
        self.validate()

    def validate(self) -> None:
        positive = ("omega_m_hz", "gamma1_hz", "gamma2_hz", "t_cold_k", "t_hot_k", "sweep_time_s", "therm_cold_s",
                    "therm_hot_s", "dt_s", "record_length_s", "sample_rate_hz", "resolution_hz", "detuning_step_hz")
        for name in positive:
            v = getattr(self, name)
            if not isinstance(v, (int, float)) or isinstance(v, bool) or not math.isfinite(v) or v <= 0:
                raise ConfigError(f"{name} must be a positive number, got {v!r}")
        if not isinstance(self.lambda_hz, (int, float)) or not self.lambda_hz >= 0:
            raise ConfigError(f"lambda_hz must be non-negative, got {self.lambda_hz!r}")
        for name in ("record_stride", "n_trajectories", "optimize_n", "optimize_grid_points"):
            v = getattr(self, name)
            if not isinstance(v, int) or isinstance(v, bool) or v < 1:
                raise ConfigError(f"{name} must be a positive integer, got {v!r}")
        if not isinstance(self.warmup_cycles, int) or self.warmup_cycles < 0:
            raise ConfigError("warmup_cycles must be a non-negative integer")
        if not isinstance(self.seed, int) or not 0 <= self.seed < 2**64:
            raise ConfigError("seed must be an unsigned 64-bit integer")
        if self.frame not in ("single", "twin"):
            raise ConfigError(f"frame must be 'single' or 'twin', got {self.frame!r}")
        if self.t_hot_k <= self.t_cold_k:
            raise ConfigError("t_hot_k must exceed t_cold_k")
        di, df = self.window_hz()
        if not di > df:
            raise ConfigError("delta_i_hz must exceed delta_f_hz")
        if not self.detuning_max_hz > self.detuning_min_hz:
            raise ConfigError("detuning_max_hz must exceed detuning_min_hz")
        if not self.sweep_times_s or any(not (isinstance(t, (int, float)) and t > 0) for t in self.sweep_times_s):
            raise ConfigError("sweep_times_s must be a non-empty list of positive times")
        b = self.optimize_bounds_s
        if len(b) != 2 or not 0 < b[0] < b[1]:
            raise ConfigError("optimize_bounds_s must be [lo, hi] with 0 < lo < hi")
        try:
            self.bath()
            for frame in ("single", "twin"):
                check_dt(self.sim(), self.system(), self.protocol(frame))
        except ValueError as exc:
            raise ConfigError(str(exc)) from exc

    def window_hz(self, frame: str | None = None) -> tuple[float, float]:
        """Sweep window; unset ends take the frame's default window."""
        frame = frame or self.frame
        default = (720.0, -180.0) if frame == "twin" else (200.0, -200.0)
        di = default[0] if self.delta_i_hz is None else self.delta_i_hz
        df = default[1] if self.delta_f_hz is None else self.delta_f_hz
        return float(di), float(df)

    @classmethod
    def from_dict(cls, data: dict) -> RunConfig:
        if not isinstance(data, dict):
            raise ConfigError("configuration must be a JSON object")
        known = {f.name for f in fields(cls)}
        unknown = set(data) - known
        if unknown:
            raise ConfigError(f"unknown configuration keys: {sorted(unknown)}")
        try:
            return cls(**data)
        except TypeError as exc:
            raise ConfigError(str(exc)) from exc

    @classmethod
    def load(cls, path) -> RunConfig:
        try:
            data = json.loads(Path(path).read_text())
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError(f"cannot read configuration {path}: {exc}") from exc
        return cls.from_dict(data)

    def to_json(self) -> str:
        return json.dumps(asdict(self), indent=2)

    # builders -------------------------------------------------------------
    def system(self) -> CoupledSystem:
        return CoupledSystem.default(omega_m=TWO_PI * self.omega_m_hz, gamma1=TWO_PI * self.gamma1_hz,
                                     gamma2=TWO_PI * self.gamma2_hz, lam=TWO_PI * self.lambda_hz)

    def bath(self) -> BathSpec:
        return BathSpec(self.t_cold_k, self.t_hot_k)

    def sim(self) -> SimConfig:
        return SimConfig(self.dt_s, self.record_stride, self.seed)

    def protocol(self, frame: str | None = None):
        frame = frame or self.frame
        di, df = self.window_hz(frame)
        builder = build_twin if frame == "twin" else build_single_cylinder
        return builder(TWO_PI * di, TWO_PI * df, self.sweep_time_s, self.therm_cold_s, self.therm_hot_s)

    def detunings(self) -> np.ndarray:
        n = int(round((self.detuning_max_hz - self.detuning_min_hz) / self.detuning_step_hz))
        return self.detuning_min_hz + self.detuning_step_hz * np.arange(n + 1)


# writers -------------------------------------------------------------------
def _write_csv(path: Path, header: list[str], columns) -> None:
    data = np.column_stack([np.asarray(c, dtype=float) for c in columns])
    np.savetxt(path, data, delimiter=",", fmt="%.9g", header=",".join(header), comments="")


def _write_json(path: Path, obj) -> None:
    def clean(v):
        if isinstance(v, dict):
            return {k: clean(x) for k, x in v.items()}
        if isinstance(v, (list, tuple)):
            return [clean(x) for x in v]
        if isinstance(v, (float, np.floating)):
            return float(v) if math.isfinite(v) else None
        if isinstance(v, np.integer):
            return int(v)
        return v

    path.write_text(json.dumps(clean(obj), indent=2) + "\n")


# commands ------------------------------------------------------------------
def cmd_spectrum(cfg: RunConfig, out: Path) -> dict:
    system = cfg.system()
    det = cfg.detunings()
    smap = anticrossing_map(system, det, cfg.record_length_s, frame=cfg.frame, sample_rate=cfg.sample_rate_hz,
                            resolution=cfg.resolution_hz, bath=cfg.bath(), seed=cfg.seed)
    smap.to_csv(out / "spectrum_map.csv")
    plus, minus = smap.expected_loci(system.lam)
    peaks = map_peaks(smap)
    lo = [p[0] if p.size == 2 else np.nan for p in peaks]
    hi = [p[-1] if p.size >= 1 else np.nan for p in peaks]
    _write_csv(out / "loci.csv", ["detuning_Hz", "theory_plus_Hz", "theory_minus_Hz", "peak_upper_Hz",
                                  "peak_lower_Hz"], [det, plus, minus, hi, lo])
    splitting = extract_splitting(smap)
    summary = {"frame": cfg.frame, "splitting_Hz": splitting, "expected_Hz": 2 * cfg.lambda_hz,
               "resolution_Hz": smap.spectra[0].df}
    _write_json(out / "splitting.json", summary)
    return summary


def _cycle_outputs(res, out: Path, correlation: bool, branches) -> dict:
    res.save(out / "ensemble")
    ts = out / "timeseries.csv"
    shutil.copyfile(out / "ensemble" / "timeseries.csv", ts)
    summary = {}
    for br in branches:
        th = res.thermo(branch=br, correlation=correlation, strict=br == UPPER)
        name = "plus" if br == UPPER else "minus"
        th.write_diagram_csv(out / f"diagram_{name}.csv")
        d = th.summary()
        d["eta_N_stderr"] = res.eta_n_stderr(branch=br, correlation=correlation)
        tag = "" if correlation else "_nocorr"
        w = res.per_trajectory[f"work_{br}{tag}"]
        d["W_total_stderr"] = float(np.std(w, ddof=1) / math.sqrt(w.size)) if w.size > 1 else None
        summary[br] = d
    return summary


def cmd_cycle(cfg: RunConfig, out: Path, *, workers: int = 1, correlation: bool = True) -> dict:
    protocol = cfg.protocol("single")
    res = run_ensemble(cfg.system(), protocol, cfg.sim(), cfg.n_trajectories, bath=cfg.bath(), workers=workers,
                       warmup_cycles=cfg.warmup_cycles, keep_trajectories=cfg.n_trajectories == 1)
    summary = _cycle_outputs(res, out, correlation, (UPPER,))
    if cfg.n_trajectories == 1:
        b1, b2 = res.b1[0], res.b2[0]
        _write_csv(out / "trajectory.csv", ["t", "re_b1", "im_b1", "re_b2", "im_b2", "N1", "N2"],
                   [res.times, b1.real, b1.imag, b2.real, b2.imag, abs(b1) ** 2, abs(b2) ** 2])
    thermo = {"n_trajectories": cfg.n_trajectories, "seed": cfg.seed, **summary[UPPER]}
    _write_json(out / "thermo.json", thermo)
    return thermo


def cmd_twin(cfg: RunConfig, out: Path, *, workers: int = 1, correlation: bool = True) -> dict:
    protocol = cfg.protocol("twin")
    res = run_ensemble(cfg.system(), protocol, cfg.sim(), cfg.n_trajectories, bath=cfg.bath(), workers=workers,
                       warmup_cycles=cfg.warmup_cycles)
    summary = _cycle_outputs(res, out, correlation, (UPPER, LOWER))
    tag = "" if correlation else "_nocorr"
    diff = res.per_trajectory[f"work_upper{tag}"] - res.per_trajectory[f"work_lower{tag}"]
    summary["work_difference"] = float(np.mean(diff))
    summary["work_difference_stderr"] = float(np.std(diff, ddof=1) / math.sqrt(diff.size)) if diff.size > 1 else None
    summary["closure_ok"] = all(
        abs(summary[b]["first_law_error"]) <= 1e-6 * max(abs(summary[b]["Q_41"]), 1e-300) for b in (UPPER, LOWER)
    )
    _write_json(out / "thermo.json", summary)
    return summary


def cmd_sweep(cfg: RunConfig, out: Path, *, workers: int = 1, correlation: bool = True) -> list:
    pts = sweep_time_scan(cfg.system(), cfg.protocol(), cfg.sweep_times_s, cfg.sim(), cfg.n_trajectories,
                          bath=cfg.bath(), workers=workers)
    _write_csv(out / "sweep.csv", ["sweep_time_s", "eta_N", "eta_N_no_corr", "eta_N_stderr", "eta_N_no_corr_stderr",
                                   "W_total_J", "W_total_no_corr_J"],
               [[p.sweep_time for p in pts], [p.eta_N for p in pts], [p.eta_N_nocorr for p in pts],
                [p.eta_N_se for p in pts], [p.eta_N_nocorr_se for p in pts], [p.thermo.W_total for p in pts],
                [p.thermo_nocorr.W_total for p in pts]])
    return pts


def cmd_optimize(cfg: RunConfig, out: Path, *, workers: int = 1, correlation: bool = True) -> dict:
    res = optimize_sweep_time(cfg.system(), cfg.protocol(), tuple(cfg.optimize_bounds_s), cfg.sim(), cfg.optimize_n,
                              bath=cfg.bath(), grid_points=cfg.optimize_grid_points, workers=workers)
    pts = sorted(res.evaluations.values(), key=lambda p: p.sweep_time)
    _write_csv(out / "evaluations.csv", ["sweep_time_s", "eta_N", "eta_N_no_corr", "eta_N_stderr",
                                         "eta_N_no_corr_stderr"],
               [[p.sweep_time for p in pts], [p.eta_N for p in pts], [p.eta_N_nocorr for p in pts],
                [p.eta_N_se for p in pts], [p.eta_N_nocorr_se for p in pts]])
    summary = {"sweep_time_s": res.sweep_time, "eta_N": res.eta_N, "eta_N_stderr": res.stderr,
               "non_unimodal_warning": res.warning, "bounds_s": list(cfg.optimize_bounds_s)}
    _write_json(out / "optimize.json", summary)
    return summary


# entry point ---------------------------------------------------------------
def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="coupled-engine", description=__doc__.splitlines()[0])
    p.add_argument("command", nargs="?", choices=COMMANDS)
    p.add_argument("--config", type=Path, help="JSON run configuration (defaults used if omitted)")
    p.add_argument("--seed", type=int, help="override the configuration's base seed")
    p.add_argument("--out", type=Path, default=Path("out"), help="output directory")
    p.add_argument("--workers", type=int, default=1, help="worker processes (results do not depend on it)")
    p.add_argument("--no-correlation", action="store_true", help="drop the cross term from the branch populations")
    p.add_argument("--dump-defaults", action="store_true", help="print the default configuration and exit")
    p.add_argument("-v", "--verbose", action="store_true")
    return p


def _stage_and_commit(out: Path, run) -> object:
    out.parent.mkdir(parents=True, exist_ok=True)
    stage = Path(tempfile.mkdtemp(prefix=".stage-", dir=out.parent))
    try:
        result = run(stage)
        out.mkdir(parents=True, exist_ok=True)
        for item in sorted(stage.iterdir()):
            target = out / item.name
            if target.is_dir() and not target.is_symlink():
                shutil.rmtree(target)
            os.replace(item, target)
        return result
    finally:
        shutil.rmtree(stage, ignore_errors=True)


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s: %(message)s")
    if args.dump_defaults:
        print(RunConfig().to_json())
        return EXIT_OK
    if args.command is None:
        print("error: a command is required unless --dump-defaults is given", file=sys.stderr)
        return EXIT_CONFIG
    try:
        cfg = RunConfig.load(args.config) if args.config else RunConfig()
        if args.seed is not None:
            cfg.seed = args.seed
            cfg.validate()
        if args.workers < 1:
            raise ConfigError("--workers must be >= 1")
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG

    kw = {"workers": args.workers, "correlation": not args.no_correlation}
    runners = {
        "spectrum": lambda d: cmd_spectrum(cfg, d),
        "cycle": lambda d: cmd_cycle(cfg, d, **kw),
        "twin": lambda d: cmd_twin(cfg, d, **kw),
        "sweep": lambda d: cmd_sweep(cfg, d, **kw),
        "optimize": lambda d: cmd_optimize(cfg, d, **kw),
    }
    try:
        _stage_and_commit(args.out, runners[args.command])
    except (ValueError, FloatingPointError, ArithmeticError, RuntimeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    print(f"wrote {args.command} output to {args.out}")
    return EXIT_OK


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
