"""Normalised efficiency against ramp duration, sampled and noise-free.

Usage: python demos/sweep_time_trade_off.py [--n 100]
Short ramps lose population to the lower branch (Landau-Zener transfer),
long ramps lose it to damping; the noise-free column comes from exact
second moments.
"""

from __future__ import annotations

import argparse

from coupled_engine import CoupledSystem, SimConfig, build_single_cylinder, lz_diabatic_probability, sweep_time_scan
from coupled_engine.ensemble import mean_cycle
from coupled_engine.protocol import with_sweep_time
from coupled_engine.thermo import cycle_thermo


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--n", type=int, default=100)
    args = ap.parse_args()
    system = CoupledSystem.default()
    base = build_single_cylinder()
    times = [2e-3, 5e-3, 10e-3, 15e-3, 24e-3, 33e-3, 42e-3, 51e-3, 60e-3]
    pts = sweep_time_scan(system, base, times, SimConfig(seed=0), args.n)
    print(f"{'T_sweep (ms)':>12} {'P_LZ':>7} {'eta_N':>14} {'no cross':>9} {'expected':>9}")
    for p in pts:
        proto = with_sweep_time(base, p.sweep_time)
        exact = cycle_thermo(mean_cycle(system, proto, SimConfig()), proto, system.omega_m).eta_N
        lz = lz_diabatic_probability(system.lam, proto.sweep_rate)
        print(f"{p.sweep_time * 1e3:12.1f} {lz:7.3f} {p.eta_N:8.3f}+-{p.eta_N_se:.3f} {p.eta_N_nocorr:9.3f} "
              f"{exact:9.3f}")


if __name__ == "__main__":
    main()
