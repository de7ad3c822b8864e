"""Acceptance suite: one test per headline criterion, each reporting one PASS/FAIL line.

Run alone with ``pytest tests/test_acceptance.py -s`` or ``python tests/test_acceptance.py``;
the lines are also collected in the terminal summary of a full ``pytest`` run.
"""

from __future__ import annotations

import math
import sys

import numpy as np
import pytest
from conftest import ACCEPTANCE_LINES
from oracles import occupancy
from scipy import signal, stats

from coupled_engine import (
    BathSpec,
    CoupledSystem,
    EnvelopeState,
    SimConfig,
    build_single_cylinder,
    build_twin,
    lz_diabatic_probability,
    mode_transform,
    run_ensemble,
    simulate_trajectory,
    step,
    sweep_time_scan,
)
from coupled_engine.dynamics import simulate_stationary
from coupled_engine.ensemble import mean_cycle
from coupled_engine.model import TWO_PI, transform_coefficients
from coupled_engine.spectra import anticrossing_map, extract_splitting, map_peaks
from coupled_engine.thermo import cycle_thermo, decompose_arrays

LAM = TWO_PI * 40.0


def report(number: int, title: str, ok: bool, detail: str) -> None:
    line = f"[{'PASS' if ok else 'FAIL'}] {number:2d} {title}: {detail}"
    ACCEPTANCE_LINES.append(line)
    print(line)
    assert ok, line


def lossless(lam=LAM):
    return CoupledSystem.default(gamma1=0.0, gamma2=0.0, lam=lam)


def noise_free_run(system, b0, dt, n, d1=0.0):
    rng = np.random.default_rng(0)
    st = EnvelopeState(*b0)
    n2 = [abs(st.b2) ** 2]
    for _ in range(n):
        st = step(st, dt, d1, 0.0, system, 0.0, 0.0, rng)
        n2.append(abs(st.b2) ** 2)
    return np.arange(n + 1) * dt, np.array(n2)


def test_01_landau_zener():
    p20 = lz_diabatic_probability(LAM, TWO_PI * 20e3)
    # the faster rate quoted as 27 Hz/ms is the rate of the 15 ms protocol (400 Hz / 15 ms)
    p15 = lz_diabatic_probability(LAM, build_single_cylinder(sweep_time=15e-3).sweep_rate)
    formula_ok = abs(p20 - 0.04) <= 0.005 and abs(p15 - 0.09) <= 0.005
    sims = []
    s = lossless()
    for ts in (20e-3, 15e-3):
        p = build_single_cylinder(sweep_time=ts)
        u0 = mode_transform(p.delta_omega_i, s.lam)
        tr = simulate_trajectory(s, p, SimConfig(dt=2e-6, record_stride=10), initial_state=tuple(u0.upper))
        k = round(ts / tr.times[1])
        uf = mode_transform(p.delta_omega_f, s.lam, u0)
        sims.append((abs(uf.lower @ np.array([tr.b1[k], tr.b2[k]])) ** 2, lz_diabatic_probability(s.lam, p.sweep_rate)))
    sim_ok = all(abs(a - b) <= 0.02 for a, b in sims)
    report(1, "Landau-Zener", formula_ok and sim_ok,
           f"P(20 Hz/ms)={p20:.4f}, P(26.7 Hz/ms)={p15:.4f}; simulated/formula "
           + ", ".join(f"{a:.4f}/{b:.4f}" for a, b in sims))


def test_02_ideal_efficiency(default_ensemble):
    th = default_ensemble.thermo()
    rounded = float(f"{th.eta_ideal:.3g}")
    report(2, "eta_ideal", rounded == 5.00e-4, f"eta_ideal={th.eta_ideal:.5g} -> {rounded:.3g}")


def test_03_anticrossing():
    s = CoupledSystem.default()
    det = np.arange(-400.0, 401.0, 40.0)
    m = anticrossing_map(s, det, 40.0, resolution=1.0, seed=0)
    df = m.spectra[0].df
    split = extract_splitting(m)
    plus, minus = m.expected_loci(s.lam)
    u11, u21, u12, u22 = transform_coefficients(TWO_PI * det, s.lam)
    half_plus = (u12**2 * s.gamma1 + u22**2 * s.gamma2) / TWO_PI / 2
    half_minus = (u11**2 * s.gamma1 + u21**2 * s.gamma2) / TWO_PI / 2
    worst = 0.0
    loci_ok = det.size == 20 + 1
    for peaks, a, b, hp, hm in zip(map_peaks(m), plus, minus, half_plus, half_minus):
        if peaks.size != 2:
            loci_ok = False
            continue
        worst = max(worst, abs(peaks[1] - a), abs(peaks[0] - b))
        loci_ok &= abs(peaks[1] - a) < max(2 * df, hp) and abs(peaks[0] - b) < max(2 * df, hm)
    ok = abs(split - 80.0) <= 2 * df and loci_ok
    report(3, "anti-crossing", ok,
           f"splitting={split:.2f} Hz (2*Lambda=80, bin={df:.2f} Hz); worst locus offset {worst:.2f} Hz over {det.size}")


def test_04_thermal_statistics():
    s = CoupledSystem.default(lam=0.0)
    nbar = occupancy(295.0, s.omega_m)
    b1, _ = simulate_stationary(s, [0.0], [0.0], 2.0 / s.gamma1, 10_000, 295.0, 295.0, seed=1)
    n = (abs(b1[0]) ** 2)[::3]  # thinned to near-independent samples
    se = n.std(ddof=1) / math.sqrt(n.size)
    p = stats.kstest(n, "expon", args=(0, nbar)).pvalue
    ok = abs(n.mean() - nbar) < 3 * se and p > 0.01 and f"{nbar:.3g}" == "1.54e+07"
    report(4, "thermal statistics", ok,
           f"mean={n.mean():.4g} vs kT/hbar*omega_m={nbar:.4g} ({(n.mean() - nbar) / se:+.2f} SE); KS p={p:.3f}")


def test_05_resonant_exchange():
    s = lossless()
    t_swap = math.pi / (2 * s.lam)
    dt = 1e-5
    t, n2 = noise_free_run(s, (1.0 + 0j, 0j), dt, int(round(2 * t_swap / dt)))
    k = int(np.argmax(n2))
    at_swap = n2[int(round(t_swap / dt))]
    swap_ok = abs(at_swap - 1.0) < 0.01 and abs(t[k] - t_swap) <= 0.01 * t_swap
    delta = TWO_PI * 60.0
    expected = 2 * math.sqrt(delta**2 / 4 + s.lam**2) / TWO_PI
    t, n2 = noise_free_run(s, (1.0 + 0j, 0j), dt, 20_000, d1=delta)
    peaks, _ = signal.find_peaks(n2)
    freq = (len(peaks) - 1) / (t[peaks[-1]] - t[peaks[0]])
    rabi_ok = abs(freq - expected) <= 0.02 * expected
    report(5, "resonant exchange", swap_ok and rabi_ok,
           f"N2(t={t_swap * 1e3:.3f} ms)={at_swap:.6f}, maximum at {t[k] * 1e3:.3f} ms; "
           f"Rabi {freq:.2f} Hz vs {expected:.2f} Hz")


def test_06_conservation(default_ensemble, system):
    p = build_single_cylinder()
    res = run_ensemble(system, p, SimConfig(seed=3), 16, keep_trajectories=True)
    series = decompose_arrays(res.times, res.b1, res.b2, system, p)
    total = series.N1 + series.N2
    trace = float(np.max(np.abs(series.N_plus + series.N_minus - total) / total))
    tr = simulate_trajectory(lossless(), p, SimConfig(), initial_state=(0.6 + 0.2j, -0.3 + 0.7j))
    norm = abs(tr.b1) ** 2 + abs(tr.b2) ** 2
    drift = float(np.max(np.abs(norm - norm[0])) / norm[0] / tr.times[-1])
    th = default_ensemble.thermo()
    law = abs(th.first_law_error) / th.Q_41
    exact = cycle_thermo(mean_cycle(system, p, SimConfig()), p, system.omega_m)
    closure = abs(exact.closure_residual) / exact.Q_41
    ok = trace < 1e-12 and drift < 1e-9 and law < 0.01 and closure < 0.01
    report(6, "conservation", ok,
           f"trace {trace:.1e}, norm drift {drift:.1e}/s, first-law {law:.1e} of Q41 (n=250), "
           f"expected-cycle closure {closure:.1e} of Q41")


def test_07_correlation_dynamics(default_ensemble, system):
    res = default_ensemble
    t = res.times
    c = res.mean["N_corr_plus"]
    sweep = t <= res.protocol.sweep_time
    k = int(np.argmax(np.where(sweep, c, -np.inf)))
    y0, y1, y2 = c[k - 1], c[k], c[k + 1]
    shift = 0.5 * (y0 - y2) / (y0 - 2 * y1 + y2)
    t_peak = t[k] + shift * (t[1] - t[0])
    _, _, u12, u22 = transform_coefficients(0.0, system.lam)
    ok = abs(t_peak - 10e-3) <= 0.5e-3 and float(u12 * u22) == 0.5
    report(7, "correlation dynamics", ok, f"N_corr+ peak at {t_peak * 1e3:.2f} ms (sweep midpoint 10 ms); "
           f"u12*u22(0)={float(u12 * u22)!r}")


def test_08_sweep_time_trend(system):
    times = [15e-3, 24e-3, 33e-3, 42e-3, 51e-3, 60e-3]
    pts = sweep_time_scan(system, build_single_cylinder(), times, SimConfig(), 250)
    eta = [p.eta_N for p in pts]
    gap = [p.eta_N - p.eta_N_nocorr for p in pts]
    ok = all(a > b for a, b in zip(eta, eta[1:])) and all(g > 0 for g in gap)
    report(8, "sweep-time trend", ok, "eta_N " + ", ".join(f"{e:.3f}" for e in eta)
           + "; full - correlation-free " + ", ".join(f"{g:.3f}" for g in gap))


def test_09_straight_twin(system):
    offset = build_twin()
    res = run_ensemble(system, offset, SimConfig(), 250)
    wu, wl = res.per_trajectory["work_upper"], res.per_trajectory["work_lower"]
    se = lambda w: w.std(ddof=1) / math.sqrt(w.size)  # noqa: E731
    positive = wu.mean() > 3 * se(wu) and wl.mean() > 3 * se(wl)
    # symmetric window, equal dampings; short ramps keep loss during the sweeps negligible
    sym_sys = CoupledSystem.default(gamma2=system.gamma1)
    sym = build_twin(TWO_PI * 450, -TWO_PI * 450, sweep_time=2e-3)
    res_s = run_ensemble(sym_sys, sym, SimConfig(record_stride=1), 250)
    su, sl = res_s.per_trajectory["work_upper"], res_s.per_trajectory["work_lower"]
    combined = math.hypot(se(su), se(sl))
    equal = abs(su.mean() - sl.mean()) < 2 * combined
    report(9, "straight twin", positive and equal,
           f"offset window W+={wu.mean():.3g} J, W-={wl.mean():.3g} J; symmetric W+={su.mean():.4g}, "
           f"W-={sl.mean():.4g} J, |diff|={abs(su.mean() - sl.mean()) / combined:.2f} combined SE")


def test_10_absolute_work(system):
    p = build_single_cylinder(sweep_time=15e-3)
    res = run_ensemble(system, p, SimConfig(), 250, bath=BathSpec(t_hot=4.4e5))
    th = res.thermo()
    w, pw = th.W_total, th.power
    ok = 0.5 <= w / 3e-21 <= 2 and 0.5 <= pw / 3.75e-21 <= 2
    report(10, "absolute work (T_H=4.4e5 K)", ok,
           f"W={w:.3g} J (target 3e-21), P={pw:.3g} J/s (target 3.75e-21), period {th.period:.3f} s")


if __name__ == "__main__":
    sys.exit(pytest.main([__file__, "-q", "-s"]))
