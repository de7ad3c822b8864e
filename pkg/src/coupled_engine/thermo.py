"""Normal-mode populations and Otto-cycle work/heat/efficiency accounting.

Energies of a normal mode are counted in the carrier basis,
``E = hbar (omega_m + omega) N``, where ``omega`` is the branch offset in the
rotating frame. Work over a frequency ramp is ``hbar * int N d(omega)`` and is
the same in either basis; heat on a constant-frequency stroke is
``hbar (omega_m + omega) dN``.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np
from scipy import integrate, stats

from .model import CONSTANTS, CoupledSystem, normal_mode_frequencies, transform_coefficients, twin_mode_frequencies
from .protocol import ADIABATIC, ISOCHORIC, STROKES, TWIN, Protocol, detuning_at, grid_index

STATUS_WINDOW = 1e-3

UPPER = "upper"
LOWER = "lower"


def _trapz(y, x):
    return integrate.trapezoid(y, x, axis=-1)


@dataclass
class NormalModeSeries:
    """Normal-mode populations on a time grid.

    Population arrays may carry leading batch axes (one row per trajectory);
    the last axis is time. ``u11, u21, u12, u22`` are the transform
    coefficients along the detuning path.
    """

    times: np.ndarray
    N1: np.ndarray
    N2: np.ndarray
    N_plus: np.ndarray
    N_minus: np.ndarray
    N1_plus: np.ndarray
    N2_plus: np.ndarray
    N_corr_plus: np.ndarray
    N1_minus: np.ndarray
    N2_minus: np.ndarray
    N_corr_minus: np.ndarray
    omega_plus: np.ndarray
    omega_minus: np.ndarray
    u11: np.ndarray
    u21: np.ndarray
    u12: np.ndarray
    u22: np.ndarray

    def branch(self, which: str = UPPER, correlation: bool = True):
        """``(N, omega)`` for a branch, optionally without the cross term."""
        if which == UPPER:
            n = self.N_plus if correlation else self.N1_plus + self.N2_plus
            return n, self.omega_plus
        if which == LOWER:
            n = self.N_minus if correlation else self.N1_minus + self.N2_minus
            return n, self.omega_minus
        raise ValueError(f"unknown branch {which!r}")


def branch_frequencies(protocol: Protocol, delta_omega, lam):
    if protocol.kind == TWIN:
        return twin_mode_frequencies(delta_omega, lam)
    return normal_mode_frequencies(delta_omega, lam)


def decompose_arrays(times, b1, b2, system: CoupledSystem, protocol: Protocol) -> NormalModeSeries:
    """Normal-mode decomposition of envelope arrays (batch axes allowed)."""
    cross = 2.0 * np.real(np.conj(b1) * b2)
    return decompose_moments(times, np.abs(b1) ** 2, np.abs(b2) ** 2, cross, system, protocol)


def decompose_moments(times, n1, n2, cross, system: CoupledSystem, protocol: Protocol) -> NormalModeSeries:
    """Decomposition from bare populations and the cross term ``2 Re(b1* b2)``.

    Linear in its inputs, so it applies equally to single samples and to
    ensemble second moments.
    """
    times = np.asarray(times, dtype=float)
    delta = detuning_at(protocol, times)
    u11, u21, u12, u22 = transform_coefficients(delta, system.lam)
    wp, wm = branch_frequencies(protocol, delta, system.lam)
    n1p, n2p, ncp = u12**2 * n1, u22**2 * n2, u12 * u22 * cross
    n1m, n2m, ncm = u11**2 * n1, u21**2 * n2, u11 * u21 * cross
    n_plus = n1p + n2p + ncp
    n_minus = n1m + n2m + ncm
    return NormalModeSeries(
        times, n1, n2, n_plus, n_minus, n1p, n2p, ncp, n1m, n2m, ncm, wp, wm, u11, u21, u12, u22
    )


def decompose(trajectory, system: CoupledSystem, protocol: Protocol | None = None) -> NormalModeSeries:
    protocol = protocol or trajectory.protocol
    return decompose_arrays(trajectory.times, trajectory.b1, trajectory.b2, system, protocol)


def _slice(series: NormalModeSeries, protocol: Protocol, label: str) -> slice:
    seg = protocol.stroke(label)
    h = series.times[1] - series.times[0]
    t0 = series.times[0]
    i0 = grid_index(seg.t_start, h)
    i1 = grid_index(seg.t_end, h)
    if abs(t0 / protocol.period - round(t0 / protocol.period)) > 1e-9:
        raise ValueError("series must start at a cycle boundary")
    if i1 >= len(series.times):
        raise ValueError("series does not cover the full stroke")
    return slice(i0, i1 + 1)


def work_adiabatic(
    series: NormalModeSeries,
    protocol: Protocol,
    stroke: str,
    *,
    branch: str = UPPER,
    correlation: bool = True,
    hbar: float = CONSTANTS.hbar,
):
    """Work done on the mode, ``hbar * int N d(omega)`` along the ramp (J).

    Negative when the mode delivers work (expansion at positive population).
    """
    if stroke not in ADIABATIC:
        raise ValueError("not an adiabatic stroke")
    seg = protocol.stroke(stroke)
    if seg.delta_start == seg.delta_end:
        raise ValueError("not an adiabatic stroke")
    sl = _slice(series, protocol, stroke)
    n, w = series.branch(branch, correlation)
    return hbar * _trapz(n[..., sl], w[sl])


def heat_isochoric(
    series: NormalModeSeries,
    protocol: Protocol,
    stroke: str,
    omega_m: float,
    *,
    branch: str = UPPER,
    correlation: bool = True,
    hbar: float = CONSTANTS.hbar,
):
    """Heat absorbed by the mode on a constant-frequency stroke (J).

    The series is taken as one cycle of a periodic steady state, so the
    end of stroke 4->1 (status 1) is read at the cycle start: the heat
    then refers to the same status-1 state that drives the expansion.
    """
    if stroke not in ISOCHORIC:
        raise ValueError("stroke with frequency change is not isochoric")
    seg = protocol.stroke(stroke)
    if seg.delta_start != seg.delta_end:
        raise ValueError("stroke with frequency change is not isochoric")
    sl = _slice(series, protocol, stroke)
    n, w = series.branch(branch, correlation)
    omega = w[sl.start]
    end = 0 if stroke == "4->1" else sl.stop - 1
    return hbar * (omega_m + omega) * (n[..., end] - n[..., sl.start])


def _leak_heat(series, protocol, omega_m, branch, correlation, hbar):
    """Heat exchanged while the frequency is ramped (damping and branch leakage)."""
    total = 0.0
    n, w = series.branch(branch, correlation)
    for label in ADIABATIC:
        sl = _slice(series, protocol, label)
        ww = omega_m + w[sl]
        nn = n[..., sl]
        total = total + hbar * np.sum(0.5 * (ww[1:] + ww[:-1]) * np.diff(nn, axis=-1), axis=-1)
    return total


def status_population(series: NormalModeSeries, protocol: Protocol, status: int, *, branch=UPPER, correlation=True,
                      window: float = STATUS_WINDOW):
    """Mean population over the ``window`` preceding a status point (1..4)."""
    ends = {1: protocol.period, 2: protocol.stroke("1->2").t_end, 3: protocol.stroke("2->3").t_end,
            4: protocol.stroke("3->4").t_end}
    h = series.times[1] - series.times[0]
    i1 = grid_index(ends[status], h)
    i0 = max(i1 - max(int(round(window / h)), 0), 0)
    n, _ = series.branch(branch, correlation)
    return np.mean(n[..., i0:i1 + 1], axis=-1)


@dataclass
class CycleThermo:
    """Thermodynamics of one mean cycle on one branch.

    ``W_12`` and ``W_34`` are signed works done *on* the mode; ``W_total``
    is the net work *delivered* by the engine (positive for an engine).
    ``Q_leak`` is the heat exchanged while the frequency is ramped and
    ``first_law_error = W_12 + W_34 + Q_23 + Q_41 + Q_leak``.
    ``closure_residual`` is the change of ``hbar (omega_m + omega) N``
    between the two ends of the recorded cycle, i.e. its departure from
    periodicity.
    """

    branch: str
    correlation: bool
    W_12: float
    Q_23: float
    W_34: float
    Q_41: float
    Q_leak: float
    W_total: float
    eta: float
    eta_ideal: float
    eta_N: float
    omega_i: float
    omega_f: float
    omega_m: float
    n_i: float
    n_f: float
    W_ideal: float
    closure_residual: float
    first_law_error: float
    period: float
    diagram: dict = field(default_factory=dict, repr=False)

    @property
    def delivers_work(self) -> bool:
        return self.W_total > 0

    @property
    def work_magnitude(self) -> float:
        return abs(self.W_total)

    @property
    def power(self) -> float:
        return self.W_total / self.period

    def summary(self) -> dict:
        d = {k: getattr(self, k) for k in (
            "branch", "correlation", "W_12", "Q_23", "W_34", "Q_41", "Q_leak", "W_total", "eta", "eta_ideal",
            "eta_N", "omega_i", "omega_f", "omega_m", "n_i", "n_f", "W_ideal", "closure_residual",
            "first_law_error", "period")}
        d["delivers_work"] = self.delivers_work
        d["power"] = self.power
        return {k: (float(v) if isinstance(v, (np.floating, float)) else v) for k, v in d.items()}

    def to_json(self) -> str:
        return json.dumps(self.summary(), indent=2)

    def diagram_rows(self):
        """Rows ``(omega_Hz, N, stroke_label)`` of the cycle diagram."""
        rows = []
        for label in STROKES:
            w, n = self.diagram[label]
            rows.extend(zip(w / (2 * np.pi), n, [label] * len(w)))
        return rows

    def write_diagram_csv(self, path) -> None:
        name = "plus" if self.branch == UPPER else "minus"
        with open(path, "w") as fh:
            fh.write(f"omega_{name}_Hz,N_{name},stroke_label\n")
            for w, n, label in self.diagram_rows():
                fh.write(f"{w:.9g},{n:.9g},{label}\n")


def ideal_efficiency(omega_i: float, omega_f: float, omega_m: float) -> float:
    """Otto efficiency for a mode ramped between ``omega_m + omega_i`` and ``omega_m + omega_f``."""
    hi, lo = max(omega_i, omega_f), min(omega_i, omega_f)
    return (hi - lo) / (omega_m + hi)


def cycle_thermo(
    series: NormalModeSeries,
    protocol: Protocol,
    omega_m: float,
    *,
    branch: str = UPPER,
    correlation: bool = True,
    strict: bool = True,
    hbar: float = CONSTANTS.hbar,
) -> CycleThermo:
    """Full cycle accounting on an ensemble-mean series covering one period."""
    if np.ndim(series.N_plus) != 1:
        raise ValueError("cycle_thermo expects a single (ensemble-mean) series")
    kw = dict(branch=branch, correlation=correlation, hbar=hbar)
    w12 = float(work_adiabatic(series, protocol, "1->2", **kw))
    w34 = float(work_adiabatic(series, protocol, "3->4", **kw))
    q23 = float(heat_isochoric(series, protocol, "2->3", omega_m, **kw))
    q41 = float(heat_isochoric(series, protocol, "4->1", omega_m, **kw))
    q_leak = float(_leak_heat(series, protocol, omega_m, branch, correlation, hbar))
    if strict and not q41 > 0:
        raise ValueError("no heat intake; not operating as engine")

    n, w = series.branch(branch, correlation)
    s12 = _slice(series, protocol, "1->2")
    omega_i, omega_f = float(w[s12.start]), float(w[s12.stop - 1])
    end = _slice(series, protocol, "4->1").stop - 1
    closure = hbar * ((omega_m + w[end]) * n[end] - (omega_m + w[0]) * n[0])

    w_total = -(w12 + w34)
    eta_ideal = ideal_efficiency(omega_i, omega_f, omega_m)
    eta = w_total / q41 if q41 > 0 else float("nan")
    eta_n = eta / eta_ideal if q41 > 0 and eta_ideal > 0 else float("nan")
    n_i = float(status_population(series, protocol, 1, branch=branch, correlation=correlation))
    n_f = float(status_population(series, protocol, 3, branch=branch, correlation=correlation))
    diagram = {}
    for label in STROKES:
        sl = _slice(series, protocol, label)
        diagram[label] = (np.array(w[sl]), np.array(n[sl]))
    return CycleThermo(
        branch=branch, correlation=correlation, W_12=w12, Q_23=q23, W_34=w34, Q_41=q41, Q_leak=q_leak,
        W_total=w_total, eta=eta, eta_ideal=eta_ideal, eta_N=eta_n, omega_i=omega_i, omega_f=omega_f,
        omega_m=omega_m, n_i=n_i, n_f=n_f, W_ideal=hbar * (omega_i - omega_f) * (n_f - n_i),
        closure_residual=float(closure), first_law_error=float(w12 + w34 + q23 + q41 + q_leak),
        period=protocol.period, diagram=diagram,
    )


def twin_cycle_thermo(series: NormalModeSeries, protocol: Protocol, omega_m: float, *, correlation: bool = True):
    """Per-branch accounting for the straight-twin engine: ``(upper, lower)``.

    The lower branch takes in little heat on stroke 4->1 (its hot input comes
    through branch leakage), so its efficiency fields are NaN rather than an
    error when that heat is not positive.
    """
    if protocol.kind != TWIN:
        raise ValueError("twin_cycle_thermo needs a straight-twin protocol")
    upper = cycle_thermo(series, protocol, omega_m, branch=UPPER, correlation=correlation)
    lower = cycle_thermo(series, protocol, omega_m, branch=LOWER, correlation=correlation, strict=False)
    return upper, lower


def per_trajectory_work(series: NormalModeSeries, protocol: Protocol, *, branch=UPPER, correlation=True,
                        hbar: float = CONSTANTS.hbar):
    """Net delivered work of each trajectory in a batched series (J)."""
    kw = dict(branch=branch, correlation=correlation, hbar=hbar)
    return -(work_adiabatic(series, protocol, "1->2", **kw) + work_adiabatic(series, protocol, "3->4", **kw))


@dataclass
class WorkDistribution:
    n: int
    mean: float
    rate: float
    ks_statistic: float
    p_value: float
    counts: np.ndarray
    edges: np.ndarray

    def rejects_exponential(self, alpha: float = 0.01) -> bool:
        return self.p_value < alpha


def work_distribution(works, bins: int = 20) -> WorkDistribution:
    """Maximum-likelihood exponential fit and KS test of per-cycle works."""
    works = np.asarray(works, dtype=float)
    if works.size < 100:
        raise ValueError("insufficient samples")
    mean = float(np.mean(works))
    if not mean > 0:
        return WorkDistribution(works.size, mean, float("nan"), 1.0, 0.0, *np.histogram(works, bins))
    res = stats.kstest(works, "expon", args=(0.0, mean))
    counts, edges = np.histogram(works, bins)
    return WorkDistribution(works.size, mean, 1.0 / mean, float(res.statistic), float(res.pvalue), counts, edges)
