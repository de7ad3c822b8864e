"""Rotating-frame Langevin dynamics of the two complex mode envelopes.

Equations of motion (frame rotating at the reference frequency)::

    db1/dt = -(i d1 + g1/2) b1 - i lam b2 + sqrt(g1 n1) xi1(t)
    db2/dt = -(i d2 + g2/2) b2 - i lam b1 + sqrt(g2 n2) xi2(t)

with complex white noise <xi(t) xi*(t')> = delta(t - t') and
n_i = k_B T_i / (hbar omega_m). The system is linear, so each step applies the
exact propagator of the coefficients frozen at the step midpoint together with
the exact Gaussian increment over the step.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy import linalg

from .model import CONSTANTS, BathSpec, CoupledSystem, thermal_occupancy
from .protocol import Protocol, frequency_at, hot_at, validate

NOISE_CHUNK = 2048


@dataclass(frozen=True)
class SimConfig:
    dt: float = 2e-5
    record_stride: int = 5
    seed: int = 0

    def __post_init__(self):
        if not self.dt > 0:
            raise ValueError("dt must be positive")
        if self.record_stride < 1:
            raise ValueError("record_stride must be >= 1")

    @property
    def record_interval(self) -> float:
        return self.dt * self.record_stride


@dataclass
class EnvelopeState:
    b1: complex
    b2: complex
    t: float = 0.0


@dataclass
class Trajectory:
    times: np.ndarray
    b1: np.ndarray
    b2: np.ndarray
    protocol: Protocol | None = None
    index: int = 0

    def __post_init__(self):
        if not (len(self.times) == len(self.b1) == len(self.b2)):
            raise ValueError("array lengths differ")

    def to_csv(self, path) -> None:
        n1, n2 = bare_populations(self)
        data = np.column_stack([self.times, self.b1.real, self.b1.imag, self.b2.real, self.b2.imag, n1, n2])
        np.savetxt(path, data, delimiter=",", fmt="%.9g", header="t,re_b1,im_b1,re_b2,im_b2,N1,N2", comments="")

    @classmethod
    def from_csv(cls, path, protocol: Protocol | None = None) -> Trajectory:
        d = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
        return cls(d[:, 0], d[:, 1] + 1j * d[:, 2], d[:, 3] + 1j * d[:, 4], protocol)


def bare_populations(trajectory: Trajectory):
    """Instantaneous phonon numbers ``(|b1|^2, |b2|^2)``."""
    return np.abs(trajectory.b1) ** 2, np.abs(trajectory.b2) ** 2


def rng_for(seed: int, index: int) -> np.random.Generator:
    """Independent stream for trajectory ``index`` under base ``seed``."""
    return np.random.default_rng(np.random.SeedSequence(entropy=seed, spawn_key=(index,)))


def drift_matrix(delta1, delta2, system: CoupledSystem):
    """Drift ``M`` with ``db/dt = M b``; broadcasts over detuning arrays."""
    d1 = np.asarray(delta1, dtype=float)
    d2 = np.asarray(delta2, dtype=float)
    shape = np.broadcast(d1, d2).shape
    m = np.zeros(shape + (2, 2), dtype=complex)
    m[..., 0, 0] = -1j * d1 - system.gamma1 / 2
    m[..., 1, 1] = -1j * d2 - system.gamma2 / 2
    m[..., 0, 1] = -1j * system.lam
    m[..., 1, 0] = -1j * system.lam
    return m


def propagator(dt, delta1, delta2, system: CoupledSystem, nbar1, nbar2):
    """Exact one-step map ``(Phi, Sigma)`` for frozen coefficients.

    ``Phi = exp(M dt)`` and ``Sigma = int_0^dt exp(M s) D exp(M^H s) ds`` with
    ``D = diag(g1 n1, g2 n2)``, computed with Van Loan's block exponential so
    that zero damping or zero temperature need no special casing.
    """
    dt = np.asarray(dt, dtype=float)
    m = drift_matrix(delta1, delta2, system)
    shape = np.broadcast(dt, m[..., 0, 0], np.asarray(nbar1), np.asarray(nbar2)).shape
    m = np.broadcast_to(m, shape + (2, 2))
    dt = np.broadcast_to(dt, shape)
    big = np.zeros(shape + (4, 4), dtype=complex)
    big[..., :2, :2] = -m
    big[..., 2:, 2:] = np.conj(np.swapaxes(m, -1, -2))
    big[..., 0, 2] = system.gamma1 * np.broadcast_to(nbar1, shape)
    big[..., 1, 3] = system.gamma2 * np.broadcast_to(nbar2, shape)
    f = linalg.expm(big * dt[..., None, None])
    phi = np.conj(np.swapaxes(f[..., 2:, 2:], -1, -2))
    sigma = phi @ f[..., :2, 2:]
    sigma = 0.5 * (sigma + np.conj(np.swapaxes(sigma, -1, -2)))
    return phi, sigma


def noise_factor(sigma):
    """Lower-triangular ``L`` with ``L L^H = Sigma`` for 2x2 PSD blocks."""
    s00 = np.maximum(sigma[..., 0, 0].real, 0.0)
    l00 = np.sqrt(s00)
    with np.errstate(divide="ignore", invalid="ignore"):
        l10 = np.where(l00 > 0, sigma[..., 1, 0] / np.where(l00 > 0, l00, 1.0), 0.0)
    l11 = np.sqrt(np.maximum(sigma[..., 1, 1].real - np.abs(l10) ** 2, 0.0))
    out = np.zeros(sigma.shape, dtype=complex)
    out[..., 0, 0] = l00
    out[..., 1, 0] = l10
    out[..., 1, 1] = l11
    return out


def stationary_covariance(delta1, delta2, system: CoupledSystem, nbar1, nbar2):
    """Steady-state ``<b b^H>`` for frozen coefficients (needs damping)."""
    m = drift_matrix(delta1, delta2, system)
    d = np.diag([system.gamma1 * nbar1, system.gamma2 * nbar2]).astype(complex)
    if system.gamma1 > 0 and system.gamma2 > 0:
        c = linalg.solve_continuous_lyapunov(m, -d)
        return 0.5 * (c + c.conj().T)
    return np.diag([nbar1, nbar2]).astype(complex)


def step(state: EnvelopeState, dt, delta1, delta2, system: CoupledSystem, T1, T2, rng, omega_m=None):
    """Advance one frozen-coefficient step of length ``dt``."""
    omega_m = system.omega_m if omega_m is None else omega_m
    n1 = thermal_occupancy(T1, omega_m)
    n2 = thermal_occupancy(T2, omega_m)
    phi, sigma = propagator(dt, delta1, delta2, system, n1, n2)
    chol = noise_factor(sigma)
    z = rng.standard_normal(4) / math.sqrt(2.0)
    w = np.array([z[0] + 1j * z[1], z[2] + 1j * z[3]])
    b = phi @ np.array([state.b1, state.b2]) + chol @ w
    if not np.all(np.isfinite(b)):
        raise FloatingPointError("numerical blow-up")
    return EnvelopeState(complex(b[0]), complex(b[1]), state.t + dt)


def check_dt(config: SimConfig, system: CoupledSystem, protocol: Protocol) -> None:
    dmax = max(
        max(abs(s.omega1_start - s.omega2_start), abs(s.omega1_end - s.omega2_end)) for s in protocol.segments
    )
    rate = max(system.lam, dmax, system.gamma1, system.gamma2)
    if config.dt * 50 * rate / (2 * math.pi) > 1 + 1e-9:
        raise ValueError(f"dt={config.dt} too coarse: need dt <= {2 * math.pi / (50 * rate):.3g} s")


@dataclass
class Schedule:
    """Precomputed per-update maps for one cycle.

    Each update is one exact step; ``record`` marks updates after which a
    sample is stored. Within constant-coefficient record intervals the
    ``record_stride`` micro-steps are fused into one exact step.
    """

    phi: np.ndarray
    chol: np.ndarray
    sigma: np.ndarray
    record: np.ndarray
    n_records: int
    h: float
    cov_start: np.ndarray = field(default=None)


def build_schedule(system: CoupledSystem, protocol: Protocol, config: SimConfig, bath: BathSpec) -> Schedule:
    problems = validate(protocol)
    if problems:
        raise ValueError("invalid protocol: " + "; ".join(problems))
    check_dt(config, system, protocol)
    n_steps = int(round(protocol.period / config.dt))
    if not math.isclose(n_steps * config.dt, protocol.period, rel_tol=1e-9):
        raise ValueError("period is not an integer number of steps")
    s = config.record_stride
    if n_steps % s:
        raise ValueError("period is not an integer number of record intervals")

    t_mid = (np.arange(n_steps) + 0.5) * config.dt
    w1, w2 = frequency_at(protocol, t_mid)
    hot = hot_at(protocol, t_mid).astype(float)
    coeff = np.stack([w1, w2, hot], axis=1).reshape(-1, s, 3)
    fused = np.all(coeff == coeff[:, :1, :], axis=(1, 2))

    rows, record = [], []
    for j in range(coeff.shape[0]):
        if fused[j]:
            rows.append((config.dt * s, *coeff[j, 0]))
            record.append(True)
        else:
            for k in range(s):
                rows.append((config.dt, *coeff[j, k]))
                record.append(k == s - 1)
    rows = np.array(rows)
    uniq, inverse = np.unique(rows, axis=0, return_inverse=True)
    inverse = inverse.ravel()
    n_cold = thermal_occupancy(bath.t_cold, system.omega_m)
    n_hot = thermal_occupancy(bath.t_hot, system.omega_m)
    nbar1 = np.where(uniq[:, 3] > 0, n_hot, n_cold)
    phi, sigma = propagator(uniq[:, 0], uniq[:, 1], uniq[:, 2], system, nbar1, n_cold)
    chol = noise_factor(sigma)

    last = protocol.segments[-1]
    n1_start = n_hot if last.hot_bath_on_mode1 else n_cold
    cov0 = stationary_covariance(last.omega1_end, last.omega2_end, system, n1_start, n_cold)
    return Schedule(
        phi[inverse], chol[inverse], sigma[inverse], np.array(record), n_steps // s, config.record_interval, cov0
    )


def _draw_initial(rng, cov):
    z = rng.standard_normal(4) / math.sqrt(2.0)
    w = np.array([z[0] + 1j * z[1], z[2] + 1j * z[3]])
    return noise_factor(cov) @ w


def run_batch(schedule: Schedule, rngs, b0: np.ndarray, n_cycles: int, warmup_cycles: int = 0):
    """Integrate a batch of trajectories sharing one schedule.

    Each trajectory draws its noise only from its own generator, and all
    updates are elementwise, so a trajectory's result does not depend on
    which other trajectories share the batch.
    """
    n = b0.shape[0]
    b1 = b0[:, 0].astype(complex).copy()
    b2 = b0[:, 1].astype(complex).copy()
    p = schedule.phi
    c = schedule.chol
    p00, p01, p10, p11 = (p[:, i, j].tolist() for i, j in ((0, 0), (0, 1), (1, 0), (1, 1)))
    l00, l10, l11 = c[:, 0, 0].tolist(), c[:, 1, 0].tolist(), c[:, 1, 1].tolist()
    rec_flags = schedule.record.tolist()
    n_upd = len(rec_flags)
    total = (n_cycles + warmup_cycles) * n_upd
    n_rec = n_cycles * schedule.n_records + 1
    out1 = np.empty((n, n_rec), dtype=complex)
    out2 = np.empty((n, n_rec), dtype=complex)
    r = 0
    if warmup_cycles == 0:
        out1[:, 0], out2[:, 0] = b1, b2
        r = 1
    warm_end = warmup_cycles * n_upd
    g = 0
    while g < total:
        m = min(NOISE_CHUNK, total - g)
        z = np.stack([gen.standard_normal((m, 4)) for gen in rngs]) / math.sqrt(2.0)
        w1 = z[:, :, 0] + 1j * z[:, :, 1]
        w2 = z[:, :, 2] + 1j * z[:, :, 3]
        for k in range(m):
            u = (g + k) % n_upd
            x1 = w1[:, k]
            x2 = w2[:, k]
            nb1 = p00[u] * b1 + p01[u] * b2 + l00[u] * x1
            b2 = p10[u] * b1 + p11[u] * b2 + l10[u] * x1 + l11[u] * x2
            b1 = nb1
            gg = g + k + 1
            if gg == warm_end:
                out1[:, 0], out2[:, 0] = b1, b2
                r = 1
            elif gg > warm_end and rec_flags[u]:
                out1[:, r], out2[:, r] = b1, b2
                r += 1
        g += m
        if not (np.all(np.isfinite(b1)) and np.all(np.isfinite(b2))):
            raise FloatingPointError("numerical blow-up")
    return out1, out2


def simulate_batch(
    system: CoupledSystem,
    protocol: Protocol,
    config: SimConfig,
    indices,
    *,
    bath: BathSpec = BathSpec(),
    n_cycles: int = 1,
    warmup_cycles: int = 0,
    initial_state=None,
    schedule: Schedule | None = None,
):
    """Trajectories for the given stream indices; returns ``(times, b1, b2)``."""
    if n_cycles < 1:
        raise ValueError("n_cycles must be >= 1")
    schedule = schedule or build_schedule(system, protocol, config, bath)
    rngs = [rng_for(config.seed, int(i)) for i in indices]
    if initial_state is None:
        b0 = np.array([_draw_initial(g, schedule.cov_start) for g in rngs]).reshape(len(rngs), 2)
    else:
        b0 = np.broadcast_to(np.asarray(initial_state, dtype=complex), (len(rngs), 2))
    b1, b2 = run_batch(schedule, rngs, b0, n_cycles, warmup_cycles)
    times = np.arange(b1.shape[1]) * schedule.h
    return times, b1, b2


def simulate_trajectory(
    system: CoupledSystem,
    protocol: Protocol,
    config: SimConfig,
    n_cycles: int = 1,
    *,
    bath: BathSpec = BathSpec(),
    initial_state=None,
    index: int = 0,
    warmup_cycles: int = 0,
) -> Trajectory:
    """One stochastic trajectory over ``n_cycles`` periods.

    Unless ``initial_state`` is given, the start is drawn from the stationary
    distribution of the status-1 configuration (hot membrane 1, cold
    membrane 2, initial detuning).
    """
    times, b1, b2 = simulate_batch(
        system, protocol, config, [index], bath=bath, n_cycles=n_cycles,
        warmup_cycles=warmup_cycles, initial_state=initial_state,
    )
    return Trajectory(times, b1[0], b2[0], protocol, index)


def covariance_evolution(schedule: Schedule, n_cycles: int = 1, cov0=None, warmup_cycles: int = 0):
    """Deterministic second moments ``<b b^H>`` on the record grid."""
    cov = np.array(schedule.cov_start if cov0 is None else cov0, dtype=complex)
    n_upd = len(schedule.record)
    out = [cov] if warmup_cycles == 0 else []
    for g in range((n_cycles + warmup_cycles) * n_upd):
        u = g % n_upd
        p = schedule.phi[u]
        cov = p @ cov @ p.conj().T + schedule.sigma[u]
        if g + 1 == warmup_cycles * n_upd:
            out.append(cov)
        elif g + 1 > warmup_cycles * n_upd and schedule.record[u]:
            out.append(cov)
    return np.array(out)


def constant_schedule(system: CoupledSystem, delta1, delta2, h: float, nbar1, nbar2) -> tuple[np.ndarray, np.ndarray]:
    """Exact sampling maps for time-independent coefficients, one per detuning."""
    phi, sigma = propagator(h, delta1, delta2, system, nbar1, nbar2)
    return phi, noise_factor(sigma)


def simulate_stationary(system: CoupledSystem, delta1, delta2, h: float, n_samples: int, T1, T2, seed: int = 0):
    """Stationary records sampled every ``h`` for a set of fixed detunings.

    Returns ``(b1, b2)`` of shape ``(len(delta1), n_samples)``; column ``j``
    uses stream ``j`` of ``seed``.
    """
    d1 = np.atleast_1d(np.asarray(delta1, dtype=float))
    d2 = np.broadcast_to(np.asarray(delta2, dtype=float), d1.shape)
    n1 = thermal_occupancy(T1, system.omega_m)
    n2 = thermal_occupancy(T2, system.omega_m)
    phi, chol = constant_schedule(system, d1, d2, h, n1, n2)
    rngs = [rng_for(seed, j) for j in range(d1.size)]
    b = np.array([_draw_initial(g, stationary_covariance(a, c, system, n1, n2)) for g, a, c in zip(rngs, d1, d2)])
    out1 = np.empty((d1.size, n_samples), dtype=complex)
    out2 = np.empty((d1.size, n_samples), dtype=complex)
    b1, b2 = b[:, 0], b[:, 1]
    p00, p01, p10, p11 = phi[:, 0, 0], phi[:, 0, 1], phi[:, 1, 0], phi[:, 1, 1]
    l00, l10, l11 = chol[:, 0, 0], chol[:, 1, 0], chol[:, 1, 1]
    g = 0
    while g < n_samples:
        m = min(NOISE_CHUNK, n_samples - g)
        z = np.stack([gen.standard_normal((m, 4)) for gen in rngs]) / math.sqrt(2.0)
        x1 = z[:, :, 0] + 1j * z[:, :, 1]
        x2 = z[:, :, 2] + 1j * z[:, :, 3]
        for k in range(m):
            out1[:, g + k], out2[:, g + k] = b1, b2
            nb1 = p00 * b1 + p01 * b2 + l00 * x1[:, k]
            b2 = p10 * b1 + p11 * b2 + l10 * x1[:, k] + l11 * x2[:, k]
            b1 = nb1
        g += m
    return out1, out2
