"""Otto-cycle schedules: piecewise-linear frequency ramps and hot-bath switching."""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass

import numpy as np

from .model import TWO_PI, BathSpec

STROKES = ("1->2", "2->3", "3->4", "4->1")
ADIABATIC = ("1->2", "3->4")
ISOCHORIC = ("2->3", "4->1")

SINGLE = "single-cylinder"
TWIN = "straight-twin"

DEFAULT_THERM_COLD = 0.400
DEFAULT_THERM_HOT = 0.365


@dataclass(frozen=True)
class RampSegment:
    """One stroke. Frequencies are offsets (rad/s) from the reference frame."""

    t_start: float
    t_end: float
    omega1_start: float
    omega1_end: float
    omega2_start: float
    omega2_end: float
    hot_bath_on_mode1: bool
    label: str

    @property
    def duration(self) -> float:
        return self.t_end - self.t_start

    def frequencies(self, t):
        x = (np.asarray(t, dtype=float) - self.t_start) / self.duration
        w1 = self.omega1_start + (self.omega1_end - self.omega1_start) * x
        w2 = self.omega2_start + (self.omega2_end - self.omega2_start) * x
        return w1, w2

    @property
    def delta_start(self) -> float:
        return self.omega1_start - self.omega2_start

    @property
    def delta_end(self) -> float:
        return self.omega1_end - self.omega2_end


@dataclass(frozen=True)
class Protocol:
    segments: tuple[RampSegment, ...]
    period: float
    kind: str = SINGLE

    def stroke(self, label: str) -> RampSegment:
        for seg in self.segments:
            if seg.label == label:
                return seg
        raise KeyError(label)

    @property
    def sweep_time(self) -> float:
        return self.stroke("1->2").duration

    @property
    def sweep_rate(self) -> float:
        """|alpha|: magnitude of d(delta_omega)/dt during stroke 1->2 (rad/s^2)."""
        seg = self.stroke("1->2")
        return abs(seg.delta_end - seg.delta_start) / seg.duration

    @property
    def delta_omega_i(self) -> float:
        return self.stroke("1->2").delta_start

    @property
    def delta_omega_f(self) -> float:
        return self.stroke("1->2").delta_end

    def to_dict(self) -> dict:
        return {
            "kind": self.kind,
            "period": self.period,
            "segments": [asdict(s) for s in self.segments],
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2)

    @classmethod
    def from_dict(cls, data: dict) -> Protocol:
        segs = tuple(RampSegment(**s) for s in data["segments"])
        return cls(segs, float(data["period"]), data.get("kind", SINGLE))

    @classmethod
    def from_json(cls, text: str) -> Protocol:
        return cls.from_dict(json.loads(text))


def _check_durations(sweep_time, therm_cold, therm_hot):
    for name, v in (("sweep_time", sweep_time), ("therm_cold", therm_cold), ("therm_hot", therm_hot)):
        if not v > 0:
            raise ValueError(f"{name} must be positive, got {v}")


def _otto(w1_i, w1_f, w2_i, w2_f, sweep_time, therm_cold, therm_hot, kind):
    t1 = sweep_time
    t2 = t1 + therm_cold
    t3 = t2 + sweep_time
    t4 = t3 + therm_hot
    segs = (
        RampSegment(0.0, t1, w1_i, w1_f, w2_i, w2_f, False, "1->2"),
        RampSegment(t1, t2, w1_f, w1_f, w2_f, w2_f, False, "2->3"),
        RampSegment(t2, t3, w1_f, w1_i, w2_f, w2_i, False, "3->4"),
        RampSegment(t3, t4, w1_i, w1_i, w2_i, w2_i, True, "4->1"),
    )
    return Protocol(segs, t4, kind)


def build_single_cylinder(
    delta_omega_i: float = TWO_PI * 200.0,
    delta_omega_f: float = -TWO_PI * 200.0,
    sweep_time: float = 20e-3,
    therm_cold: float = DEFAULT_THERM_COLD,
    therm_hot: float = DEFAULT_THERM_HOT,
) -> Protocol:
    """Otto cycle on the upper branch: only membrane 1 is tuned, mode 2 is the frame."""
    _check_durations(sweep_time, therm_cold, therm_hot)
    if not delta_omega_i > delta_omega_f:
        raise ValueError("expansion requires delta_omega_i > delta_omega_f")
    return _otto(delta_omega_i, delta_omega_f, 0.0, 0.0, sweep_time, therm_cold, therm_hot, SINGLE)


def build_twin(
    delta_omega_i: float = TWO_PI * 720.0,
    delta_omega_f: float = -TWO_PI * 180.0,
    sweep_time: float = 20e-3,
    therm_cold: float = DEFAULT_THERM_COLD,
    therm_hot: float = DEFAULT_THERM_HOT,
) -> Protocol:
    """Straight-twin cycle: both membranes tuned symmetrically about their mean."""
    _check_durations(sweep_time, therm_cold, therm_hot)
    if not delta_omega_i > delta_omega_f:
        raise ValueError("expansion requires delta_omega_i > delta_omega_f")
    return _otto(
        delta_omega_i / 2, delta_omega_f / 2, -delta_omega_i / 2, -delta_omega_f / 2,
        sweep_time, therm_cold, therm_hot, TWIN,
    )


def with_sweep_time(protocol: Protocol, sweep_time: float) -> Protocol:
    """Same cycle with a different ramp duration (thermalization times kept)."""
    builder = build_twin if protocol.kind == TWIN else build_single_cylinder
    return builder(
        protocol.delta_omega_i,
        protocol.delta_omega_f,
        sweep_time,
        protocol.stroke("2->3").duration,
        protocol.stroke("4->1").duration,
    )


def _locate(protocol: Protocol, t):
    """Segment index for each time, with times folded into [0, period)."""
    t = np.mod(np.asarray(t, dtype=float), protocol.period)
    ends = np.array([s.t_end for s in protocol.segments])
    idx = np.searchsorted(ends, t, side="right")
    return t, np.minimum(idx, len(protocol.segments) - 1)


def frequency_at(protocol: Protocol, t):
    """Bare-mode frequency offsets ``(omega1, omega2)`` at time(s) ``t``."""
    tf, idx = _locate(protocol, t)
    w1 = np.empty_like(tf)
    w2 = np.empty_like(tf)
    for k, seg in enumerate(protocol.segments):
        m = idx == k
        if np.any(m):
            w1[m], w2[m] = seg.frequencies(tf[m])
    if np.ndim(t) == 0:
        return float(w1), float(w2)
    return w1, w2


def detuning_at(protocol: Protocol, t):
    w1, w2 = frequency_at(protocol, t)
    return np.asarray(w1) - np.asarray(w2) if np.ndim(t) else w1 - w2


def hot_at(protocol: Protocol, t):
    """Boolean mask: is the hot bath on mode 1 at time(s) ``t``."""
    _, idx = _locate(protocol, t)
    flags = np.array([s.hot_bath_on_mode1 for s in protocol.segments])
    out = flags[idx]
    return bool(out) if np.ndim(t) == 0 else out


def bath_at(protocol: Protocol, t, bath: BathSpec = BathSpec()):
    """Bath temperatures ``(T1, T2)`` seen by the two membranes."""
    hot = hot_at(protocol, t)
    t1 = np.where(hot, bath.t_hot, bath.t_cold)
    t2 = np.full_like(t1, bath.t_cold, dtype=float)
    if np.ndim(t) == 0:
        return float(t1), float(t2)
    return t1, t2


def validate(protocol: Protocol, tol: float = 1e-9) -> list[str]:
    """List of violations; empty when the protocol is a well-formed closed cycle."""
    problems = []
    segs = protocol.segments
    if not segs:
        return ["no segments"]
    if [s.label for s in segs] != list(STROKES):
        problems.append("strokes must be exactly 1->2, 2->3, 3->4, 4->1 in order")
    if any(not s.duration > 0 for s in segs):
        problems.append("non-positive segment duration")
    if abs(segs[0].t_start) > tol * protocol.period:
        problems.append("cycle does not start at t=0")
    if abs(segs[-1].t_end - protocol.period) > tol * protocol.period:
        problems.append("last segment does not end at the period")
    for a, b in zip(segs[:-1], segs[1:]):
        if abs(a.t_end - b.t_start) > tol * protocol.period:
            problems.append("segments not contiguous")
            break
    for a, b in zip(segs[:-1], segs[1:]):
        if abs(a.omega1_end - b.omega1_start) > tol or abs(a.omega2_end - b.omega2_start) > tol:
            problems.append("frequency jump between segments")
            break
    first, last = segs[0], segs[-1]
    if abs(last.omega1_end - first.omega1_start) > tol or abs(last.omega2_end - first.omega2_start) > tol:
        problems.append("cycle does not close")
    for s in segs:
        flat = s.omega1_start == s.omega1_end and s.omega2_start == s.omega2_end
        if s.label in ISOCHORIC and not flat:
            problems.append(f"stroke {s.label} must hold frequencies constant")
        if s.label in ADIABATIC and flat:
            problems.append(f"stroke {s.label} must change the frequencies")
    return problems


def stroke_bounds(protocol: Protocol) -> dict[str, tuple[float, float]]:
    return {s.label: (s.t_start, s.t_end) for s in protocol.segments}


def grid_index(t: float, h: float) -> int:
    """Index of ``t`` on a uniform grid of spacing ``h``; fails if off-grid."""
    k = t / h
    n = int(round(k))
    if not math.isclose(k, n, rel_tol=0, abs_tol=1e-6):
        raise ValueError(f"time {t} is not on the record grid (spacing {h})")
    return n
