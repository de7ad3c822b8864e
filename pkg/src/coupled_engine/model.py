"""Physical parameter types and closed-form two-mode mathematics.

All frequencies are angular (rad/s). Frequencies of normal modes and bare
modes are offsets from a reference frequency (the rotating frame); the
carrier ``omega_m`` only enters through occupancy and energy conversion.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import constants

TWO_PI = 2.0 * math.pi


@dataclass(frozen=True)
class PhysicalConstants:
    hbar: float = constants.hbar
    k_B: float = constants.k


CONSTANTS = PhysicalConstants()


@dataclass(frozen=True)
class MechanicalMode:
    """A single membrane eigenmode.

    Attributes
    ----------
    omega0 : float
        Carrier angular frequency (rad/s).
    gamma : float
        Energy damping rate (rad/s).
    label : str
        Identifier used in outputs.
    """

    omega0: float
    gamma: float
    label: str = ""

    def __post_init__(self):
        if not self.omega0 > 0:
            raise ValueError("omega0 must be positive")
        if self.gamma < 0:
            raise ValueError("gamma must be non-negative")
        if self.gamma >= 1e-3 * self.omega0:
            raise ValueError("gamma must be much smaller than omega0 (ratio < 1e-3)")


@dataclass(frozen=True)
class CoupledSystem:
    """Two mechanical modes with a conservative beam-splitter coupling ``lam``."""

    mode1: MechanicalMode
    mode2: MechanicalMode
    lam: float

    def __post_init__(self):
        if self.lam < 0:
            raise ValueError("coupling strength must be non-negative")

    @property
    def gamma1(self) -> float:
        return self.mode1.gamma

    @property
    def gamma2(self) -> float:
        return self.mode2.gamma

    @property
    def omega_m(self) -> float:
        """Carrier frequency used for occupancy and energy conversion."""
        return self.mode2.omega0

    @property
    def strong_coupling(self) -> bool:
        return self.lam > max(self.gamma1, self.gamma2)

    @classmethod
    def default(
        cls,
        *,
        omega_m: float = TWO_PI * 400e3,
        gamma1: float = TWO_PI * 6.0,
        gamma2: float = TWO_PI * 12.0,
        lam: float = TWO_PI * 40.0,
    ) -> CoupledSystem:
        return cls(
            MechanicalMode(omega_m, gamma1, "M1"),
            MechanicalMode(omega_m, gamma2, "M2"),
            lam,
        )


@dataclass(frozen=True)
class BathSpec:
    """Cold and (effective) hot bath temperatures in kelvin."""

    t_cold: float = 295.0
    t_hot: float = 1.77e4

    def __post_init__(self):
        if not self.t_hot > self.t_cold > 0:
            raise ValueError("require t_hot > t_cold > 0")


@dataclass(frozen=True)
class ModeTransform:
    """Orthogonal bare -> normal mode map.

    ``u[:, 0]`` is the lower normal mode and ``u[:, 1]`` the upper one, both
    expressed in the bare basis (b1, b2), so that
    ``B_plus = u[0, 1] * b1 + u[1, 1] * b2``.
    """

    u: np.ndarray

    @property
    def u11(self) -> float:
        return float(self.u[0, 0])

    @property
    def u21(self) -> float:
        return float(self.u[1, 0])

    @property
    def u12(self) -> float:
        return float(self.u[0, 1])

    @property
    def u22(self) -> float:
        return float(self.u[1, 1])

    @property
    def lower(self) -> np.ndarray:
        return self.u[:, 0]

    @property
    def upper(self) -> np.ndarray:
        return self.u[:, 1]


def normal_mode_frequencies(delta_omega, lam):
    """Upper and lower normal-mode offsets relative to mode 2.

    Returns ``(omega_plus, omega_minus)``; works elementwise on arrays.
    """
    half = np.asarray(delta_omega) / 2.0
    root = np.hypot(half, lam)
    return half + root, half - root


def twin_mode_frequencies(delta_omega, lam):
    """Normal-mode offsets relative to the mean bare frequency."""
    root = np.hypot(np.asarray(delta_omega) / 2.0, lam)
    return root, -root


def mixing_angle(delta_omega, lam):
    """Angle ``theta`` with ``tan(2 theta) = 2 lam / delta_omega``, in [0, pi/2].

    The upper normal mode is ``(cos theta, sin theta)`` in the bare basis.
    Continuous in ``delta_omega`` whenever ``lam > 0``.
    """
    return 0.5 * np.arctan2(2.0 * np.asarray(lam, dtype=float), np.asarray(delta_omega, dtype=float))


def mode_transform(delta_omega: float, lam: float, previous: ModeTransform | None = None) -> ModeTransform:
    """Eigenvector matrix of ``[[delta_omega, lam], [lam, 0]]``.

    Columns are ordered (lower, upper). The sign convention fixes the upper
    column to (+1, 0) as ``delta_omega -> +inf`` and ``det(u) = +1``; when
    ``previous`` is given, columns are flipped so each overlaps positively
    with its predecessor.
    """
    if lam == 0 and delta_omega == 0:
        raise ValueError("transform undefined at exact degeneracy")
    theta = float(mixing_angle(delta_omega, lam))
    c, s = math.cos(theta), math.sin(theta)
    u = np.array([[s, c], [-c, s]])
    if previous is not None:
        for k in range(2):
            if np.dot(u[:, k], previous.u[:, k]) < 0:
                u[:, k] = -u[:, k]
    return ModeTransform(u)


def transform_coefficients(delta_omega, lam):
    """Vectorised ``(u11, u21, u12, u22)`` along a continuous detuning path."""
    delta_omega = np.asarray(delta_omega, dtype=float)
    if lam == 0 and np.any(delta_omega == 0):
        raise ValueError("transform undefined at exact degeneracy")
    theta = mixing_angle(delta_omega, lam)
    c, s = np.cos(theta), np.sin(theta)
    return s, -c, c, s


def lz_diabatic_probability(lam: float, alpha: float) -> float:
    """Landau-Zener probability of leaving the adiabatic branch.

    ``alpha`` is the sweep rate of the detuning in rad/s^2.
    """
    if alpha == 0:
        raise ValueError("zero sweep rate; adiabatic limit")
    return math.exp(-TWO_PI * lam**2 / abs(alpha))


def thermal_occupancy(temperature, omega, const: PhysicalConstants = CONSTANTS):
    """Classical mean phonon number ``k_B T / (hbar omega)``."""
    if np.any(np.asarray(omega) <= 0):
        raise ValueError("omega must be positive")
    if np.any(np.asarray(temperature) < 0):
        raise ValueError("temperature must be non-negative")
    return const.k_B * np.asarray(temperature) / (const.hbar * np.asarray(omega))
