"""Stochastic simulation and thermodynamics of coupled-mode nanomechanical Otto engines."""

from .dynamics import EnvelopeState, SimConfig, Trajectory, bare_populations, simulate_trajectory, step
from .ensemble import EnsembleResult, mean_cycle, optimize_sweep_time, run_ensemble, sweep_time_scan
from .model import (
    CONSTANTS,
    TWO_PI,
    BathSpec,
    CoupledSystem,
    MechanicalMode,
    ModeTransform,
    PhysicalConstants,
    lz_diabatic_probability,
    mode_transform,
    normal_mode_frequencies,
    thermal_occupancy,
    twin_mode_frequencies,
)
from .protocol import Protocol, RampSegment, bath_at, build_single_cylinder, build_twin, frequency_at, validate
from .thermo import CycleThermo, NormalModeSeries, cycle_thermo, decompose, twin_cycle_thermo, work_distribution

__version__ = "0.1.0"
