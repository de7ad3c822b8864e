"""Thermomechanical noise spectra and anti-crossing maps."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import signal

from .dynamics import simulate_stationary
from .model import TWO_PI, BathSpec, CoupledSystem, normal_mode_frequencies, twin_mode_frequencies

FLOOR_FACTOR = 5.0
# a peak must rise this factor above the saddle separating it from a higher
# neighbour, which rejects noise ripple on a Lorentzian flank
PROMINENCE_FACTOR = 3.0


@dataclass
class Spectrum:
    freqs: np.ndarray
    psd: np.ndarray

    @property
    def df(self) -> float:
        return float(self.freqs[1] - self.freqs[0])

    def total_power(self) -> float:
        return float(np.sum(self.psd) * self.df)


@dataclass
class SpectrumMap:
    """Spectra over a uniform detuning grid; ``frame`` is "single" or "twin"."""

    detunings: np.ndarray
    spectra: list
    frame: str = "single"

    @property
    def freqs(self) -> np.ndarray:
        return self.spectra[0].freqs

    def matrix(self) -> np.ndarray:
        return np.column_stack([s.psd for s in self.spectra])

    def to_csv(self, path) -> None:
        """Rows are frequency bins; first column the bin (Hz); header the detunings (Hz)."""
        header = "freq_Hz," + ",".join(f"{d:.9g}" for d in self.detunings)
        data = np.column_stack([self.freqs, self.matrix()])
        np.savetxt(path, data, delimiter=",", fmt="%.9g", header=header, comments="")

    def expected_loci(self, lam: float):
        """Theoretical branch offsets (Hz) on the map's detuning grid."""
        f = twin_mode_frequencies if self.frame == "twin" else normal_mode_frequencies
        wp, wm = f(TWO_PI * np.asarray(self.detunings), lam)
        return wp / TWO_PI, wm / TWO_PI


def psd(series, sample_rate: float, segment_length: int, overlap: float = 0.5) -> Spectrum:
    """Hann-windowed averaged periodogram, two-sided for complex input.

    Normalised as a density so that ``sum(psd) * df`` equals the
    window-weighted mean square of the series.
    """
    x = np.asarray(series)
    if x.size < 2 * segment_length:
        raise ValueError("series too short for the requested segment length")
    f, p = signal.welch(
        x, fs=sample_rate, window="hann", nperseg=segment_length, noverlap=int(overlap * segment_length),
        return_onesided=False, scaling="density", detrend=False,
    )
    order = np.argsort(f)
    return Spectrum(f[order], p[order])


def find_peaks(spec: Spectrum, n: int = 2, min_separation_hz: float = 10.0):
    """Up to ``n`` strongest local maxima above the noise floor, refined by a
    parabola through the log-density at the three bins around each maximum.

    Maxima must exceed ``FLOOR_FACTOR`` times the median density and be
    prominent by ``PROMINENCE_FACTOR`` in density ratio.

    Returns peak frequencies (Hz) in increasing order.
    """
    p = spec.psd
    floor = FLOOR_FACTOR * np.median(p)
    distance = max(int(round(min_separation_hz / spec.df)), 1)
    logp = np.log(np.maximum(p, np.finfo(float).tiny))
    idx, _ = signal.find_peaks(logp, height=np.log(floor), distance=distance,
                               prominence=np.log(PROMINENCE_FACTOR))
    if idx.size == 0:
        return np.array([])
    idx = idx[np.argsort(p[idx])[::-1][:n]]
    out = []
    for i in idx:
        if 0 < i < p.size - 1:
            a, b, c = logp[i - 1], logp[i], logp[i + 1]
            den = a - 2 * b + c
            shift = 0.5 * (a - c) / den if den != 0 else 0.0
        else:
            shift = 0.0
        out.append(spec.freqs[i] + shift * spec.df)
    return np.sort(np.array(out))


def anticrossing_map(
    system: CoupledSystem,
    detunings_hz,
    record_length: float,
    *,
    frame: str = "single",
    sample_rate: float = 2000.0,
    resolution: float = 1.0,
    bath: BathSpec = BathSpec(),
    seed: int = 0,
) -> SpectrumMap:
    """Stationary spectra over a detuning grid, both baths cold.

    Each column is the sum of the two membranes' individual spectra, so both
    branches stay visible at every detuning (a coherent sum would cancel the
    antisymmetric branch on resonance).

    Frequencies are offsets from the frame reference (mode 2 for
    ``frame="single"``, the mean bare frequency for ``frame="twin"``); a
    mode with offset ``omega`` appears at ``+omega / 2 pi``. Weak coupling
    is not rejected here; it shows up as an unresolved splitting.
    """
    det = np.asarray(detunings_hz, dtype=float)
    if det.size > 2 and not np.allclose(np.diff(det), det[1] - det[0]):
        raise ValueError("detuning grid must be uniform")
    dw = TWO_PI * det
    if frame == "twin":
        d1, d2 = dw / 2, -dw / 2
    elif frame == "single":
        d1, d2 = dw, np.zeros_like(dw)
    else:
        raise ValueError(f"unknown frame {frame!r}")
    nseg = int(round(sample_rate / resolution))
    n_samples = int(round(record_length * sample_rate))
    b1, b2 = simulate_stationary(system, d1, d2, 1.0 / sample_rate, n_samples, bath.t_cold, bath.t_cold, seed)
    # conj: envelopes rotate as exp(-i omega t), so a mode at +omega shows at +f
    spectra = []
    for r1, r2 in zip(b1, b2):
        s1 = psd(np.conj(r1), sample_rate, nseg)
        s2 = psd(np.conj(r2), sample_rate, nseg)
        spectra.append(Spectrum(s1.freqs, s1.psd + s2.psd))
    return SpectrumMap(det, spectra, frame)


def map_peaks(smap: SpectrumMap, min_separation_hz: float = 10.0):
    return [find_peaks(s, 2, min_separation_hz) for s in smap.spectra]


def extract_splitting(smap: SpectrumMap, min_separation_hz: float = 10.0) -> float:
    """Minimum separation (Hz) of the two branch peaks over the map."""
    if not np.any(np.isclose(smap.detunings, 0.0)):
        raise ValueError("map must include zero detuning")
    seps = []
    for peaks in map_peaks(smap, min_separation_hz):
        if peaks.size < 2:
            raise ValueError("unresolved splitting")
        seps.append(peaks[1] - peaks[0])
    return float(min(seps))
