"""NV sensing model: field projection onto the NV axis, linear Zeeman
resonance shift, double-Gaussian pulsed-ODMR line shape and Poisson photon
statistics.

Only one of the two electron-spin transitions is tracked; its absolute
frequency cancels in all field maps because shifts are measured against a
far-away reference.  The line shape is Gaussian (spectral width dominated
by the nuclear-spin bath, not the drive).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .config import NvOrientation, PulseSequence, SpectrumModelParams
from .constants import GYROMAGNETIC_RATIO, MAX_LINEAR_FIELD
from .errors import ModelDomainError

_FOUR_LN2 = 4.0 * math.log(2.0)
_MASK64 = (1 << 64) - 1


@dataclass
class OdmrSpectrum:
    """Photon counts versus microwave frequency for one pixel."""

    frequencies_hz: np.ndarray
    counts: np.ndarray
    repetitions_per_point: int
    sequence: PulseSequence

    def __post_init__(self):
        self.frequencies_hz = np.asarray(self.frequencies_hz, dtype=float)
        self.counts = np.asarray(self.counts, dtype=np.int64)
        if self.frequencies_hz.ndim != 1 or self.counts.shape != self.frequencies_hz.shape:
            raise ModelDomainError("frequencies and counts must be 1-D and equal length")
        if np.any(np.diff(self.frequencies_hz) <= 0):
            raise ModelDomainError("frequencies must be strictly increasing")
        if np.any(self.counts < 0):
            raise ModelDomainError("counts must be non-negative")
        if self.repetitions_per_point <= 0:
            raise ModelDomainError("repetitions_per_point must be positive")


def nv_axis(orientation: NvOrientation) -> np.ndarray:
    st, ct = math.sin(orientation.polar_angle_rad), math.cos(orientation.polar_angle_rad)
    sp, cp = math.sin(orientation.azimuth_rad), math.cos(orientation.azimuth_rad)
    return np.array([st * cp, st * sp, ct])


def project_field(b, orientation: NvOrientation) -> float:
    """Field component along the NV symmetry axis, tesla."""
    return float(np.dot(np.asarray(b, dtype=float), nv_axis(orientation)))


def resonance_frequency(b_nv: float, params: SpectrumModelParams) -> float:
    """Tracked transition frequency in the linear Zeeman regime.

    Raises ModelDomainError outside |b_nv| < 10 mT where the linear model
    is no longer trusted.
    """
    if abs(b_nv) >= MAX_LINEAR_FIELD:
        raise ModelDomainError(
            f"|b_nv| = {abs(b_nv):.3e} T exceeds the linear-model range {MAX_LINEAR_FIELD} T")
    return params.f_ref_hz + params.shift_sign * GYROMAGNETIC_RATIO * b_nv


def gaussian_line(f, center_hz, fwhm_hz):
    """Peak-normalized Gaussian of given FWHM."""
    d = (np.asarray(f, dtype=float) - center_hz) / fwhm_hz
    return np.exp(-_FOUR_LN2 * d * d)


def expected_pl(f, params: SpectrumModelParams, center_hz: float, t_int_s: float):
    """Expected photon count per repetition at drive frequency f.

    count_rate * t_int * [1 - C*(G(center - A/2) + G(center + A/2))] with
    peak-normalized Gaussians of FWHM linewidth_fwhm_hz.
    """
    a = params.hyperfine_splitting_hz
    dips = gaussian_line(f, center_hz - a / 2, params.linewidth_fwhm_hz) + \
        gaussian_line(f, center_hz + a / 2, params.linewidth_fwhm_hz)
    return params.count_rate_hz * t_int_s * (1.0 - params.contrast * dips)


def synth_spectrum(frequencies_hz, params: SpectrumModelParams, sequence: PulseSequence,
                   center_hz: float, repetitions: int, seed: int) -> OdmrSpectrum:
    """Poisson-sample a pulsed-ODMR spectrum; deterministic for a fixed seed."""
    if repetitions <= 0:
        raise ModelDomainError("repetitions must be positive")
    lam = repetitions * expected_pl(frequencies_hz, params, center_hz, sequence.t_int_s)
    rng = np.random.default_rng(seed)
    counts = rng.poisson(lam)
    return OdmrSpectrum(np.asarray(frequencies_hz, dtype=float), counts,
                        repetitions, sequence)


def average_powers(sequence: PulseSequence) -> tuple[float, float]:
    """Time-averaged (laser, microwave) powers over one sequence cycle."""
    cycle = sequence.cycle_time_s
    return (sequence.p_laser_peak_w * sequence.t_laser_s / cycle,
            sequence.p_mw_peak_w * sequence.t_pi_s / cycle)


def mix_seed(seed: int, index: int) -> int:
    """Derive an independent per-pixel seed (splitmix64 finalizer)."""
    z = (seed + 0x9E3779B97F4A7C15 * (index + 1)) & _MASK64
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK64
    return z ^ (z >> 31)
