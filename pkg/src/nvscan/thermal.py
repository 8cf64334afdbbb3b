"""Critical-temperature extraction from edge line scans and critical-current
detection from transport traces.

The peak edge field is linear in temperature below Tc, so families of line
scans taken at different heating powers are fitted jointly with one shared
slope and per-dataset zero crossings; the crossings are the critical stage
temperatures.  Transport traces yield the critical current from the sharp
resistance transition after contact-resistance subtraction.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import ModelDomainError, NumericalError

MAX_EXCLUSION_ROUNDS = 10


@dataclass
class LineProfile:
    """One magnetic line scan across the disc edge at a stage temperature."""

    temperature_k: float
    positions_m: np.ndarray
    delta_b_t: np.ndarray

    def __post_init__(self):
        self.positions_m = np.asarray(self.positions_m, dtype=float)
        self.delta_b_t = np.asarray(self.delta_b_t, dtype=float)
        if self.temperature_k <= 0:
            raise ModelDomainError("temperature must be positive")
        if self.positions_m.shape != self.delta_b_t.shape:
            raise ModelDomainError("positions and values must have equal length")


@dataclass
class LineScanDataset:
    """Line scans sharing one power setting, labelled as in the experiment."""

    label: str
    profiles: list[LineProfile]


@dataclass
class LineScanSeries:
    datasets: list[LineScanDataset]


@dataclass
class TcFitResult:
    shared_slope_t_per_k: float
    sigma_slope_t_per_k: float
    crossings_k: dict[str, float]
    sigma_crossings_k: dict[str, float]
    included: dict[str, list[bool]]
    peaks_t: dict[str, list[float]]
    temperatures_k: dict[str, list[float]]
    rounds: int
    n_free_parameters: int


@dataclass
class TransportTrace:
    """Differential-resistance sweep dU/dI versus applied current."""

    current_a: np.ndarray
    du_di_ohm: np.ndarray
    contact_resistance_ohm: float = 0.0

    def __post_init__(self):
        self.current_a = np.asarray(self.current_a, dtype=float)
        self.du_di_ohm = np.asarray(self.du_di_ohm, dtype=float)
        if self.current_a.shape != self.du_di_ohm.shape:
            raise ModelDomainError("current and dU/dI must have equal length")
        if np.any(np.diff(self.current_a) <= 0):
            raise ModelDomainError("current must be strictly increasing")
        if not np.all(np.isfinite(self.du_di_ohm)):
            raise ModelDomainError("dU/dI must be finite")


@dataclass
class CriticalCurrentResult:
    i_c_a: float | None
    jump_ohm: float
    threshold_ohm: float
    corrected_du_di_ohm: np.ndarray


def extract_peak_field(delta_b_t) -> float:
    """Sign-preserving peak |delta B| with parabolic refinement.

    The three samples around the discrete maximum of |delta B| are refined
    with a parabola; at the profile ends the discrete value is returned.
    """
    values = np.asarray(delta_b_t, dtype=float)
    if values.size < 5:
        raise ModelDomainError("profile needs at least 5 points")
    magnitude = np.abs(values)
    i = int(np.argmax(magnitude))
    peak = magnitude[i]
    if 0 < i < len(values) - 1:
        y0, y1, y2 = magnitude[i - 1], magnitude[i], magnitude[i + 1]
        denom = y0 - 2 * y1 + y2
        if denom < 0:
            offset = 0.5 * (y0 - y2) / denom
            peak = y1 - 0.25 * (y0 - y2) * offset
    sign = math.copysign(1.0, values[i]) if values[i] != 0 else 1.0
    return float(sign * peak)


def fit_critical_temperature(series: LineScanSeries, noise_floor_t: float = 0.0,
                             max_rounds: int = MAX_EXCLUSION_ROUNDS) -> TcFitResult:
    """Joint shared-slope fit of peak field versus stage temperature.

    Model: peak_k(T) = s * (Tc_k - T), one slope s for all datasets.  Points
    are excluded as signal-less when their peak is below twice the noise
    floor or the current fit predicts no signal (T above the crossing); the
    fit is repeated until the inclusion set is stable.
    """
    labels = [ds.label for ds in series.datasets]
    if len(set(labels)) != len(labels):
        raise ModelDomainError("dataset labels must be unique")
    temps = {ds.label: np.array([p.temperature_k for p in ds.profiles]) for ds in series.datasets}
    peaks = {ds.label: np.array([extract_peak_field(p.delta_b_t) for p in ds.profiles])
             for ds in series.datasets}

    include = {lab: peaks[lab] >= 2.0 * noise_floor_t for lab in labels}
    n_params = 1 + len(labels)
    theta = None
    rounds = 0
    for rounds in range(1, max_rounds + 1):
        rows, y = [], []
        for k, lab in enumerate(labels):
            sel = include[lab]
            if sel.sum() < 2:
                raise ModelDomainError(f"dataset '{lab}' has no signal "
                                       f"(fewer than 2 included points)")
            for t, p in zip(temps[lab][sel], peaks[lab][sel]):
                row = np.zeros(n_params)
                row[0] = -t
                row[1 + k] = 1.0
                rows.append(row)
                y.append(p)
        design = np.array(rows)
        y = np.array(y)
        theta, _, rank, _ = np.linalg.lstsq(design, y, rcond=None)
        if rank < n_params:
            raise ModelDomainError("degenerate design matrix "
                                   "(datasets span too few temperatures)")
        s = theta[0]
        if s <= 0:
            raise ModelDomainError("fitted slope is not positive; no signal trend")
        new_include = {}
        for k, lab in enumerate(labels):
            predicted = theta[1 + k] - s * temps[lab]
            new_include[lab] = (peaks[lab] >= 2.0 * noise_floor_t) & (predicted > 0)
        if all(np.array_equal(new_include[lab], include[lab]) for lab in labels):
            break
        include = new_include
    else:
        raise NumericalError(f"inclusion set did not stabilize in {max_rounds} rounds")

    residuals = y - design @ theta
    dof = len(y) - n_params
    variance = float(residuals @ residuals) / dof if dof > 0 else 0.0
    covariance = variance * np.linalg.inv(design.T @ design)

    s = theta[0]
    crossings, sigmas = {}, {}
    for k, lab in enumerate(labels):
        c = theta[1 + k]
        crossings[lab] = float(c / s)
        var = (covariance[1 + k, 1 + k] / s**2
               + c**2 * covariance[0, 0] / s**4
               - 2 * c * covariance[0, 1 + k] / s**3)
        sigmas[lab] = float(math.sqrt(max(var, 0.0)))
    return TcFitResult(
        shared_slope_t_per_k=float(s),
        sigma_slope_t_per_k=float(math.sqrt(max(covariance[0, 0], 0.0))),
        crossings_k=crossings, sigma_crossings_k=sigmas,
        included={lab: include[lab].tolist() for lab in labels},
        peaks_t={lab: peaks[lab].tolist() for lab in labels},
        temperatures_k={lab: temps[lab].tolist() for lab in labels},
        rounds=rounds, n_free_parameters=n_params)


def detect_critical_current(trace: TransportTrace,
                            significance: float = 5.0) -> CriticalCurrentResult:
    """Locate the superconducting transition in a dU/dI sweep.

    After subtracting the contact resistance, the transition is the largest
    resistance jump along the sweep (a sharp drop when scanned downward in
    current).  The jump must exceed `significance` times the median absolute
    successive difference, otherwise no transition is reported.
    """
    if trace.current_a.size < 10:
        raise ModelDomainError("transport trace needs at least 10 points")
    corrected = trace.du_di_ohm - trace.contact_resistance_ohm
    diffs = np.diff(corrected)
    j = int(np.argmax(diffs))
    jump = float(diffs[j])
    threshold = significance * float(np.median(np.abs(diffs)))
    i_c = float(trace.current_a[j + 1]) if jump > threshold and jump > 0 else None
    return CriticalCurrentResult(i_c_a=i_c, jump_ohm=jump, threshold_ohm=threshold,
                                 corrected_du_di_ohm=corrected)
