"""Pixel-by-pixel scan simulation, field-map reconstruction, sensitivity
estimation and vortex counting.

Every pixel is an independent pulsed-ODMR acquisition: the scene field is
projected onto the NV axis, shifted into a resonance, and Poisson-sampled
with a per-pixel RNG stream derived from the master seed, so results are
bit-identical for any thread count.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace

import numpy as np
from scipy import ndimage

from .config import ExperimentConfig, ScanGrid, RegionSpec
from .errors import ModelDomainError, NoResonanceError, ReferenceFitError
from .fieldmodel import total_field
from .fitting import FitResult, fit_double_gaussian, shift_to_field
from .sensor import (OdmrSpectrum, expected_pl, mix_seed, project_field,
                     resonance_frequency, synth_spectrum)


@dataclass
class ScanDataset:
    """Raw scan acquisition: per-pixel spectra plus the reference spectrum."""

    grid: ScanGrid
    frequencies_hz: np.ndarray
    counts: np.ndarray              # shape (n_y, n_x, n_freq), int64
    flagged: np.ndarray             # shape (n_y, n_x), resonance left the span
    repetitions_per_point: int
    reference: OdmrSpectrum
    reference_position_xy_m: tuple[float, float]
    hyperfine_splitting_hz: float
    shift_sign: int
    config_hash: str = ""
    seed: int = 0

    def subset(self, x0: int, y0: int, n_x: int, n_y: int) -> "ScanDataset":
        """Sub-rectangle view of the dataset sharing the reference spectrum."""
        grid = self.grid.model_copy(update={
            "origin_xy_m": (self.grid.origin_xy_m[0] + x0 * self.grid.pixel_size_m,
                            self.grid.origin_xy_m[1] + y0 * self.grid.pixel_size_m),
            "n_x": n_x, "n_y": n_y})
        return replace(self, grid=grid,
                       counts=self.counts[y0:y0 + n_y, x0:x0 + n_x].copy(),
                       flagged=self.flagged[y0:y0 + n_y, x0:x0 + n_x].copy())


@dataclass
class FieldMap:
    """Reconstructed field shift per pixel; masked pixels are NaN."""

    grid: ScanGrid
    delta_b_t: np.ndarray           # (n_y, n_x), NaN where masked
    center_hz: np.ndarray
    mask: np.ndarray                # True = invalid pixel
    contrast: np.ndarray
    linewidth_fwhm_hz: np.ndarray
    chi_square: np.ndarray
    reference_center_hz: float
    dwell_time_s: float
    config_hash: str = ""
    seed: int = 0


def frequency_plan(center_hz: float, half_span_hz: float, n_points: int) -> np.ndarray:
    return np.linspace(center_hz - half_span_hz, center_hz + half_span_hz, n_points)


def reference_position(config: ExperimentConfig) -> tuple[float, float]:
    cx, cy = config.scene.geometry.center_xy_m
    return (cx + config.sensor.reference_offset_m, cy)


def _pixel_center_hz(config: ExperimentConfig, x: float, y: float) -> float:
    sample = total_field((x, y, config.grid.standoff_m), config.scene)
    b_nv = project_field(sample.b, config.sensor.orientation)
    return resonance_frequency(b_nv, config.sensor.spectrum)


def run_scan(config: ExperimentConfig, threads: int = 1,
             config_hash_value: str = "") -> ScanDataset:
    """Simulate a raster scan; deterministic for a fixed (config, seed)."""
    sensor_cfg = config.sensor
    spectrum_params = sensor_cfg.spectrum
    plan_cfg = sensor_cfg.frequency_plan
    half_span = plan_cfg.half_span_hz
    if half_span is None:
        half_span = spectrum_params.hyperfine_splitting_hz + 4 * spectrum_params.linewidth_fwhm_hz

    ref_xy = reference_position(config)
    ref_center = _pixel_center_hz(config, ref_xy[0], ref_xy[1])
    freqs = frequency_plan(ref_center, half_span, plan_cfg.n_points)

    cycle = sensor_cfg.pulse.cycle_time_s
    repetitions = int(config.grid.dwell_time_s / cycle / plan_cfg.n_points)
    if repetitions < 1:
        raise ModelDomainError(
            f"dwell time {config.grid.dwell_time_s} s yields no repetitions "
            f"({plan_cfg.n_points} points at {cycle:.2e} s per cycle)")

    margin = spectrum_params.hyperfine_splitting_hz / 2 + spectrum_params.linewidth_fwhm_hz
    xs, ys = config.grid.positions()
    n_x, n_y = config.grid.n_x, config.grid.n_y
    counts = np.zeros((n_y, n_x, plan_cfg.n_points), dtype=np.int64)
    flagged = np.zeros((n_y, n_x), dtype=bool)

    def simulate_pixel(index):
        iy, ix = divmod(index, n_x)
        center = _pixel_center_hz(config, xs[ix], ys[iy])
        spec = synth_spectrum(freqs, spectrum_params, sensor_cfg.pulse, center,
                              repetitions, mix_seed(config.seed, index))
        out_of_span = abs(center - ref_center) > half_span - margin
        return iy, ix, spec.counts, out_of_span

    indices = range(n_x * n_y)
    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            results = list(pool.map(simulate_pixel, indices))
    else:
        results = [simulate_pixel(i) for i in indices]
    for iy, ix, pixel_counts, out in results:
        counts[iy, ix] = pixel_counts
        flagged[iy, ix] = out

    reference = synth_spectrum(freqs, spectrum_params, sensor_cfg.pulse, ref_center,
                               repetitions, mix_seed(config.seed, n_x * n_y))
    return ScanDataset(
        grid=config.grid, frequencies_hz=freqs, counts=counts, flagged=flagged,
        repetitions_per_point=repetitions, reference=reference,
        reference_position_xy_m=ref_xy,
        hyperfine_splitting_hz=spectrum_params.hyperfine_splitting_hz,
        shift_sign=spectrum_params.shift_sign,
        config_hash=config_hash_value, seed=config.seed)


def reconstruct_field_map(dataset: ScanDataset, threads: int = 1,
                          weighted: bool = False) -> FieldMap:
    """Fit every pixel spectrum and convert shifts against the reference."""
    try:
        ref_fit = fit_double_gaussian(dataset.reference, dataset.hyperfine_splitting_hz,
                                      weighted=weighted)
    except NoResonanceError as exc:
        raise ReferenceFitError(f"reference spectrum has no resonance: {exc}") from exc
    if not ref_fit.converged:
        raise ReferenceFitError("reference spectrum fit did not converge")

    n_y, n_x, _ = dataset.counts.shape
    delta_b = np.full((n_y, n_x), np.nan)
    center = np.full((n_y, n_x), np.nan)
    contrast = np.full((n_y, n_x), np.nan)
    linewidth = np.full((n_y, n_x), np.nan)
    chi2 = np.full((n_y, n_x), np.nan)
    mask = np.ones((n_y, n_x), dtype=bool)

    def fit_pixel(index):
        iy, ix = divmod(index, n_x)
        if dataset.flagged[iy, ix]:
            return iy, ix, None
        spectrum = OdmrSpectrum(dataset.frequencies_hz, dataset.counts[iy, ix],
                                dataset.repetitions_per_point, dataset.reference.sequence)
        try:
            result = fit_double_gaussian(spectrum, dataset.hyperfine_splitting_hz,
                                         weighted=weighted)
        except NoResonanceError:
            return iy, ix, None
        return iy, ix, result

    indices = range(n_x * n_y)
    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            results = list(pool.map(fit_pixel, indices))
    else:
        results = [fit_pixel(i) for i in indices]

    for iy, ix, result in results:
        if result is None or not result.converged:
            continue
        mask[iy, ix] = False
        center[iy, ix] = result.center_hz
        delta_b[iy, ix] = shift_to_field(result.center_hz, ref_fit.center_hz,
                                         dataset.shift_sign)
        contrast[iy, ix] = result.contrast
        linewidth[iy, ix] = result.linewidth_fwhm_hz
        chi2[iy, ix] = result.chi_square

    return FieldMap(grid=dataset.grid, delta_b_t=delta_b, center_hz=center, mask=mask,
                    contrast=contrast, linewidth_fwhm_hz=linewidth, chi_square=chi2,
                    reference_center_hz=ref_fit.center_hz,
                    dwell_time_s=dataset.grid.dwell_time_s,
                    config_hash=dataset.config_hash, seed=dataset.seed)


def region_mask(fieldmap: FieldMap, region: RegionSpec | None) -> np.ndarray:
    selected = np.zeros_like(fieldmap.mask, dtype=bool)
    if region is None:
        selected[:] = True
    else:
        selected[region.y0:region.y0 + region.n_y, region.x0:region.x0 + region.n_x] = True
    return selected


def estimate_sensitivity(fieldmap: FieldMap, region: RegionSpec | None = None) -> float:
    """Shot-noise sensitivity eta = std(delta B over region) * sqrt(dwell), T/sqrt(Hz).

    The region must be nominally featureless and contain >= 20 unmasked pixels.
    """
    selected = region_mask(fieldmap, region) & ~fieldmap.mask
    values = fieldmap.delta_b_t[selected]
    if values.size < 20:
        raise ModelDomainError(
            f"sensitivity region has {values.size} unmasked pixels; need >= 20")
    return float(np.std(values, ddof=1) * math.sqrt(fieldmap.dwell_time_s))


_CROSS = np.array([[0, 1, 0], [1, 1, 1], [0, 1, 0]])


def count_vortices(fieldmap: FieldMap, threshold_t: float):
    """Count 4-connected blobs of |delta B| above threshold.

    The threshold should exceed ~3x the pixel noise.  Returns (count,
    intensity-weighted centroids as a list of (x_m, y_m)).
    """
    if threshold_t <= 0:
        raise ModelDomainError("threshold must be positive")
    magnitude = np.abs(np.where(fieldmap.mask, 0.0, fieldmap.delta_b_t))
    labels, count = ndimage.label(magnitude > threshold_t, structure=_CROSS)
    xs, ys = fieldmap.grid.positions()
    xs, ys = np.asarray(xs), np.asarray(ys)
    centroids = []
    for lab in range(1, count + 1):
        sel = labels == lab
        w = magnitude[sel]
        iy, ix = np.nonzero(sel)
        total = w.sum()
        centroids.append((float(np.sum(w * xs[ix]) / total),
                          float(np.sum(w * ys[iy]) / total)))
    return count, centroids
