"""Request/response models for the HTTP service and converters to and from
the runtime dataclasses.  NaN never crosses the wire: masked map pixels are
null, and every payload echoes the config hash and seed for provenance.
"""

from __future__ import annotations

from typing import Literal, Optional, Tuple

import numpy as np
from pydantic import BaseModel, ConfigDict, Field

from ..config import ExperimentConfig, PulseSequence, RegionSpec, ScanGrid
from ..scan import FieldMap, ScanDataset
from ..sensor import OdmrSpectrum
from ..thermal import (CriticalCurrentResult, LineProfile, LineScanDataset,
                       LineScanSeries, TcFitResult, TransportTrace)


class Payload(BaseModel):
    model_config = ConfigDict(extra="forbid")


class SpectrumPayload(Payload):
    frequencies_hz: list[float]
    counts: list[int]
    repetitions_per_point: int
    sequence: PulseSequence = PulseSequence()


def spectrum_to_payload(spectrum: OdmrSpectrum) -> SpectrumPayload:
    return SpectrumPayload(
        frequencies_hz=[float(f) for f in spectrum.frequencies_hz],
        counts=[int(c) for c in spectrum.counts],
        repetitions_per_point=spectrum.repetitions_per_point,
        sequence=spectrum.sequence)


def spectrum_from_payload(payload: SpectrumPayload) -> OdmrSpectrum:
    return OdmrSpectrum(np.array(payload.frequencies_hz),
                        np.array(payload.counts, dtype=np.int64),
                        payload.repetitions_per_point, payload.sequence)


class ScanDatasetPayload(Payload):
    grid: ScanGrid
    frequencies_hz: list[float]
    counts: list[list[list[int]]]
    flagged: list[list[bool]]
    repetitions_per_point: int
    reference: SpectrumPayload
    reference_position_xy_m: Tuple[float, float]
    hyperfine_splitting_hz: float
    shift_sign: Literal[-1, 1]
    config_hash: str = ""
    seed: int = 0


def dataset_to_payload(ds: ScanDataset) -> ScanDatasetPayload:
    return ScanDatasetPayload(
        grid=ds.grid,
        frequencies_hz=[float(f) for f in ds.frequencies_hz],
        counts=ds.counts.tolist(),
        flagged=ds.flagged.tolist(),
        repetitions_per_point=ds.repetitions_per_point,
        reference=spectrum_to_payload(ds.reference),
        reference_position_xy_m=tuple(ds.reference_position_xy_m),
        hyperfine_splitting_hz=ds.hyperfine_splitting_hz,
        shift_sign=ds.shift_sign,
        config_hash=ds.config_hash,
        seed=ds.seed)


def dataset_from_payload(payload: ScanDatasetPayload) -> ScanDataset:
    return ScanDataset(
        grid=payload.grid,
        frequencies_hz=np.array(payload.frequencies_hz),
        counts=np.array(payload.counts, dtype=np.int64),
        flagged=np.array(payload.flagged, dtype=bool),
        repetitions_per_point=payload.repetitions_per_point,
        reference=spectrum_from_payload(payload.reference),
        reference_position_xy_m=tuple(payload.reference_position_xy_m),
        hyperfine_splitting_hz=payload.hyperfine_splitting_hz,
        shift_sign=payload.shift_sign,
        config_hash=payload.config_hash,
        seed=payload.seed)


class FieldMapPayload(Payload):
    grid: ScanGrid
    delta_b_t: list[list[Optional[float]]]
    center_hz: list[list[Optional[float]]]
    mask: list[list[bool]]
    reference_center_hz: float
    dwell_time_s: float
    config_hash: str = ""
    seed: int = 0


def _nullable(values: np.ndarray, mask: np.ndarray):
    return [[None if mask[iy, ix] else float(values[iy, ix])
             for ix in range(values.shape[1])] for iy in range(values.shape[0])]


def fieldmap_to_payload(fm: FieldMap) -> FieldMapPayload:
    return FieldMapPayload(
        grid=fm.grid,
        delta_b_t=_nullable(fm.delta_b_t, fm.mask),
        center_hz=_nullable(fm.center_hz, fm.mask),
        mask=fm.mask.tolist(),
        reference_center_hz=fm.reference_center_hz,
        dwell_time_s=fm.dwell_time_s,
        config_hash=fm.config_hash,
        seed=fm.seed)


def fieldmap_from_payload(payload: FieldMapPayload) -> FieldMap:
    mask = np.array(payload.mask, dtype=bool)
    shape = mask.shape
    delta_b = np.full(shape, np.nan)
    center = np.full(shape, np.nan)
    for iy in range(shape[0]):
        for ix in range(shape[1]):
            if not mask[iy, ix]:
                delta_b[iy, ix] = payload.delta_b_t[iy][ix]
                center[iy, ix] = payload.center_hz[iy][ix]
    nan = np.full(shape, np.nan)
    return FieldMap(grid=payload.grid, delta_b_t=delta_b, center_hz=center, mask=mask,
                    contrast=nan.copy(), linewidth_fwhm_hz=nan.copy(), chi_square=nan.copy(),
                    reference_center_hz=payload.reference_center_hz,
                    dwell_time_s=payload.dwell_time_s,
                    config_hash=payload.config_hash, seed=payload.seed)


class SimulateScanRequest(Payload):
    config: ExperimentConfig
    seed: Optional[int] = Field(default=None, ge=0)
    threads: int = Field(default=1, ge=1)


class ReconstructRequest(Payload):
    dataset: ScanDatasetPayload
    threads: int = Field(default=1, ge=1)
    weighted: bool = False


class FitSpectraRequest(Payload):
    spectra: list[SpectrumPayload]
    spectrum_ids: Optional[list[str]] = None
    hyperfine_splitting_hz: float = Field(default=3.05e6, gt=0)
    splitting_fixed: bool = True
    weighted: bool = False


class FitRow(Payload):
    pixel_id: str
    center_hz: Optional[float] = None
    center_err_hz: Optional[float] = None
    contrast: Optional[float] = None
    linewidth_hz: Optional[float] = None
    baseline: Optional[float] = None
    chi2: Optional[float] = None
    converged: bool = False
    error: Optional[str] = None


class FitSpectraResponse(Payload):
    results: list[FitRow]


class SensitivityRequest(Payload):
    field_map: FieldMapPayload
    region: Optional[RegionSpec] = None


class SensitivityResponse(Payload):
    eta_t_per_sqrt_hz: float
    sigma_t: float
    n_pixels: int


class LineProfilePayload(Payload):
    temperature_k: float
    positions_m: list[float]
    delta_b_t: list[float]


class LineScanDatasetPayload(Payload):
    label: str
    profiles: list[LineProfilePayload]


class LineScanSeriesPayload(Payload):
    datasets: list[LineScanDatasetPayload]


def series_to_payload(series: LineScanSeries) -> LineScanSeriesPayload:
    return LineScanSeriesPayload(datasets=[
        LineScanDatasetPayload(label=ds.label, profiles=[
            LineProfilePayload(temperature_k=p.temperature_k,
                               positions_m=[float(x) for x in p.positions_m],
                               delta_b_t=[float(b) for b in p.delta_b_t])
            for p in ds.profiles])
        for ds in series.datasets])


def series_from_payload(payload: LineScanSeriesPayload) -> LineScanSeries:
    return LineScanSeries(datasets=[
        LineScanDataset(label=ds.label, profiles=[
            LineProfile(temperature_k=p.temperature_k,
                        positions_m=np.array(p.positions_m),
                        delta_b_t=np.array(p.delta_b_t))
            for p in ds.profiles])
        for ds in payload.datasets])


class LinescanRequest(Payload):
    config: ExperimentConfig
    temperatures_k: list[float]
    label: str = ""
    heating_offset_k: float = 0.0
    seed: Optional[int] = Field(default=None, ge=0)
    threads: int = Field(default=1, ge=1)


class TcFitRequest(Payload):
    series: LineScanSeriesPayload
    noise_floor_t: float = Field(default=0.0, ge=0)


class TcCrossing(Payload):
    label: str
    critical_stage_temperature_k: float
    sigma_k: float


class TcFitResponse(Payload):
    shared_slope_t_per_k: float
    sigma_slope_t_per_k: float
    crossings: list[TcCrossing]
    n_free_parameters: int
    rounds: int
    included: dict[str, list[bool]]


def tc_result_to_response(result: TcFitResult) -> TcFitResponse:
    return TcFitResponse(
        shared_slope_t_per_k=result.shared_slope_t_per_k,
        sigma_slope_t_per_k=result.sigma_slope_t_per_k,
        crossings=[TcCrossing(label=label,
                              critical_stage_temperature_k=result.crossings_k[label],
                              sigma_k=result.sigma_crossings_k[label])
                   for label in result.crossings_k],
        n_free_parameters=result.n_free_parameters,
        rounds=result.rounds,
        included=result.included)


class TransportTracePayload(Payload):
    current_a: list[float]
    du_di_ohm: list[float]
    contact_resistance_ohm: float = 0.0


def trace_from_payload(payload: TransportTracePayload) -> TransportTrace:
    return TransportTrace(np.array(payload.current_a), np.array(payload.du_di_ohm),
                          payload.contact_resistance_ohm)


class TransportFitRequest(Payload):
    trace: TransportTracePayload
    significance: float = Field(default=5.0, gt=0)


class TransportFitResponse(Payload):
    i_c_a: Optional[float]
    jump_ohm: float
    threshold_ohm: float
    corrected_du_di_ohm: list[float]


def transport_result_to_response(result: CriticalCurrentResult) -> TransportFitResponse:
    return TransportFitResponse(
        i_c_a=result.i_c_a, jump_ohm=result.jump_ohm, threshold_ohm=result.threshold_ohm,
        corrected_du_di_ohm=[float(v) for v in result.corrected_du_di_ohm])


class DemoRequest(Payload):
    seed: Optional[int] = Field(default=None, ge=0)
    threads: int = Field(default=1, ge=1)


class DemoResponse(Payload):
    figure: str
    files: dict[str, str]
    summary: dict
