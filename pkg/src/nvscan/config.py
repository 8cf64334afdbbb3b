"""Declarative experiment configuration: strict pydantic models, JSON parsing
with line-number hints, canonical hashing, and the generated reference config.

All quantities are SI; field names carry the unit suffix (_m, _s, _k, _t, _hz, _w).
Unknown keys are rejected everywhere.
"""

from __future__ import annotations

import hashlib
import json
import math
from typing import Literal, Optional, Tuple

from pydantic import BaseModel, ConfigDict, Field, ValidationError, model_validator

from .errors import ConfigError


class StrictModel(BaseModel):
    model_config = ConfigDict(extra="forbid")


class DiscGeometry(StrictModel):
    """Thin superconducting disc, lithographically defined on the film plane."""

    center_xy_m: Tuple[float, float] = (0.0, 0.0)
    radius_m: float = Field(default=2.5e-6, gt=0)
    thickness_m: float = Field(default=50e-9, gt=0)
    film_plane_z_m: float = 0.0

    @model_validator(mode="after")
    def _film_plane_fixed(self):
        if self.film_plane_z_m != 0.0:
            raise ValueError("film_plane_z_m is fixed to 0")
        return self


class MaterialParams(StrictModel):
    """Superconductor parameters of the film.

    lambda0_m is the zero-temperature penetration depth; the Pearl length is
    derived as 2*lambda(T)^2/thickness with the two-fluid temperature
    dependence lambda(T) = lambda0/sqrt(1-(T/Tc)^4).  edge_slope_t_per_k is
    the linear coefficient of the Meissner edge response; b_c2_t the upper
    critical field above which the film is driven normal.
    """

    t_c_k: float = Field(default=1.25, gt=0)
    lambda0_m: float = Field(default=161e-9, gt=0)
    edge_slope_t_per_k: float = Field(default=40e-6, ge=0)
    b_c2_t: float = Field(default=3e-3, gt=0)


class Vortex(StrictModel):
    x_m: float
    y_m: float
    sign: Literal[-1, 1] = 1


class VortexConfiguration(StrictModel):
    """The magnetic scene: disc, material, temperature, bias and vortices.

    Vortex count and positions are explicit inputs; nucleation is not modelled.
    vortex_model selects the stray-field evaluator: "monopole" is the fast
    calibrated path (flux monopole at depth monopole_depth_m below the film,
    defaulting to the Pearl length), "pearl" the exact Hankel-integral kernel.
    """

    geometry: DiscGeometry = DiscGeometry()
    material: MaterialParams = MaterialParams()
    temperature_k: float = Field(gt=0)
    bias_bz_t: float = 0.0
    vortices: list[Vortex] = []
    vortex_model: Literal["monopole", "pearl"] = "monopole"
    monopole_depth_m: Optional[float] = Field(default=None, gt=0)

    @model_validator(mode="after")
    def _vortices_inside_disc(self):
        cx, cy = self.geometry.center_xy_m
        for i, v in enumerate(self.vortices):
            if math.hypot(v.x_m - cx, v.y_m - cy) > self.geometry.radius_m:
                raise ValueError(f"vortices[{i}] lies outside the disc")
        return self


class NvOrientation(StrictModel):
    """NV symmetry axis: polar angle from the out-of-plane direction."""

    polar_angle_rad: float = Field(default=math.radians(55.0), ge=0, le=math.pi / 2)
    azimuth_rad: float = 0.0


class PulseSequence(StrictModel):
    """Pulsed-ODMR timing: pi-pulse, laser readout, settling, integration window.

    Peak powers default to the low-power setting; with the default durations the
    time-averaged powers come out at 50 uW (laser) and 70 uW (microwave).
    """

    t_pi_s: float = Field(default=500e-9, gt=0)
    t_laser_s: float = Field(default=1.5e-6, gt=0)
    t_set_s: float = Field(default=1.5e-6, gt=0)
    t_int_s: float = Field(default=300e-9, gt=0)
    p_laser_peak_w: float = Field(default=50e-6 * 7 / 3, ge=0)
    p_mw_peak_w: float = Field(default=70e-6 * 7, ge=0)

    @model_validator(mode="after")
    def _window_inside_laser(self):
        if self.t_int_s > self.t_laser_s:
            raise ValueError("t_int_s must not exceed t_laser_s")
        return self

    @property
    def cycle_time_s(self) -> float:
        return self.t_pi_s + self.t_laser_s + self.t_set_s


class SpectrumModelParams(StrictModel):
    """Double-Gaussian pulsed-ODMR line model for the tracked transition."""

    f_ref_hz: float = Field(default=2.87e9, gt=0)
    hyperfine_splitting_hz: float = Field(default=3.05e6, gt=0)
    contrast: float = Field(default=0.073, gt=0, lt=1)
    linewidth_fwhm_hz: float = Field(default=1.0e6, gt=0)
    count_rate_hz: float = Field(default=4.0e6, gt=0)
    shift_sign: Literal[-1, 1] = 1


class FrequencyPlan(StrictModel):
    """Microwave frequency list for a scan, centered on the reference resonance.

    half_span_hz = None uses the default hyperfine_splitting + 4*linewidth.
    """

    n_points: int = Field(default=41, ge=8)
    half_span_hz: Optional[float] = Field(default=None, gt=0)


class SensorConfig(StrictModel):
    orientation: NvOrientation = NvOrientation()
    pulse: PulseSequence = PulseSequence()
    spectrum: SpectrumModelParams = SpectrumModelParams()
    frequency_plan: FrequencyPlan = FrequencyPlan()
    # Reference spectra are taken at this in-plane offset from the disc center.
    reference_offset_m: float = Field(default=30e-6, gt=0)


class ScanGrid(StrictModel):
    """Raster grid; pixel (ix, iy) sits at origin + (ix, iy)*pixel_size."""

    origin_xy_m: Tuple[float, float] = (0.0, 0.0)
    pixel_size_m: float = Field(gt=0)
    n_x: int = Field(ge=1)
    n_y: int = Field(ge=1)
    standoff_m: float = Field(default=110e-9, gt=0)
    dwell_time_s: float = Field(gt=0)

    def positions(self):
        """Pixel center coordinates as (x of shape (n_x,), y of shape (n_y,))."""
        x0, y0 = self.origin_xy_m
        xs = [x0 + i * self.pixel_size_m for i in range(self.n_x)]
        ys = [y0 + j * self.pixel_size_m for j in range(self.n_y)]
        return xs, ys


class RegionSpec(StrictModel):
    """Rectangular pixel region (inclusive of x0..x0+nx-1, y0..y0+ny-1)."""

    x0: int = Field(ge=0)
    y0: int = Field(ge=0)
    n_x: int = Field(ge=1)
    n_y: int = Field(ge=1)


class AnalysisOptions(StrictModel):
    vortex_threshold_t: float = Field(default=50e-6, gt=0)
    sensitivity_region: Optional[RegionSpec] = None
    noise_floor_t: float = Field(default=0.0, ge=0)


class ExperimentConfig(StrictModel):
    scene: VortexConfiguration
    sensor: SensorConfig = SensorConfig()
    grid: ScanGrid
    seed: int = Field(default=0, ge=0)
    analysis: AnalysisOptions = AnalysisOptions()


def _strip_comments(text: str) -> str:
    """Blank out full-line '#' comments, preserving line numbering."""
    lines = text.splitlines()
    out = ["" if line.lstrip().startswith("#") else line for line in lines]
    return "\n".join(out)


def _line_of_key(text: str, key: str) -> Optional[int]:
    """Best-effort 1-based line number of a quoted key in the raw text."""
    needle = f'"{key}"'
    for i, line in enumerate(text.splitlines(), start=1):
        if needle in line:
            return i
    return None


def parse_config(text: str) -> ExperimentConfig:
    """Parse an experiment config from JSON text.

    Full-line '#' comments are allowed (the generated reference config uses
    them to document defaults).  Malformed JSON reports line/column; schema
    violations report the offending field path and, when the key can be
    located, its line number.
    """
    try:
        raw = json.loads(_strip_comments(text))
    except json.JSONDecodeError as exc:
        raise ConfigError(f"malformed JSON: {exc.msg}", line=exc.lineno) from exc
    try:
        return ExperimentConfig.model_validate(raw)
    except ValidationError as exc:
        first = exc.errors()[0]
        path = ".".join(str(p) for p in first["loc"])
        leaf = str(first["loc"][-1]) if first["loc"] else ""
        raise ConfigError(first["msg"], field_path=path, line=_line_of_key(text, leaf)) from exc


def serialize_config(config: ExperimentConfig) -> str:
    return json.dumps(config.model_dump(mode="json"), indent=2, sort_keys=True) + "\n"


def config_hash(config: ExperimentConfig) -> str:
    canonical = json.dumps(config.model_dump(mode="json"), sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(canonical.encode()).hexdigest()[:16]


_REFERENCE_DOC = """\
# nvscan experiment configuration reference (all values are the documented defaults)
#
# Units are SI throughout; every field name carries its unit suffix
# (_m meters, _s seconds, _k kelvin, _t tesla, _hz hertz, _w watts, _rad radians).
# Unknown keys are rejected.  Full-line '#' comments are permitted.
#
# scene                  magnetic scene above the superconducting disc
#   geometry             disc center, radius, film thickness (film plane fixed at z=0)
#   material             t_c_k critical temperature; lambda0_m zero-T penetration depth
#                        (Pearl length = 2*lambda(T)^2/thickness, lambda(T) two-fluid);
#                        edge_slope_t_per_k Meissner edge peak per kelvin below Tc;
#                        b_c2_t upper critical field (bias above it drives the film normal)
#   temperature_k        sample temperature
#   bias_bz_t            uniform out-of-plane bias field
#   vortices             explicit list of {x_m, y_m, sign}; must lie inside the disc
#   vortex_model         "monopole" (fast calibrated path) or "pearl" (exact Hankel kernel)
#   monopole_depth_m     effective monopole depth; null selects the Pearl length
# sensor
#   orientation          NV axis: polar_angle_rad from out-of-plane (default 55 deg), azimuth_rad
#   pulse                t_pi_s, t_laser_s, t_set_s, t_int_s (<= t_laser_s), peak powers
#   spectrum             f_ref_hz reference resonance; hyperfine_splitting_hz (15N);
#                        contrast per line; linewidth_fwhm_hz; count_rate_hz during the
#                        integration window; shift_sign of frequency vs field (+1/-1)
#   frequency_plan       n_points and half_span_hz of the scan frequency list
#                        (half_span_hz null = hyperfine_splitting + 4*linewidth)
#   reference_offset_m   in-plane distance from disc center for reference spectra
# grid                   origin_xy_m, pixel_size_m, n_x, n_y, standoff_m, dwell_time_s
# seed                   master RNG seed; per-pixel streams are derived deterministically
# analysis               vortex_threshold_t for blob counting; sensitivity_region
#                        {x0, y0, n_x, n_y} in pixels (null = full map); noise_floor_t
#                        for critical-temperature fits
"""


def reference_config() -> ExperimentConfig:
    """Default-populated config (the two-vortex imaging scene)."""
    return ExperimentConfig(
        scene=VortexConfiguration(
            temperature_k=0.35,
            bias_bz_t=0.4e-3,
            vortices=[Vortex(x_m=0.0, y_m=-1.55e-6), Vortex(x_m=0.0, y_m=1.55e-6)],
        ),
        grid=ScanGrid(
            origin_xy_m=(-2.0e-6, -2.0e-6),
            pixel_size_m=133e-9,
            n_x=31,
            n_y=31,
            dwell_time_s=30.0,
        ),
        seed=0,
    )


def reference_config_text() -> str:
    return _REFERENCE_DOC + serialize_config(reference_config())
