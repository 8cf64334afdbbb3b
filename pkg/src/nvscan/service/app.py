"""FastAPI service exposing the simulation and analysis pipeline.

Error contract: validation problems (bad config values, model-domain
violations) come back as 422 with {"error": {"type": "validation", ...}}
carrying the offending field path where known; numerical failures as 500
with type "numerical".  The CLI maps these onto its exit codes.
"""

from __future__ import annotations

import numpy as np
from fastapi import FastAPI, Request
from fastapi.exceptions import RequestValidationError
from fastapi.responses import JSONResponse, PlainTextResponse

from .. import __version__
from ..config import config_hash, reference_config_text
from ..demos import run_demo, run_linescan
from ..errors import ConfigError, ModelDomainError, NoResonanceError, NumericalError
from ..fitting import fit_double_gaussian
from ..scan import estimate_sensitivity, reconstruct_field_map, region_mask, run_scan
from ..thermal import LineScanSeries, detect_critical_current, fit_critical_temperature
from . import schemas as s


def _error_response(status: int, err_type: str, message: str,
                    field_path: str | None = None, line: int | None = None):
    body = {"error": {"type": err_type, "message": message}}
    if field_path:
        body["error"]["field_path"] = field_path
    if line is not None:
        body["error"]["line"] = line
    return JSONResponse(status_code=status, content=body)


def create_app() -> FastAPI:
    app = FastAPI(title="nvscan", version=__version__,
                  description="Scanning NV magnetometry simulator over thin "
                              "superconducting discs")

    @app.exception_handler(ConfigError)
    async def config_error(request: Request, exc: ConfigError):
        return _error_response(422, "validation", str(exc),
                               getattr(exc, "field_path", None), getattr(exc, "line", None))

    @app.exception_handler(ModelDomainError)
    async def domain_error(request: Request, exc: ModelDomainError):
        return _error_response(422, "validation", str(exc))

    @app.exception_handler(NoResonanceError)
    async def no_resonance(request: Request, exc: NoResonanceError):
        return _error_response(422, "validation", str(exc))

    @app.exception_handler(NumericalError)
    async def numerical_error(request: Request, exc: NumericalError):
        return _error_response(500, "numerical", str(exc))

    @app.exception_handler(RequestValidationError)
    async def request_validation(request: Request, exc: RequestValidationError):
        first = exc.errors()[0]
        path = ".".join(str(p) for p in first["loc"] if p != "body")
        return _error_response(422, "validation", first["msg"], path)

    @app.get("/health")
    def health():
        return {"status": "ok", "version": __version__}

    @app.get("/config-reference", response_class=PlainTextResponse)
    def config_reference():
        return reference_config_text()

    @app.post("/simulate-scan", response_model=s.ScanDatasetPayload)
    def simulate_scan(request: s.SimulateScanRequest):
        config = request.config
        if request.seed is not None:
            config = config.model_copy(update={"seed": request.seed})
        dataset = run_scan(config, threads=request.threads,
                           config_hash_value=config_hash(config))
        return s.dataset_to_payload(dataset)

    @app.post("/reconstruct-map", response_model=s.FieldMapPayload)
    def reconstruct(request: s.ReconstructRequest):
        dataset = s.dataset_from_payload(request.dataset)
        fieldmap = reconstruct_field_map(dataset, threads=request.threads,
                                         weighted=request.weighted)
        return s.fieldmap_to_payload(fieldmap)

    @app.post("/fit-spectra", response_model=s.FitSpectraResponse)
    def fit_spectra(request: s.FitSpectraRequest):
        ids = request.spectrum_ids or [str(i) for i in range(len(request.spectra))]
        if len(ids) != len(request.spectra):
            raise ConfigError("spectrum_ids length must match spectra",
                              field_path="spectrum_ids")
        rows = []
        for pixel_id, payload in zip(ids, request.spectra):
            spectrum = s.spectrum_from_payload(payload)
            try:
                r = fit_double_gaussian(spectrum, request.hyperfine_splitting_hz,
                                        splitting_fixed=request.splitting_fixed,
                                        weighted=request.weighted)
            except NoResonanceError as exc:
                rows.append(s.FitRow(pixel_id=pixel_id, converged=False,
                                     error=f"no-resonance: {exc}"))
                continue
            rows.append(s.FitRow(
                pixel_id=pixel_id, center_hz=r.center_hz, center_err_hz=r.sigma_center_hz,
                contrast=r.contrast, linewidth_hz=r.linewidth_fwhm_hz, baseline=r.baseline,
                chi2=r.chi_square, converged=r.converged))
        return s.FitSpectraResponse(results=rows)

    @app.post("/sensitivity", response_model=s.SensitivityResponse)
    def sensitivity(request: s.SensitivityRequest):
        fieldmap = s.fieldmap_from_payload(request.field_map)
        eta = estimate_sensitivity(fieldmap, request.region)
        selected = region_mask(fieldmap, request.region) & ~fieldmap.mask
        sigma = float(np.std(fieldmap.delta_b_t[selected], ddof=1))
        return s.SensitivityResponse(eta_t_per_sqrt_hz=eta, sigma_t=sigma,
                                     n_pixels=int(selected.sum()))

    @app.post("/linescan", response_model=s.LineScanSeriesPayload)
    def linescan(request: s.LinescanRequest):
        config = request.config
        if request.seed is not None:
            config = config.model_copy(update={"seed": request.seed})
        dataset = run_linescan(config, request.temperatures_k, label=request.label,
                               heating_offset_k=request.heating_offset_k,
                               threads=request.threads)
        return s.series_to_payload(LineScanSeries([dataset]))

    @app.post("/tc-fit", response_model=s.TcFitResponse)
    def tc_fit(request: s.TcFitRequest):
        series = s.series_from_payload(request.series)
        result = fit_critical_temperature(series, noise_floor_t=request.noise_floor_t)
        return s.tc_result_to_response(result)

    @app.post("/transport-fit", response_model=s.TransportFitResponse)
    def transport_fit(request: s.TransportFitRequest):
        trace = s.trace_from_payload(request.trace)
        result = detect_critical_current(trace, significance=request.significance)
        return s.transport_result_to_response(result)

    @app.post("/demo-figure/{figure}", response_model=s.DemoResponse)
    def demo_figure(figure: str, request: s.DemoRequest):
        result = run_demo(figure, seed=request.seed, threads=request.threads)
        return s.DemoResponse(figure=result.figure, files=result.files,
                              summary=result.summary)

    return app


app = create_app()
