"""Command-line front end: a thin client of the HTTP service.

Every subcommand builds a JSON request, sends it to the service (an
in-process instance by default, or a remote one via --server), and writes
the returned data to files.  Exit codes: 0 success, 1 usage (bad command
line or missing file), 2 validation (bad config or data), 3 numerical
failure.
"""

from __future__ import annotations

import json
import sys
from pathlib import Path

import click

from .config import parse_config
from .errors import ConfigError
from . import fileio
from .demos import DEMO_FIGURES

EXIT_USAGE = 1
EXIT_VALIDATION = 2
EXIT_NUMERICAL = 3


class ServiceFailure(Exception):
    def __init__(self, exit_code: int, message: str):
        self.exit_code = exit_code
        super().__init__(message)


class ServiceClient:
    """HTTP client; without --server it talks to an in-process app instance."""

    def __init__(self, server: str | None):
        if server:
            import httpx
            self._client = httpx.Client(base_url=server, timeout=600.0)
        else:
            import warnings
            with warnings.catch_warnings():
                warnings.simplefilter("ignore", DeprecationWarning)
                from fastapi.testclient import TestClient
            from .service import app
            self._client = TestClient(app, raise_server_exceptions=False)

    def _check(self, response):
        if response.status_code < 400:
            return response
        try:
            error = response.json().get("error", {})
        except ValueError:
            error = {}
        message = error.get("message", response.text)
        if error.get("field_path"):
            message += f" (field: {error['field_path']})"
        if error.get("line") is not None:
            message += f" (line {error['line']})"
        exit_code = EXIT_NUMERICAL if error.get("type") == "numerical" else EXIT_VALIDATION
        raise ServiceFailure(exit_code, message)

    def post(self, path: str, payload: dict) -> dict:
        return self._check(self._client.post(path, json=payload)).json()

    def get_text(self, path: str) -> str:
        return self._check(self._client.get(path)).text


def common_options(fn):
    fn = click.option("--seed", type=int, default=None,
                      help="Override the RNG seed.")(fn)
    fn = click.option("--out-dir", type=click.Path(file_okay=False), default=".",
                      show_default=True, help="Directory for output files.")(fn)
    fn = click.option("--threads", type=int, default=1, show_default=True,
                      help="Worker threads; outputs do not depend on it.")(fn)
    fn = click.option("--server", default=None,
                      help="Base URL of a running nvscan service "
                           "(default: in-process).")(fn)
    return fn


def _load_config(path: str):
    config_path = Path(path)
    if not config_path.exists():
        raise FileNotFoundError(f"no config file at {config_path}")
    return parse_config(config_path.read_text())


def _out_dir(path: str) -> Path:
    out = Path(path)
    out.mkdir(parents=True, exist_ok=True)
    return out


@click.group()
def cli():
    """Scanning NV magnetometry simulator and analysis toolkit."""


@cli.command("config-reference")
@common_options
def config_reference(seed, out_dir, threads, server):
    """Print the documented reference configuration."""
    client = ServiceClient(server)
    click.echo(client.get_text("/config-reference"), nl=False)


@cli.command("simulate-scan")
@click.option("-c", "--config", "config_path", required=True, type=click.Path(),
              help="Experiment config (JSON).")
@common_options
def simulate_scan(config_path, seed, out_dir, threads, server):
    """Simulate a raster scan and write the dataset directory."""
    config = _load_config(config_path)
    client = ServiceClient(server)
    payload = {"config": config.model_dump(mode="json"), "seed": seed, "threads": threads}
    data = client.post("/simulate-scan", payload)
    from .service.schemas import ScanDatasetPayload, dataset_from_payload
    dataset = dataset_from_payload(ScanDatasetPayload.model_validate(data))
    target = _out_dir(out_dir) / "scan"
    fileio.write_dataset_dir(target, dataset)
    click.echo(f"wrote dataset to {target} "
               f"({dataset.grid.n_x}x{dataset.grid.n_y} pixels, "
               f"{dataset.repetitions_per_point} repetitions/point)")


@cli.command("reconstruct-map")
@click.option("--dataset", "dataset_path", required=True, type=click.Path(),
              help="Dataset directory written by simulate-scan.")
@click.option("--weighted", is_flag=True, help="Poisson-weighted least squares.")
@click.option("--pgm", "write_pgm", is_flag=True, help="Also export an 8-bit PGM image.")
@common_options
def reconstruct_map(dataset_path, weighted, write_pgm, seed, out_dir, threads, server):
    """Fit every pixel of a dataset and write the field-map CSV."""
    dataset = fileio.read_dataset_dir(dataset_path)
    client = ServiceClient(server)
    from .service.schemas import (FieldMapPayload, dataset_to_payload,
                                  fieldmap_from_payload)
    payload = {"dataset": dataset_to_payload(dataset).model_dump(mode="json"),
               "threads": threads, "weighted": weighted}
    data = client.post("/reconstruct-map", payload)
    fieldmap = fieldmap_from_payload(FieldMapPayload.model_validate(data))
    out = _out_dir(out_dir)
    fileio.write_fieldmap_csv(out / "fieldmap.csv", fieldmap)
    if write_pgm:
        fileio.write_pgm(out / "fieldmap.pgm", fieldmap)
    click.echo(f"wrote {out / 'fieldmap.csv'} "
               f"({int((~fieldmap.mask).sum())} converged pixels)")


@cli.command("fit-spectra")
@click.argument("inputs", nargs=-1, required=True, type=click.Path())
@click.option("--splitting", "splitting_hz", type=float, default=3.05e6,
              show_default=True, help="Hyperfine splitting in Hz.")
@click.option("--free-splitting", is_flag=True, help="Fit the splitting too.")
@click.option("--weighted", is_flag=True, help="Poisson-weighted least squares.")
@common_options
def fit_spectra(inputs, splitting_hz, free_splitting, weighted, seed, out_dir,
                threads, server):
    """Fit spectrum files and write one CSV row per fit."""
    from .service.schemas import spectrum_to_payload
    spectra, ids = [], []
    for item in inputs:
        path = Path(item)
        if not path.exists():
            raise FileNotFoundError(f"no spectrum file at {path}")
        spectrum, _ = fileio.read_spectrum(path)
        spectra.append(spectrum_to_payload(spectrum).model_dump(mode="json"))
        ids.append(path.stem)
    client = ServiceClient(server)
    data = client.post("/fit-spectra", {
        "spectra": spectra, "spectrum_ids": ids,
        "hyperfine_splitting_hz": splitting_hz,
        "splitting_fixed": not free_splitting, "weighted": weighted})
    lines = ["pixel_id,center_hz,center_err_hz,contrast,linewidth_hz,baseline,chi2,converged"]
    for row in data["results"]:
        if row.get("error"):
            lines.append(f"{row['pixel_id']},nan,nan,nan,nan,nan,nan,0")
        else:
            lines.append(",".join([
                row["pixel_id"], fileio.fmt(row["center_hz"]), fileio.fmt(row["center_err_hz"]),
                fileio.fmt(row["contrast"]), fileio.fmt(row["linewidth_hz"]),
                fileio.fmt(row["baseline"]), fileio.fmt(row["chi2"]),
                str(int(row["converged"]))]))
    out = _out_dir(out_dir) / "fits.csv"
    out.write_text("\n".join(lines) + "\n")
    click.echo(f"wrote {out} ({len(data['results'])} fits)")


@cli.command("sensitivity")
@click.option("--map", "map_path", required=True, type=click.Path(),
              help="Field-map CSV written by reconstruct-map.")
@click.option("--region", default=None,
              help="Pixel region as x0,y0,nx,ny (default: whole map).")
@common_options
def sensitivity(map_path, region, seed, out_dir, threads, server):
    """Estimate the magnetic sensitivity of a featureless map region."""
    fieldmap = fileio.read_fieldmap_csv(map_path)
    region_payload = None
    if region:
        try:
            x0, y0, nx, ny = (int(v) for v in region.split(","))
        except ValueError:
            raise click.UsageError("--region expects x0,y0,nx,ny")
        region_payload = {"x0": x0, "y0": y0, "n_x": nx, "n_y": ny}
    client = ServiceClient(server)
    from .service.schemas import fieldmap_to_payload
    data = client.post("/sensitivity", {
        "field_map": fieldmap_to_payload(fieldmap).model_dump(mode="json"),
        "region": region_payload})
    click.echo(f"eta = {data['eta_t_per_sqrt_hz']:.4e} T/sqrt(Hz) "
               f"(sigma {data['sigma_t']:.4e} T over {data['n_pixels']} pixels)")


@cli.command("linescan")
@click.option("-c", "--config", "config_path", required=True, type=click.Path())
@click.option("--temperatures", required=True,
              help="Comma-separated stage temperatures in K.")
@click.option("--label", default="i", show_default=True)
@click.option("--heating-offset", type=float, default=0.0, show_default=True,
              help="Sample heating offset of the power setting, K.")
@common_options
def linescan(config_path, temperatures, label, heating_offset, seed, out_dir,
             threads, server):
    """Run edge line scans at several stage temperatures."""
    config = _load_config(config_path)
    try:
        temps = [float(t) for t in temperatures.split(",") if t.strip()]
    except ValueError:
        raise click.UsageError("--temperatures expects comma-separated numbers")
    client = ServiceClient(server)
    data = client.post("/linescan", {
        "config": config.model_dump(mode="json"), "temperatures_k": temps,
        "label": label, "heating_offset_k": heating_offset,
        "seed": seed, "threads": threads})
    from .service.schemas import LineScanSeriesPayload, series_from_payload
    series = series_from_payload(LineScanSeriesPayload.model_validate(data))
    manifest = fileio.write_lineseries(_out_dir(out_dir) / "linescans", series,
                                       {"label": label})
    click.echo(f"wrote {manifest}")


@cli.command("tc-fit")
@click.option("--manifest", "manifest_path", required=True, type=click.Path(),
              help="Line-scan series manifest (series_manifest.json).")
@click.option("--noise-floor", type=float, default=0.0, show_default=True,
              help="Pixel noise of signal-less scans, T.")
@common_options
def tc_fit(manifest_path, noise_floor, seed, out_dir, threads, server):
    """Shared-slope critical-temperature extrapolation from line scans."""
    series = fileio.read_lineseries(manifest_path)
    client = ServiceClient(server)
    from .service.schemas import series_to_payload
    data = client.post("/tc-fit", {
        "series": series_to_payload(series).model_dump(mode="json"),
        "noise_floor_t": noise_floor})
    lines = ["label,critical_stage_temperature_k,sigma_k"]
    for crossing in data["crossings"]:
        lines.append(f"{crossing['label']},"
                     f"{fileio.fmt(crossing['critical_stage_temperature_k'])},"
                     f"{fileio.fmt(crossing['sigma_k'])}")
    out = _out_dir(out_dir) / "tc_report.csv"
    out.write_text("\n".join(lines) + "\n")
    click.echo(f"shared slope {data['shared_slope_t_per_k']:.4e} T/K; wrote {out}")
    for crossing in data["crossings"]:
        click.echo(f"  {crossing['label']}: "
                   f"{crossing['critical_stage_temperature_k']:.4f} K "
                   f"+- {crossing['sigma_k']:.4f} K")


@cli.command("transport-fit")
@click.argument("trace_path", type=click.Path())
@click.option("--contact-resistance", type=float, default=None,
              help="Contact resistance in ohm (default: value from the file header).")
@click.option("--significance", type=float, default=5.0, show_default=True,
              help="Jump threshold in units of the median successive difference.")
@common_options
def transport_fit(trace_path, contact_resistance, significance, seed, out_dir,
                  threads, server):
    """Detect the critical current in a dU/dI trace."""
    trace = fileio.read_transport_csv(trace_path, contact_resistance)
    client = ServiceClient(server)
    data = client.post("/transport-fit", {
        "trace": {"current_a": [float(v) for v in trace.current_a],
                  "du_di_ohm": [float(v) for v in trace.du_di_ohm],
                  "contact_resistance_ohm": trace.contact_resistance_ohm},
        "significance": significance})
    out = _out_dir(out_dir) / "ic_report.csv"
    ic = "none" if data["i_c_a"] is None else fileio.fmt(data["i_c_a"])
    out.write_text("i_c_a,jump_ohm,threshold_ohm\n"
                   f"{ic},{fileio.fmt(data['jump_ohm'])},"
                   f"{fileio.fmt(data['threshold_ohm'])}\n")
    if data["i_c_a"] is None:
        click.echo("no transition detected")
    else:
        click.echo(f"I_c = {data['i_c_a']:.4e} A (jump {data['jump_ohm']:.2f} ohm); "
                   f"wrote {out}")


@cli.command("demo-figure")
@click.argument("figure", type=click.Choice(DEMO_FIGURES))
@common_options
def demo_figure(figure, seed, out_dir, threads, server):
    """One-command desk-scale reproduction of a published figure."""
    client = ServiceClient(server)
    data = client.post(f"/demo-figure/{figure}", {"seed": seed, "threads": threads})
    out = _out_dir(out_dir) / f"figure_{figure}"
    out.mkdir(parents=True, exist_ok=True)
    for name, content in data["files"].items():
        (out / name).write_text(content)
    click.echo(f"wrote {len(data['files'])} files to {out}")
    summary = data["summary"]
    for key in ("vortex_count", "max_abs_delta_b_t", "sensitivity_t_per_sqrt_hz",
                "critical_stage_temperatures_k"):
        if key in summary:
            click.echo(f"  {key}: {summary[key]}")


@cli.command("serve")
@click.option("--host", default="127.0.0.1", show_default=True)
@click.option("--port", type=int, default=8000, show_default=True)
@common_options
def serve(host, port, seed, out_dir, threads, server):
    """Run the HTTP service."""
    import uvicorn
    from .service import app
    uvicorn.run(app, host=host, port=port)


def main(argv=None) -> int:
    try:
        cli.main(args=argv, standalone_mode=False)
        return 0
    except click.UsageError as exc:
        exc.show()
        return EXIT_USAGE
    except click.ClickException as exc:
        exc.show()
        return EXIT_USAGE
    except click.exceptions.Abort:
        return EXIT_USAGE
    except FileNotFoundError as exc:
        click.echo(f"error: {exc}", err=True)
        return EXIT_USAGE
    except ConfigError as exc:
        click.echo(f"validation error: {exc}", err=True)
        return EXIT_VALIDATION
    except ServiceFailure as exc:
        click.echo(f"error: {exc}", err=True)
        return exc.exit_code


if __name__ == "__main__":
    sys.exit(main())
