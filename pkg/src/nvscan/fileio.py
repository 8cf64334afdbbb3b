"""Text serialization of spectra, scan datasets, field maps and reports.

All outputs are plain text (CSV, two-column spectra, ASCII PGM) and start
with a '#' metadata header carrying the config hash and seed so any file
can be traced back to the run that produced it.  Floats are written with
repr (shortest round-trip form), which keeps outputs byte-identical across
runs and thread counts.
"""

from __future__ import annotations

import json
import math
import os
from pathlib import Path

import numpy as np

from .config import ScanGrid, PulseSequence
from .errors import ConfigError
from .scan import FieldMap, ScanDataset
from .sensor import OdmrSpectrum
from .thermal import LineProfile, LineScanDataset, LineScanSeries, TransportTrace


def fmt(x) -> str:
    return repr(float(x))


def _header_lines(meta: dict) -> list[str]:
    return [f"# {key} = {meta[key]}" for key in meta]


def _read_header(lines) -> dict:
    meta = {}
    for line in lines:
        if not line.startswith("#"):
            break
        body = line[1:].strip()
        if "=" in body:
            key, value = body.split("=", 1)
            meta[key.strip()] = value.strip()
    return meta


# -- spectra -----------------------------------------------------------------

def write_spectrum(path, spectrum: OdmrSpectrum, meta: dict | None = None) -> None:
    """Two-column text format: frequency_hz counts, after a '#' header."""
    meta = dict(meta or {})
    meta.setdefault("format", "nvscan-spectrum-1")
    meta["repetitions_per_point"] = spectrum.repetitions_per_point
    seq = spectrum.sequence
    meta["t_pi_s"] = fmt(seq.t_pi_s)
    meta["t_laser_s"] = fmt(seq.t_laser_s)
    meta["t_set_s"] = fmt(seq.t_set_s)
    meta["t_int_s"] = fmt(seq.t_int_s)
    lines = _header_lines(meta)
    lines.append("frequency_hz counts")
    for f, c in zip(spectrum.frequencies_hz, spectrum.counts):
        lines.append(f"{fmt(f)} {int(c)}")
    Path(path).write_text("\n".join(lines) + "\n")


def read_spectrum(path) -> tuple[OdmrSpectrum, dict]:
    text = Path(path).read_text()
    lines = text.splitlines()
    meta = _read_header(lines)
    freqs, counts = [], []
    try:
        for line in lines:
            if line.startswith("#") or line.startswith("frequency_hz") or not line.strip():
                continue
            f, c = line.split()
            freqs.append(float(f))
            counts.append(int(c))
        repetitions = int(meta.get("repetitions_per_point", 1))
        sequence = PulseSequence(
            t_pi_s=float(meta.get("t_pi_s", 500e-9)),
            t_laser_s=float(meta.get("t_laser_s", 1.5e-6)),
            t_set_s=float(meta.get("t_set_s", 1.5e-6)),
            t_int_s=float(meta.get("t_int_s", 300e-9)))
        return OdmrSpectrum(np.array(freqs), np.array(counts), repetitions, sequence), meta
    except (ValueError, KeyError) as exc:
        raise ConfigError(f"malformed spectrum file {path}: {exc}") from exc


# -- scan datasets -----------------------------------------------------------

def write_dataset_dir(path, dataset: ScanDataset) -> None:
    """Dataset directory: manifest.json, spectra.csv (long format), reference.txt."""
    root = Path(path)
    root.mkdir(parents=True, exist_ok=True)
    manifest = {
        "format": "nvscan-dataset-1",
        "config_hash": dataset.config_hash,
        "seed": dataset.seed,
        "grid": dataset.grid.model_dump(mode="json"),
        "frequencies_hz": [float(f) for f in dataset.frequencies_hz],
        "repetitions_per_point": dataset.repetitions_per_point,
        "flagged": dataset.flagged.astype(int).tolist(),
        "reference_position_xy_m": list(dataset.reference_position_xy_m),
        "hyperfine_splitting_hz": dataset.hyperfine_splitting_hz,
        "shift_sign": dataset.shift_sign,
        "sequence": dataset.reference.sequence.model_dump(mode="json"),
    }
    (root / "manifest.json").write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n")

    lines = _header_lines({"config_hash": dataset.config_hash, "seed": dataset.seed})
    lines.append("pixel_ix,pixel_iy,frequency_hz,counts")
    n_y, n_x, _ = dataset.counts.shape
    for iy in range(n_y):
        for ix in range(n_x):
            for f, c in zip(dataset.frequencies_hz, dataset.counts[iy, ix]):
                lines.append(f"{ix},{iy},{fmt(f)},{int(c)}")
    (root / "spectra.csv").write_text("\n".join(lines) + "\n")
    write_spectrum(root / "reference.txt", dataset.reference,
                   {"config_hash": dataset.config_hash, "seed": dataset.seed})


def read_dataset_dir(path) -> ScanDataset:
    root = Path(path)
    manifest_path = root / "manifest.json"
    if not manifest_path.exists():
        raise FileNotFoundError(f"no dataset manifest at {manifest_path}")
    try:
        manifest = json.loads(manifest_path.read_text())
        grid = ScanGrid.model_validate(manifest["grid"])
        freqs = np.array(manifest["frequencies_hz"])
        counts = np.zeros((grid.n_y, grid.n_x, len(freqs)), dtype=np.int64)
        with open(root / "spectra.csv") as fh:
            per_pixel = {}
            for line in fh:
                if line.startswith("#") or line.startswith("pixel_ix") or not line.strip():
                    continue
                ix, iy, _, c = line.strip().split(",")
                per_pixel.setdefault((int(iy), int(ix)), []).append(int(c))
        for (iy, ix), values in per_pixel.items():
            counts[iy, ix] = values
        reference, _ = read_spectrum(root / "reference.txt")
        return ScanDataset(
            grid=grid, frequencies_hz=freqs, counts=counts,
            flagged=np.array(manifest["flagged"], dtype=bool),
            repetitions_per_point=int(manifest["repetitions_per_point"]),
            reference=reference,
            reference_position_xy_m=tuple(manifest["reference_position_xy_m"]),
            hyperfine_splitting_hz=float(manifest["hyperfine_splitting_hz"]),
            shift_sign=int(manifest["shift_sign"]),
            config_hash=manifest.get("config_hash", ""),
            seed=int(manifest.get("seed", 0)))
    except FileNotFoundError:
        raise
    except (KeyError, ValueError, json.JSONDecodeError) as exc:
        raise ConfigError(f"malformed dataset at {path}: {exc}") from exc


# -- field maps --------------------------------------------------------------

def write_fieldmap_csv(path, fieldmap: FieldMap) -> None:
    """CSV columns x_m, y_m, delta_b_t, center_hz, converged + JSON sidecar."""
    lines = _header_lines({"config_hash": fieldmap.config_hash, "seed": fieldmap.seed})
    lines.append("x_m,y_m,delta_b_t,center_hz,converged")
    xs, ys = fieldmap.grid.positions()
    for iy in range(fieldmap.grid.n_y):
        for ix in range(fieldmap.grid.n_x):
            masked = bool(fieldmap.mask[iy, ix])
            db = "nan" if masked else fmt(fieldmap.delta_b_t[iy, ix])
            ce = "nan" if masked else fmt(fieldmap.center_hz[iy, ix])
            lines.append(f"{fmt(xs[ix])},{fmt(ys[iy])},{db},{ce},{int(not masked)}")
    path = Path(path)
    path.write_text("\n".join(lines) + "\n")
    sidecar = {
        "format": "nvscan-fieldmap-1",
        "config_hash": fieldmap.config_hash,
        "seed": fieldmap.seed,
        "grid": fieldmap.grid.model_dump(mode="json"),
        "reference_center_hz": fieldmap.reference_center_hz,
        "dwell_time_s": fieldmap.dwell_time_s,
    }
    path.with_suffix(path.suffix + ".meta.json").write_text(
        json.dumps(sidecar, indent=2, sort_keys=True) + "\n")


def read_fieldmap_csv(path) -> FieldMap:
    path = Path(path)
    sidecar_path = path.with_suffix(path.suffix + ".meta.json")
    if not path.exists():
        raise FileNotFoundError(f"no field map at {path}")
    if not sidecar_path.exists():
        raise FileNotFoundError(f"missing field-map sidecar {sidecar_path}")
    try:
        sidecar = json.loads(sidecar_path.read_text())
        grid = ScanGrid.model_validate(sidecar["grid"])
        delta_b = np.full((grid.n_y, grid.n_x), np.nan)
        center = np.full((grid.n_y, grid.n_x), np.nan)
        mask = np.ones((grid.n_y, grid.n_x), dtype=bool)
        rows = [line for line in path.read_text().splitlines()
                if line and not line.startswith("#") and not line.startswith("x_m,")]
        if len(rows) != grid.n_x * grid.n_y:
            raise ValueError(f"expected {grid.n_x * grid.n_y} rows, found {len(rows)}")
        for i, line in enumerate(rows):
            _, _, db, ce, ok = line.split(",")
            iy, ix = divmod(i, grid.n_x)
            if int(ok):
                mask[iy, ix] = False
                delta_b[iy, ix] = float(db)
                center[iy, ix] = float(ce)
        nan = np.full((grid.n_y, grid.n_x), np.nan)
        return FieldMap(grid=grid, delta_b_t=delta_b, center_hz=center, mask=mask,
                        contrast=nan.copy(), linewidth_fwhm_hz=nan.copy(),
                        chi_square=nan.copy(),
                        reference_center_hz=float(sidecar["reference_center_hz"]),
                        dwell_time_s=float(sidecar["dwell_time_s"]),
                        config_hash=sidecar.get("config_hash", ""),
                        seed=int(sidecar.get("seed", 0)))
    except (KeyError, ValueError, json.JSONDecodeError) as exc:
        raise ConfigError(f"malformed field map at {path}: {exc}") from exc


def write_pgm(path, fieldmap: FieldMap) -> None:
    """8-bit ASCII PGM of delta B, linearly scaled between map min and max."""
    values = np.where(fieldmap.mask, np.nan, fieldmap.delta_b_t)
    finite = values[np.isfinite(values)]
    lo = float(finite.min()) if finite.size else 0.0
    hi = float(finite.max()) if finite.size else 1.0
    span = hi - lo if hi > lo else 1.0
    gray = np.zeros_like(values)
    with np.errstate(invalid="ignore"):
        gray = np.clip((values - lo) / span * 255.0, 0, 255)
    gray = np.where(np.isfinite(gray), gray, 0.0).astype(int)
    lines = ["P2",
             f"# nvscan fieldmap min={fmt(lo)} T max={fmt(hi)} T",
             f"# config_hash = {fieldmap.config_hash}",
             f"{fieldmap.grid.n_x} {fieldmap.grid.n_y}", "255"]
    for iy in range(fieldmap.grid.n_y):
        lines.append(" ".join(str(v) for v in gray[iy]))
    Path(path).write_text("\n".join(lines) + "\n")


# -- fit tables --------------------------------------------------------------

def fit_csv_text(rows, meta: dict | None = None) -> str:
    """One CSV row per fit: pixel_id and the FitResult summary columns."""
    lines = _header_lines(meta or {})
    lines.append("pixel_id,center_hz,center_err_hz,contrast,linewidth_hz,baseline,chi2,converged")
    for pixel_id, result in rows:
        if result is None:
            lines.append(f"{pixel_id},nan,nan,nan,nan,nan,nan,0")
        else:
            lines.append(
                f"{pixel_id},{fmt(result.center_hz)},{fmt(result.sigma_center_hz)},"
                f"{fmt(result.contrast)},{fmt(result.linewidth_fwhm_hz)},"
                f"{fmt(result.baseline)},{fmt(result.chi_square)},{int(result.converged)}")
    return "\n".join(lines) + "\n"


# -- line-scan series --------------------------------------------------------

def write_lineseries(dir_path, series: LineScanSeries, meta: dict | None = None) -> Path:
    """Profiles as CSV (x_m, delta_b_t) plus a manifest of (label, T, file)."""
    root = Path(dir_path)
    root.mkdir(parents=True, exist_ok=True)
    entries = []
    for ds in series.datasets:
        for i, profile in enumerate(ds.profiles):
            name = f"profile_{ds.label}_{i:02d}.csv"
            lines = _header_lines(dict(meta or {}, label=ds.label,
                                       temperature_k=fmt(profile.temperature_k)))
            lines.append("x_m,delta_b_t")
            for x, b in zip(profile.positions_m, profile.delta_b_t):
                lines.append(f"{fmt(x)},{fmt(b)}")
            (root / name).write_text("\n".join(lines) + "\n")
            entries.append({"label": ds.label, "temperature_k": profile.temperature_k,
                            "file": name})
    manifest_path = root / "series_manifest.json"
    manifest_path.write_text(json.dumps(
        {"format": "nvscan-lineseries-1", "meta": meta or {}, "profiles": entries},
        indent=2, sort_keys=True) + "\n")
    return manifest_path


def read_lineseries(manifest_path) -> LineScanSeries:
    manifest_path = Path(manifest_path)
    if not manifest_path.exists():
        raise FileNotFoundError(f"no line-scan manifest at {manifest_path}")
    try:
        manifest = json.loads(manifest_path.read_text())
        datasets: dict[str, LineScanDataset] = {}
        for entry in manifest["profiles"]:
            rows = [line for line in
                    (manifest_path.parent / entry["file"]).read_text().splitlines()
                    if line and not line.startswith("#") and not line.startswith("x_m,")]
            xs, bs = zip(*(map(float, line.split(",")) for line in rows))
            profile = LineProfile(temperature_k=float(entry["temperature_k"]),
                                  positions_m=np.array(xs), delta_b_t=np.array(bs))
            datasets.setdefault(entry["label"],
                                LineScanDataset(entry["label"], [])).profiles.append(profile)
        return LineScanSeries(list(datasets.values()))
    except FileNotFoundError:
        raise
    except (KeyError, ValueError, json.JSONDecodeError) as exc:
        raise ConfigError(f"malformed line-scan series at {manifest_path}: {exc}") from exc


# -- transport traces --------------------------------------------------------

def write_transport_csv(path, trace: TransportTrace, meta: dict | None = None) -> None:
    lines = _header_lines(dict(meta or {},
                               contact_resistance_ohm=fmt(trace.contact_resistance_ohm)))
    lines.append("current_a,du_di_ohm")
    for i, r in zip(trace.current_a, trace.du_di_ohm):
        lines.append(f"{fmt(i)},{fmt(r)}")
    Path(path).write_text("\n".join(lines) + "\n")


def read_transport_csv(path, contact_resistance_ohm: float | None = None) -> TransportTrace:
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(f"no transport trace at {path}")
    lines = path.read_text().splitlines()
    meta = _read_header(lines)
    try:
        contact = (contact_resistance_ohm if contact_resistance_ohm is not None
                   else float(meta.get("contact_resistance_ohm", 0.0)))
        rows = [line for line in lines
                if line and not line.startswith("#") and not line.startswith("current_a,")]
        currents, du_di = zip(*(map(float, line.split(",")) for line in rows))
        return TransportTrace(np.array(currents), np.array(du_di), contact)
    except (ValueError, KeyError) as exc:
        raise ConfigError(f"malformed transport trace at {path}: {exc}") from exc
